//! `key = value` training configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are rejected.
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::boost::TrainConfig;
use crate::error::{Error, Result};
use crate::objective::LossKind;
use crate::tree::FittingMode;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub data: PathBuf,
    pub valid_data: Option<PathBuf>,
    pub label_column: usize,
    pub has_header: bool,
    pub model_out: PathBuf,
    pub metric_log_out: Option<PathBuf>,
    pub train: TrainConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("line {line}: invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("line {line}: invalid value {value:?} for {key}"))),
    }
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut train = TrainConfig::default();
        let mut data = None;
        let mut valid_data = None;
        let mut label_column = 0;
        let mut has_header = false;
        let mut model_out = None;
        let mut metric_log_out = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::InvalidConfig(format!("line {line}: expected key = value")))?;
            match key {
                "data" => data = Some(resolve(value)),
                "valid_data" => valid_data = Some(resolve(value)),
                "label_column" => label_column = parse_value(key, value, line)?,
                "has_header" => has_header = parse_bool(key, value, line)?,
                "objective" => {
                    train.loss = match value {
                        "regression" => LossKind::SquaredError,
                        "binary" => LossKind::Logistic,
                        _ => {
                            return Err(Error::InvalidConfig(format!(
                                "line {line}: objective must be regression or binary, got {value:?}"
                            )))
                        }
                    }
                }
                "max_leaf" => train.max_leaf = parse_value(key, value, line)?,
                "max_bin" => train.max_bin = parse_value(key, value, line)?,
                "min_sum_hessian_in_leaf" => train.min_sum_hessian = parse_value(key, value, line)?,
                "learning_rate" => train.learning_rate = parse_value(key, value, line)?,
                "l2_reg" => train.l2_reg = parse_value(key, value, line)?,
                "leaf_type" => {
                    train.leaf_type =
                        FittingMode::from_str(value).map_err(|e| Error::InvalidConfig(format!("line {line}: {e}")))?
                }
                "max_vars" => train.max_vars = parse_value(key, value, line)?,
                "num_trees" => train.num_trees = parse_value(key, value, line)?,
                "seed" => train.seed = parse_value(key, value, line)?,
                "workers" => train.workers = parse_value(key, value, line)?,
                "valid_fraction" => train.valid_fraction = parse_value(key, value, line)?,
                "model_out" => model_out = Some(resolve(value)),
                "metric_log_out" => metric_log_out = Some(resolve(value)),
                "grow_by" => {
                    if value != "leaf" {
                        return Err(Error::InvalidConfig(format!(
                            "line {line}: only grow_by = leaf is supported, got {value:?}"
                        )));
                    }
                }
                _ => return Err(Error::UnknownKey { key: key.to_string(), line }),
            }
        }
        train.validate()?;
        Ok(ConfigFile {
            data: data.ok_or_else(|| Error::InvalidConfig("missing required key data".into()))?,
            valid_data,
            label_column,
            has_header,
            model_out: model_out.ok_or_else(|| Error::InvalidConfig("missing required key model_out".into()))?,
            metric_log_out,
            train,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ConfigFile::parse("data = train.csv\nmodel_out = m.json\n", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.data, PathBuf::from("/tmp/x/train.csv"));
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.train.max_bin, 63);
        assert_eq!(cfg.train.max_vars, 5);
        assert_eq!(cfg.train.leaf_type, FittingMode::HalfAdditive);
        assert_eq!(cfg.train.l2_reg, 0.01);
        assert_eq!(cfg.train.min_sum_hessian, 100.0);
        assert_eq!(cfg.train.learning_rate, 0.1);
        assert_eq!(cfg.train.num_trees, 500);

        let text = "# comment\ndata=/d.csv\nmodel_out=/m\nobjective = binary\nleaf_type = fully_corrective\n\
                    max_leaf = 16\ngrow_by = leaf\nhas_header = true\nworkers = 4\n";
        let cfg = ConfigFile::parse(text, Path::new("")).unwrap();
        assert_eq!(cfg.train.loss, LossKind::Logistic);
        assert_eq!(cfg.train.leaf_type, FittingMode::FullyCorrective);
        assert_eq!(cfg.train.max_leaf, 16);
        assert_eq!(cfg.train.workers, 4);
        assert!(cfg.has_header);
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let err = ConfigFile::parse("data = a\nmodel_out = b\nmax_depth = 6\n", Path::new("")).unwrap_err();
        assert!(matches!(&err, Error::UnknownKey { key, line: 3 } if key == "max_depth"));
        assert!(err.to_string().contains("max_depth"));
        assert!(ConfigFile::parse("data = a\nmodel_out = b\nmax_leaf = many\n", Path::new("")).is_err());
        assert!(ConfigFile::parse("data = a\nmodel_out = b\ngrow_by = level\n", Path::new("")).is_err());
        assert!(ConfigFile::parse("data = a\nmodel_out = b\nmax_bin = 300\n", Path::new("")).is_err());
        assert!(ConfigFile::parse("model_out = b\n", Path::new("")).is_err());
        assert!(ConfigFile::parse("data a\n", Path::new("")).is_err());
    }
}
