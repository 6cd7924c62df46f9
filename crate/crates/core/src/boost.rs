//! The boosting driver and model files.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{self, BinMapper, FeatureScale, RawDataset};
use crate::error::{Error, Result};
use crate::objective::{compute_gradients, metric_auc, metric_rmse, sigmoid, LossKind};
use crate::tree::{grow_tree, FittingMode, PLTree, TreeParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub max_leaf: usize,
    pub max_bin: usize,
    pub min_sum_hessian: f64,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub leaf_type: FittingMode,
    pub max_vars: usize,
    pub num_trees: usize,
    pub valid_fraction: f64,
    pub seed: u64,
    /// Thread count; results do not depend on it, so it is not written to model files.
    #[serde(skip, default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::SquaredError,
            max_leaf: 256,
            max_bin: 63,
            min_sum_hessian: 100.0,
            learning_rate: 0.1,
            l2_reg: 0.01,
            leaf_type: FittingMode::HalfAdditive,
            max_vars: 5,
            num_trees: 500,
            valid_fraction: 0.0,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(2..=255).contains(&self.max_bin) {
            return bad(format!("max_bin must be in [2, 255], got {}", self.max_bin));
        }
        if self.num_trees == 0 {
            return bad("num_trees must be >= 1".into());
        }
        if self.max_leaf == 0 {
            return bad("max_leaf must be >= 1".into());
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad(format!("l2_reg must be >= 0, got {}", self.l2_reg));
        }
        if !(self.min_sum_hessian >= 0.0 && self.min_sum_hessian.is_finite()) {
            return bad(format!("min_sum_hessian_in_leaf must be >= 0, got {}", self.min_sum_hessian));
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return bad(format!("valid_fraction must be in [0, 1), got {}", self.valid_fraction));
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_leaf: self.max_leaf,
            min_sum_hessian: self.min_sum_hessian,
            lambda: self.l2_reg,
            mode: self.leaf_type,
            max_vars: self.max_vars,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub train: f64,
    pub valid: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub scale: FeatureScale,
    pub config: TrainConfig,
    pub trees: Vec<PLTree>,
    #[serde(skip)]
    pub history: Vec<IterationMetrics>,
    /// Bins of the training run; only present on freshly trained models.
    #[serde(skip)]
    pub mapper: Option<BinMapper>,
    /// Cached training predictions (raw scores, bin-averaged leaf evaluation).
    #[serde(skip)]
    pub train_predictions: Vec<f64>,
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.scale.n_features()
    }

    /// The model made of the first `n_trees` trees.
    pub fn truncated(&self, n_trees: usize) -> Model {
        Model {
            trees: self.trees[..n_trees.min(self.trees.len())].to_vec(),
            history: self.history.iter().take(n_trees).copied().collect(),
            train_predictions: Vec::new(),
            ..self.clone()
        }
    }

    /// Raw score for an already rescaled row.
    pub fn predict_scaled_row(&self, row: &[f64]) -> f64 {
        let mut score = 0.0;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict_scaled(row);
        }
        score
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Raw,
    Probability,
}

fn metric(loss: LossKind, preds: &[f64], labels: &[f64]) -> f64 {
    let value = match loss {
        LossKind::SquaredError => metric_rmse(preds, labels),
        LossKind::Logistic => metric_auc(preds, labels),
    };
    value.unwrap_or(f64::NAN)
}

/// Evaluation metric of the model's loss: RMSE for regression, AUC for binary.
pub fn evaluate(loss: LossKind, preds: &[f64], labels: &[f64]) -> Result<f64> {
    match loss {
        LossKind::SquaredError => metric_rmse(preds, labels),
        LossKind::Logistic => metric_auc(preds, labels),
    }
}

fn rows_of(data: &RawDataset) -> Vec<Vec<f64>> {
    (0..data.n_rows()).map(|i| data.row(i)).collect()
}

/// Trains `cfg.num_trees` trees. When `valid` is absent and `cfg.valid_fraction > 0`, a
/// seeded holdout of the training data is used for validation.
pub fn train(cfg: &TrainConfig, train: &RawDataset, valid: Option<&RawDataset>) -> Result<Model> {
    cfg.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let held_out;
    let (train, valid) = match valid {
        Some(v) => (train.clone(), Some(v)),
        None if cfg.valid_fraction > 0.0 => {
            let (t, v) = data::holdout_split(train, cfg.valid_fraction, cfg.seed)?;
            held_out = v;
            (t, Some(&held_out))
        }
        None => (train.clone(), None),
    };
    if let Some(v) = valid {
        if v.n_features() != train.n_features() {
            return Err(Error::FeatureMismatch { expected: train.n_features(), found: v.n_features() });
        }
    }
    if cfg.loss == LossKind::Logistic {
        train.check_binary_labels()?;
        if let Some(v) = valid {
            v.check_binary_labels()?;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| train_inner(cfg, &train, valid))
}

fn train_inner(cfg: &TrainConfig, train: &RawDataset, valid: Option<&RawDataset>) -> Result<Model> {
    let start = Instant::now();
    let scale = data::fit_scale(train)?;
    let scaled = data::apply_scale(train, &scale)?;
    let mapper = data::build_bins(&scaled, cfg.max_bin)?;
    let binned = data::bin_dataset(&scaled, &mapper)?;
    let valid_rows = valid.map(|v| data::apply_scale(v, &scale).map(|s| rows_of(&s))).transpose()?;

    let params = cfg.tree_params();
    let mut preds = vec![0.0; train.n_rows()];
    let mut valid_preds = vec![0.0; valid.map_or(0, RawDataset::n_rows)];
    let mut trees = Vec::with_capacity(cfg.num_trees);
    let mut history = Vec::with_capacity(cfg.num_trees);

    for iteration in 1..=cfg.num_trees {
        let grads = compute_gradients(cfg.loss, &preds, &train.labels)?;
        let grown = grow_tree(&binned, &grads, &params)?;
        for (p, out) in preds.iter_mut().zip(&grown.train_output) {
            *p += cfg.learning_rate * out;
        }
        let valid_metric = match (&valid_rows, valid) {
            (Some(rows), Some(v)) => {
                for (p, row) in valid_preds.iter_mut().zip(rows) {
                    *p += cfg.learning_rate * grown.tree.predict_scaled(row);
                }
                Some(metric(cfg.loss, &valid_preds, &v.labels))
            }
            _ => None,
        };
        history.push(IterationMetrics {
            iteration,
            train: metric(cfg.loss, &preds, &train.labels),
            valid: valid_metric,
            seconds: start.elapsed().as_secs_f64(),
        });
        trees.push(grown.tree);
    }

    Ok(Model {
        format_version: FORMAT_VERSION,
        loss: cfg.loss,
        learning_rate: cfg.learning_rate,
        scale,
        config: cfg.clone(),
        trees,
        history,
        mapper: Some(mapper),
        train_predictions: preds,
    })
}

/// Sums the shrunken tree outputs for every row of `data` (raw feature values).
pub fn predict(model: &Model, data: &RawDataset, output: OutputKind) -> Result<Vec<f64>> {
    if output == OutputKind::Probability && model.loss != LossKind::Logistic {
        return Err(Error::ProbabilityForRegression);
    }
    if data.n_features() != model.n_features() {
        return Err(Error::FeatureMismatch { expected: model.n_features(), found: data.n_features() });
    }
    let scaled = data::apply_scale(data, &model.scale)?;
    let mut row = vec![0.0; data.n_features()];
    let out = (0..data.n_rows())
        .map(|i| {
            for (v, col) in row.iter_mut().zip(&scaled.features) {
                *v = col[i];
            }
            let raw = model.predict_scaled_row(&row);
            match output {
                OutputKind::Raw => raw,
                OutputKind::Probability => sigmoid(raw),
            }
        })
        .collect();
    Ok(out)
}

/// Raw scores with every feature value replaced by its training bin average, which is
/// how leaves are evaluated during training.
pub fn predict_bin_averaged(model: &Model, data: &RawDataset, mapper: &BinMapper) -> Result<Vec<f64>> {
    let scaled = data::apply_scale(data, &model.scale)?;
    let binned = data::bin_dataset(&scaled, mapper)?;
    let mut row = vec![0.0; data.n_features()];
    Ok((0..data.n_rows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = binned.value(j, i);
            }
            model.predict_scaled_row(&row)
        })
        .collect())
}

pub fn model_to_string(model: &Model) -> Result<String> {
    let mut s = serde_json::to_string_pretty(model).map_err(|e| Error::Malformed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::Version { found: version as u32, expected: FORMAT_VERSION });
    }
    let model: Model = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    if model.scale.min.len() != model.scale.max.len() {
        return Err(Error::Malformed("scale min/max lengths differ".into()));
    }
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
