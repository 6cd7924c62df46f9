use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plboost::boost::{self, OutputKind};
use plboost::config::ConfigFile;
use plboost::data::{load_csv, RawDataset};
use plboost::{Error, Model, Result};

#[derive(Parser)]
#[command(name = "plboost", about = "Gradient boosting with piecewise linear trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train { config: PathBuf },
    /// Write one prediction per line.
    Predict {
        model: PathBuf,
        data: PathBuf,
        out: PathBuf,
        /// Sigmoid probabilities instead of raw scores (binary models only).
        #[arg(long)]
        prob: bool,
        #[arg(long, default_value_t = 0)]
        label_column: usize,
        #[arg(long)]
        has_header: bool,
    },
    /// Print RMSE (regression) or AUC (binary) on labeled data.
    Eval {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        label_column: usize,
        #[arg(long)]
        has_header: bool,
    },
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn cmd_train(config: &Path) -> Result<()> {
    let cfg = ConfigFile::load(config)?;
    let train = load_csv(&cfg.data, cfg.has_header, cfg.label_column)?;
    let valid = cfg.valid_data.as_ref().map(|p| load_csv(p, cfg.has_header, cfg.label_column)).transpose()?;
    let model = boost::train(&cfg.train, &train, valid.as_ref())?;
    boost::save_model(&model, &cfg.model_out)?;

    if let Some(log_path) = &cfg.metric_log_out {
        let mut log = String::from("iter,train,valid,seconds\n");
        for m in &model.history {
            let valid = m.valid.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(log, "{},{},{},{}", m.iteration, m.train, valid, m.seconds);
        }
        write_file(log_path, &log)?;
    }
    if let Some(last) = model.history.last() {
        match last.valid {
            Some(v) => eprintln!("trained {} trees: train {} valid {}", model.trees.len(), last.train, v),
            None => eprintln!("trained {} trees: train {}", model.trees.len(), last.train),
        }
    }
    Ok(())
}

fn load_for(model: &Model, data: &Path, label_column: usize, has_header: bool) -> Result<RawDataset> {
    let ds = load_csv(data, has_header, label_column)?;
    if ds.n_features() != model.n_features() {
        return Err(Error::FeatureMismatch { expected: model.n_features(), found: ds.n_features() });
    }
    Ok(ds)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config } => cmd_train(&config),
        Command::Predict { model, data, out, prob, label_column, has_header } => {
            let model = boost::load_model(&model)?;
            let ds = load_for(&model, &data, label_column, has_header)?;
            let kind = if prob { OutputKind::Probability } else { OutputKind::Raw };
            let preds = boost::predict(&model, &ds, kind)?;
            let mut text = String::with_capacity(preds.len() * 20);
            for p in preds {
                let _ = writeln!(text, "{p}");
            }
            write_file(&out, &text)
        }
        Command::Eval { model, data, label_column, has_header } => {
            let model = boost::load_model(&model)?;
            let ds = load_for(&model, &data, label_column, has_header)?;
            let preds = boost::predict(&model, &ds, OutputKind::Raw)?;
            let value = boost::evaluate(model.loss, &preds, &ds.labels)?;
            let name = match model.loss {
                plboost::LossKind::SquaredError => "rmse",
                plboost::LossKind::Logistic => "auc",
            };
            println!("{name}: {value}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
