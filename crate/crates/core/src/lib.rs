//! Gradient boosting with piecewise linear regression trees.
//!
//! Each boosting iteration grows one tree whose leaves carry small ridge-regularized
//! linear models instead of constants. Split finding runs on per-leaf histograms that
//! accumulate the second-order statistics needed to assemble the normal equations for
//! any prefix of bins, so a candidate split never touches individual samples.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: CSV loading, min/max rescaling, quantile binning.
//! - [`objective`]: losses with first/second derivatives, RMSE and AUC.
//! - [`linfit`]: small dense ridge solver for leaf models.
//! - [`hist`]: per-leaf contiguous bin layout, histograms, bit-vector partition.
//! - [`tree`]: best-first growth of one piecewise linear tree.
//! - [`boost`]: the boosting driver and model serialization.
//! - [`config`]: the `key = value` training configuration file.

#![allow(clippy::needless_range_loop)]

pub mod boost;
pub mod config;
pub mod data;
pub mod error;
pub mod hist;
pub mod linfit;
pub mod objective;
pub mod tree;

pub use boost::{load_model, predict, save_model, train, IterationMetrics, Model, OutputKind, TrainConfig};
pub use data::{BinMapper, BinnedDataset, FeatureScale, RawDataset};
pub use error::{Error, Result};
pub use objective::{GradPair, LossKind};
pub use tree::{FittingMode, PLTree};
