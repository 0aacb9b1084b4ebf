//! CTR estimators and their evaluation.
//!
//! [`train_lr`] fits an L2-regularised logistic regression on sparse one-hot
//! vectors. [`train_gbrt`] fits squared-loss boosted regression trees on dense
//! encoded vectors. [`CtrPredictor`] bundles a trained model with the
//! featurizer it was trained against.

mod gbrt;
mod lr;
mod metrics;
mod predictor;

use thiserror::Error;

use crate::features::FeatureError;

pub use gbrt::{train_gbrt, GbrtHyper, GbrtModel, RegressionTree, TreeNode};
pub use lr::{lr_gradient, lr_loss, sigmoid, train_lr, BiasInit, LrHyper, LrModel, LrSchedule};
pub use metrics::{auc, evaluate_scores, rmse, EvalReport};
pub use predictor::{scored_csv, train_ctr_model, CtrConfig, CtrModelKind, CtrPredictor};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("label {label} at example {index} is not 0 or 1")]
    NonBinaryLabel { index: usize, label: f64 },
    #[error("non-finite weight after epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("need at least {needed} examples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("AUC needs at least one positive and one negative label")]
    SingleClassInput,
    #[error("empty input")]
    EmptyInput,
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
