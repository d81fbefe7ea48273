//! One-class classification with multi-modal subspace support vector data
//! description.
//!
//! The crate covers the full pipeline: per-modality kernel embeddings
//! (Gaussian, sigmoid, or their convex combination), learned projections of
//! every modality into one shared low-dimensional subspace, a hypersphere
//! description of the pooled target data, decision fusion across
//! modalities, and the cross-validation and grid-search harness used to
//! evaluate it.
//!
//! Modules, bottom-up:
//!
//! - [`datamodel`]: datasets, CSV files, stratified folds, synthetic data
//! - [`kernel`]: kernel matrices, centering, the projection-trick embedding
//! - [`svdd`]: the hypersphere and one-class SVM dual solvers
//! - [`subspace`]: projections, gradients, regularizers, training, fusion
//! - [`eval`]: metrics, cross-validation, grid search, reports

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datamodel;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod subspace;
pub mod svdd;

pub use datamodel::{FeatureMatrix, FoldPlan, Label, MultiModalDataset};
pub use error::{Error, Result};
pub use kernel::{KernelKind, KernelParams, NptState};
pub use subspace::{
    DecisionStrategy, Method, Prediction, ProjectionMatrix, Regularizer, SubspaceModel,
    TrainConfig, UpdateStrategy,
};
pub use svdd::{DataDescription, OcSvmModel};
