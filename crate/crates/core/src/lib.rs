//! Bit-rate estimation for quantized transform-coefficient residual blocks.
//!
//! The main model sums four hand-crafted features over the 4×4 sub-blocks of
//! a block and combines them linearly:
//!
//! ```text
//! R_est = a·S + b·L + c·Z + d·E + e
//! ```
//!
//! Two baselines are provided for comparison: a ρ-domain model (rate linear
//! in the number of nonzero coefficients) and an extended logistic model.
//! The [`evaluation`] module implements the metrics and the k-fold,
//! cross-QP and feature-ablation protocols used to compare them.

pub mod block;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod models;

pub use block::{subblocks, CoeffBlock, DatasetRecord, SubBlockView};
pub use error::{Error, Result};
pub use features::{extract, Feature, FeatureSet, FeatureVector, ZIGZAG_4X4};
pub use models::{
    FitReport, GdConfig, LogisticParams, ModelFile, ModelKind, ModelSpec, RateModel,
    RhoDomainParams, SubBlockLinearParams,
};
