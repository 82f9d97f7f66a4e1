//! Rate models, their training, and the on-disk model file.

mod linear;
mod logistic;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::block::{CoeffBlock, DatasetRecord};
use crate::error::{Error, Result};
use crate::features::{self, FeatureSet};

pub use linear::{fit_linear, fit_rho, predict_rho, predict_subblock, RhoDomainParams, SubBlockLinearParams};
pub use logistic::{
    analytic_gradient, fit_logistic, fit_logistic_summaries, logistic, mse as logistic_mse,
    predict_logistic, GdConfig,
    LogisticParams, MagnitudeSummary,
};

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_mse: f64,
    /// Descent iterations; 0 for closed-form fits.
    pub iterations: usize,
    pub converged: bool,
    /// MSE of every accepted iterate, starting with the initial point.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    SubBlock,
    Rho,
    Logistic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rho, ModelKind::Logistic, ModelKind::SubBlock];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SubBlock => "subblock",
            ModelKind::Rho => "rho",
            ModelKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "subblock" | "sub-block" => Ok(ModelKind::SubBlock),
            "rho" | "rho-domain" => Ok(ModelKind::Rho),
            "logistic" => Ok(ModelKind::Logistic),
            other => Err(Error::Config(format!("unknown model kind \"{other}\""))),
        }
    }
}

/// A trained rate model.
#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    SubBlock(SubBlockLinearParams),
    Rho(RhoDomainParams),
    Logistic(LogisticParams),
}

impl RateModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            RateModel::SubBlock(_) => ModelKind::SubBlock,
            RateModel::Rho(_) => ModelKind::Rho,
            RateModel::Logistic(_) => ModelKind::Logistic,
        }
    }

    /// Raw model output in bits; may be negative.
    pub fn predict(&self, block: &CoeffBlock) -> f64 {
        match self {
            RateModel::SubBlock(p) => predict_subblock(p, &features::extract(block)),
            RateModel::Rho(p) => p.alpha * features::feature_s(block) + p.beta,
            RateModel::Logistic(p) => predict_logistic(p, block),
        }
    }

    /// Prediction floored at zero bits.
    pub fn predict_clamped(&self, block: &CoeffBlock) -> f64 {
        self.predict(block).max(0.0)
    }
}

/// Everything needed to train one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Feature subset for the sub-block model; ignored by the other kinds.
    pub features: FeatureSet,
    /// Fit an offset (`e` for the sub-block model, `β` for ρ-domain).
    pub bias: bool,
    pub gd: GdConfig,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            features: FeatureSet::ALL,
            bias: true,
            gd: GdConfig::default(),
        }
    }

    pub fn subblock(features: FeatureSet, bias: bool) -> Self {
        Self {
            features,
            bias,
            ..Self::new(ModelKind::SubBlock)
        }
    }

    pub fn fit(&self, records: &[DatasetRecord]) -> Result<(RateModel, FitReport)> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let rates: Vec<f64> = records.iter().map(|r| r.rate_bits()).collect();
        match self.kind {
            ModelKind::SubBlock => {
                let feats: Vec<_> = records.iter().map(|r| features::extract(&r.block)).collect();
                let (p, rep) = fit_linear(&feats, &rates, self.features, self.bias)?;
                Ok((RateModel::SubBlock(p), rep))
            }
            ModelKind::Rho => {
                let feats: Vec<_> = records
                    .iter()
                    .map(|r| features::FeatureVector {
                        s: features::feature_s(&r.block),
                        ..Default::default()
                    })
                    .collect();
                let (p, rep) = fit_rho(&feats, &rates, self.bias)?;
                Ok((RateModel::Rho(p), rep))
            }
            ModelKind::Logistic => {
                let summaries: Vec<_> =
                    records.iter().map(|r| MagnitudeSummary::new(&r.block)).collect();
                let (p, rep) = fit_logistic_summaries(&summaries, &rates, &self.gd)?;
                Ok((RateModel::Logistic(p), rep))
            }
        }
    }
}

/// Provenance stored alongside fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub qp_train: Vec<i32>,
    pub n_samples: usize,
    pub final_mse: f64,
}

/// On-disk model document (JSON).
///
/// Floats are written in shortest round-trip form and parsed with correct
/// rounding, so parameters survive a write/read cycle bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_kind: ModelKind,
    pub params: serde_json::Value,
    pub bias_enabled: bool,
    pub feature_mask: FeatureSet,
    pub training: TrainingInfo,
}

impl ModelFile {
    pub fn new(model: &RateModel, training: TrainingInfo) -> Result<Self> {
        let (params, bias_enabled, feature_mask) = match model {
            RateModel::SubBlock(p) => (serde_json::to_value(p)?, p.bias_enabled, p.feature_mask),
            RateModel::Rho(p) => (
                serde_json::to_value(p)?,
                p.beta != 0.0,
                FeatureSet::only(features::Feature::S),
            ),
            RateModel::Logistic(p) => (serde_json::to_value(p)?, true, FeatureSet::EMPTY),
        };
        Ok(Self {
            model_kind: model.kind(),
            params,
            bias_enabled,
            feature_mask,
            training,
        })
    }

    pub fn model(&self) -> Result<RateModel> {
        let model = match self.model_kind {
            ModelKind::SubBlock => {
                let mut p: SubBlockLinearParams = serde_json::from_value(self.params.clone())?;
                p.bias_enabled = self.bias_enabled;
                p.feature_mask = self.feature_mask;
                if !p.is_finite() {
                    return Err(Error::NonFinite("model parameters"));
                }
                RateModel::SubBlock(p)
            }
            ModelKind::Rho => RateModel::Rho(serde_json::from_value(self.params.clone())?),
            ModelKind::Logistic => RateModel::Logistic(serde_json::from_value(self.params.clone())?),
        };
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Sorted distinct QPs in a record set.
pub fn qp_set(records: &[DatasetRecord]) -> Vec<i32> {
    let mut qps: Vec<i32> = records.iter().map(|r| r.block.qp()).collect();
    qps.sort_unstable();
    qps.dedup();
    qps
}
