//! Linear rate models trained by least squares.
//!
//! Both the sub-block model (`a·S + b·L + c·Z + d·E + e`) and the ρ-domain
//! baseline (`α·S + β`) are linear in their parameters. Fitting builds the
//! masked design matrix and solves it with an SVD pseudo-inverse, which gives
//! the minimum-norm minimizer when columns are collinear.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureSet, FeatureVector};
use crate::models::FitReport;

/// Weights of the four-feature sub-block model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubBlockLinearParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    #[serde(skip, default = "default_true")]
    pub bias_enabled: bool,
    #[serde(skip, default = "default_mask")]
    pub feature_mask: FeatureSet,
}

fn default_true() -> bool {
    true
}

fn default_mask() -> FeatureSet {
    FeatureSet::ALL
}

impl SubBlockLinearParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            e,
            bias_enabled: true,
            feature_mask: FeatureSet::ALL,
        }
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.weights().iter().chain([self.e].iter()).all(|v| v.is_finite())
    }
}

/// ρ-domain baseline: rate linear in the absolute nonzero count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoDomainParams {
    pub alpha: f64,
    pub beta: f64,
}

pub fn predict_subblock(params: &SubBlockLinearParams, fv: &FeatureVector) -> f64 {
    params.a * fv.s + params.b * fv.l + params.c * fv.z + params.d * fv.e + params.e
}

pub fn predict_rho(params: &RhoDomainParams, fv: &FeatureVector) -> f64 {
    params.alpha * fv.s + params.beta
}

/// Least-squares fit of the masked linear model.
///
/// Masked-out features get weight exactly 0; with `bias == false` the offset
/// is exactly 0.
pub fn fit_linear(
    features: &[FeatureVector],
    rates: &[f64],
    mask: FeatureSet,
    bias: bool,
) -> Result<(SubBlockLinearParams, FitReport)> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != rates.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: rates.len(),
        });
    }
    if mask.is_empty() && !bias {
        return Err(Error::EmptyDesign);
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rates"));
    }
    if features.iter().any(|f| f.as_array().iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("features"));
    }

    // An all-zero column has minimum-norm weight 0; leave it out of the solve.
    let cols: Vec<Feature> = mask
        .iter()
        .filter(|&f| features.iter().any(|fv| fv.get(f) != 0.0))
        .collect();
    if cols.is_empty() && !bias {
        let params = SubBlockLinearParams {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            e: 0.0,
            bias_enabled: false,
            feature_mask: mask,
        };
        let final_mse = rates.iter().map(|r| r * r).sum::<f64>() / features.len() as f64;
        return Ok((
            params,
            FitReport {
                final_mse,
                iterations: 0,
                converged: true,
                trace: Vec::new(),
            },
        ));
    }
    let ncols = cols.len() + bias as usize;
    let n = features.len();
    let design = DMatrix::from_fn(n, ncols, |i, j| match cols.get(j) {
        Some(&f) => features[i].get(f),
        None => 1.0,
    });
    let target = DVector::from_column_slice(rates);
    let solution = solve_min_norm(design, &target)?;

    let mut params = SubBlockLinearParams {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 0.0,
        bias_enabled: bias,
        feature_mask: mask,
    };
    for (j, &f) in cols.iter().enumerate() {
        let w = solution[j];
        match f {
            Feature::S => params.a = w,
            Feature::L => params.b = w,
            Feature::Z => params.c = w,
            Feature::E => params.d = w,
        }
    }
    if bias {
        params.e = solution[ncols - 1];
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("fitted parameters"));
    }

    let final_mse = features
        .iter()
        .zip(rates)
        .map(|(fv, r)| (predict_subblock(&params, fv) - r).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok((
        params,
        FitReport {
            final_mse,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
        },
    ))
}

/// ρ-domain fit: the sub-block model restricted to `S`.
pub fn fit_rho(
    features: &[FeatureVector],
    rates: &[f64],
    bias: bool,
) -> Result<(RhoDomainParams, FitReport)> {
    let (p, report) = fit_linear(features, rates, FeatureSet::only(Feature::S), bias)?;
    Ok((
        RhoDomainParams {
            alpha: p.a,
            beta: p.e,
        },
        report,
    ))
}

/// Minimum-norm least-squares solution via SVD. Singular values below
/// `max(m, n) · ε · σ_max` are treated as zero.
fn solve_min_norm(design: DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = design.shape();
    let svd = design.svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let tol = sigma_max * (m.max(n) as f64) * f64::EPSILON;
    svd.solve(target, tol).map_err(|e| Error::Solver(e.to_string()))
}
