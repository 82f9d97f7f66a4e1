//! Extended logistic baseline:
//!
//! ```text
//! R_est = Σ_(m,n) [ α|c| + β·g(γ|c| + δ) ] + ε,    g(x) = 1 / (1 + e^-x)
//! ```
//!
//! The sum covers every coefficient position, zeros included. Training is
//! full-batch gradient descent on the MSE with an analytic gradient.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::block::CoeffBlock;
use crate::error::{Error, Result};
use crate::models::FitReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl LogisticParams {
    pub fn to_array(&self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.delta, self.epsilon]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            delta: v[3],
            epsilon: v[4],
        }
    }
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            gamma: 1.0,
            delta: 0.0,
            epsilon: 0.0,
        }
    }
}

/// Gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub init: LogisticParams,
    /// Initial step, in preconditioned parameter units. With `normalize`,
    /// a step of 1 is a full Gauss-Newton step and growth stops there.
    pub step: f64,
    /// Step multiplier after an accepted iterate; 1.0 keeps the step fixed.
    pub step_growth: f64,
    pub max_iters: usize,
    /// Stop once an accepted step improves the MSE by less than this fraction.
    pub rel_tol: f64,
    /// Descend in whitened coordinates: precondition the gradient with the
    /// second-moment matrix of the prediction's parameter sensitivities.
    pub normalize: bool,
    /// Recompute that matrix every this many accepted steps (0 = only at
    /// the initial point).
    pub refresh_every: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            init: LogisticParams::default(),
            step: 1e-3,
            step_growth: 1.2,
            max_iters: 10_000,
            rel_tol: 1e-9,
            normalize: true,
            refresh_every: 1,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Direct evaluation over every coefficient position.
pub fn predict_logistic(params: &LogisticParams, block: &CoeffBlock) -> f64 {
    let LogisticParams {
        alpha,
        beta,
        gamma,
        delta,
        epsilon,
    } = *params;
    block
        .coeffs()
        .iter()
        .map(|&c| {
            let m = c.unsigned_abs() as f64;
            alpha * m + beta * logistic(gamma * m + delta)
        })
        .sum::<f64>()
        + epsilon
}

/// Magnitude histogram of a block: enough to evaluate the logistic model and
/// its gradient without revisiting every coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSummary {
    sum_abs: f64,
    zeros: f64,
    /// `(magnitude, count)` for nonzero magnitudes, ascending.
    nonzero: Vec<(f64, f64)>,
}

impl MagnitudeSummary {
    pub fn new(block: &CoeffBlock) -> Self {
        let mut mags: Vec<u32> = block
            .coeffs()
            .iter()
            .map(|c| c.unsigned_abs())
            .filter(|&m| m > 0)
            .collect();
        mags.sort_unstable();
        let zeros = (block.pixel_count() - mags.len()) as f64;
        let sum_abs = mags.iter().map(|&m| m as f64).sum();
        let mut nonzero: Vec<(f64, f64)> = Vec::new();
        for m in mags {
            match nonzero.last_mut() {
                Some((v, n)) if *v == m as f64 => *n += 1.0,
                _ => nonzero.push((m as f64, 1.0)),
            }
        }
        Self {
            sum_abs,
            zeros,
            nonzero,
        }
    }

    fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((0.0, self.zeros))
            .filter(|&(_, n)| n > 0.0)
            .chain(self.nonzero.iter().copied())
    }

    pub fn predict(&self, p: &LogisticParams) -> f64 {
        let g_sum: f64 = self
            .entries()
            .map(|(m, n)| n * logistic(p.gamma * m + p.delta))
            .sum();
        p.alpha * self.sum_abs + p.beta * g_sum + p.epsilon
    }

    /// Prediction and its partial derivatives with respect to (α, β, γ, δ, ε).
    fn predict_with_jacobian(&self, p: &LogisticParams) -> (f64, [f64; 5]) {
        let mut g_sum = 0.0;
        let mut dg_m = 0.0;
        let mut dg = 0.0;
        for (m, n) in self.entries() {
            let g = logistic(p.gamma * m + p.delta);
            let slope = g * (1.0 - g);
            g_sum += n * g;
            dg_m += n * slope * m;
            dg += n * slope;
        }
        let pred = p.alpha * self.sum_abs + p.beta * g_sum + p.epsilon;
        (pred, [self.sum_abs, g_sum, p.beta * dg_m, p.beta * dg, 1.0])
    }
}

fn check_inputs(n_blocks: usize, rates: &[f64]) -> Result<()> {
    if n_blocks == 0 {
        return Err(Error::EmptyDataset);
    }
    if n_blocks != rates.len() {
        return Err(Error::LengthMismatch {
            left: n_blocks,
            right: rates.len(),
        });
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rates"));
    }
    Ok(())
}

pub fn mse(params: &LogisticParams, summaries: &[MagnitudeSummary], rates: &[f64]) -> f64 {
    summaries
        .iter()
        .zip(rates)
        .map(|(s, r)| (s.predict(params) - r).powi(2))
        .sum::<f64>()
        / summaries.len() as f64
}

fn mse_and_gradient(
    params: &LogisticParams,
    summaries: &[MagnitudeSummary],
    rates: &[f64],
) -> (f64, [f64; 5]) {
    let n = summaries.len() as f64;
    let mut loss = 0.0;
    let mut grad = [0.0; 5];
    for (s, &r) in summaries.iter().zip(rates) {
        let (pred, jac) = s.predict_with_jacobian(params);
        let resid = pred - r;
        loss += resid * resid;
        for (g, j) in grad.iter_mut().zip(jac) {
            *g += resid * j;
        }
    }
    for g in &mut grad {
        *g *= 2.0 / n;
    }
    (loss / n, grad)
}

/// Inverse of `M = (1/N) Σ J_iᵀ J_i + ridge`, where `J_i` is the gradient of
/// the i-th prediction. A step along `M⁻¹ ∇MSE` is gradient descent in
/// coordinates where the sensitivities are decorrelated with unit scale.
struct Preconditioner(Option<Matrix5<f64>>);

impl Preconditioner {
    fn new(enabled: bool, params: &LogisticParams, summaries: &[MagnitudeSummary]) -> Self {
        if !enabled {
            return Self(None);
        }
        let n = summaries.len() as f64;
        let mut m = Matrix5::<f64>::zeros();
        for s in summaries {
            let (_, jac) = s.predict_with_jacobian(params);
            let j = Vector5::from(jac);
            m += j * j.transpose() / n;
        }
        let trace = m.trace();
        if !trace.is_finite() || trace <= 0.0 {
            return Self(None);
        }
        // Ridge keeps the matrix invertible when sensitivities are collinear
        // (e.g. β = 0 flattens γ and δ).
        let ridge = 1e-10 * trace / 5.0;
        for i in 0..5 {
            m[(i, i)] += ridge.max(m[(i, i)] * 1e-10);
        }
        Self(m.cholesky().map(|c| c.inverse()))
    }

    fn apply(&self, grad: &[f64; 5]) -> [f64; 5] {
        match &self.0 {
            // Half the gradient so that step 1 is a Gauss-Newton step.
            Some(inv) => (inv * Vector5::from(*grad) * 0.5).into(),
            None => *grad,
        }
    }
}

/// Closed-form ∂MSE/∂(α, β, γ, δ, ε).
pub fn analytic_gradient(
    params: &LogisticParams,
    blocks: &[CoeffBlock],
    rates: &[f64],
) -> Result<[f64; 5]> {
    check_inputs(blocks.len(), rates)?;
    let summaries: Vec<_> = blocks.iter().map(MagnitudeSummary::new).collect();
    Ok(mse_and_gradient(params, &summaries, rates).1)
}

/// Full-batch gradient descent on the MSE.
///
/// A step that would raise the MSE is rejected and the step size halved, so
/// the sequence of accepted MSE values (recorded in `FitReport::trace`) is
/// non-increasing.
pub fn fit_logistic(
    blocks: &[CoeffBlock],
    rates: &[f64],
    config: &GdConfig,
) -> Result<(LogisticParams, FitReport)> {
    check_inputs(blocks.len(), rates)?;
    let summaries: Vec<_> = blocks.iter().map(MagnitudeSummary::new).collect();
    fit_logistic_summaries(&summaries, rates, config)
}

pub fn fit_logistic_summaries(
    summaries: &[MagnitudeSummary],
    rates: &[f64],
    config: &GdConfig,
) -> Result<(LogisticParams, FitReport)> {
    check_inputs(summaries.len(), rates)?;
    if !(config.step > 0.0 && config.step_growth >= 1.0 && config.rel_tol >= 0.0) {
        return Err(Error::Config(format!("invalid descent settings {config:?}")));
    }
    if config.init.to_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial parameters"));
    }

    let mut precond = Preconditioner::new(config.normalize, &config.init, summaries);
    let mut params = config.init.to_array();
    let (mut loss, mut grad) = mse_and_gradient(&config.init, summaries, rates);
    if !loss.is_finite() {
        return Err(Error::NonFinite("initial loss"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { iteration: 0 });
    }
    let mut trace = vec![loss];
    let mut step = config.step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        if loss == 0.0 {
            converged = true;
            break;
        }
        let dir = precond.apply(&grad);
        let mut cand = params;
        for j in 0..5 {
            cand[j] -= step * dir[j];
        }
        let cand_params = LogisticParams::from_array(cand);
        let (cand_loss, cand_grad) = mse_and_gradient(&cand_params, summaries, rates);
        if cand_loss.is_finite() && cand_loss <= loss {
            if cand_grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    iteration: iterations,
                });
            }
            let improvement = (loss - cand_loss) / loss;
            params = cand;
            loss = cand_loss;
            grad = cand_grad;
            trace.push(loss);
            step *= config.step_growth;
            if config.normalize {
                step = step.min(1.0);
            }
            if config.refresh_every > 0 && (trace.len() - 1) % config.refresh_every == 0 {
                precond = Preconditioner::new(config.normalize, &cand_params, summaries);
            }
            if improvement < config.rel_tol {
                converged = true;
                break;
            }
        } else {
            step *= 0.5;
            if step < f64::MIN_POSITIVE {
                // No representable step decreases the loss.
                converged = true;
                break;
            }
        }
    }

    Ok((
        LogisticParams::from_array(params),
        FitReport {
            final_mse: loss,
            iterations,
            converged,
            trace,
        },
    ))
}
