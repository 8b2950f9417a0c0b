//! Exact alpha-CVaR of zero-one (or fractional) losses.
//!
//! The alpha-CVaR of a loss vector is the largest weighted average loss over
//! the capped simplex `{w in Δ_n : w_i <= 1/(alpha n)}`, i.e. the mean loss of
//! the worst alpha fraction of samples. When `alpha n` is not an integer the
//! boundary sample contributes fractionally; that is exactly the LP maximum.

use crate::error::{Error, Result};
use crate::types::{capped_simplex_cap, CappedSimplexWeights, LossMatrix, ModelMixture};

fn validate(losses: &[f64], alpha: f64) -> Result<()> {
    capped_simplex_cap(losses.len(), alpha)?;
    if let Some(v) = losses.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invariant("losses", format!("entry {v} outside [0, 1]")));
    }
    Ok(())
}

/// Sample indices ordered by decreasing loss, ties by increasing index.
fn descending_order(losses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order
}

/// alpha-CVaR by sorting: mean of the top `alpha n` losses, with the
/// `(k+1)`-th loss weighted by the fractional remainder.
pub fn cvar_sorted(losses: &[f64], alpha: f64) -> Result<f64> {
    validate(losses, alpha)?;
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let m = alpha * losses.len() as f64;
    let k = (m.floor() as usize).min(losses.len());
    let top: f64 = sorted[..k].iter().sum();
    let boundary = sorted.get(k).copied().unwrap_or(0.0);
    Ok(((top + (m - k as f64) * boundary) / m).min(1.0))
}

/// The maximizing sample weights of the CVaR problem: mass `cap` on the
/// worst samples, the remainder on the boundary sample.
pub fn cvar_argmax(losses: &[f64], alpha: f64) -> Result<CappedSimplexWeights> {
    validate(losses, alpha)?;
    let cap = capped_simplex_cap(losses.len(), alpha)?;
    let mut w = vec![0.0; losses.len()];
    let mut remaining = 1.0;
    for i in descending_order(losses) {
        let take = cap.min(remaining);
        w[i] = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    CappedSimplexWeights::new(w, alpha)
}

/// Minimizer form `min_eta (1/(alpha n)) sum (l_i - eta)_+ + eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualCvar {
    pub risk: f64,
    /// The `ceil(alpha n)`-th largest loss, always a minimizer.
    pub eta_star: f64,
}

/// Objective of the variational CVaR form at a given threshold.
pub fn cvar_dual_objective(losses: &[f64], alpha: f64, eta: f64) -> f64 {
    let m = alpha * losses.len() as f64;
    losses.iter().map(|&l| (l - eta).max(0.0)).sum::<f64>() / m + eta
}

pub fn cvar_dual(losses: &[f64], alpha: f64) -> Result<DualCvar> {
    validate(losses, alpha)?;
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let m = alpha * losses.len() as f64;
    // guard against alpha*n = 3.0000000000000004 rounding up to 4
    let rank = ((m - 1e-9).ceil() as usize).clamp(1, losses.len());
    let eta_star = sorted[rank - 1];
    Ok(DualCvar {
        risk: cvar_dual_objective(losses, alpha, eta_star),
        eta_star,
    })
}

/// Per-sample expected loss of the randomized ensemble, `sum_t lambda_t l_i^t`.
pub fn ensemble_losses(losses: &LossMatrix, mixture: &ModelMixture) -> Result<Vec<f64>> {
    if mixture.len() != losses.n_models() {
        return Err(Error::DimensionMismatch {
            context: "mixture vs loss matrix rows",
            expected: losses.n_models(),
            got: mixture.len(),
        });
    }
    let mut out = vec![0.0; losses.n_samples()];
    for (row, &lambda) in losses.rows().zip(mixture.values()) {
        if lambda == 0.0 {
            continue;
        }
        for (o, &l) in out.iter_mut().zip(row) {
            *o += lambda * l;
        }
    }
    for o in out.iter_mut() {
        *o = o.clamp(0.0, 1.0);
    }
    Ok(out)
}

pub fn ensemble_cvar(losses: &LossMatrix, mixture: &ModelMixture, alpha: f64) -> Result<f64> {
    cvar_sorted(&ensemble_losses(losses, mixture)?, alpha)
}

/// CVaR of a deterministic model in terms of its average loss: `min(1, avg/alpha)`.
pub fn deterministic_identity(avg_loss: f64, alpha: f64) -> f64 {
    (avg_loss / alpha).min(1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskCurvePoint {
    pub alpha: f64,
    pub cvar: f64,
    pub average_loss: f64,
    pub method: String,
}

/// One curve point per requested alpha, each evaluated with the mixture
/// registered for that alpha (matched exactly).
pub fn risk_curve(
    losses: &LossMatrix,
    mixtures: &[(f64, ModelMixture)],
    alphas: &[f64],
    method: &str,
) -> Result<Vec<RiskCurvePoint>> {
    alphas
        .iter()
        .map(|&alpha| {
            let (_, mixture) = mixtures
                .iter()
                .find(|(a, _)| *a == alpha)
                .ok_or_else(|| Error::invariant("risk_curve", format!("no mixture for alpha {alpha}")))?;
            let per_sample = ensemble_losses(losses, mixture)?;
            Ok(RiskCurvePoint {
                alpha,
                cvar: cvar_sorted(&per_sample, alpha)?,
                average_loss: mean(&per_sample),
                method: method.to_string(),
            })
        })
        .collect()
}
