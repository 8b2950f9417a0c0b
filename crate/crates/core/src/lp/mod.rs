//! alpha-LPBoost: the sample-weight dual, the model-weight primal, and the
//! entropy-regularized dual, plus the dense simplex they run on.
//!
//! Dual (sample weights):
//!
//! ```text
//! min_{w, gamma} gamma   s.t.  <w, l^s> >= 1 - gamma  for every model s,
//!                              w in Δ_n,  w_i <= 1/(alpha n)
//! ```
//!
//! Primal (model weights):
//!
//! ```text
//! max_{lambda in Δ_T, rho} rho - 1/(alpha n) sum_i (rho - 1 + sum_s lambda_s l_i^s)_+
//! ```
//!
//! Both optima equal `1 - min_lambda CVaR_alpha` of the randomized ensemble.

mod entropy;
mod simplex;

pub use entropy::{
    capped_exponential_weights, regularized_objective, solve_regularized_dual, RegularizedDualSolution,
    RegularizedOptions,
};
pub use simplex::{generic_lp, LpProblem, LpSolution, LpStatus};

use crate::cvar::{cvar_dual, ensemble_losses};
use crate::error::{Error, Result};
use crate::types::{capped_simplex_cap, CappedSimplexWeights, LossMatrix, ModelMixture};

/// `rho` and `gamma` are bracketed here; both provably lie in `[0, 1]` at
/// the optimum because every loss is in `[0, 1]`.
pub const RHO_BRACKET: (f64, f64) = (-1.0, 2.0);

/// Above this many samples the primal is recovered from the dual's row
/// multipliers instead of being solved on its slack form.
pub const PRIMAL_DIRECT_MAX_N: usize = 1000;

/// Optimal sample weights of the alpha-LPBoost dual.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub weights: CappedSimplexWeights,
    pub gamma: f64,
    /// Model weights read off the constraint multipliers.
    pub multipliers: ModelMixture,
    /// `gamma - (1 - CVaR(multipliers))`, a certified duality gap.
    pub certificate: f64,
}

/// Optimal model weights of the alpha-LPBoost primal.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalSolution {
    pub mixture: ModelMixture,
    pub rho: f64,
    /// `psi_i = (rho - 1 + sum_s lambda_s l_i^s)_+`.
    pub slacks: Vec<f64>,
    /// `rho - sum(psi) / (alpha n)`.
    pub objective: f64,
}

fn dual_lp(losses: &LossMatrix, alpha: f64) -> Result<LpProblem> {
    let n = losses.n_samples();
    let cap = capped_simplex_cap(n, alpha)?;
    // variables: w_1..w_n, gamma
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let a_ub = losses
        .rows()
        .map(|row| {
            let mut r: Vec<f64> = row.iter().map(|l| -l).collect();
            r.push(-1.0);
            r
        })
        .collect();
    let mut eq = vec![1.0; n + 1];
    eq[n] = 0.0;
    let mut bounds = vec![(0.0, cap); n];
    bounds.push(RHO_BRACKET);
    Ok(LpProblem {
        c,
        a_ub,
        b_ub: vec![-1.0; losses.n_models()],
        a_eq: vec![eq],
        b_eq: vec![1.0],
        bounds,
    })
}

fn expect_optimal(sol: &LpSolution, what: &str) -> Result<()> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "{what}: status {:?} after {} iterations",
            sol.status, sol.iterations
        )));
    }
    Ok(())
}

/// Mixture from the dual multipliers `-y_s >= 0` of the model constraints.
fn mixture_from_multipliers(duals: &[f64]) -> Result<ModelMixture> {
    let raw: Vec<f64> = duals.iter().map(|y| (-y).max(0.0)).collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.5) {
        return Err(Error::Solver(format!("dual multipliers sum to {sum}, expected 1")));
    }
    ModelMixture::new(raw.into_iter().map(|v| v / sum).collect())
}

/// Solves the alpha-LPBoost dual exactly.
pub fn solve_dual(losses: &LossMatrix, alpha: f64) -> Result<DualSolution> {
    let n = losses.n_samples();
    capped_simplex_cap(n, alpha)?;
    if losses.rows().all(|r| r.iter().all(|&l| l == 0.0)) {
        return Ok(DualSolution {
            weights: CappedSimplexWeights::new(vec![1.0 / n as f64; n], alpha)?,
            gamma: 1.0,
            multipliers: ModelMixture::point_mass(losses.n_models(), 0)?,
            certificate: 0.0,
        });
    }
    let sol = generic_lp(&dual_lp(losses, alpha)?)?;
    expect_optimal(&sol, "alpha-LPBoost dual")?;
    let weights = CappedSimplexWeights::new(sol.x[..n].to_vec(), alpha)?;
    // gamma is tight against the worst model at the optimum
    let gamma = losses
        .rows()
        .map(|row| 1.0 - weights.dot(row))
        .fold(f64::NEG_INFINITY, f64::max)
        .clamp(0.0, 1.0);
    let multipliers = mixture_from_multipliers(&sol.duals_ub)?;
    let primal_value = 1.0 - cvar_dual(&ensemble_losses(losses, &multipliers)?, alpha)?.risk;
    Ok(DualSolution {
        weights,
        gamma,
        multipliers,
        certificate: (gamma - primal_value).max(0.0),
    })
}

/// Best `rho` and slacks for a fixed mixture: `rho = 1 - eta*` of the
/// variational CVaR form.
fn primal_for_mixture(losses: &LossMatrix, mixture: ModelMixture, alpha: f64) -> Result<PrimalSolution> {
    let per_sample = ensemble_losses(losses, &mixture)?;
    let dual = cvar_dual(&per_sample, alpha)?;
    let rho = 1.0 - dual.eta_star;
    let slacks: Vec<f64> = per_sample.iter().map(|e| (rho - 1.0 + e).max(0.0)).collect();
    let m = alpha * losses.n_samples() as f64;
    let objective = rho - slacks.iter().sum::<f64>() / m;
    Ok(PrimalSolution {
        mixture,
        rho,
        slacks,
        objective,
    })
}

/// Solves the alpha-LPBoost primal: the mixture minimizing ensemble CVaR.
/// Strong duality equates [`PrimalSolution::objective`] with the dual `gamma`.
pub fn solve_primal(losses: &LossMatrix, alpha: f64) -> Result<PrimalSolution> {
    let n = losses.n_samples();
    let t = losses.n_models();
    capped_simplex_cap(n, alpha)?;
    if t == 1 {
        return primal_for_mixture(losses, ModelMixture::point_mass(1, 0)?, alpha);
    }
    if n > PRIMAL_DIRECT_MAX_N {
        let sol = generic_lp(&dual_lp(losses, alpha)?)?;
        expect_optimal(&sol, "alpha-LPBoost dual (for primal)")?;
        return primal_for_mixture(losses, mixture_from_multipliers(&sol.duals_ub)?, alpha);
    }
    let m = alpha * n as f64;
    // variables: lambda_1..lambda_T, rho, psi_1..psi_n
    let nv = t + 1 + n;
    let mut c = vec![0.0; nv];
    c[t] = -1.0;
    for v in &mut c[t + 1..] {
        *v = 1.0 / m;
    }
    let a_ub: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; nv];
            for s in 0..t {
                r[s] = losses.row(s)[i];
            }
            r[t] = 1.0;
            r[t + 1 + i] = -1.0;
            r
        })
        .collect();
    let mut eq = vec![0.0; nv];
    for v in &mut eq[..t] {
        *v = 1.0;
    }
    let mut bounds = vec![(0.0, f64::INFINITY); nv];
    bounds[t] = RHO_BRACKET;
    let sol = generic_lp(&LpProblem {
        c,
        a_ub,
        b_ub: vec![1.0; n],
        a_eq: vec![eq],
        b_eq: vec![1.0],
        bounds,
    })?;
    expect_optimal(&sol, "alpha-LPBoost primal")?;
    let mixture = ModelMixture::new(sol.x[..t].to_vec())?;
    let rho = sol.x[t];
    let slacks: Vec<f64> = sol.x[t + 1..].iter().map(|v| v.max(0.0)).collect();
    let objective = rho - slacks.iter().sum::<f64>() / m;
    Ok(PrimalSolution {
        mixture,
        rho,
        slacks,
        objective,
    })
}
