//! Independent reference computations for cross-checking the solvers.
//!
//! Each routine reaches its answer by a different path from the production
//! code it is compared against: generic LPs with explicit constraint rows
//! instead of bounds, grid search, threshold enumeration, bisection and plain
//! projected or mirror ascent. They are slow and meant for small instances.

use crate::error::{Error, Result};
use crate::lp::{generic_lp, LpProblem, LpStatus};
use crate::types::LossMatrix;

/// Variational CVaR form minimized over every candidate threshold.
pub fn cvar_by_threshold_enumeration(losses: &[f64], alpha: f64) -> f64 {
    let m = alpha * losses.len() as f64;
    losses
        .iter()
        .chain(std::iter::once(&0.0))
        .map(|&eta| losses.iter().map(|&l| (l - eta).max(0.0)).sum::<f64>() / m + eta)
        .fold(f64::INFINITY, f64::min)
}

/// `max <w, losses>` over the capped simplex, with the caps written as
/// explicit inequality rows.
pub fn cvar_by_lp(losses: &[f64], alpha: f64) -> Result<f64> {
    let n = losses.len();
    let cap = 1.0 / (alpha * n as f64);
    let a_ub = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    let sol = generic_lp(&LpProblem {
        c: losses.iter().map(|l| -l).collect(),
        a_ub,
        b_ub: vec![cap; n],
        a_eq: vec![vec![1.0; n]],
        b_eq: vec![1.0],
        bounds: vec![(0.0, f64::INFINITY); n],
    })?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("CVaR oracle LP: {:?}", sol.status)));
    }
    Ok(-sol.objective)
}

/// Optimal value of the alpha-LPBoost dual with a free `gamma` and explicit
/// cap rows.
pub fn lpboost_dual_by_lp(losses: &LossMatrix, alpha: f64) -> Result<f64> {
    let n = losses.n_samples();
    let cap = 1.0 / (alpha * n as f64);
    let mut a_ub: Vec<Vec<f64>> = losses
        .rows()
        .map(|row| {
            let mut r: Vec<f64> = row.iter().map(|l| -l).collect();
            r.push(-1.0);
            r
        })
        .collect();
    let mut b_ub = vec![-1.0; losses.n_models()];
    for i in 0..n {
        let mut r = vec![0.0; n + 1];
        r[i] = 1.0;
        a_ub.push(r);
        b_ub.push(cap);
    }
    let mut eq = vec![1.0; n + 1];
    eq[n] = 0.0;
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut bounds = vec![(0.0, f64::INFINITY); n];
    bounds.push((f64::NEG_INFINITY, f64::INFINITY));
    let sol = generic_lp(&LpProblem {
        c,
        a_ub,
        b_ub,
        a_eq: vec![eq],
        b_eq: vec![1.0],
        bounds,
    })?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("dual oracle LP: {:?}", sol.status)));
    }
    Ok(sol.objective)
}

/// `min over lambda = (a, 1-a), a on a grid of the given step` of the
/// ensemble CVaR, for a two-row loss matrix.
pub fn min_cvar_on_grid_t2(losses: &LossMatrix, alpha: f64, step: f64) -> Result<f64> {
    if losses.n_models() != 2 {
        return Err(Error::DimensionMismatch {
            context: "grid oracle rows",
            expected: 2,
            got: losses.n_models(),
        });
    }
    let steps = (1.0 / step).round() as usize;
    let (r0, r1) = (losses.row(0), losses.row(1));
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let a = k as f64 / steps as f64;
        let mixed: Vec<f64> = r0.iter().zip(r1).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        best = best.min(cvar_by_threshold_enumeration(&mixed, alpha));
    }
    Ok(best)
}

/// Euclidean projection onto `{w : sum w = 1, 0 <= w_i <= cap}` by bisection
/// on the shift.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, cap)).collect()
}

/// `max <w, s> + H(w)/beta` over the capped simplex by projected gradient
/// ascent from the uniform point.
pub fn capped_entropy_max_by_ascent(scores: &[f64], beta: f64, cap: f64) -> f64 {
    let n = scores.len();
    let mut w = vec![1.0 / n as f64; n];
    let step = 1e-3 / (1.0 + 1.0 / beta);
    let objective = |w: &[f64]| {
        w.iter().zip(scores).map(|(a, b)| a * b).sum::<f64>()
            - w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>() / beta
    };
    let mut best = objective(&w);
    for _ in 0..200_000 {
        let grad: Vec<f64> = w
            .iter()
            .zip(scores)
            .map(|(&x, &s)| s - (x.max(1e-12).ln() + 1.0) / beta)
            .collect();
        let moved: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
        w = project_capped_simplex(&moved, cap);
        best = best.max(objective(&w));
    }
    best
}

/// Inner minimizer of the regularized saddle by bisection on the simplex
/// multiplier of the separable KKT conditions.
fn capped_entropy_argmax_by_bisection(scores: &[f64], beta: f64, cap: f64) -> Vec<f64> {
    let weights = |nu: f64| -> Vec<f64> {
        scores
            .iter()
            .map(|&s| (beta * (s - nu) - 1.0).min(700.0).exp().min(cap))
            .collect()
    };
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if weights(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = weights(0.5 * (lo + hi));
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// A lower bound on `min_w max_s (1 - <w, l^s>) - H(w)/beta`: the saddle
/// function at the best model weights found by plain mirror ascent.
pub fn regularized_dual_lower_bound(losses: &LossMatrix, alpha: f64, beta: f64) -> f64 {
    let n = losses.n_samples();
    let t = losses.n_models();
    let cap = 1.0 / (alpha * n as f64);
    let eval = |lambda: &[f64]| -> (f64, Vec<f64>) {
        let scores: Vec<f64> = (0..n)
            .map(|i| (0..t).map(|s| lambda[s] * losses.row(s)[i]).sum())
            .collect();
        let w = capped_entropy_argmax_by_bisection(&scores, beta, cap);
        let h = -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
        let value = 1.0 - w.iter().zip(&scores).map(|(a, b)| a * b).sum::<f64>() - h / beta;
        let grad = losses.rows().map(|row| -row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
        (value, grad)
    };
    let mut lambda = vec![1.0 / t as f64; t];
    let mut best = f64::NEG_INFINITY;
    let step = 1.0 / beta.max(1.0);
    for _ in 0..20_000 {
        let (value, grad) = eval(&lambda);
        best = best.max(value);
        let g_max = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut next: Vec<f64> = lambda.iter().zip(&grad).map(|(l, g)| l * (step * (g - g_max)).exp()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        lambda = next;
    }
    best
}
