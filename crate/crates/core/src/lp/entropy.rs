//! Entropy-regularized alpha-LPBoost dual.
//!
//! The regularized problem
//!
//! ```text
//! min_w  max_s (1 - <w, l^s>) - H(w)/beta   over the capped simplex
//! ```
//!
//! is solved through its saddle form over model weights `lambda in Δ_T`:
//!
//! ```text
//! g(lambda) = min_w 1 - <w, L'lambda> - H(w)/beta
//! ```
//!
//! whose inner minimizer is the capped softmax of `beta L'lambda`. `g` is
//! concave and `beta/4`-smooth in the l1 norm, so an accelerated mirror-ascent
//! scheme with the entropy prox converges at `O(1/k^2)`. Every iterate gives
//! a duality-gap certificate `f(w(lambda)) - g(lambda)`.

use crate::error::{Error, Result};
use crate::types::{capped_simplex_cap, entropy, CappedSimplexWeights, LossMatrix};

/// Maximizer of `<w, scores> + H(w)/beta` over `{w in Δ_n : w_i <= cap}`.
///
/// The solution has the water-filling form `w_i = min(cap, exp(beta s_i)/Z)`.
/// Scores are sorted once; the number of capped coordinates is the first
/// prefix length consistent with both sides of the cap, found in log space.
pub fn capped_exponential_weights(scores: &[f64], beta: f64, cap: f64) -> Result<Vec<f64>> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::invariant("capped_exponential_weights", "empty score vector"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invariant("capped_exponential_weights", format!("beta {beta} must be positive")));
    }
    if !(cap > 0.0) || cap * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::AlphaTooSmall {
            alpha: 1.0 / (cap * n as f64),
            n,
        });
    }
    let v: Vec<f64> = scores.iter().map(|s| beta * s).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| v[i]).collect();

    // suffix log-sum-exp; sorted descending so the suffix max is its head
    let mut lse = vec![f64::NEG_INFINITY; n + 1];
    let mut acc = 0.0;
    for k in (0..n).rev() {
        let head = sorted[k];
        // acc holds sum_{j > k} exp(sorted[j] - sorted[k + 1]); rebase onto head
        acc = if k + 1 < n { acc * (sorted[k + 1] - head).exp() + 1.0 } else { 1.0 };
        lse[k] = head + acc.ln();
    }

    let log_cap = cap.ln();
    let mut capped = n;
    let mut log_z = f64::NAN;
    for k in 0..n {
        let rest = 1.0 - k as f64 * cap;
        if rest <= 1e-15 {
            capped = k;
            break;
        }
        let lz = lse[k] - rest.ln();
        let head_fits = sorted[k] - lz <= log_cap + 1e-12;
        let capped_fit = k == 0 || sorted[k - 1] - lz >= log_cap - 1e-12;
        if head_fits && capped_fit {
            capped = k;
            log_z = lz;
            break;
        }
    }
    let mut w = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        w[i] = if rank < capped {
            cap
        } else if log_z.is_nan() {
            0.0
        } else {
            (sorted[rank] - log_z).exp().min(cap)
        };
    }
    // absorb rounding into the uncapped block
    let total: f64 = w.iter().sum();
    let free: f64 = order[capped.min(n)..].iter().map(|&i| w[i]).sum();
    if free > 0.0 {
        let scale = (free + 1.0 - total) / free;
        for &i in &order[capped..] {
            w[i] = (w[i] * scale).min(cap);
        }
    }
    Ok(w)
}

/// `<w, scores> + H(w)/beta`.
pub fn regularized_objective(w: &[f64], scores: &[f64], beta: f64) -> f64 {
    w.iter().zip(scores).map(|(a, b)| a * b).sum::<f64>() + entropy(w) / beta
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizedOptions {
    /// Additive accuracy certified by the duality gap.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for RegularizedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iterations: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedDualSolution {
    pub weights: CappedSimplexWeights,
    /// `inner_gamma - H(w)/beta`.
    pub objective: f64,
    /// `max_s (1 - <w, l^s>)`.
    pub inner_gamma: f64,
    /// Certified upper bound on `objective - optimum`.
    pub gap_estimate: f64,
    /// Model weights of the saddle point, usable as a warm start.
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

/// Everything one evaluation of the saddle function produces.
struct Probe {
    w: Vec<f64>,
    /// `1 - <w, l^s>` per model.
    margins: Vec<f64>,
    /// `g(lambda)`.
    value: f64,
}

impl Probe {
    fn gap(&self, lambda: &[f64]) -> f64 {
        let worst = self.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = self.margins.iter().zip(lambda).map(|(a, l)| a * l).sum();
        (worst - avg).max(0.0)
    }
}

struct Saddle<'a> {
    losses: &'a LossMatrix,
    beta: f64,
    cap: f64,
}

impl Saddle<'_> {
    fn probe(&self, lambda: &[f64]) -> Result<Probe> {
        let n = self.losses.n_samples();
        let mut scores = vec![0.0; n];
        for (row, &l) in self.losses.rows().zip(lambda) {
            if l != 0.0 {
                for (s, &x) in scores.iter_mut().zip(row) {
                    *s += l * x;
                }
            }
        }
        let w = capped_exponential_weights(&scores, self.beta, self.cap)?;
        let margins: Vec<f64> = self
            .losses
            .rows()
            .map(|row| 1.0 - row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let value = 1.0 - regularized_objective(&w, &scores, self.beta);
        Ok(Probe { w, margins, value })
    }
}

fn normalize_log(logv: &[f64]) -> Vec<f64> {
    let max = logv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logv.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Minimizes the entropy-regularized dual to additive accuracy `opts.tol`.
///
/// `warm_start` may hold model weights from a previous, shorter loss matrix;
/// missing trailing entries are treated as zero.
pub fn solve_regularized_dual(
    losses: &LossMatrix,
    alpha: f64,
    beta: f64,
    opts: RegularizedOptions,
    warm_start: Option<&[f64]>,
) -> Result<RegularizedDualSolution> {
    let n = losses.n_samples();
    let t = losses.n_models();
    let cap = capped_simplex_cap(n, alpha)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invariant("solve_regularized_dual", format!("beta {beta} must be positive")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invariant("solve_regularized_dual", "tol must be positive"));
    }
    let saddle = Saddle { losses, beta, cap };

    // start between the warm start and uniform so no coordinate is zero
    let uniform = 1.0 / t as f64;
    let start: Vec<f64> = match warm_start {
        Some(ws) => (0..t).map(|s| 0.5 * ws.get(s).copied().unwrap_or(0.0) + 0.5 * uniform).collect(),
        None => vec![uniform; t],
    };
    let s0: f64 = start.iter().sum();
    let start: Vec<f64> = start.iter().map(|v| v / s0).collect();

    let mut x = start.clone();
    let mut px = saddle.probe(&x)?;
    let mut best = (px.gap(&x), x.clone(), px.w.clone(), px.margins.clone());
    let finish = |gap: f64, lambda: Vec<f64>, w: Vec<f64>, margins: Vec<f64>, iterations: usize| {
        let weights = CappedSimplexWeights::new(w, alpha)?;
        let inner_gamma = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RegularizedDualSolution {
            objective: inner_gamma - weights.entropy() / beta,
            weights,
            inner_gamma,
            gap_estimate: gap,
            lambda,
            iterations,
        })
    };
    if t == 1 || best.0 <= opts.tol {
        return finish(best.0, best.1, best.2, best.3, 0);
    }

    let mut log_z: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mut theta = 1.0f64;
    let mut lip = beta / 400.0;
    let lip_max = beta / 4.0 * 1.0001;
    for iter in 1..=opts.max_iterations {
        let z = normalize_log(&log_z);
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        let py = saddle.probe(&y)?;
        // gradient of g at y is -(<w, l^s>) = margins - 1; constants drop out
        let (x_next, z_log_next, px_next) = loop {
            let step = 1.0 / (theta * lip);
            let cand_log: Vec<f64> = log_z.iter().zip(&py.margins).map(|(lz, m)| lz + step * m).collect();
            let z_next = normalize_log(&cand_log);
            let x_next: Vec<f64> = x.iter().zip(&z_next).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
            let p = saddle.probe(&x_next)?;
            let lin: f64 = py.margins.iter().zip(x_next.iter().zip(&y)).map(|(m, (a, b))| m * (a - b)).sum();
            let dist: f64 = x_next.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
            if p.value >= py.value + lin - 0.5 * lip * dist * dist - 1e-13 || lip >= lip_max {
                break (x_next, cand_log, p);
            }
            lip = (lip * 2.0).min(lip_max);
        };
        // restart momentum when the objective drops
        let restart = px_next.value < px.value;
        x = x_next;
        px = px_next;
        log_z = z_log_next;
        let gap = px.gap(&x);
        if gap < best.0 {
            best = (gap, x.clone(), px.w.clone(), px.margins.clone());
        }
        let gap_y = py.gap(&y);
        if gap_y < best.0 {
            best = (gap_y, y.clone(), py.w.clone(), py.margins.clone());
        }
        if best.0 <= opts.tol {
            return finish(best.0, best.1, best.2, best.3, iter);
        }
        if restart {
            theta = 1.0;
            log_z = x.iter().map(|v| v.max(1e-300).ln()).collect();
        } else {
            theta = ((theta.powi(4) + 4.0 * theta * theta).sqrt() - theta * theta) / 2.0;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        gap: best.0,
        tol: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvar::cvar_argmax;
    use crate::lp::solve_dual;
    use crate::oracle;
    use crate::types::seeded_rng;
    use rand::Rng;

    fn softmax(v: &[f64]) -> Vec<f64> {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn no_binding_cap_is_softmax() {
        let s = [0.3, -1.0, 2.0, 0.0];
        let w = capped_exponential_weights(&s, 1.5, 1.0).unwrap();
        let expected = softmax(&s.map(|x| 1.5 * x));
        for (a, b) in w.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn large_beta_concentrates_on_cvar_argmax() {
        let s = [0.1, 0.9, 0.5, 0.7, 0.3, 0.2, 0.8, 0.05];
        let alpha = 0.3;
        let cap = 1.0 / (alpha * s.len() as f64);
        let w = capped_exponential_weights(&s, 1e6, cap).unwrap();
        let argmax = cvar_argmax(&s, alpha).unwrap();
        for (a, b) in w.iter().zip(argmax.values()) {
            assert!((a - b).abs() < 1e-9, "{w:?} vs {:?}", argmax.values());
        }
    }

    #[test]
    fn simplex_sum_and_cap_are_exact() {
        let mut rng = seeded_rng(1);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let alpha = rng.random_range((1.0 / n as f64)..=1.0);
            let cap = 1.0 / (alpha * n as f64);
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let beta = 10f64.powf(rng.random_range(-1.0..4.0));
            let w = capped_exponential_weights(&s, beta, cap).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0 && v <= cap + 1e-12));
        }
    }

    #[test]
    fn matches_mirror_ascent_oracle() {
        let mut rng = seeded_rng(2);
        for _ in 0..10 {
            let n = 12;
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let cap = 1.0 / (0.25 * n as f64);
            let beta = 5.0;
            let w = capped_exponential_weights(&s, beta, cap).unwrap();
            let ours = regularized_objective(&w, &s, beta);
            let oracle_val = oracle::capped_entropy_max_by_ascent(&s, beta, cap);
            assert!((ours - oracle_val).abs() < 1e-6, "{ours} vs {oracle_val}");
            assert!(ours >= oracle_val - 1e-9);
        }
    }

    #[test]
    fn first_order_optimality() {
        let mut rng = seeded_rng(4);
        for _ in 0..100 {
            let n = rng.random_range(2..15);
            let alpha = rng.random_range((1.0 / n as f64)..=1.0);
            let cap = 1.0 / (alpha * n as f64);
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let beta = rng.random_range(0.5..20.0);
            let w = capped_exponential_weights(&s, beta, cap).unwrap();
            let base = regularized_objective(&w, &s, beta);
            // move a little mass between any feasible pair
            for i in 0..n {
                for j in 0..n {
                    let eps = 1e-6f64.min(w[i]).min(cap - w[j]);
                    if i == j || eps <= 1e-12 {
                        continue;
                    }
                    let mut p = w.clone();
                    p[i] -= eps;
                    p[j] += eps;
                    assert!(regularized_objective(&p, &s, beta) <= base + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_infeasible_cap() {
        assert!(capped_exponential_weights(&[0.0; 4], 1.0, 0.2).is_err());
        assert!(capped_exponential_weights(&[0.0; 4], 0.0, 0.5).is_err());
    }

    #[test]
    fn single_model_is_closed_form() {
        let row = vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let l = LossMatrix::new(vec![row.clone()]).unwrap();
        let sol = solve_regularized_dual(&l, 0.5, 3.0, RegularizedOptions::default(), None).unwrap();
        let w = capped_exponential_weights(&row, 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(sol.weights.values(), &w[..]);
    }

    #[test]
    fn uniform_losses_give_uniform_weights() {
        let l = LossMatrix::new(vec![vec![0.4; 8], vec![0.4; 8]]).unwrap();
        let beta = 2.0;
        let sol = solve_regularized_dual(&l, 0.5, beta, RegularizedOptions::default(), None).unwrap();
        assert!(sol.weights.values().iter().all(|&w| (w - 0.125).abs() < 1e-12));
        assert!((sol.objective - (0.6 - 8f64.ln() / beta)).abs() < 1e-9);
    }

    #[test]
    fn huge_beta_approaches_lp_dual() {
        let mut rng = seeded_rng(8);
        let l = LossMatrix::new((0..4).map(|_| (0..10).map(|_| rng.random()).collect()).collect()).unwrap();
        let opts = RegularizedOptions {
            tol: 1e-4,
            ..Default::default()
        };
        let sol = solve_regularized_dual(&l, 0.3, 1e8, opts, None);
        let gamma = solve_dual(&l, 0.3).unwrap().gamma;
        // the accelerated scheme may not certify 1e-4 at beta = 1e8; the
        // best iterate is still reported through the error
        match sol {
            Ok(s) => assert!((s.objective - gamma).abs() < 1e-3, "{} vs {gamma}", s.objective),
            Err(Error::NoConvergence { gap, .. }) => panic!("gap {gap}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn objective_sandwich_and_certificate() {
        let mut rng = seeded_rng(6);
        for _ in 0..20 {
            let t = rng.random_range(1..6);
            let n = rng.random_range(4..30);
            let alpha = [0.1f64, 0.25, 0.5, 1.0][rng.random_range(0..4)].max(1.0 / n as f64);
            let l = LossMatrix::new(
                (0..t).map(|_| (0..n).map(|_| f64::from(rng.random_bool(0.3))).collect()).collect(),
            )
            .unwrap();
            let beta = rng.random_range(1.0..50.0);
            let opts = RegularizedOptions::default();
            let sol = solve_regularized_dual(&l, alpha, beta, opts, None).unwrap();
            let gamma = solve_dual(&l, alpha).unwrap().gamma;
            assert!(sol.gap_estimate <= opts.tol);
            assert!(sol.objective >= gamma - (n as f64).ln() / beta - 1e-9);
            assert!(sol.objective <= gamma + opts.tol + 1e-9);
            let h = sol.weights.entropy();
            assert!(h >= -1e-12 && h <= (n as f64).ln() + 1e-12);
            // certified against a brute-force lower bound on the optimum
            let lower = oracle::regularized_dual_lower_bound(&l, alpha, beta);
            assert!(sol.objective - lower <= opts.tol + 1e-6, "{} vs {lower}", sol.objective);
        }
    }
}
