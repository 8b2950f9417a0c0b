//! Boosting loops: regularized alpha-LPBoost, alpha-AdaLPBoost, the
//! AdaBoost+Average and ERM baselines, and re-mixing at a new alpha.

use std::time::Instant;

use crate::cvar::ensemble_cvar;
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::lp::{solve_dual, solve_primal, solve_regularized_dual, RegularizedOptions};
use crate::types::{
    capped_simplex_cap, Algorithm, Dataset, EnsembleModel, LossMatrix, ModelMixture, Provenance, RoundRecord,
    TrainReport,
};

/// Sample-weight update used by the exponential-weight loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WeightUpdate {
    /// `w_i ∝ exp(eta * cumulative loss_i)`.
    #[default]
    Hedge,
    /// AdaBoost's `beta_t = eps_t / (1 - eps_t)` factor on correct samples.
    Classic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostConfig {
    pub alpha: f64,
    pub rounds: usize,
    /// Step size; `None` means `sqrt(8 ln n / T)`.
    pub eta: Option<f64>,
    /// Entropy coefficient; `None` solves the unregularized dual.
    pub beta: Option<f64>,
    pub seed: u64,
    /// Extra uniform-weight learner calls before round 1.
    pub warmup_rounds: usize,
    /// Solve the mixture on training losses instead of validation losses.
    pub lambda_on_train: bool,
    pub update: WeightUpdate,
    pub regularized: RegularizedOptions,
}

impl BoostConfig {
    pub fn new(alpha: f64, rounds: usize) -> Self {
        Self {
            alpha,
            rounds,
            eta: None,
            beta: None,
            seed: 0,
            warmup_rounds: 0,
            lambda_on_train: false,
            update: WeightUpdate::Hedge,
            regularized: RegularizedOptions::default(),
        }
    }

    /// `beta` and `T` from a target accuracy `delta`:
    /// `beta = max(2 ln(1/alpha) / delta, 1/2)` and
    /// `T = ceil(max(32 ln(1/alpha) / delta^2, 8 / delta))`.
    pub fn from_delta(alpha: f64, delta: f64) -> Result<Self> {
        let (beta, rounds) = regularized_schedule(alpha, delta)?;
        Ok(Self {
            beta: Some(beta),
            ..Self::new(alpha, rounds)
        })
    }

    /// Effective step size for `n` training samples.
    pub fn eta_for(&self, n: usize) -> f64 {
        self.eta.unwrap_or_else(|| default_eta(n, self.rounds))
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invariant("BoostConfig", format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if self.rounds == 0 {
            return Err(Error::invariant("BoostConfig", "rounds must be at least 1"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invariant("BoostConfig", format!("eta {eta} must be positive")));
            }
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::invariant("BoostConfig", format!("beta {beta} must be positive")));
            }
        }
        Ok(())
    }
}

pub fn default_eta(n: usize, rounds: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    (8.0 * (n as f64).ln() / rounds.max(1) as f64).sqrt()
}

/// `(beta, T)` for accuracy `delta` at level `alpha`.
pub fn regularized_schedule(alpha: f64, delta: f64) -> Result<(f64, usize)> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invariant("regularized_schedule", format!("alpha {alpha}, delta {delta}")));
    }
    let log = (1.0 / alpha).ln();
    let beta = (2.0 / delta * log).max(0.5);
    let rounds = (32.0 / (delta * delta) * log).max(8.0 / delta).ceil() as usize;
    Ok((beta, rounds.max(1)))
}

fn check_alpha(data: &Dataset, alpha: f64) -> Result<()> {
    capped_simplex_cap(data.len(), alpha).map(|_| ())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn record(round: usize, weighted_loss: f64, gamma: Option<f64>, guarantee: Option<f64>) -> RoundRecord {
    let weighted_loss = weighted_loss.clamp(0.0, 1.0);
    RoundRecord {
        round,
        weighted_loss,
        gamma,
        above_guarantee: guarantee.is_some_and(|g| weighted_loss > g + 1e-12),
    }
}

/// One learner call plus its training losses, with warmup on round 1.
fn query<L: Learner>(
    learner: &mut L,
    train: &Dataset,
    weights: &[f64],
    warmup: usize,
) -> Result<(L::Model, Vec<f64>)> {
    for _ in 0..warmup {
        learner.fit(train, weights)?;
    }
    let model = learner.fit(train, weights)?;
    let losses = learner.losses(&model, train)?;
    if losses.len() != train.len() || losses.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Learner("loss vector must have one entry in [0, 1] per sample".into()));
    }
    Ok((model, losses))
}

fn losses_on<L: Learner>(learner: &L, models: &[L::Model], data: &Dataset) -> Result<LossMatrix> {
    LossMatrix::new(models.iter().map(|m| learner.losses(m, data)).collect::<Result<_>>()?)
}

/// Base models from the exponential-weight loop, before any mixture is chosen.
#[derive(Clone, Debug)]
pub struct HedgePool<M> {
    pub models: Vec<M>,
    pub train_losses: LossMatrix,
    pub rounds: Vec<RoundRecord>,
    pub eta: f64,
}

/// Runs the exponential-weight sample updates on the uncapped simplex.
pub fn hedge_pool<L: Learner>(train: &Dataset, learner: &mut L, cfg: &BoostConfig) -> Result<HedgePool<L::Model>> {
    cfg.validate()?;
    let n = train.len();
    let eta = cfg.eta_for(n);
    let mut log_w = vec![0.0; n];
    let mut weights = vec![1.0 / n as f64; n];
    let mut models = Vec::with_capacity(cfg.rounds);
    let mut train_losses = LossMatrix::empty(n)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for t in 1..=cfg.rounds {
        let warmup = if t == 1 { cfg.warmup_rounds } else { 0 };
        let (model, losses) = query(learner, train, &weights, warmup).map_err(|e| e.at_round(t))?;
        let achieved = dot(&weights, &losses);
        rounds.push(record(t, achieved, None, learner.guarantee()));
        let step = match cfg.update {
            WeightUpdate::Hedge => eta,
            WeightUpdate::Classic => {
                let eps = achieved.clamp(1e-12, 1.0 - 1e-12);
                ((1.0 - eps) / eps).ln()
            }
        };
        for (lw, l) in log_w.iter_mut().zip(&losses) {
            *lw += step * l;
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (w, lw) in weights.iter_mut().zip(&log_w) {
            *w = (lw - max).exp();
            sum += *w;
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        train_losses.push_row(losses).map_err(|e| e.at_round(t))?;
        models.push(model);
    }
    Ok(HedgePool {
        models,
        train_losses,
        rounds,
        eta,
    })
}

struct Finish<'a> {
    val: &'a Dataset,
    cfg: &'a BoostConfig,
    algorithm: Algorithm,
    eta: Option<f64>,
    beta: Option<f64>,
    started: Instant,
}

impl Finish<'_> {
    fn build<L: Learner>(
        &self,
        learner: &L,
        models: Vec<L::Model>,
        train_losses: &LossMatrix,
        rounds: Vec<RoundRecord>,
        mixture: Option<ModelMixture>,
    ) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
        let alpha = self.cfg.alpha;
        let val_losses = losses_on(learner, &models, self.val)?;
        let mixture = match mixture {
            Some(m) => m,
            None if self.cfg.lambda_on_train => solve_primal(train_losses, alpha)?.mixture,
            None => solve_primal(&val_losses, alpha)?.mixture,
        };
        let best_gamma_round = rounds
            .iter()
            .filter_map(|r| r.gamma.map(|g| (r.round, g)))
            .fold(None, |best: Option<(usize, f64)>, (t, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((t, g)),
            })
            .map(|(t, _)| t);
        let report = TrainReport {
            alpha,
            train_cvar: ensemble_cvar(train_losses, &mixture, alpha)?,
            val_cvar: ensemble_cvar(&val_losses, &mixture, alpha)?,
            rounds,
            best_gamma_round,
            seconds: self.started.elapsed().as_secs_f64(),
        };
        let provenance = Provenance {
            algorithm: self.algorithm,
            alpha,
            eta: self.eta,
            beta: self.beta,
            seed: self.cfg.seed,
        };
        Ok((EnsembleModel::new(models, mixture, provenance)?, report))
    }
}

/// Regularized alpha-LPBoost. Sample weights come from the capped dual on
/// training losses (entropy-regularized when `cfg.beta` is set); the mixture
/// is solved on validation losses after the last round.
pub fn run_reg_lpboost<L: Learner>(
    train: &Dataset,
    val: &Dataset,
    learner: &mut L,
    cfg: &BoostConfig,
) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
    cfg.validate()?;
    check_alpha(train, cfg.alpha)?;
    check_alpha(val, cfg.alpha)?;
    let started = Instant::now();
    let n = train.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut models = Vec::with_capacity(cfg.rounds);
    let mut train_losses = LossMatrix::empty(n)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut warm: Option<Vec<f64>> = None;
    for t in 1..=cfg.rounds {
        let warmup = if t == 1 { cfg.warmup_rounds } else { 0 };
        let (model, losses) = query(learner, train, &weights, warmup).map_err(|e| e.at_round(t))?;
        let achieved = dot(&weights, &losses);
        train_losses.push_row(losses).map_err(|e| e.at_round(t))?;
        models.push(model);
        let gamma = match cfg.beta {
            None => {
                let d = solve_dual(&train_losses, cfg.alpha).map_err(|e| e.at_round(t))?;
                weights = d.weights.values().to_vec();
                d.gamma
            }
            Some(beta) => {
                let d = solve_regularized_dual(&train_losses, cfg.alpha, beta, cfg.regularized, warm.as_deref())
                    .map_err(|e| e.at_round(t))?;
                weights = d.weights.values().to_vec();
                warm = Some(d.lambda);
                d.objective
            }
        };
        rounds.push(record(t, achieved, Some(gamma), learner.guarantee()));
    }
    Finish {
        val,
        cfg,
        algorithm: Algorithm::RegLpBoost,
        eta: None,
        beta: cfg.beta,
        started,
    }
    .build(learner, models, &train_losses, rounds, None)
}

/// alpha-AdaLPBoost: exponential-weight training, then the mixture with the
/// lowest validation CVaR at `cfg.alpha`.
pub fn run_adalpboost<L: Learner>(
    train: &Dataset,
    val: &Dataset,
    learner: &mut L,
    cfg: &BoostConfig,
) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
    check_alpha(train, cfg.alpha)?;
    check_alpha(val, cfg.alpha)?;
    let started = Instant::now();
    let pool = hedge_pool(train, learner, cfg)?;
    finish_pool(val, learner, cfg, pool, Algorithm::AdaLpBoost, started)
}

/// AdaBoost+Average: exponential-weight training with a uniform mixture.
/// `val` is only used for the report.
pub fn run_adaboost_average<L: Learner>(
    train: &Dataset,
    val: &Dataset,
    learner: &mut L,
    cfg: &BoostConfig,
) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
    check_alpha(train, cfg.alpha)?;
    check_alpha(val, cfg.alpha)?;
    let started = Instant::now();
    let pool = hedge_pool(train, learner, cfg)?;
    finish_pool(val, learner, cfg, pool, Algorithm::AdaBoostAverage, started)
}

/// Turns a finished pool into the adalp (LP mixture), adaavg (uniform) or
/// erm (first model only) ensemble.
pub fn finish_pool<L: Learner>(
    val: &Dataset,
    learner: &L,
    cfg: &BoostConfig,
    pool: HedgePool<L::Model>,
    algorithm: Algorithm,
    started: Instant,
) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
    let HedgePool {
        mut models,
        mut train_losses,
        mut rounds,
        eta,
    } = pool;
    let finish = Finish {
        val,
        cfg,
        algorithm,
        eta: Some(eta),
        beta: None,
        started,
    };
    match algorithm {
        Algorithm::AdaLpBoost => finish.build(learner, models, &train_losses, rounds, None),
        Algorithm::AdaBoostAverage => {
            let mixture = ModelMixture::uniform(models.len())?;
            finish.build(learner, models, &train_losses, rounds, Some(mixture))
        }
        Algorithm::Erm => {
            models.truncate(1);
            rounds.truncate(1);
            train_losses = train_losses.prefix(1)?;
            let finish = Finish { eta: None, ..finish };
            finish.build(learner, models, &train_losses, rounds, Some(ModelMixture::point_mass(1, 0)?))
        }
        Algorithm::RegLpBoost => Err(Error::invariant("finish_pool", "reglp does not use exponential weights")),
    }
}

/// The deterministic baseline: one learner call on uniform weights.
pub fn run_erm<L: Learner>(
    train: &Dataset,
    val: &Dataset,
    learner: &mut L,
    alpha: f64,
) -> Result<(EnsembleModel<L::Model>, TrainReport)> {
    check_alpha(train, alpha)?;
    check_alpha(val, alpha)?;
    let started = Instant::now();
    let cfg = BoostConfig::new(alpha, 1);
    let pool = hedge_pool(train, learner, &cfg)?;
    finish_pool(val, learner, &cfg, pool, Algorithm::Erm, started)
}

/// Re-solves the mixture of an existing ensemble at `new_alpha` on `val`.
/// The base models are reused unchanged and the learner is never fitted.
pub fn remix<L: Learner>(
    ensemble: &EnsembleModel<L::Model>,
    learner: &L,
    val: &Dataset,
    new_alpha: f64,
) -> Result<EnsembleModel<L::Model>>
where
    L::Model: Clone,
{
    check_alpha(val, new_alpha)?;
    let losses = losses_on(learner, ensemble.base_models(), val)?;
    let mixture = solve_primal(&losses, new_alpha)?.mixture;
    ensemble.with_mixture(mixture, new_alpha)
}

/// A synthetic learner that answers each weighting with the harshest loss
/// vector allowed by a weighted-loss budget `g`: loss 1 on samples in
/// increasing weight order (lowest index first on ties) until the budget
/// binds, a fraction on the boundary sample, 0 elsewhere.
///
/// Its "models" are the loss vectors themselves, so it only makes sense on
/// the dataset it was fitted on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversarialOracle {
    g: f64,
}

impl AdversarialOracle {
    pub fn new(g: f64) -> Result<Self> {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::invariant("AdversarialOracle", format!("guarantee {g} not in (0, 1]")));
        }
        Ok(Self { g })
    }

    pub fn respond(&self, weights: &[f64]) -> Vec<f64> {
        let n = weights.len();
        if self.g >= 1.0 {
            return vec![1.0; n];
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
        let mut out = vec![0.0; n];
        let mut spent = 0.0;
        for i in order {
            let w = weights[i];
            if spent + w <= self.g {
                out[i] = 1.0;
                spent += w;
            } else {
                out[i] = ((self.g - spent) / w).clamp(0.0, 1.0);
                break;
            }
        }
        out
    }
}

impl Learner for AdversarialOracle {
    type Model = Vec<f64>;

    fn fit(&mut self, train: &Dataset, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != train.len() {
            return Err(Error::DimensionMismatch {
                context: "sample weights",
                expected: train.len(),
                got: weights.len(),
            });
        }
        Ok(self.respond(weights))
    }

    fn losses(&self, model: &Vec<f64>, data: &Dataset) -> Result<Vec<f64>> {
        if model.len() != data.len() {
            return Err(Error::DimensionMismatch {
                context: "adversarial loss vector",
                expected: data.len(),
                got: model.len(),
            });
        }
        Ok(model.clone())
    }

    fn guarantee(&self) -> Option<f64> {
        Some(self.g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvar::{deterministic_identity, mean};
    use crate::learner::{zero_one_losses, BaseLearner};
    use crate::oracle::min_cvar_on_grid_t2;
    use crate::types::seeded_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Dataset whose rows are only placeholders for the oracle learner.
    fn blank(n: usize) -> Dataset {
        Dataset::new("blank", (0..n).map(|i| vec![i as f64]).collect(), vec![0; n]).unwrap()
    }

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = vec![];
        let mut labels = vec![];
        for i in 0..n {
            let group = usize::from(i % 5 == 0);
            let x = vec![noise.sample(&mut rng) + 4.0 * group as f64, noise.sample(&mut rng)];
            let y = if group == 0 { usize::from(x[0] > 0.0) } else { usize::from(x[1] > 0.0) };
            let y = if rng.random_bool(0.05) { 1 - y } else { y };
            rows.push(x);
            labels.push(y);
        }
        Dataset::new("blobs", rows, labels).unwrap()
    }

    /// Replays fixed loss rows, one per call, recording the weights it saw.
    struct Scripted {
        rows: Vec<Vec<f64>>,
        seen: Vec<Vec<f64>>,
    }

    impl Learner for Scripted {
        type Model = Vec<f64>;

        fn fit(&mut self, _: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
            self.seen.push(w.to_vec());
            Ok(self.rows[(self.seen.len() - 1) % self.rows.len()].clone())
        }

        fn losses(&self, m: &Vec<f64>, _: &Dataset) -> Result<Vec<f64>> {
            Ok(m.clone())
        }
    }

    #[test]
    fn hedge_update_by_hand() {
        let d = blank(4);
        let mut l = Scripted {
            rows: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 1.0]],
            seen: vec![],
        };
        let cfg = BoostConfig {
            eta: Some(1.0),
            ..BoostConfig::new(0.5, 2)
        };
        hedge_pool(&d, &mut l, &cfg).unwrap();
        let e = std::f64::consts::E;
        assert_eq!(l.seen[0], vec![0.25; 4]);
        let want = [e / (e + 3.0), 1.0 / (e + 3.0), 1.0 / (e + 3.0), 1.0 / (e + 3.0)];
        for (a, b) in l.seen[1].iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_models_keep_weights_uniform() {
        let d = blank(5);
        let mut l = Scripted { rows: vec![vec![0.0; 5]], seen: vec![] };
        let (ens, report) = run_adalpboost(&d, &d, &mut l, &BoostConfig::new(0.2, 4)).unwrap();
        assert!(l.seen.iter().all(|w| w.iter().all(|&v| (v - 0.2).abs() < 1e-15)));
        assert_eq!(ens.len(), 4);
        assert_eq!(report.train_cvar, 0.0);
        assert_eq!(report.val_cvar, 0.0);
    }

    #[test]
    fn log_domain_update_survives_many_rounds() {
        let d = blank(3);
        let mut l = Scripted { rows: vec![vec![1.0, 0.0, 0.0]], seen: vec![] };
        let cfg = BoostConfig {
            eta: Some(50.0),
            ..BoostConfig::new(1.0, 100)
        };
        hedge_pool(&d, &mut l, &cfg).unwrap();
        let last = l.seen.last().unwrap();
        assert!(last.iter().all(|v| v.is_finite()));
        assert!((last[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adversary_examples() {
        let a = AdversarialOracle::new(0.5).unwrap();
        assert_eq!(a.respond(&[0.25; 4]), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(AdversarialOracle::new(1.0).unwrap().respond(&[0.1, 0.9]), vec![1.0, 1.0]);
        let l = a.respond(&[0.6, 0.4]);
        assert_eq!(l[1], 1.0);
        assert!((l[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!(AdversarialOracle::new(0.0).is_err());
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let g = rng.random_range(0.01..0.99);
            let l = AdversarialOracle::new(g).unwrap().respond(&w);
            assert!(dot(&w, &l) <= g + 1e-12);
            assert!(l.iter().all(|v| (0.0..=1.0).contains(v)));
            // uniform mean is at least g: cheapest samples carry the loss
            assert!(mean(&l) >= g - 1e-12);
        }
    }

    #[test]
    fn no_algorithm_beats_the_guarantee() {
        let d = blank(20);
        for g in [0.1, 0.3] {
            for alpha in [0.1, 0.5, 1.0] {
                let cfg = BoostConfig {
                    lambda_on_train: true,
                    ..BoostConfig::new(alpha, 15)
                };
                let mut a = AdversarialOracle::new(g).unwrap();
                let (_, r1) = run_adalpboost(&d, &d, &mut a, &cfg).unwrap();
                let (_, r2) = run_adaboost_average(&d, &d, &mut a, &cfg).unwrap();
                let (_, r3) = run_reg_lpboost(&d, &d, &mut a, &cfg).unwrap();
                let reg = BoostConfig { beta: Some(20.0), ..cfg.clone() };
                let (_, r4) = run_reg_lpboost(&d, &d, &mut a, &reg).unwrap();
                let (_, r5) = run_erm(&d, &d, &mut a, alpha).unwrap();
                for r in [r1, r2, r3, r4, r5] {
                    assert!(r.train_cvar >= g - 1e-9, "{} < {g}", r.train_cvar);
                    assert!(r.rounds.iter().all(|x| !x.above_guarantee));
                }
            }
        }
    }

    #[test]
    fn average_meets_its_rate() {
        for n in [16, 64] {
            let d = blank(n);
            for g in [0.1, 0.3] {
                for rounds in [1, 7, 40] {
                    let mut a = AdversarialOracle::new(g).unwrap();
                    let pool = hedge_pool(&d, &mut a, &BoostConfig::new(1.0, rounds)).unwrap();
                    let worst = (0..n)
                        .map(|i| pool.train_losses.rows().map(|r| r[i]).sum::<f64>() / rounds as f64)
                        .fold(0.0, f64::max);
                    assert!(worst <= g + ((n as f64).ln() / (2.0 * rounds as f64)).sqrt() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn reglp_single_round_is_the_warm_model() {
        let d = blobs(60, 1);
        let mut l = BaseLearner::stumps();
        let cfg = BoostConfig {
            beta: Some(5.0),
            ..BoostConfig::new(0.2, 1)
        };
        let (ens, report) = run_reg_lpboost(&d, &d, &mut l, &cfg).unwrap();
        assert_eq!(ens.mixture().values(), &[1.0]);
        let losses = zero_one_losses(&ens.base_models()[0], &d).unwrap();
        assert!((report.train_cvar - deterministic_identity(mean(&losses), 0.2)).abs() < 1e-12);
        assert_eq!(report.rounds.len(), 1);
        assert_eq!(report.best_gamma_round, Some(1));
    }

    #[test]
    fn reglp_beats_a_single_stump() {
        let d = blobs(200, 2);
        let mut l = BaseLearner::stumps();
        let (erm, erm_report) = run_erm(&d, &d, &mut l, 0.2).unwrap();
        assert_eq!(erm.len(), 1);
        for beta in [None, Some(20.0)] {
            let cfg = BoostConfig { beta, ..BoostConfig::new(0.2, 10) };
            let (ens, report) = run_reg_lpboost(&d, &d, &mut l, &cfg).unwrap();
            assert_eq!(ens.len(), 10);
            assert_eq!(report.rounds.len(), 10);
            assert!(report.train_cvar < erm_report.train_cvar - 1e-9);
        }
    }

    #[test]
    fn adalp_dominates_its_baselines() {
        let train = blobs(150, 3);
        let val = blobs(80, 4);
        let mut l = BaseLearner::stumps();
        for alpha in [0.1, 0.3, 1.0] {
            let cfg = BoostConfig::new(alpha, 12);
            let pool = hedge_pool(&train, &mut l, &cfg).unwrap();
            let now = Instant::now();
            let (adalp, r) = finish_pool(&val, &l, &cfg, pool.clone(), Algorithm::AdaLpBoost, now).unwrap();
            let (_, avg) = finish_pool(&val, &l, &cfg, pool.clone(), Algorithm::AdaBoostAverage, now).unwrap();
            let (_, erm) = finish_pool(&val, &l, &cfg, pool, Algorithm::Erm, now).unwrap();
            assert!(r.val_cvar <= avg.val_cvar.min(erm.val_cvar) + 1e-6);
            assert_eq!(adalp.provenance().algorithm, Algorithm::AdaLpBoost);
            // the standalone runs agree with the shared pool
            let (_, again) = run_adaboost_average(&train, &val, &mut l, &cfg).unwrap();
            assert_eq!(again.outcome(), avg.outcome());
        }
    }

    #[test]
    fn erm_equals_one_round_average() {
        let d = blobs(100, 5);
        let mut l = BaseLearner::stumps();
        let (a, ra) = run_erm(&d, &d, &mut l, 0.3).unwrap();
        let (b, rb) = run_adaboost_average(&d, &d, &mut l, &BoostConfig::new(0.3, 1)).unwrap();
        assert_eq!(a.base_models(), b.base_models());
        assert_eq!(ra.train_cvar, rb.train_cvar);
        let losses = zero_one_losses(&a.base_models()[0], &d).unwrap();
        assert!((ra.train_cvar - deterministic_identity(mean(&losses), 0.3)).abs() < 1e-12);
    }

    #[test]
    fn perfect_learner_gives_zero_risk() {
        let d = Dataset::new("sep", (0..30).map(|i| vec![i as f64]).collect(), (0..30).map(|i| usize::from(i >= 15)).collect())
            .unwrap();
        let mut l = BaseLearner::stumps();
        for alpha in [0.1, 0.5, 1.0] {
            let (_, r) = run_adaboost_average(&d, &d, &mut l, &BoostConfig::new(alpha, 5)).unwrap();
            assert_eq!(r.train_cvar, 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let d = blobs(120, 6);
        let cfg = BoostConfig {
            beta: Some(10.0),
            ..BoostConfig::new(0.2, 8)
        };
        let run = || run_reg_lpboost(&d, &d, &mut BaseLearner::stumps(), &cfg).unwrap();
        let (e1, r1) = run();
        let (e2, r2) = run();
        assert_eq!(e1, e2);
        assert_eq!(r1.outcome(), r2.outcome());
    }

    #[test]
    fn remix_properties() {
        let train = blobs(120, 7);
        let val = blobs(60, 8);
        let mut l = BaseLearner::stumps();
        let (ens, report) = run_adalpboost(&train, &val, &mut l, &BoostConfig::new(0.2, 10)).unwrap();
        let same = remix(&ens, &l, &val, 0.2).unwrap();
        let val_losses = losses_on(&l, ens.base_models(), &val).unwrap();
        assert!((ensemble_cvar(&val_losses, same.mixture(), 0.2).unwrap() - report.val_cvar).abs() < 1e-8);
        assert_eq!(same.base_models(), ens.base_models());

        let mut previous = f64::INFINITY;
        for alpha in [0.1, 0.2, 0.4, 0.7, 1.0] {
            let m = remix(&ens, &l, &val, alpha).unwrap();
            assert_eq!(m.base_models(), ens.base_models());
            let risk = ensemble_cvar(&val_losses, m.mixture(), alpha).unwrap();
            assert!(risk <= previous + 1e-9);
            previous = risk;
        }

        // alpha = 1 minimizes the average loss; check against a grid for T = 2
        let two = LossMatrix::new(vec![val_losses.row(0).to_vec(), val_losses.row(1).to_vec()]).unwrap();
        let small = EnsembleModel::new(ens.base_models()[..2].to_vec(), ModelMixture::uniform(2).unwrap(), ens.provenance().clone())
            .unwrap();
        let m = remix(&small, &l, &val, 1.0).unwrap();
        let got = ensemble_cvar(&two, m.mixture(), 1.0).unwrap();
        assert!((got - min_cvar_on_grid_t2(&two, 1.0, 1e-3).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn schedule_from_delta() {
        let (beta, rounds) = regularized_schedule(0.25, 0.3).unwrap();
        assert!((beta - 2.0 / 0.3 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(rounds, (32.0 / 0.09 * 4f64.ln()).ceil() as usize);
        let (beta, rounds) = regularized_schedule(1.0, 0.5).unwrap();
        assert_eq!(beta, 0.5);
        assert_eq!(rounds, 16);
        assert!((default_eta(64, 50) - (8.0 * 64f64.ln() / 50.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_the_round() {
        struct Failing(usize);
        impl Learner for Failing {
            type Model = Vec<f64>;
            fn fit(&mut self, d: &Dataset, _: &[f64]) -> Result<Vec<f64>> {
                self.0 += 1;
                if self.0 == 3 {
                    Err(Error::Learner("boom".into()))
                } else {
                    Ok(vec![0.5; d.len()])
                }
            }
            fn losses(&self, m: &Vec<f64>, _: &Dataset) -> Result<Vec<f64>> {
                Ok(m.clone())
            }
        }
        let d = blank(10);
        let err = run_adalpboost(&d, &d, &mut Failing(0), &BoostConfig::new(0.5, 5)).unwrap_err();
        assert!(matches!(err, Error::Round { round: 3, .. }), "{err}");
        assert!(run_adalpboost(&d, &d, &mut Failing(0), &BoostConfig::new(0.01, 5)).is_err());
    }
}
