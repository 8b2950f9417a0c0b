//! Acceptance criteria 1-10. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr (not captured by the harness) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use boosted_cvar::artifact::RunArtifact;
use boosted_cvar::boost::{finish_pool, hedge_pool, run_adalpboost, run_reg_lpboost, AdversarialOracle, BoostConfig};
use boosted_cvar::cvar::{cvar_dual, cvar_sorted, deterministic_identity, ensemble_cvar, ensemble_losses, mean};
use boosted_cvar::data::{split, synth_subpop, SplitSpec};
use boosted_cvar::learner::{ensemble_loss_matrix, BaseLearner};
use boosted_cvar::lp::{solve_dual, solve_primal};
use boosted_cvar::oracle::{cvar_by_lp, min_cvar_on_grid_t2};
use boosted_cvar::{seeded_rng, Algorithm, Dataset, LossMatrix, ModelMixture, SeededRng};

fn report(id: u32, passed: bool, elapsed: Duration, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let line = format!("criterion {id}: {verdict} ({:.2}s) {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(passed, "criterion {id} failed: {detail}");
}

fn random_rows(rng: &mut SeededRng, t: usize, n: usize, binary: bool) -> LossMatrix {
    LossMatrix::new(
        (0..t)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if binary {
                            f64::from(u8::from(rng.random_bool(0.3)))
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

fn random_mixture(rng: &mut SeededRng, t: usize) -> ModelMixture {
    let raw: Vec<f64> = (0..t).map(|_| rng.random::<f64>() + 1e-6).collect();
    let s: f64 = raw.iter().sum();
    ModelMixture::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

fn blank(n: usize) -> Dataset {
    Dataset::new("blank", (0..n).map(|i| vec![i as f64]).collect(), vec![0; n]).unwrap()
}

#[test]
fn criterion_01_deterministic_identity() {
    let started = Instant::now();
    let mut rng = seeded_rng(101);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let p = rng.random::<f64>();
        let losses: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect();
        for alpha in [0.05, 0.1, 0.5, 1.0] {
            if alpha * (n as f64) < 1.0 {
                continue;
            }
            let got = cvar_sorted(&losses, alpha).unwrap();
            worst = worst.max((got - deterministic_identity(mean(&losses), alpha)).abs());
            cases += 1;
        }
    }
    let elapsed = started.elapsed();
    let passed = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    report(1, passed, elapsed, &format!("{cases} cases, max deviation {worst:e} (tol 1e-12)"));
}

#[test]
fn criterion_02_cvar_triple_agreement() {
    let started = Instant::now();
    let mut rng = seeded_rng(202);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=60);
        let losses: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let alpha = rng.random_range(1.0 / n as f64..=1.0);
        let sorted = cvar_sorted(&losses, alpha).unwrap();
        let dual = cvar_dual(&losses, alpha).unwrap().risk;
        let lp = cvar_by_lp(&losses, alpha).unwrap();
        worst = worst.max((sorted - dual).abs()).max((sorted - lp).abs()).max((dual - lp).abs());
    }
    let elapsed = started.elapsed();
    let passed = worst <= 1e-8 && elapsed < Duration::from_secs(10);
    report(2, passed, elapsed, &format!("200 vectors, max disagreement {worst:e} (tol 1e-8)"));
}

#[test]
fn criterion_03_strong_duality() {
    let started = Instant::now();
    let mut rng = seeded_rng(303);
    let mut duality_gap = 0.0f64;
    for _ in 0..200 {
        let t = rng.random_range(1..=8);
        let n = rng.random_range(1..=40);
        let binary = rng.random_bool(0.5);
        let l = random_rows(&mut rng, t, n, binary);
        let alpha = [0.1f64, 0.25, 0.5, 1.0][rng.random_range(0..4)].max(1.0 / n as f64);
        let rho = solve_primal(&l, alpha).unwrap().objective;
        let gamma = solve_dual(&l, alpha).unwrap().gamma;
        duality_gap = duality_gap.max((rho - gamma).abs());
    }
    let mut grid_gap = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=40);
        let l = random_rows(&mut rng, 2, n, false);
        let alpha = [0.1f64, 0.25, 0.5, 1.0][rng.random_range(0..4)].max(1.0 / n as f64);
        let rho = solve_primal(&l, alpha).unwrap().objective;
        let grid = min_cvar_on_grid_t2(&l, alpha, 1e-3).unwrap();
        grid_gap = grid_gap.max((1.0 - rho - grid).abs());
    }
    let elapsed = started.elapsed();
    let passed = duality_gap <= 1e-6 && grid_gap <= 1e-4 && elapsed < Duration::from_secs(60);
    report(
        3,
        passed,
        elapsed,
        &format!("max |rho-gamma| {duality_gap:e} (tol 1e-6), max |1-rho - grid| {grid_gap:e} (tol 1e-4)"),
    );
}

#[test]
fn criterion_04_randomization_dominance() {
    let started = Instant::now();
    let mut rng = seeded_rng(404);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let t = rng.random_range(1..=10);
        let n = rng.random_range(1..=100);
        let l = random_rows(&mut rng, t, n, true);
        let mix = random_mixture(&mut rng, t);
        let avg = mean(&ensemble_losses(&l, &mix).unwrap());
        for alpha in [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0] {
            if alpha * (n as f64) < 1.0 {
                continue;
            }
            let excess = ensemble_cvar(&l, &mix, alpha).unwrap() - deterministic_identity(avg, alpha);
            worst = worst.max(excess);
        }
    }
    let elapsed = started.elapsed();
    let passed = worst <= 1e-12 && elapsed < Duration::from_secs(5);
    report(4, passed, elapsed, &format!("500 ensembles, max CVaR - min(1, mean/alpha) = {worst:e} (tol 1e-12)"));
}

#[test]
fn criterion_05_average_rate() {
    let started = Instant::now();
    let mut violations = 0;
    let mut runs = 0;
    let mut tightest = f64::INFINITY;
    for n in [16, 64, 256] {
        let d = blank(n);
        for g in [0.1, 0.3] {
            for rounds in 1..=200 {
                let mut adversary = AdversarialOracle::new(g).unwrap();
                let pool = hedge_pool(&d, &mut adversary, &BoostConfig::new(1.0, rounds)).unwrap();
                let worst = (0..n)
                    .map(|i| pool.train_losses.rows().map(|r| r[i]).sum::<f64>() / rounds as f64)
                    .fold(0.0, f64::max);
                let bound = g + ((n as f64).ln() / (2.0 * rounds as f64)).sqrt();
                tightest = tightest.min(bound - worst);
                violations += usize::from(worst > bound);
                runs += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    let passed = violations == 0 && elapsed < Duration::from_secs(60);
    report(5, passed, elapsed, &format!("{runs} runs, {violations} violations, smallest slack {tightest:.4}"));
}

#[test]
fn criterion_06_regularized_rate() {
    let started = Instant::now();
    let (alpha, delta, g, n) = (0.25, 0.3, 0.2, 64);
    let d = blank(n);
    let cfg = BoostConfig {
        lambda_on_train: true,
        ..BoostConfig::from_delta(alpha, delta).unwrap()
    };
    let (_, r) = run_reg_lpboost(&d, &d, &mut AdversarialOracle::new(g).unwrap(), &cfg).unwrap();
    let elapsed = started.elapsed();
    let passed = r.train_cvar <= g + delta && elapsed < Duration::from_secs(120);
    report(
        6,
        passed,
        elapsed,
        &format!(
            "beta {:.3}, T {}, training CVaR {:.4} <= {:.2}",
            cfg.beta.unwrap(),
            cfg.rounds,
            r.train_cvar,
            g + delta
        ),
    );
}

const GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// One seed of the synthetic subpopulation experiment.
struct SeedRun {
    /// Per grid alpha: validation CVaR of adalp, adaavg, erm.
    val: Vec<[f64; 3]>,
    /// Per grid alpha: test CVaR of adalp, erm, reglp.
    test: Vec<[f64; 3]>,
    test_avg_adalp_at_1: f64,
    test_avg_erm_at_1: f64,
    /// Test CVaR at alpha = 0.1 of adalp restricted to the first 30 rounds.
    test_t30: f64,
}

struct Experiment {
    runs: Vec<SeedRun>,
    elapsed: Duration,
    reglp_elapsed: Duration,
}

fn run_seed(seed: u64) -> (SeedRun, Duration, Duration) {
    let started = Instant::now();
    let (data, _) = synth_subpop(2000, &[0.9, 0.1], &[0.0, 0.0], 2, seed).unwrap();
    let (test, _) = synth_subpop(2000, &[0.9, 0.1], &[0.0, 0.0], 2, seed + 1000).unwrap();
    let (train, val) = split(&data, &SplitSpec::holdout(0.1, seed)).unwrap();
    let mut learner = BaseLearner::stumps();
    let cfg = BoostConfig {
        eta: Some(1.0),
        seed,
        ..BoostConfig::new(0.1, 100)
    };
    let pool = hedge_pool(&train, &mut learner, &cfg).unwrap();
    let mut out = SeedRun {
        val: vec![],
        test: vec![],
        test_avg_adalp_at_1: 0.0,
        test_avg_erm_at_1: 0.0,
        test_t30: 0.0,
    };
    let mut ensembles = vec![];
    for alpha in GRID {
        let c = BoostConfig { alpha, ..cfg.clone() };
        let now = Instant::now();
        let (lp, lp_r) = finish_pool(&val, &learner, &c, pool.clone(), Algorithm::AdaLpBoost, now).unwrap();
        let (_, avg_r) = finish_pool(&val, &learner, &c, pool.clone(), Algorithm::AdaBoostAverage, now).unwrap();
        let (erm, erm_r) = finish_pool(&val, &learner, &c, pool.clone(), Algorithm::Erm, now).unwrap();
        out.val.push([lp_r.val_cvar, avg_r.val_cvar, erm_r.val_cvar]);
        ensembles.push((alpha, lp, erm));
    }
    let hedge_elapsed = started.elapsed();
    let reg_started = Instant::now();
    for (alpha, lp, erm) in ensembles {
        let reg_cfg = BoostConfig {
            alpha,
            beta: Some(100.0),
            seed,
            ..BoostConfig::new(alpha, 100)
        };
        let (reg, _) = run_reg_lpboost(&train, &val, &mut BaseLearner::stumps(), &reg_cfg).unwrap();
        let risk = |e: &boosted_cvar::EnsembleModel<_>| {
            let per = ensemble_losses(&ensemble_loss_matrix(e, &test).unwrap(), e.mixture()).unwrap();
            (cvar_sorted(&per, alpha).unwrap(), mean(&per))
        };
        let (lp_test, lp_avg) = risk(&lp);
        let (erm_test, erm_avg) = risk(&erm);
        out.test.push([lp_test, erm_test, risk(&reg).0]);
        if alpha == 1.0 {
            out.test_avg_adalp_at_1 = lp_avg;
            out.test_avg_erm_at_1 = erm_avg;
        }
    }
    let reg_elapsed = reg_started.elapsed();

    // the step size is fixed, so the first 30 rounds are exactly a T = 30 run
    let short = boosted_cvar::boost::HedgePool {
        models: pool.models[..30].to_vec(),
        train_losses: pool.train_losses.prefix(30).unwrap(),
        rounds: pool.rounds[..30].to_vec(),
        eta: pool.eta,
    };
    let (lp30, _) = finish_pool(&val, &learner, &cfg, short, Algorithm::AdaLpBoost, Instant::now()).unwrap();
    let per = ensemble_losses(&ensemble_loss_matrix(&lp30, &test).unwrap(), lp30.mixture()).unwrap();
    out.test_t30 = cvar_sorted(&per, 0.1).unwrap();
    (out, hedge_elapsed, reg_elapsed)
}

fn experiment() -> &'static Experiment {
    static CELL: OnceLock<Experiment> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let results: Vec<(SeedRun, Duration, Duration)> = std::thread::scope(|s| {
            let handles: Vec<_> = SEEDS.iter().map(|&seed| s.spawn(move || run_seed(seed))).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let elapsed = started.elapsed();
        // single-core budget: the work of every seed, summed
        let reglp_elapsed = results.iter().map(|r| r.2).sum();
        let hedge: Duration = results.iter().map(|r| r.1).sum();
        Experiment {
            runs: results.into_iter().map(|r| r.0).collect(),
            elapsed: elapsed.max(hedge),
            reglp_elapsed,
        }
    })
}

fn seed_mean(f: impl Fn(&SeedRun) -> f64) -> f64 {
    let e = experiment();
    e.runs.iter().map(f).sum::<f64>() / e.runs.len() as f64
}

#[test]
fn criterion_07_curve_shape() {
    let e = experiment();
    let mut worst_excess = f64::NEG_INFINITY;
    for run in &e.runs {
        for v in &run.val {
            worst_excess = worst_excess.max(v[0] - v[1].min(v[2]));
        }
    }
    let lp = seed_mean(|r| r.test[0][0]);
    let erm = seed_mean(|r| r.test[0][1]);
    let avg_lp = seed_mean(|r| r.test_avg_adalp_at_1);
    let avg_erm = seed_mean(|r| r.test_avg_erm_at_1);
    let a = worst_excess <= 1e-6;
    let b = erm - lp >= 0.05;
    let c = (avg_lp - avg_erm).abs() <= 0.02;
    let passed = a && b && c && e.elapsed < Duration::from_secs(600);
    report(
        7,
        passed,
        e.elapsed,
        &format!(
            "(a) max val excess over min(ERM, avg) {worst_excess:e}; (b) test CVaR@0.1 adalp {lp:.4} vs ERM {erm:.4} (gain {:.4}); (c) test avg loss adalp {avg_lp:.4} vs ERM {avg_erm:.4}",
            erm - lp
        ),
    );
}

#[test]
fn criterion_08_regularized_matches_unregularized() {
    let e = experiment();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (i, alpha) in GRID.iter().enumerate() {
        let lp = seed_mean(|r| r.test[i][0]);
        let reg = seed_mean(|r| r.test[i][2]);
        if (lp - reg).abs() >= worst.1 {
            worst = (*alpha, (lp - reg).abs());
        }
    }
    let passed = worst.1 <= 0.03 && e.reglp_elapsed < Duration::from_secs(600);
    report(
        8,
        passed,
        e.reglp_elapsed,
        &format!("max seed-averaged test CVaR gap {:.4} at alpha {} (tol 0.03)", worst.1, worst.0),
    );
}

#[test]
fn criterion_09_convergence_after_30_rounds() {
    let e = experiment();
    let t30 = seed_mean(|r| r.test_t30);
    let t100 = seed_mean(|r| r.test[0][0]);
    let passed = (t30 - t100).abs() <= 0.02;
    report(
        9,
        passed,
        e.elapsed,
        &format!("test CVaR@0.1 at T=30 {t30:.4} vs T=100 {t100:.4} (tol 0.02)"),
    );
}

#[test]
fn criterion_10_determinism_and_round_trip() {
    let started = Instant::now();
    let (data, _) = synth_subpop(500, &[0.8, 0.2], &[0.05, 0.1], 3, 77).unwrap();
    let (train, val) = split(&data, &SplitSpec::holdout(0.2, 77)).unwrap();
    let cfg = BoostConfig {
        eta: Some(1.0),
        ..BoostConfig::new(0.2, 25)
    };
    let a = run_adalpboost(&train, &val, &mut BaseLearner::stumps(), &cfg).unwrap();
    let b = run_adalpboost(&train, &val, &mut BaseLearner::stumps(), &cfg).unwrap();
    let reg = BoostConfig {
        beta: Some(50.0),
        ..cfg.clone()
    };
    let c = run_reg_lpboost(&train, &val, &mut BaseLearner::stumps(), &reg).unwrap();
    let d = run_reg_lpboost(&train, &val, &mut BaseLearner::stumps(), &reg).unwrap();
    let deterministic = a.0 == b.0 && a.1.outcome() == b.1.outcome() && c.0 == d.0 && c.1.outcome() == d.1.outcome();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ensemble.txt");
    let artifact = RunArtifact {
        ensemble: a.0,
        class_names: data.class_names().to_vec(),
        report: Some(a.1),
        config: vec![("rounds".into(), "25".into())],
    };
    artifact.save(&path).unwrap();
    let loaded = RunArtifact::load(&path).unwrap();
    let mut rng = seeded_rng(10);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..10.0)).collect();
        for (m, n) in artifact.ensemble.base_models().iter().zip(loaded.ensemble.base_models()) {
            mismatches += usize::from(m.predict(&x).unwrap() != n.predict(&x).unwrap());
        }
    }
    let exact = loaded == artifact && loaded.ensemble.mixture() == artifact.ensemble.mixture();
    let passed = deterministic && exact && mismatches == 0;
    report(
        10,
        passed,
        started.elapsed(),
        &format!("identical reruns: {deterministic}; artifact identical after reload: {exact}; prediction mismatches: {mismatches}/1000 inputs"),
    );
}
