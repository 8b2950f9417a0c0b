//! Oracle cross-checks and invariant sweeps at fixed seeds.

use std::time::Instant;

use rand::Rng;

use boosted_cvar::artifact::RunArtifact;
use boosted_cvar::boost::{hedge_pool, run_adalpboost, run_reg_lpboost, AdversarialOracle, BoostConfig};
use boosted_cvar::cvar::{cvar_dual, cvar_sorted, deterministic_identity, ensemble_cvar, mean};
use boosted_cvar::data::synth_subpop;
use boosted_cvar::learner::BaseLearner;
use boosted_cvar::lp::{
    capped_exponential_weights, regularized_objective, solve_dual, solve_primal, solve_regularized_dual,
    RegularizedOptions,
};
use boosted_cvar::oracle;
use boosted_cvar::{capped_simplex_cap, seeded_rng, Dataset, LossMatrix, ModelMixture, SeededRng};

use crate::{CheckArgs, CliError, CliResult};

const SIGN_NOTE: &str = "note: the entropy-regularized dual is solved with the constraint direction \
<w, l^s> >= 1 - gamma (gamma = max_s (1 - <w, l^s>)), the same direction as the unregularized dual; \
the opposite inequality that appears in one written form of the regularized problem is treated as a sign typo.";

/// Shared state of one check block.
struct Ctx {
    rng: SeededRng,
    /// Added to every computed value; nonzero only for the negative control.
    bump: f64,
}

impl Ctx {
    fn value(&self, x: f64) -> f64 {
        x + self.bump
    }
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: boosted_cvar::Error) -> String {
    err.to_string()
}

fn random_losses(rng: &mut SeededRng, t: usize, n: usize, binary: bool) -> LossMatrix {
    LossMatrix::new(
        (0..t)
            .map(|_| {
                (0..n)
                    .map(|_| if binary { f64::from(u8::from(rng.random_bool(0.3))) } else { rng.random::<f64>() })
                    .collect()
            })
            .collect(),
    )
    .expect("entries in [0, 1]")
}

fn random_alpha(rng: &mut SeededRng, n: usize) -> f64 {
    [0.1f64, 0.25, 0.5, 1.0][rng.random_range(0..4)].max(1.0 / n as f64)
}

fn cvar_identity(c: &mut Ctx) -> Outcome {
    let mut checked = 0;
    for _ in 0..500 {
        let n = c.rng.random_range(1..=200);
        let losses: Vec<f64> = (0..n).map(|_| f64::from(u8::from(c.rng.random_bool(0.2)))).collect();
        for alpha in [0.05, 0.1, 0.5, 1.0] {
            if alpha * (n as f64) < 1.0 {
                continue;
            }
            let got = c.value(cvar_sorted(&losses, alpha).map_err(e)?);
            let want = deterministic_identity(mean(&losses), alpha);
            ensure((got - want).abs() <= 1e-12, || format!("n={n} alpha={alpha}: {got} vs {want}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} cases"))
}

fn cvar_agreement(c: &mut Ctx) -> Outcome {
    for _ in 0..100 {
        let n = c.rng.random_range(1..=30);
        let losses: Vec<f64> = (0..n).map(|_| c.rng.random::<f64>()).collect();
        let alpha = random_alpha(&mut c.rng, n);
        let sorted = c.value(cvar_sorted(&losses, alpha).map_err(e)?);
        let dual = cvar_dual(&losses, alpha).map_err(e)?.risk;
        let lp = oracle::cvar_by_lp(&losses, alpha).map_err(e)?;
        let enumerated = oracle::cvar_by_threshold_enumeration(&losses, alpha);
        for (name, v) in [("dual", dual), ("lp", lp), ("enumeration", enumerated)] {
            ensure((sorted - v).abs() <= 1e-8, || format!("n={n} alpha={alpha}: sorted {sorted} vs {name} {v}"))?;
        }
    }
    Ok("100 cases".into())
}

fn strong_duality(c: &mut Ctx) -> Outcome {
    for _ in 0..100 {
        let t = c.rng.random_range(1..=8);
        let n = c.rng.random_range(2..=40);
        let binary = c.rng.random_bool(0.5);
        let l = random_losses(&mut c.rng, t, n, binary);
        let alpha = random_alpha(&mut c.rng, n);
        let d = solve_dual(&l, alpha).map_err(e)?;
        let p = solve_primal(&l, alpha).map_err(e)?;
        let rho = c.value(p.objective);
        ensure((rho - d.gamma).abs() <= 1e-6, || format!("T={t} n={n}: rho {rho} vs gamma {}", d.gamma))?;
        let oracle = oracle::lpboost_dual_by_lp(&l, alpha).map_err(e)?;
        ensure((d.gamma - oracle).abs() <= 1e-8, || format!("gamma {} vs oracle {oracle}", d.gamma))?;
        let risk = ensemble_cvar(&l, &p.mixture, alpha).map_err(e)?;
        ensure((1.0 - rho - risk).abs() <= 1e-6, || format!("1 - rho {} vs CVaR {risk}", 1.0 - rho))?;
    }
    for _ in 0..20 {
        let n = c.rng.random_range(2..=30);
        let l = random_losses(&mut c.rng, 2, n, false);
        let alpha = random_alpha(&mut c.rng, n);
        let p = solve_primal(&l, alpha).map_err(e)?;
        let grid = oracle::min_cvar_on_grid_t2(&l, alpha, 1e-3).map_err(e)?;
        let got = c.value(1.0 - p.objective);
        ensure(got <= grid + 1e-9 && grid - got <= 1e-4, || format!("1 - rho {got} vs grid {grid}"))?;
    }
    Ok("100 duality + 20 grid cases".into())
}

fn dominance(c: &mut Ctx) -> Outcome {
    for _ in 0..500 {
        let t = c.rng.random_range(1..=6);
        let n = c.rng.random_range(1..=50);
        let l = random_losses(&mut c.rng, t, n, true);
        let raw: Vec<f64> = (0..t).map(|_| c.rng.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        let mix = ModelMixture::new(raw.iter().map(|v| v / s).collect()).map_err(e)?;
        for alpha in [0.05, 0.1, 0.25, 0.5, 1.0] {
            if alpha * (n as f64) < 1.0 {
                continue;
            }
            let risk = c.value(ensemble_cvar(&l, &mix, alpha).map_err(e)?);
            let avg = mean(&boosted_cvar::cvar::ensemble_losses(&l, &mix).map_err(e)?);
            let bound = deterministic_identity(avg, alpha);
            ensure(risk <= bound + 1e-12, || format!("CVaR {risk} above deterministic {bound}"))?;
        }
    }
    Ok("500 ensembles".into())
}

fn capped_weights(c: &mut Ctx) -> Outcome {
    for _ in 0..5 {
        let n = c.rng.random_range(2..=8);
        let scores: Vec<f64> = (0..n).map(|_| c.rng.random::<f64>()).collect();
        let alpha = random_alpha(&mut c.rng, n);
        let cap = capped_simplex_cap(n, alpha).map_err(e)?;
        let beta = [0.5, 3.0, 20.0][c.rng.random_range(0..3)];
        let w = capped_exponential_weights(&scores, beta, cap).map_err(e)?;
        ensure((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, || "weights do not sum to 1".into())?;
        ensure(w.iter().all(|&x| x <= cap + 1e-12), || "cap violated".into())?;
        let got = c.value(regularized_objective(&w, &scores, beta));
        let want = oracle::capped_entropy_max_by_ascent(&scores, beta, cap);
        ensure((got - want).abs() <= 1e-6, || format!("objective {got} vs ascent {want}"))?;
    }
    Ok("5 cases".into())
}

fn regularized(c: &mut Ctx) -> Outcome {
    let opts = RegularizedOptions::default();
    for _ in 0..20 {
        let t = c.rng.random_range(1..=6);
        let n = c.rng.random_range(2..=30);
        let l = random_losses(&mut c.rng, t, n, false);
        let alpha = random_alpha(&mut c.rng, n);
        let beta = [1.0, 10.0, 100.0][c.rng.random_range(0..3)];
        let gamma = solve_dual(&l, alpha).map_err(e)?.gamma;
        let r = solve_regularized_dual(&l, alpha, beta, opts, None).map_err(e)?;
        let obj = c.value(r.objective);
        let lo = gamma - (n as f64).ln() / beta - 1e-9;
        ensure(obj >= lo && obj <= gamma + opts.tol, || {
            format!("objective {obj} outside [{lo}, {}]", gamma + opts.tol)
        })?;
        ensure(r.gap_estimate <= opts.tol, || format!("gap {} above tol", r.gap_estimate))?;
    }
    Ok("20 cases".into())
}

fn blank(n: usize) -> Dataset {
    Dataset::new("blank", (0..n).map(|i| vec![i as f64]).collect(), vec![0; n]).expect("valid dataset")
}

fn hedge_rate(c: &mut Ctx) -> Outcome {
    let mut runs = 0;
    for n in [16, 64, 256] {
        let d = blank(n);
        for g in [0.1, 0.3] {
            for rounds in (1..=200).step_by(7) {
                let mut adv = AdversarialOracle::new(g).map_err(e)?;
                let pool = hedge_pool(&d, &mut adv, &BoostConfig::new(1.0, rounds)).map_err(e)?;
                let worst = (0..n)
                    .map(|i| pool.train_losses.rows().map(|r| r[i]).sum::<f64>() / rounds as f64)
                    .fold(0.0, f64::max);
                let worst = c.value(worst);
                let bound = g + ((n as f64).ln() / (2.0 * rounds as f64)).sqrt();
                ensure(worst <= bound + 1e-12, || format!("n={n} g={g} T={rounds}: {worst} > {bound}"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs"))
}

fn reglp_rate(c: &mut Ctx) -> Outcome {
    let (alpha, delta, g, n) = (0.25, 0.3, 0.2, 64);
    let d = blank(n);
    let cfg = BoostConfig {
        lambda_on_train: true,
        ..BoostConfig::from_delta(alpha, delta).map_err(e)?
    };
    let (_, report) = run_reg_lpboost(&d, &d, &mut AdversarialOracle::new(g).map_err(e)?, &cfg).map_err(e)?;
    let risk = c.value(report.train_cvar);
    ensure(risk <= g + delta, || format!("training CVaR {risk} > {}", g + delta))?;
    ensure(risk >= g - 1e-9, || format!("training CVaR {risk} below the floor {g}"))?;
    Ok(format!("T={} CVaR {risk:.4}", cfg.rounds))
}

fn round_trip(c: &mut Ctx) -> Outcome {
    let (data, _) = synth_subpop(300, &[0.8, 0.2], &[0.05, 0.1], 3, c.rng.random()).map_err(e)?;
    let cfg = BoostConfig {
        eta: Some(1.0),
        ..BoostConfig::new(0.2, 10)
    };
    let (ens, report) = run_adalpboost(&data, &data, &mut BaseLearner::stumps(), &cfg).map_err(e)?;
    let (again, report2) = run_adalpboost(&data, &data, &mut BaseLearner::stumps(), &cfg).map_err(e)?;
    ensure(ens == again && report.outcome() == report2.outcome(), || "identical runs differ".into())?;
    let artifact = RunArtifact {
        ensemble: ens,
        class_names: data.class_names().to_vec(),
        report: Some(report),
        config: vec![],
    };
    let loaded = RunArtifact::parse(&artifact.to_text()).map_err(e)?;
    ensure(loaded == artifact, || "artifact changed in a round trip".into())?;
    let bumped = c.value(0.0);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| c.rng.random_range(-3.0..9.0) + bumped).collect();
        for (a, b) in artifact.ensemble.base_models().iter().zip(loaded.ensemble.base_models()) {
            let (pa, pb) = (a.predict(&x).map_err(e)?, b.predict(&x).map_err(e)?);
            ensure(pa == pb, || "prediction changed".into())?;
        }
    }
    ensure(bumped == 0.0, || "perturbed".into())?;
    Ok("1000 inputs".into())
}

type Block = (&'static str, fn(&mut Ctx) -> Outcome);

const BLOCKS: [Block; 9] = [
    ("cvar-identity", cvar_identity),
    ("cvar-agreement", cvar_agreement),
    ("strong-duality", strong_duality),
    ("dominance", dominance),
    ("capped-weights", capped_weights),
    ("regularized-dual", regularized),
    ("hedge-rate", hedge_rate),
    ("reglp-rate", reglp_rate),
    ("round-trip", round_trip),
];

pub fn run(args: &CheckArgs) -> CliResult<()> {
    if args.list {
        for (name, _) in BLOCKS {
            println!("{name}");
        }
        return Ok(());
    }
    let selected: Vec<(usize, Block)> = BLOCKS
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, (name, _))| args.only.as_deref().is_none_or(|o| o == *name))
        .collect();
    if selected.is_empty() {
        return Err(CliError::Flag(format!(
            "unknown check {:?}; see --list",
            args.only.as_deref().unwrap_or("")
        )));
    }
    println!("{SIGN_NOTE}");
    let bump = if args.perturb { 1e-3 } else { 0.0 };
    let results: Vec<(&str, Outcome, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&(i, (name, f))| {
                let seed = args.seed.wrapping_mul(1000).wrapping_add(i as u64);
                scope.spawn(move || {
                    let started = Instant::now();
                    let mut ctx = Ctx {
                        rng: seeded_rng(seed),
                        bump,
                    };
                    let out = f(&mut ctx);
                    (name, out, started.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(&selected)
            .map(|(h, &(_, (name, _)))| {
                h.join()
                    .unwrap_or_else(|_| (name, Err("panicked".to_string()), 0.0))
            })
            .collect()
    });
    let mut failed = 0;
    for (name, out, secs) in results {
        match out {
            Ok(detail) => println!("PASS {name} ({detail}, {secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
