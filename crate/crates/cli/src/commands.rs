use std::io::Write;

use boosted_cvar::artifact::RunArtifact;
use boosted_cvar::boost::{
    regularized_schedule, remix, run_adaboost_average, run_adalpboost, run_erm, run_reg_lpboost, BoostConfig,
};
use boosted_cvar::cvar::{cvar_sorted, ensemble_losses, mean};
use boosted_cvar::learner::{
    ensemble_loss_matrix, sampled_losses, BaseLearner, BaseModel, LearnerKind, LearnerSpec,
};
use boosted_cvar::{seeded_rng, Algorithm, EnsembleModel, ModelMixture, TrainReport};

use crate::data_args::DataArgs;
use crate::fmt::sig;
use crate::{CliError, CliResult, CurveArgs, EvalArgs, TrainArgs};

const DEFAULT_ROUNDS: usize = 100;

fn flag(msg: impl Into<String>) -> CliError {
    CliError::Flag(msg.into())
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(flag(format!("alpha {alpha} not in (0, 1]")))
    }
}

fn learner_spec(args: &TrainArgs) -> CliResult<LearnerSpec> {
    let kind = match args.learner.as_str() {
        "stump" => LearnerKind::Stump,
        "tree" => LearnerKind::Tree,
        other => return Err(flag(format!("unknown learner {other:?} (stump or tree)"))),
    };
    if args.max_depth == 0 {
        return Err(flag("--max-depth must be at least 1"));
    }
    Ok(LearnerSpec {
        kind,
        max_depth: args.max_depth,
        seed: args.data.seed,
        ..Default::default()
    })
}

fn boost_config(args: &TrainArgs, algo: Algorithm) -> CliResult<BoostConfig> {
    check_alpha(args.alpha)?;
    if args.eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
        return Err(flag("--eta must be positive"));
    }
    if args.beta.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
        return Err(flag("--beta must be positive"));
    }
    if args.rounds == Some(0) {
        return Err(flag("--rounds must be at least 1"));
    }
    if algo != Algorithm::RegLpBoost && (args.beta.is_some() || args.delta.is_some()) {
        return Err(flag("--beta and --delta only apply to --algo reglp"));
    }
    let mut cfg = BoostConfig::new(args.alpha, args.rounds.unwrap_or(DEFAULT_ROUNDS));
    if let Some(delta) = args.delta {
        if args.beta.is_some() || args.rounds.is_some() {
            return Err(flag("--delta sets beta and the round count; drop --beta and --rounds"));
        }
        let (beta, rounds) = regularized_schedule(args.alpha, delta).map_err(|e| flag(e.to_string()))?;
        cfg.beta = Some(beta);
        cfg.rounds = rounds;
    } else {
        cfg.beta = args.beta;
    }
    cfg.eta = args.eta;
    cfg.seed = args.data.seed;
    cfg.warmup_rounds = args.warmup_rounds;
    cfg.lambda_on_train = args.lambda_on_train;
    Ok(cfg)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| format!("{v:?}"))
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let algo: Algorithm = args.algo.parse().map_err(|_| flag(format!("unknown --algo {:?}", args.algo)))?;
    let cfg = boost_config(args, algo)?;
    let spec = learner_spec(args)?;
    let (train, val) = args.data.load_split()?;
    let mut learner = BaseLearner::new(spec)?;
    let (ensemble, report) = match algo {
        Algorithm::Erm => run_erm(&train, &val, &mut learner, cfg.alpha)?,
        Algorithm::AdaBoostAverage => run_adaboost_average(&train, &val, &mut learner, &cfg)?,
        Algorithm::AdaLpBoost => run_adalpboost(&train, &val, &mut learner, &cfg)?,
        Algorithm::RegLpBoost => run_reg_lpboost(&train, &val, &mut learner, &cfg)?,
    };
    print_report(&report);
    let train_avg = mean(&ensemble_losses(&ensemble_loss_matrix(&ensemble, &train)?, ensemble.mixture())?);
    let val_avg = mean(&ensemble_losses(&ensemble_loss_matrix(&ensemble, &val)?, ensemble.mixture())?);
    println!(
        "{} T={} alpha={} train_cvar={} val_cvar={} train_avg_loss={} val_avg_loss={}",
        algo,
        ensemble.len(),
        sig(cfg.alpha, 10),
        sig(report.train_cvar, 10),
        sig(report.val_cvar, 10),
        sig(train_avg, 10),
        sig(val_avg, 10)
    );

    let mut config = vec![
        ("algo".to_string(), algo.to_string()),
        ("rounds".to_string(), ensemble.len().to_string()),
        ("eta".to_string(), opt(ensemble.provenance().eta)),
        ("beta".to_string(), opt(cfg.beta)),
        ("learner".to_string(), args.learner.clone()),
        ("max_depth".to_string(), args.max_depth.to_string()),
        ("warmup_rounds".to_string(), args.warmup_rounds.to_string()),
        ("lambda_on_train".to_string(), args.lambda_on_train.to_string()),
    ];
    config.extend(args.data.echo());
    let artifact = RunArtifact {
        ensemble,
        class_names: train.class_names().to_vec(),
        report: Some(report),
        config,
    };
    artifact.save(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_report(report: &TrainReport) {
    println!("round weighted_loss gamma");
    for r in &report.rounds {
        let gamma = r.gamma.map_or_else(|| "-".to_string(), |g| sig(g, 10));
        let flag = if r.above_guarantee { " above-guarantee" } else { "" };
        println!("{} {} {}{}", r.round, sig(r.weighted_loss, 10), gamma, flag);
    }
    if let Some(t) = report.best_gamma_round {
        println!("best gamma at round {t}");
    }
}

/// Mixture for `method` built from the base models of `ensemble` at `alpha`.
fn method_mixture(
    ensemble: &EnsembleModel<BaseModel>,
    method: Algorithm,
    val: &boosted_cvar::Dataset,
    alpha: f64,
) -> CliResult<ModelMixture> {
    let trained = ensemble.provenance().algorithm;
    let hedge = matches!(trained, Algorithm::AdaBoostAverage | Algorithm::AdaLpBoost);
    let compatible = match method {
        Algorithm::Erm => true,
        Algorithm::AdaBoostAverage | Algorithm::AdaLpBoost => hedge,
        Algorithm::RegLpBoost => trained == Algorithm::RegLpBoost,
    };
    if !compatible {
        return Err(flag(format!("method {method} cannot be derived from a {trained} ensemble")));
    }
    Ok(match method {
        Algorithm::Erm => ModelMixture::point_mass(ensemble.len(), 0)?,
        Algorithm::AdaBoostAverage => ModelMixture::uniform(ensemble.len())?,
        Algorithm::AdaLpBoost | Algorithm::RegLpBoost => {
            remix(ensemble, &BaseLearner::stumps(), val, alpha)?.mixture().clone()
        }
    })
}

pub fn curve(args: &CurveArgs) -> CliResult<()> {
    if args.alpha_grid.is_empty() {
        return Err(flag("--alpha-grid is empty"));
    }
    for &a in &args.alpha_grid {
        check_alpha(a)?;
    }
    let mut rows = vec!["alpha,method,cvar,avg_loss".to_string()];
    for path in &args.models {
        let artifact = RunArtifact::load(path)?;
        let data = if args.data.is_set() {
            args.data.clone()
        } else {
            DataArgs::from_echo(&artifact.config)?
        };
        let (_, val) = data.load_split()?;
        let ensemble = &artifact.ensemble;
        let methods: Vec<Algorithm> = if args.methods.is_empty() {
            vec![ensemble.provenance().algorithm]
        } else {
            args.methods
                .iter()
                .map(|m| m.parse().map_err(|_| flag(format!("unknown method {m:?}"))))
                .collect::<CliResult<_>>()?
        };
        let losses = ensemble_loss_matrix(ensemble, &val)?;
        for &alpha in &args.alpha_grid {
            for &method in &methods {
                let mixture = method_mixture(ensemble, method, &val, alpha)?;
                let per_sample = ensemble_losses(&losses, &mixture)?;
                rows.push(format!(
                    "{},{},{},{}",
                    sig(alpha, 10),
                    method,
                    sig(cvar_sorted(&per_sample, alpha)?, 10),
                    sig(mean(&per_sample), 10)
                ));
            }
        }
    }
    let text = rows.join("\n") + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let artifact = RunArtifact::load(&args.model)?;
    let ensemble = &artifact.ensemble;
    let data = args.data.load()?;
    let mut alphas = args.alpha_grid.clone();
    alphas.extend(args.alpha);
    if alphas.is_empty() {
        alphas.push(ensemble.provenance().alpha);
    }
    for &a in &alphas {
        check_alpha(a)?;
    }
    let exact = ensemble_losses(&ensemble_loss_matrix(ensemble, &data)?, ensemble.mixture())?;
    let sampled = match args.mc_draws {
        Some(0) => return Err(flag("--mc-draws must be at least 1")),
        Some(draws) => Some(sampled_losses(ensemble, &data, draws, &mut seeded_rng(args.data.seed))?),
        None => None,
    };
    println!("n={} avg_loss={}", data.len(), sig(mean(&exact), 10));
    for &alpha in &alphas {
        print!(
            "alpha={} cvar={} avg_loss={}",
            sig(alpha, 10),
            sig(cvar_sorted(&exact, alpha)?, 10),
            sig(mean(&exact), 10)
        );
        if let Some(s) = &sampled {
            print!(" mc_cvar={} mc_avg_loss={}", sig(cvar_sorted(s, alpha)?, 10), sig(mean(s), 10));
        }
        println!();
    }
    Ok(())
}
