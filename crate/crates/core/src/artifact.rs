//! Versioned text serialization of trained ensembles.
//!
//! ```text
//! format = boosted-cvar-ensemble/1
//!
//! [provenance]
//! algorithm = adalp
//! alpha = 0.1
//! eta = 1.0            # or "none"
//! beta = none
//! seed = 7
//!
//! [data]
//! n_features = 2
//! class = 0            # one line per class index, in order
//! class = 1
//!
//! [mixture]
//! weight = 0.5         # one line per base model
//! weight = 0.5
//!
//! [model]              # one section per base model
//! kind = stump         # stump | tree
//! resampled = false
//! achieved_loss = 0.05
//! stump = 0 2.5 0 1    # feature threshold left right
//!
//! [model]
//! kind = tree
//! resampled = false
//! achieved_loss = 0.0
//! node = split 0 2.5 1 2   # feature threshold left right
//! node = leaf 0
//! node = leaf 1
//!
//! [report]             # optional
//! train_cvar = 0.1
//! val_cvar = 0.12
//! best_gamma_round = none
//! seconds = 0.5
//! round = 1 0.05 none false   # round weighted_loss gamma above_guarantee
//!
//! [config]             # optional free-form echo of the run settings
//! rounds = 100
//! ```
//!
//! Reals are written in Rust's shortest round-trip form, so a saved ensemble
//! loads back bit for bit. Blank lines and text after `#` are ignored; class
//! names therefore must not contain `#` or line breaks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::learner::{BaseModel, Node, Predictor, Stump, Tree};
use crate::types::{Algorithm, EnsembleModel, ModelMixture, Provenance, RoundRecord, TrainReport};

pub const FORMAT_TAG: &str = "boosted-cvar-ensemble/1";

/// Everything written to disk for one trained ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifact {
    pub ensemble: EnsembleModel<BaseModel>,
    pub class_names: Vec<String>,
    pub report: Option<TrainReport>,
    pub config: Vec<(String, String)>,
}

fn real(x: f64) -> String {
    format!("{x:?}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), real)
}

impl RunArtifact {
    pub fn n_features(&self) -> usize {
        self.ensemble.base_models()[0].n_features()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = self.ensemble.provenance();
        let _ = writeln!(out, "format = {FORMAT_TAG}\n");
        let _ = writeln!(out, "[provenance]");
        let _ = writeln!(out, "algorithm = {}", p.algorithm);
        let _ = writeln!(out, "alpha = {}", real(p.alpha));
        let _ = writeln!(out, "eta = {}", opt_real(p.eta));
        let _ = writeln!(out, "beta = {}", opt_real(p.beta));
        let _ = writeln!(out, "seed = {}\n", p.seed);

        let _ = writeln!(out, "[data]");
        let _ = writeln!(out, "n_features = {}", self.n_features());
        for c in &self.class_names {
            let _ = writeln!(out, "class = {c}");
        }
        let _ = writeln!(out, "\n[mixture]");
        for w in self.ensemble.mixture().values() {
            let _ = writeln!(out, "weight = {}", real(*w));
        }
        for m in self.ensemble.base_models() {
            let _ = writeln!(out, "\n[model]");
            match m.predictor() {
                Predictor::Stump(s) => {
                    let _ = writeln!(out, "kind = stump");
                    let _ = writeln!(out, "resampled = {}", m.is_resampled());
                    let _ = writeln!(out, "achieved_loss = {}", real(m.achieved_weighted_loss()));
                    let _ = writeln!(out, "stump = {} {} {} {}", s.feature, real(s.threshold), s.left, s.right);
                }
                Predictor::Tree(t) => {
                    let _ = writeln!(out, "kind = tree");
                    let _ = writeln!(out, "resampled = {}", m.is_resampled());
                    let _ = writeln!(out, "achieved_loss = {}", real(m.achieved_weighted_loss()));
                    for node in &t.nodes {
                        match node {
                            Node::Leaf { class } => {
                                let _ = writeln!(out, "node = leaf {class}");
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                let _ = writeln!(out, "node = split {feature} {} {left} {right}", real(*threshold));
                            }
                        }
                    }
                }
            }
        }
        if let Some(r) = &self.report {
            let _ = writeln!(out, "\n[report]");
            let _ = writeln!(out, "train_cvar = {}", real(r.train_cvar));
            let _ = writeln!(out, "val_cvar = {}", real(r.val_cvar));
            let best = r.best_gamma_round.map_or_else(|| "none".to_string(), |t| t.to_string());
            let _ = writeln!(out, "best_gamma_round = {best}");
            let _ = writeln!(out, "seconds = {}", real(r.seconds));
            for rec in &r.rounds {
                let _ = writeln!(
                    out,
                    "round = {} {} {} {}",
                    rec.round,
                    real(rec.weighted_loss),
                    opt_real(rec.gamma),
                    rec.above_guarantee
                );
            }
        }
        if !self.config.is_empty() {
            let _ = writeln!(out, "\n[config]");
            for (k, v) in &self.config {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::default().run(text)
    }
}

#[derive(Default)]
struct ModelDraft {
    line: usize,
    kind: Option<String>,
    resampled: Option<bool>,
    achieved: Option<f64>,
    stump: Option<Stump>,
    nodes: Vec<Node>,
}

#[derive(Default)]
struct Parser {
    line: usize,
    algorithm: Option<Algorithm>,
    alpha: Option<f64>,
    eta: Option<Option<f64>>,
    beta: Option<Option<f64>>,
    seed: Option<u64>,
    n_features: Option<usize>,
    classes: Vec<String>,
    weights: Vec<f64>,
    models: Vec<ModelDraft>,
    report: Option<TrainReport>,
    config: Vec<(String, String)>,
}

impl Parser {
    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Format {
            line: self.line,
            detail: detail.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, v: &str) -> Result<T> {
        v.parse().map_err(|_| self.err(format!("cannot parse {v:?}")))
    }

    fn opt_num(&self, v: &str) -> Result<Option<f64>> {
        if v == "none" {
            Ok(None)
        } else {
            self.num(v).map(Some)
        }
    }

    fn boolean(&self, v: &str) -> Result<bool> {
        match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.err(format!("expected true or false, got {v:?}"))),
        }
    }

    fn run(mut self, text: &str) -> Result<RunArtifact> {
        let mut section = String::new();
        let mut saw_format = false;
        for (i, raw) in text.lines().enumerate() {
            self.line = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !saw_format {
                    return Err(self.err("missing format line"));
                }
                section = name.trim().to_string();
                match section.as_str() {
                    "model" => self.models.push(ModelDraft {
                        line: self.line,
                        ..Default::default()
                    }),
                    "report" => {
                        self.report = Some(TrainReport {
                            alpha: 0.0,
                            rounds: vec![],
                            train_cvar: 0.0,
                            val_cvar: 0.0,
                            best_gamma_round: None,
                            seconds: 0.0,
                        })
                    }
                    "provenance" | "data" | "mixture" | "config" => {}
                    other => return Err(self.err(format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| self.err("expected key = value"))?;
            if !saw_format {
                if key != "format" {
                    return Err(self.err("missing format line"));
                }
                if value != FORMAT_TAG {
                    return Err(self.err(format!("unsupported format {value:?}, expected {FORMAT_TAG}")));
                }
                saw_format = true;
                continue;
            }
            self.entry(&section, key, value)?;
        }
        if !saw_format {
            return Err(self.err("empty artifact"));
        }
        self.finish()
    }

    fn entry(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("provenance", "algorithm") => self.algorithm = Some(value.parse().map_err(|_| self.err(format!("unknown algorithm {value:?}")))?),
            ("provenance", "alpha") => self.alpha = Some(self.num(value)?),
            ("provenance", "eta") => self.eta = Some(self.opt_num(value)?),
            ("provenance", "beta") => self.beta = Some(self.opt_num(value)?),
            ("provenance", "seed") => self.seed = Some(self.num(value)?),
            ("data", "n_features") => self.n_features = Some(self.num(value)?),
            ("data", "class") => self.classes.push(value.to_string()),
            ("mixture", "weight") => {
                let w = self.num(value)?;
                self.weights.push(w);
            }
            ("model", _) => self.model_entry(key, value)?,
            ("report", _) => self.report_entry(key, value)?,
            ("config", _) => self.config.push((key.to_string(), value.to_string())),
            _ => return Err(self.err(format!("unexpected key {key:?} in section [{section}]"))),
        }
        Ok(())
    }

    fn model_entry(&mut self, key: &str, value: &str) -> Result<()> {
        let parts: Vec<&str> = value.split_whitespace().collect();
        let parsed = match key {
            "kind" => {
                if value != "stump" && value != "tree" {
                    return Err(self.err(format!("unknown model kind {value:?}")));
                }
                (Some(value.to_string()), None, None, None, None)
            }
            "resampled" => (None, Some(self.boolean(value)?), None, None, None),
            "achieved_loss" => (None, None, Some(self.num(value)?), None, None),
            "stump" => {
                if parts.len() != 4 {
                    return Err(self.err("stump needs feature threshold left right"));
                }
                let s = Stump {
                    feature: self.num(parts[0])?,
                    threshold: self.num(parts[1])?,
                    left: self.num(parts[2])?,
                    right: self.num(parts[3])?,
                };
                (None, None, None, Some(s), None)
            }
            "node" => {
                let node = match parts.as_slice() {
                    ["leaf", c] => Node::Leaf { class: self.num(c)? },
                    ["split", f, t, l, r] => Node::Split {
                        feature: self.num(f)?,
                        threshold: self.num(t)?,
                        left: self.num(l)?,
                        right: self.num(r)?,
                    },
                    _ => return Err(self.err(format!("bad node {value:?}"))),
                };
                (None, None, None, None, Some(node))
            }
            other => return Err(self.err(format!("unexpected key {other:?} in [model]"))),
        };
        let m = self.models.last_mut().expect("model section was opened");
        let (kind, resampled, achieved, stump, node) = parsed;
        if kind.is_some() {
            m.kind = kind;
        }
        if resampled.is_some() {
            m.resampled = resampled;
        }
        if achieved.is_some() {
            m.achieved = achieved;
        }
        if stump.is_some() {
            m.stump = stump;
        }
        m.nodes.extend(node);
        Ok(())
    }

    fn report_entry(&mut self, key: &str, value: &str) -> Result<()> {
        let parts: Vec<&str> = value.split_whitespace().collect();
        let record = if key == "round" {
            if parts.len() != 4 {
                return Err(self.err("round needs index weighted_loss gamma above_guarantee"));
            }
            Some(RoundRecord {
                round: self.num(parts[0])?,
                weighted_loss: self.num(parts[1])?,
                gamma: self.opt_num(parts[2])?,
                above_guarantee: self.boolean(parts[3])?,
            })
        } else {
            None
        };
        let train_cvar = if key == "train_cvar" { Some(self.num(value)?) } else { None };
        let val_cvar = if key == "val_cvar" { Some(self.num(value)?) } else { None };
        let seconds = if key == "seconds" { Some(self.num(value)?) } else { None };
        let best = if key == "best_gamma_round" {
            Some(if value == "none" { None } else { Some(self.num(value)?) })
        } else {
            None
        };
        if !matches!(key, "round" | "train_cvar" | "val_cvar" | "seconds" | "best_gamma_round") {
            return Err(self.err(format!("unexpected key {key:?} in [report]")));
        }
        let r = self.report.as_mut().expect("report section was opened");
        r.rounds.extend(record);
        if let Some(v) = train_cvar {
            r.train_cvar = v;
        }
        if let Some(v) = val_cvar {
            r.val_cvar = v;
        }
        if let Some(v) = seconds {
            r.seconds = v;
        }
        if let Some(v) = best {
            r.best_gamma_round = v;
        }
        Ok(())
    }

    fn finish(self) -> Result<RunArtifact> {
        let missing = |what: &str| Error::Format {
            line: 0,
            detail: format!("missing {what}"),
        };
        let n_features = self.n_features.ok_or_else(|| missing("n_features"))?;
        let provenance = Provenance {
            algorithm: self.algorithm.ok_or_else(|| missing("algorithm"))?,
            alpha: self.alpha.ok_or_else(|| missing("alpha"))?,
            eta: self.eta.ok_or_else(|| missing("eta"))?,
            beta: self.beta.ok_or_else(|| missing("beta"))?,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
        };
        if self.classes.len() < 2 {
            return Err(missing("at least two classes"));
        }
        let mut models = Vec::with_capacity(self.models.len());
        for d in self.models {
            let bad = |detail: String| Error::Format { line: d.line, detail };
            let predictor = match d.kind.as_deref() {
                Some("stump") => Predictor::Stump(d.stump.ok_or_else(|| bad("stump model without stump line".into()))?),
                Some("tree") => Predictor::Tree(Tree { nodes: d.nodes }),
                _ => return Err(bad("model without kind".into())),
            };
            let labels_ok = match &predictor {
                Predictor::Stump(s) => s.left.max(s.right) < self.classes.len(),
                Predictor::Tree(t) => t.nodes.iter().all(|n| match n {
                    Node::Leaf { class } => *class < self.classes.len(),
                    Node::Split { .. } => true,
                }),
            };
            if !labels_ok {
                return Err(bad("model predicts an unknown class".into()));
            }
            let model = BaseModel::new(
                predictor,
                d.resampled.unwrap_or(false),
                n_features,
                d.achieved.ok_or_else(|| bad("model without achieved_loss".into()))?,
            )
            .map_err(|e| bad(e.to_string()))?;
            models.push(model);
        }
        let mixture = ModelMixture::new(self.weights).map_err(|e| Error::Format {
            line: 0,
            detail: e.to_string(),
        })?;
        let alpha = provenance.alpha;
        let ensemble = EnsembleModel::new(models, mixture, provenance).map_err(|e| Error::Format {
            line: 0,
            detail: e.to_string(),
        })?;
        let report = self.report.map(|mut r| {
            r.alpha = alpha;
            r
        });
        Ok(RunArtifact {
            ensemble,
            class_names: self.classes,
            report,
            config: self.config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{train_stump, train_tree};
    use crate::types::{seeded_rng, Dataset};
    use rand::Rng;

    fn artifact() -> RunArtifact {
        let d = Dataset::new(
            "a",
            (0..12).map(|i| vec![i as f64 / 3.0, (i % 4) as f64 * 0.1]).collect(),
            (0..12).map(|i| usize::from(i % 3 == 0)).collect(),
        )
        .unwrap();
        let w = vec![1.0 / 12.0; 12];
        let models = vec![train_stump(&d, &w).unwrap(), train_tree(&d, &w, 3).unwrap()];
        let mixture = ModelMixture::new(vec![0.1 + 0.2, 0.7]).unwrap();
        let provenance = Provenance {
            algorithm: Algorithm::AdaLpBoost,
            alpha: 0.1,
            eta: Some(1.0),
            beta: None,
            seed: 3,
        };
        RunArtifact {
            ensemble: EnsembleModel::new(models, mixture, provenance).unwrap(),
            class_names: vec!["no".into(), "yes sir".into()],
            report: Some(TrainReport {
                alpha: 0.1,
                rounds: vec![
                    RoundRecord {
                        round: 1,
                        weighted_loss: 1.0 / 3.0,
                        gamma: None,
                        above_guarantee: false,
                    },
                    RoundRecord {
                        round: 2,
                        weighted_loss: 0.2,
                        gamma: Some(0.7),
                        above_guarantee: true,
                    },
                ],
                train_cvar: 0.123456789,
                val_cvar: 1e-17,
                best_gamma_round: Some(2),
                seconds: 0.25,
            }),
            config: vec![("rounds".into(), "2".into())],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let a = artifact();
        let text = a.to_text();
        let b = RunArtifact::parse(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_text(), text);
        let mut rng = seeded_rng(0);
        for _ in 0..1000 {
            let x = [rng.random_range(-1.0..5.0), rng.random_range(-1.0..1.0)];
            for (m, n) in a.ensemble.base_models().iter().zip(b.ensemble.base_models()) {
                assert_eq!(m.predict(&x).unwrap(), n.predict(&x).unwrap());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let a = artifact();
        a.save(&path).unwrap();
        assert_eq!(RunArtifact::load(&path).unwrap(), a);
    }

    #[test]
    fn rejects_bad_input() {
        let good = artifact().to_text();
        assert!(RunArtifact::parse("").is_err());
        assert!(RunArtifact::parse(&good.replace(FORMAT_TAG, "boosted-cvar-ensemble/9")).is_err());
        assert!(RunArtifact::parse(&good.replace("kind = tree", "kind = forest")).is_err());
        assert!(RunArtifact::parse(&good.replace("[mixture]", "[mixtures]")).is_err());
        let err = RunArtifact::parse(&good.replace("alpha = 0.1", "alpha = zero")).unwrap_err();
        assert!(matches!(err, Error::Format { line, .. } if line > 1));
        // mixture length must match the models
        assert!(RunArtifact::parse(&good.replacen("weight = 0.7\n", "", 1)).is_err());
    }
}
