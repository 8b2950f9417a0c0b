//! Shared domain types: datasets, loss matrices, sample and model weights,
//! ensembles and training reports.
//!
//! Every type validates its invariants on construction and is immutable
//! afterwards, so values can be shared freely between threads.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Absolute tolerance for simplex sums after renormalization.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Tolerance on the per-coordinate cap of the capped simplex.
pub const CAP_TOL: f64 = 1e-12;

/// Sums further than this from one are rejected rather than renormalized.
const RENORMALIZE_LIMIT: f64 = 1e-6;

/// Deterministic random stream used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

/// Returns a seeded random stream. ChaCha is specified bit-for-bit, so the
/// same seed yields the same draws on every platform.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labelled samples: an `n x d` feature matrix and dense class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    name: String,
}

impl Dataset {
    /// Builds a dataset from row-major feature rows. Class names default to
    /// the decimal class index.
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1).max(2);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_classes(name, rows, labels, class_names)
    }

    pub fn with_classes(
        name: impl Into<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invariant(
                "Dataset",
                format!("{} feature rows but {} labels", rows.len(), labels.len()),
            ));
        }
        if rows.is_empty() {
            return Err(Error::invariant("Dataset", "n must be at least 1"));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::invariant("Dataset", "d must be at least 1"));
        }
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invariant(
                    "Dataset",
                    format!("row {i} has {} features, expected {d}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invariant("Dataset", format!("row {i} has a non-finite feature")));
            }
            features.extend_from_slice(row);
        }
        Self::from_parts(name.into(), features, d, labels, class_names)
    }

    fn from_parts(
        name: String,
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::invariant("Dataset", "need at least two classes"));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= class_names.len()) {
            return Err(Error::invariant(
                "Dataset",
                format!("label {y} of row {i} is not a class index below {}", class_names.len()),
            ));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_names,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features + j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Original label text for each class index.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Sub-dataset made of the given rows, in order. Keeps the class mapping.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invariant("Dataset", "n must be at least 1"));
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::from_parts(name.into(), features, self.n_features, labels, self.class_names.clone())
    }
}

/// `T x n` matrix of per-sample losses, one row per base model.
#[derive(Clone, Debug, PartialEq)]
pub struct LossMatrix {
    entries: Vec<f64>,
    n_samples: usize,
}

impl LossMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut m = Self::empty(n)?;
        for row in rows {
            m.push_row(row)?;
        }
        if m.n_models() == 0 {
            return Err(Error::invariant("LossMatrix", "T must be at least 1"));
        }
        Ok(m)
    }

    /// A matrix with no rows yet; only valid as an accumulator.
    pub(crate) fn empty(n_samples: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::invariant("LossMatrix", "n must be at least 1"));
        }
        Ok(Self {
            entries: Vec::new(),
            n_samples,
        })
    }

    pub(crate) fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.n_samples {
            return Err(Error::DimensionMismatch {
                context: "loss row",
                expected: self.n_samples,
                got: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invariant("LossMatrix", format!("entry {v} outside [0, 1]")));
        }
        self.entries.extend(row);
        Ok(())
    }

    pub fn n_models(&self) -> usize {
        self.entries.len() / self.n_samples
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.entries[t * self.n_samples..(t + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.entries.chunks_exact(self.n_samples)
    }

    /// The first `t` rows.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.n_models() {
            return Err(Error::invariant(
                "LossMatrix",
                format!("prefix length {t} not in 1..={}", self.n_models()),
            ));
        }
        Ok(Self {
            entries: self.entries[..t * self.n_samples].to_vec(),
            n_samples: self.n_samples,
        })
    }
}

/// A point of the capped simplex `{w in Δ_n : w_i <= 1/(alpha n)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CappedSimplexWeights {
    values: Vec<f64>,
    cap: f64,
    alpha: f64,
}

/// Per-coordinate cap `1/(alpha n)`, rejecting alphas for which the capped
/// simplex is empty.
pub fn capped_simplex_cap(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invariant("CappedSimplexWeights", "n must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invariant("CappedSimplexWeights", format!("alpha {alpha} not in (0, 1]")));
    }
    // cap * n >= 1 is exactly alpha * n <= n; the binding side is alpha*n >= 1.
    if alpha * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::AlphaTooSmall { alpha, n });
    }
    Ok(1.0 / (alpha * n as f64))
}

impl CappedSimplexWeights {
    /// Validates and repairs small solver residuals: entries are clipped to
    /// `[0, cap]` and the remaining mass is spread over coordinates with room.
    pub fn new(values: Vec<f64>, alpha: f64) -> Result<Self> {
        let cap = capped_simplex_cap(values.len(), alpha)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("CappedSimplexWeights", "non-finite weight"));
        }
        if let Some(v) = values.iter().find(|&&v| v < -RENORMALIZE_LIMIT || v > cap + RENORMALIZE_LIMIT) {
            return Err(Error::invariant(
                "CappedSimplexWeights",
                format!("weight {v} outside [0, cap={cap}]"),
            ));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_LIMIT {
            return Err(Error::invariant("CappedSimplexWeights", format!("weights sum to {sum}, not 1")));
        }
        let values = repair_capped(values, cap);
        Ok(Self { values, cap, alpha })
    }

    /// Uniform weights on the uncapped simplex (`alpha = 1/n`, cap 1).
    pub fn uniform_simplex(n: usize) -> Result<Self> {
        uniform_capped_weights(n, 1.0 / n.max(1) as f64)
    }

    /// Weights on the plain simplex (`cap = 1`).
    pub fn simplex(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        Self::new(values, 1.0 / n as f64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `<w, losses>`.
    pub fn dot(&self, losses: &[f64]) -> f64 {
        self.values.iter().zip(losses).map(|(w, l)| w * l).sum()
    }

    /// Shannon entropy `-sum w log w` in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.values)
    }
}

pub(crate) fn entropy(values: &[f64]) -> f64 {
    -values.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>()
}

fn repair_capped(mut values: Vec<f64>, cap: f64) -> Vec<f64> {
    for v in values.iter_mut() {
        *v = v.clamp(0.0, cap);
    }
    for _ in 0..3 {
        let residual = 1.0 - values.iter().sum::<f64>();
        if residual.abs() <= 1e-15 {
            break;
        }
        if residual > 0.0 {
            let room: f64 = values.iter().map(|v| cap - v).sum();
            if room <= 0.0 {
                break;
            }
            for v in values.iter_mut() {
                *v = (*v + residual * (cap - *v) / room).min(cap);
            }
        } else {
            let mass: f64 = values.iter().sum();
            for v in values.iter_mut() {
                *v = (*v + residual * *v / mass).max(0.0);
            }
        }
    }
    values
}

/// `w = (1/n, ..., 1/n)` with cap `1/(alpha n)`.
pub fn uniform_capped_weights(n: usize, alpha: f64) -> Result<CappedSimplexWeights> {
    let cap = capped_simplex_cap(n, alpha)?;
    Ok(CappedSimplexWeights {
        values: vec![1.0 / n as f64; n],
        cap,
        alpha,
    })
}

/// Distribution over base models.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMixture {
    values: Vec<f64>,
}

impl ModelMixture {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invariant("ModelMixture", "T must be at least 1"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -RENORMALIZE_LIMIT) {
            return Err(Error::invariant("ModelMixture", "entries must be finite and nonnegative"));
        }
        let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_LIMIT {
            return Err(Error::invariant("ModelMixture", format!("entries sum to {sum}, not 1")));
        }
        // leave already-normalized input untouched so reloading is exact
        if (sum - 1.0).abs() <= 1e-12 {
            return Ok(Self { values: clipped });
        }
        Ok(Self {
            values: clipped.into_iter().map(|v| v / sum).collect(),
        })
    }

    pub fn uniform(t: usize) -> Result<Self> {
        Self::new(vec![1.0 / t.max(1) as f64; t])
    }

    pub fn point_mass(t: usize, index: usize) -> Result<Self> {
        if index >= t {
            return Err(Error::invariant("ModelMixture", format!("point mass index {index} >= T={t}")));
        }
        let mut v = vec![0.0; t];
        v[index] = 1.0;
        Self::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which training procedure produced an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Erm,
    AdaBoostAverage,
    AdaLpBoost,
    RegLpBoost,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Erm => "erm",
            Algorithm::AdaBoostAverage => "adaavg",
            Algorithm::AdaLpBoost => "adalp",
            Algorithm::RegLpBoost => "reglp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(Algorithm::Erm),
            "adaavg" => Ok(Algorithm::AdaBoostAverage),
            "adalp" => Ok(Algorithm::AdaLpBoost),
            "reglp" => Ok(Algorithm::RegLpBoost),
            other => Err(Error::invariant("Algorithm", format!("unknown algorithm {other:?}"))),
        }
    }
}

/// How an ensemble was trained.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub eta: Option<f64>,
    /// `None` for the unregularized dual.
    pub beta: Option<f64>,
    pub seed: u64,
}

/// Base models plus the mixture used to randomize predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel<M> {
    base_models: Vec<M>,
    mixture: ModelMixture,
    provenance: Provenance,
}

impl<M> EnsembleModel<M> {
    pub fn new(base_models: Vec<M>, mixture: ModelMixture, provenance: Provenance) -> Result<Self> {
        if base_models.is_empty() {
            return Err(Error::invariant("EnsembleModel", "T must be at least 1"));
        }
        if base_models.len() != mixture.len() {
            return Err(Error::invariant(
                "EnsembleModel",
                format!("{} base models but mixture of length {}", base_models.len(), mixture.len()),
            ));
        }
        Ok(Self {
            base_models,
            mixture,
            provenance,
        })
    }

    pub fn base_models(&self) -> &[M] {
        &self.base_models
    }

    pub fn mixture(&self) -> &ModelMixture {
        &self.mixture
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.base_models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_models.is_empty()
    }

    /// Same base models with a different mixture.
    pub fn with_mixture(&self, mixture: ModelMixture, alpha: f64) -> Result<Self>
    where
        M: Clone,
    {
        let mut provenance = self.provenance.clone();
        provenance.alpha = alpha;
        Self::new(self.base_models.clone(), mixture, provenance)
    }
}

/// One boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    /// `<w^t, l^t>` achieved by the learner.
    pub weighted_loss: f64,
    /// Dual objective after adding this round's model, when a dual is solved.
    pub gamma: Option<f64>,
    /// Set when the learner's advisory guarantee was missed this round.
    pub above_guarantee: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub alpha: f64,
    pub rounds: Vec<RoundRecord>,
    pub train_cvar: f64,
    pub val_cvar: f64,
    /// Round with the largest dual objective, if duals were solved.
    pub best_gamma_round: Option<usize>,
    pub seconds: f64,
}

impl TrainReport {
    /// Everything except wall-clock time; equal for identical seeded runs.
    pub fn outcome(&self) -> (f64, &[RoundRecord], f64, f64, Option<usize>) {
        (self.alpha, &self.rounds, self.train_cvar, self.val_cvar, self.best_gamma_round)
    }
}
