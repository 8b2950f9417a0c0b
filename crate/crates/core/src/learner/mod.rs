//! Base learners: given sample weights, return a model with low weighted
//! zero-one loss. They only look at the weighted average loss, so on their
//! own they do nothing for the worst-off samples.

mod stump;
mod tree;

pub use stump::Stump;
pub use tree::{Node, Tree};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::types::{seeded_rng, Dataset, EnsembleModel, LossMatrix, SeededRng};
use stump::{best_stump, check_weights};

/// A learner queried once per boosting round.
pub trait Learner {
    type Model;

    /// Fits a model to `train` under sample weights on the simplex.
    fn fit(&mut self, train: &Dataset, weights: &[f64]) -> Result<Self::Model>;

    /// Per-sample losses in `[0, 1]` of a fitted model.
    fn losses(&self, model: &Self::Model, data: &Dataset) -> Result<Vec<f64>>;

    /// Advisory bound on the weighted loss of every fitted model.
    fn guarantee(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    Stump(Stump),
    Tree(Tree),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Stump,
    Tree,
    Resampled,
}

/// A trained deterministic classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseModel {
    predictor: Predictor,
    resampled: bool,
    n_features: usize,
    achieved_weighted_loss: f64,
}

impl BaseModel {
    pub fn new(predictor: Predictor, resampled: bool, n_features: usize, achieved_weighted_loss: f64) -> Result<Self> {
        let ok = match &predictor {
            Predictor::Stump(s) => s.feature < n_features,
            Predictor::Tree(t) => {
                t.is_well_formed()
                    && t.nodes.iter().all(|n| match n {
                        Node::Split { feature, .. } => *feature < n_features,
                        Node::Leaf { .. } => true,
                    })
            }
        };
        if !ok || n_features == 0 {
            return Err(Error::invariant("BaseModel", "feature index out of range or malformed tree"));
        }
        if !(0.0..=1.0).contains(&achieved_weighted_loss) {
            return Err(Error::invariant(
                "BaseModel",
                format!("achieved weighted loss {achieved_weighted_loss} outside [0, 1]"),
            ));
        }
        Ok(Self {
            predictor,
            resampled,
            n_features,
            achieved_weighted_loss,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match (&self.predictor, self.resampled) {
            (_, true) => ModelKind::Resampled,
            (Predictor::Stump(_), false) => ModelKind::Stump,
            (Predictor::Tree(_), false) => ModelKind::Tree,
        }
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn is_resampled(&self) -> bool {
        self.resampled
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Weighted loss on the training pair the model was fit on.
    pub fn achieved_weighted_loss(&self) -> f64 {
        self.achieved_weighted_loss
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                context: "feature row",
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> usize {
        match &self.predictor {
            Predictor::Stump(s) => s.predict(x),
            Predictor::Tree(t) => t.predict(x),
        }
    }
}

/// `1[predict(x_i) != y_i]` for every row.
pub fn zero_one_losses(model: &BaseModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_features() != model.n_features {
        return Err(Error::DimensionMismatch {
            context: "dataset features",
            expected: model.n_features,
            got: data.n_features(),
        });
    }
    Ok(data
        .rows()
        .zip(data.labels())
        .map(|(x, &y)| f64::from(u8::from(model.predict_unchecked(x) != y)))
        .collect())
}

/// Whether `<w, l> <= g` holds for the model on `data`, and the achieved loss.
pub fn check_guarantee(model: &BaseModel, data: &Dataset, weights: &[f64], g: f64) -> Result<(bool, f64)> {
    let losses = zero_one_losses(model, data)?;
    if weights.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            context: "sample weights",
            expected: losses.len(),
            got: weights.len(),
        });
    }
    let achieved: f64 = weights.iter().zip(&losses).map(|(w, l)| w * l).sum();
    Ok((achieved <= g + 1e-12, achieved))
}

fn weighted_loss(model: &BaseModel, data: &Dataset, weights: &[f64]) -> f64 {
    data.rows()
        .zip(data.labels())
        .zip(weights)
        .filter(|((x, &y), _)| model.predict_unchecked(x) != y)
        .map(|(_, w)| w)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Exhaustive weighted decision stump.
pub fn train_stump(train: &Dataset, weights: &[f64]) -> Result<BaseModel> {
    check_weights(train, weights)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let (stump, _) = best_stump(train, weights, &all);
    finish(Predictor::Stump(stump), false, train, weights)
}

/// Greedy weighted tree of at most `max_depth` levels.
pub fn train_tree(train: &Dataset, weights: &[f64], max_depth: usize) -> Result<BaseModel> {
    check_weights(train, weights)?;
    finish(Predictor::Tree(tree::grow(train, weights, max_depth)), false, train, weights)
}

fn finish(predictor: Predictor, resampled: bool, train: &Dataset, weights: &[f64]) -> Result<BaseModel> {
    let mut model = BaseModel::new(predictor, resampled, train.n_features(), 0.0)?;
    model.achieved_weighted_loss = weighted_loss(&model, train, weights);
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerKind {
    Stump,
    Tree,
}

/// Configuration of the base learner.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Advisory guarantee; rounds that miss it are flagged, not rejected.
    pub guarantee: Option<f64>,
    pub max_depth: usize,
    /// Minibatch resampling under the sample weights instead of weighting.
    pub resample: Option<ResampleSpec>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResampleSpec {
    pub batch_size: usize,
    pub inner_iterations: usize,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Stump,
            guarantee: None,
            max_depth: 3,
            resample: None,
            seed: 0,
        }
    }
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.guarantee {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::invariant("LearnerSpec", format!("guarantee {g} not in (0, 1)")));
            }
        }
        if let Some(r) = self.resample {
            if r.batch_size == 0 || r.inner_iterations == 0 {
                return Err(Error::invariant("LearnerSpec", "resampling needs batch size and iterations >= 1"));
            }
        }
        Ok(())
    }
}

/// Fits `inner` on minibatches drawn with replacement according to
/// `weights`; the drawn multiset gets uniform inner weights. The recorded
/// loss is the true weighted loss under `weights`.
pub fn train_resampled(train: &Dataset, weights: &[f64], spec: &LearnerSpec, rng: &mut SeededRng) -> Result<BaseModel> {
    check_weights(train, weights)?;
    let resample = spec
        .resample
        .ok_or_else(|| Error::Learner("resampled learner needs a resample spec".into()))?;
    if resample.batch_size == 0 || resample.inner_iterations == 0 {
        return Err(Error::Learner("resampling needs batch size and iterations >= 1".into()));
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Learner(format!("cannot sample weights: {e}")))?;
    let draws = resample.batch_size * resample.inner_iterations;
    let mut counts = vec![0usize; train.len()];
    for _ in 0..draws {
        counts[dist.sample(rng)] += 1;
    }
    let inner: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let all: Vec<usize> = (0..train.len()).collect();
    let predictor = match spec.kind {
        LearnerKind::Stump => Predictor::Stump(best_stump(train, &inner, &all).0),
        LearnerKind::Tree => Predictor::Tree(tree::grow(train, &inner, spec.max_depth)),
    };
    finish(predictor, true, train, weights)
}

/// The learner described by a [`LearnerSpec`].
pub struct BaseLearner {
    spec: LearnerSpec,
    rng: SeededRng,
}

impl BaseLearner {
    pub fn new(spec: LearnerSpec) -> Result<Self> {
        spec.validate()?;
        let rng = seeded_rng(spec.seed);
        Ok(Self { spec, rng })
    }

    pub fn stumps() -> Self {
        Self::new(LearnerSpec::default()).expect("default spec is valid")
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }
}

impl Learner for BaseLearner {
    type Model = BaseModel;

    fn fit(&mut self, train: &Dataset, weights: &[f64]) -> Result<BaseModel> {
        if self.spec.resample.is_some() {
            return train_resampled(train, weights, &self.spec, &mut self.rng);
        }
        match self.spec.kind {
            LearnerKind::Stump => train_stump(train, weights),
            LearnerKind::Tree => train_tree(train, weights, self.spec.max_depth),
        }
    }

    fn losses(&self, model: &BaseModel, data: &Dataset) -> Result<Vec<f64>> {
        zero_one_losses(model, data)
    }

    fn guarantee(&self) -> Option<f64> {
        self.spec.guarantee
    }
}

/// Loss matrix of every base model of an ensemble on `data`.
pub fn ensemble_loss_matrix(ensemble: &EnsembleModel<BaseModel>, data: &Dataset) -> Result<LossMatrix> {
    LossMatrix::new(
        ensemble
            .base_models()
            .iter()
            .map(|m| zero_one_losses(m, data))
            .collect::<Result<_>>()?,
    )
}

/// Randomized prediction: draws one base model from the mixture.
pub fn predict_randomized(ensemble: &EnsembleModel<BaseModel>, x: &[f64], rng: &mut SeededRng) -> Result<usize> {
    let dist = WeightedIndex::new(ensemble.mixture().values())
        .map_err(|e| Error::invariant("ModelMixture", e.to_string()))?;
    ensemble.base_models()[dist.sample(rng)].predict(x)
}

/// Monte-Carlo estimate of the per-sample expected loss: `draws` randomized
/// predictions per sample.
pub fn sampled_losses(
    ensemble: &EnsembleModel<BaseModel>,
    data: &Dataset,
    draws: usize,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::invariant("sampled_losses", "draws must be at least 1"));
    }
    let dist = WeightedIndex::new(ensemble.mixture().values())
        .map_err(|e| Error::invariant("ModelMixture", e.to_string()))?;
    let models = ensemble.base_models();
    data.rows()
        .zip(data.labels())
        .map(|(x, &y)| {
            let mut wrong = 0usize;
            for _ in 0..draws {
                wrong += usize::from(models[dist.sample(rng)].predict(x)? != y);
            }
            Ok(wrong as f64 / draws as f64)
        })
        .collect()
}
