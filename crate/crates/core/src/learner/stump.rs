use crate::error::{Error, Result};
use crate::types::Dataset;

/// Axis-aligned split: `x[feature] >= threshold` goes right.
///
/// A threshold of `-inf` sends every input right, which is how constant
/// classifiers are represented.
#[derive(Clone, Debug, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

impl Stump {
    pub fn constant(label: usize) -> Self {
        Self {
            feature: 0,
            threshold: f64::NEG_INFINITY,
            left: label,
            right: label,
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        if x[self.feature] >= self.threshold {
            self.right
        } else {
            self.left
        }
    }
}

fn argmax(totals: &[f64]) -> (usize, f64) {
    let mut best = (0, totals[0]);
    for (c, &v) in totals.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (c, v);
        }
    }
    best
}

/// The weighted-majority constant classifier and its weighted loss.
pub(crate) fn weighted_majority(data: &Dataset, weights: &[f64], subset: &[usize]) -> (usize, f64) {
    let mut totals = vec![0.0; data.n_classes()];
    for &i in subset {
        totals[data.labels()[i]] += weights[i];
    }
    let total: f64 = totals.iter().sum();
    let (c, best) = argmax(&totals);
    (c, total - best)
}

/// Exhaustive weighted stump search over the rows in `subset`.
///
/// Thresholds sit at midpoints of consecutive distinct feature values; the
/// constant classifier is always a candidate. Returns the stump and its
/// weighted zero-one loss over `subset`. Ties keep the earliest candidate
/// (constant first, then by feature and threshold).
pub(crate) fn best_stump(data: &Dataset, weights: &[f64], subset: &[usize]) -> (Stump, f64) {
    let c = data.n_classes();
    let (label, mut best_loss) = weighted_majority(data, weights, subset);
    let mut best = Stump::constant(label);
    let labels = data.labels();
    let mut totals = vec![0.0; c];
    for &i in subset {
        totals[labels[i]] += weights[i];
    }
    let total: f64 = totals.iter().sum();

    let mut order = subset.to_vec();
    let mut left = vec![0.0; c];
    let mut right = vec![0.0; c];
    for j in 0..data.n_features() {
        order.sort_by(|&a, &b| data.feature(a, j).total_cmp(&data.feature(b, j)).then(a.cmp(&b)));
        left.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..order.len() {
            let i = order[k];
            left[labels[i]] += weights[i];
            let Some(&next) = order.get(k + 1) else { break };
            let (a, b) = (data.feature(i, j), data.feature(next, j));
            if a == b {
                continue;
            }
            for ((r, t), l) in right.iter_mut().zip(&totals).zip(&left) {
                *r = t - l;
            }
            let (lc, lw) = argmax(&left);
            let (rc, rw) = argmax(&right);
            let loss = total - lw - rw;
            if loss < best_loss - 1e-15 {
                let mid = 0.5 * (a + b);
                best_loss = loss;
                best = Stump {
                    feature: j,
                    threshold: if mid > a { mid } else { b },
                    left: lc,
                    right: rc,
                };
            }
        }
    }
    (best, best_loss.max(0.0))
}

pub(crate) fn check_weights(data: &Dataset, weights: &[f64]) -> Result<()> {
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch {
            context: "sample weights",
            expected: data.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Learner("sample weights must be finite and nonnegative".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(Error::Learner(format!("sample weights sum to {s}, expected 1")));
    }
    Ok(())
}
