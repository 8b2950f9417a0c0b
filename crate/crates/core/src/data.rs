//! CSV ingestion, a synthetic subpopulation generator, and train/validation
//! splitting.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{seeded_rng, Dataset};

/// Which CSV column holds the label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name; requires a header row.
    Name(String),
    /// Zero-based column index.
    Index(usize),
    /// The rightmost column.
    Last,
}

impl FromStr for LabelColumn {
    type Err = Error;

    /// Digits are an index, `last` the rightmost column, anything else a
    /// header name.
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Data("empty label column".into()));
        }
        if s == "last" {
            return Ok(LabelColumn::Last);
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Reads a comma-separated file. Every non-label column must parse as a
/// real number; labels are mapped to class indices in order of first
/// appearance and their text is kept as the class names.
///
/// Parse errors name the 1-based data row (the header is not counted) and
/// the column's header name, or its zero-based index without a header.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let headers: Option<Vec<String>> = if has_header {
        Some(
            reader
                .headers()
                .map_err(|e| csv_error(e, path))?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };
    let label_index = match (label, &headers) {
        (LabelColumn::Index(i), _) => *i,
        (LabelColumn::Last, Some(h)) => h.len().saturating_sub(1),
        (LabelColumn::Last, None) => usize::MAX,
        (LabelColumn::Name(name), Some(h)) => h
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Data(format!("label column {name:?} not found in header")))?,
        (LabelColumn::Name(name), None) => {
            return Err(Error::Data(format!("label column {name:?} given by name but the file has no header")))
        }
    };
    let column_name = |j: usize| match &headers {
        Some(h) => h.get(j).cloned().unwrap_or_else(|| j.to_string()),
        None => j.to_string(),
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut label_index = label_index;
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            column: String::new(),
            detail: e.to_string(),
        })?;
        if label_index == usize::MAX {
            label_index = record.len().saturating_sub(1);
        }
        if label_index >= record.len() {
            return Err(Error::Parse {
                row: row_no,
                column: column_name(label_index),
                detail: format!("row has {} columns, label column is {label_index}", record.len()),
            });
        }
        let mut x = Vec::with_capacity(record.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == label_index {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: column_name(j),
                detail: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: column_name(j),
                    detail: format!("non-finite value {cell:?}"),
                });
            }
            x.push(v);
        }
        let text = &record[label_index];
        let y = *class_index.entry(text.to_string()).or_insert_with(|| {
            classes.push(text.to_string());
            classes.len() - 1
        });
        rows.push(x);
        labels.push(y);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    if rows[0].is_empty() {
        return Err(Error::Data("no feature columns besides the label".into()));
    }
    // a single observed label still needs a second class slot
    if classes.len() == 1 {
        classes.push(format!("not {}", classes[0]));
    }
    let name = path.file_stem().map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::with_classes(name, rows, labels, classes).map_err(|e| Error::Data(e.to_string()))
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Parameters of [`synth_subpop`], also parseable from
/// `n=2000,groups=0.9:0.1,noise=0:0.2,d=2,seed=1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub groups: Vec<f64>,
    pub noise: Vec<f64>,
    pub d: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            groups: vec![0.9, 0.1],
            noise: vec![0.0, 0.0],
            d: 2,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn generate(&self) -> Result<(Dataset, Vec<usize>)> {
        synth_subpop(self.n, &self.groups, &self.noise, self.d, self.seed)
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |detail: String| Error::Data(format!("synthetic spec {s:?}: {detail}"));
        let list = |v: &str| -> Result<Vec<f64>> {
            v.split(':')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("bad number {x:?}"))))
                .collect()
        };
        let mut spec = SynthSpec::default();
        let mut noise_given = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            let value = value.trim();
            match key.trim() {
                "n" => spec.n = value.parse().map_err(|_| bad(format!("bad n {value:?}")))?,
                "d" => spec.d = value.parse().map_err(|_| bad(format!("bad d {value:?}")))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
                "groups" => spec.groups = list(value)?,
                "noise" => {
                    spec.noise = list(value)?;
                    noise_given = true;
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if !noise_given {
            spec.noise = vec![0.0; spec.groups.len()];
        }
        Ok(spec)
    }
}

impl std::fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(":");
        write!(
            f,
            "n={},groups={},noise={},d={},seed={}",
            self.n,
            join(&self.groups),
            join(&self.noise),
            self.d,
            self.seed
        )
    }
}

/// Distance between consecutive group centers along the diagonal.
const GROUP_SPACING: f64 = 6.0;

/// Gaussian clusters with one linear label rule per group.
///
/// Group `g` is centered at `6 g (1, ..., 1)` with unit variance. Its clean
/// label is `1[x_k > 6 g]` with `k = g mod d`, so groups sharing a
/// coordinate are separable by the same kind of stump while groups on
/// different coordinates disagree. Labels are then flipped at the group's
/// noise rate. Group sizes are `round(fraction * n)` with the rounding
/// error absorbed by the largest group; rows are stored group by group.
///
/// The group vector is for diagnostics only and is never part of the data.
pub fn synth_subpop(
    n: usize,
    group_sizes: &[f64],
    group_noise: &[f64],
    d: usize,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if n == 0 || d == 0 {
        return Err(Error::Data("synthetic data needs n >= 1 and d >= 1".into()));
    }
    if group_sizes.is_empty() || group_sizes.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::Data("group fractions must be nonnegative".into()));
    }
    let total: f64 = group_sizes.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Data(format!("group fractions sum to {total}, expected 1")));
    }
    if group_noise.len() != group_sizes.len() {
        return Err(Error::Data(format!(
            "{} noise rates for {} groups",
            group_noise.len(),
            group_sizes.len()
        )));
    }
    if group_noise.iter().any(|r| !(0.0..0.5).contains(r)) {
        return Err(Error::Data("noise rates must lie in [0, 0.5)".into()));
    }

    let mut counts: Vec<usize> = group_sizes.iter().map(|f| (f * n as f64).round() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let largest = (0..counts.len()).max_by(|&a, &b| group_sizes[a].total_cmp(&group_sizes[b]).then(b.cmp(&a))).unwrap_or(0);
    if assigned > n {
        let excess = assigned - n;
        if counts[largest] < excess {
            return Err(Error::Data("cannot round group sizes to n".into()));
        }
        counts[largest] -= excess;
    } else {
        counts[largest] += n - assigned;
    }

    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (g, (&count, &noise)) in counts.iter().zip(group_noise).enumerate() {
        let center = GROUP_SPACING * g as f64;
        let axis = g % d;
        for _ in 0..count {
            let x: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    center + z
                })
                .collect();
            let clean = usize::from(x[axis] > center);
            let flip = noise > 0.0 && rng.random_bool(noise);
            rows.push(x);
            labels.push(if flip { 1 - clean } else { clean });
            groups.push(g);
        }
    }
    let data = Dataset::with_classes(format!("synth-{seed}"), rows, labels, vec!["0".into(), "1".into()])?;
    Ok((data, groups))
}

/// How to carve a validation set out of the training data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub val_fraction: f64,
    pub seed: u64,
    /// Use the whole training set as validation; `val_fraction` is ignored.
    pub reuse_train_as_val: bool,
}

impl SplitSpec {
    pub fn holdout(val_fraction: f64, seed: u64) -> Self {
        Self {
            val_fraction,
            seed,
            reuse_train_as_val: false,
        }
    }

    pub fn reuse() -> Self {
        Self {
            val_fraction: 0.0,
            seed: 0,
            reuse_train_as_val: true,
        }
    }
}

/// Seeded shuffle, then the first `round(n * val_fraction)` shuffled rows
/// form the validation set. Both parts keep shuffled order.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if spec.reuse_train_as_val {
        return Ok((data.clone(), data.clone()));
    }
    split_indices(data.len(), spec).and_then(|(train, val)| {
        Ok((
            data.select(&train, format!("{}-train", data.name()))?,
            data.select(&val, format!("{}-val", data.name()))?,
        ))
    })
}

/// The index partition behind [`split`].
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&spec.val_fraction) {
        return Err(Error::Data(format!("val fraction {} not in [0, 1)", spec.val_fraction)));
    }
    let n_val = (n as f64 * spec.val_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Data(format!(
            "split of {n} rows at fraction {} leaves an empty side",
            spec.val_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(spec.seed));
    let val = order[..n_val].to_vec();
    let train = order[n_val..].to_vec();
    Ok((train, val))
}

/// Per-feature `(min, max)` ranges for min-max scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax {
    ranges: Vec<(f64, f64)>,
}

impl MinMax {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.n_features();
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for row in data.rows() {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Self { ranges }
    }

    /// Maps each feature to `[0, 1]` on the fitted range; constant features
    /// become 0.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.ranges.len() {
            return Err(Error::DimensionMismatch {
                context: "min-max scaling",
                expected: self.ranges.len(),
                got: data.n_features(),
            });
        }
        let rows = data
            .rows()
            .map(|row| {
                row.iter()
                    .zip(&self.ranges)
                    .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
                    .collect()
            })
            .collect();
        Dataset::with_classes(data.name(), rows, data.labels().to_vec(), data.class_names().to_vec())
    }
}
