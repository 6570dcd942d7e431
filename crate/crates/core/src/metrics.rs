//! Pairwise distances between models and weight-averages.
//!
//! Two distances are used throughout:
//!
//! - **ratio-error diversity** `d_D = N_uns / N_sha`, where `N_uns` counts
//!   examples misclassified by exactly one model and `N_sha` examples
//!   misclassified by both. `N_sha = 0` with `N_uns > 0` yields
//!   `f64::INFINITY`, which orders above every finite value; two models with
//!   no errors at all are at diversity 0.
//! - **squared Euclidean distance** `d_E = ||a - b||²` over flattened parameters.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{CorrectBits, WeightVector};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 items, got {0}")]
    TooFew(usize),
    #[error("matrix is not square: {0} entries for {1} labels")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("matrix diagonal must be zero at {0}")]
    NonZeroDiagonal(usize),
    #[error("negative or NaN distance at ({0}, {1})")]
    Negative(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Diversity,
    Euclidean,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 2] = [DistanceKind::Diversity, DistanceKind::Euclidean];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Diversity => "diversity",
            DistanceKind::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ratio-error diversity between two correctness vectors on the same split.
pub fn ratio_error(a: &CorrectBits, b: &CorrectBits) -> Result<f64, MetricError> {
    let (unshared, shared) = a.error_overlap(b).ok_or(MetricError::LengthMismatch(a.len(), b.len()))?;
    Ok(match (unshared, shared) {
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (u, s) => u as f64 / s as f64,
    })
}

/// Squared Euclidean distance, accumulated in `f64`.
pub fn euclidean_sq(a: &WeightVector, b: &WeightVector) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::LengthMismatch(a.dim(), b.dim()));
    }
    let mut lanes = [0.0f64; 4];
    let xs = a.as_slice().chunks_exact(4);
    let ys = b.as_slice().chunks_exact(4);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (x, y) in xs.zip(ys) {
        for k in 0..4 {
            let d = f64::from(x[k]) - f64::from(y[k]);
            lanes[k] += d * d;
        }
    }
    let mut total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (x, y) in xr.iter().zip(yr) {
        let d = f64::from(*x) - f64::from(*y);
        total += d * d;
    }
    Ok(total)
}

/// Mean ratio-error over unordered distinct pairs.
///
/// Infinite pairs are excluded from `mean` and counted in `infinite_pairs`;
/// when every pair is infinite the mean is `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDiversity {
    #[serde(with = "ext_real")]
    pub mean: f64,
    pub finite_pairs: usize,
    pub infinite_pairs: usize,
}

pub fn avg_pairwise_diversity(models: &[&CorrectBits]) -> Result<PairwiseDiversity, MetricError> {
    if models.len() < 2 {
        return Err(MetricError::TooFew(models.len()));
    }
    let mut sum = 0.0;
    let mut finite_pairs = 0;
    let mut infinite_pairs = 0;
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let d = ratio_error(models[i], models[j])?;
            if d.is_finite() {
                sum += d;
                finite_pairs += 1;
            } else {
                infinite_pairs += 1;
            }
        }
    }
    let mean = if finite_pairs == 0 { f64::INFINITY } else { sum / finite_pairs as f64 };
    if infinite_pairs > 0 {
        log::debug!("average pairwise diversity: {infinite_pairs} infinite pairs excluded");
    }
    Ok(PairwiseDiversity { mean, finite_pairs, infinite_pairs })
}

/// One point handed to [`pairwise_distance_matrix`].
#[derive(Clone, Copy, Debug)]
pub struct MetricItem<'a> {
    pub weights: &'a WeightVector,
    /// ID-validation correctness.
    pub correct: &'a CorrectBits,
}

/// Symmetric pairwise distances, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    kind: DistanceKind,
    labels: Vec<String>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and non-negativity.
    pub fn from_entries(kind: DistanceKind, labels: Vec<String>, entries: Vec<f64>) -> Result<Self, MetricError> {
        let n = labels.len();
        if entries.len() != n * n {
            return Err(MetricError::NotSquare(entries.len(), n));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(MetricError::NonZeroDiagonal(i));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if v.is_nan() || v < 0.0 {
                    return Err(MetricError::Negative(i, j));
                }
                if v != entries[j * n + i] {
                    return Err(MetricError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { kind, labels, entries })
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MetricError> {
        if labels.len() != self.len() {
            return Err(MetricError::NotSquare(self.entries.len(), labels.len()));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Row-major CSV with a header row of ids; infinity is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (i, label) in self.labels.iter().enumerate() {
            out.push_str(label);
            for j in 0..self.len() {
                let _ = write!(out, ",{}", fmt_ext(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats a distance, writing `+inf` as the literal token `inf`.
pub fn fmt_ext(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn pairwise_distance_matrix(items: &[MetricItem<'_>], kind: DistanceKind) -> Result<DistanceMatrix, MetricError> {
    let n = items.len();
    if n < 2 {
        return Err(MetricError::TooFew(n));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| match kind {
            DistanceKind::Diversity => ratio_error(items[i].correct, items[j].correct),
            DistanceKind::Euclidean => euclidean_sq(items[i].weights, items[j].weights),
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut entries = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
    let labels = (1..=n).map(|i| i.to_string()).collect();
    Ok(DistanceMatrix { kind, labels, entries })
}

/// Serde adapter for extended reals: `+inf` travels as the string `"inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

/// [`ext_real`] for per-run series tables (`None` stays `null`).
pub mod ext_real_runs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Cell(#[serde(with = "super::ext_real")] f64);

    pub fn serialize<S: Serializer>(v: &[Vec<Option<f64>>], s: S) -> Result<S::Ok, S::Error> {
        let cells: Vec<Vec<Option<Cell>>> = v.iter().map(|r| r.iter().map(|x| x.map(Cell)).collect()).collect();
        cells.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Option<f64>>>, D::Error> {
        let cells: Vec<Vec<Option<Cell>>> = Deserialize::deserialize(d)?;
        Ok(cells.into_iter().map(|r| r.into_iter().map(|c| c.map(|c| c.0)).collect()).collect())
    }
}
