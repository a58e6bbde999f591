//! Shapley attributions for any [`Predictor`].
//!
//! The value of a coalition `S` is the interventional expectation
//! `v(S) = mean_r predict(composite(x, r, S))`, where the composite row takes
//! the features in `S` from the explained instance and the rest from
//! background row `r`. Exact attributions enumerate all 16 coalitions; the
//! kernel estimator solves the Shapley-kernel weighted least-squares problem
//! with the efficiency constraint eliminated by substitution.

mod exact;
mod kernel;

pub use exact::{coalition_value, exact_shapley};
pub use kernel::{kernel_shapley, KernelBudget, KernelDiagnostics};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, Dataset, Feature, FeatureVector, NUM_FEATURES};
use crate::models::Predictor;

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("kernel budget {0} is below the minimum of {min}", min = NUM_FEATURES + 2)]
    InvalidBudget(usize),
    #[error("coalition design is rank-deficient even after full enumeration")]
    DegenerateSystem,
    #[error("explanation is empty")]
    EmptyExplanation,
    #[error("sample index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A subset of the features, as a bit mask over canonical indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(u8);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);
    pub const FULL: Coalition = Coalition((1 << NUM_FEATURES) - 1);
    /// Number of distinct coalitions, `2^d`.
    pub const COUNT: usize = 1 << NUM_FEATURES;

    pub fn from_bits(bits: u8) -> Self {
        Coalition(bits & Self::FULL.0)
    }

    pub fn from_features(features: &[usize]) -> Self {
        Coalition(features.iter().fold(0u8, |m, &j| m | (1 << j)))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, feature: usize) -> bool {
        self.0 & (1 << feature) != 0
    }

    pub fn with(self, feature: usize) -> Self {
        Coalition(self.0 | (1 << feature))
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Every coalition, ascending by mask.
    pub fn all() -> impl Iterator<Item = Coalition> {
        (0..Self::COUNT as u8).map(Coalition)
    }
}

/// Features in `coalition` come from `x`, the rest from `background_row`.
pub fn composite(x: &FeatureVector, background_row: &FeatureVector, coalition: Coalition) -> FeatureVector {
    std::array::from_fn(|j| if coalition.contains(j) { x[j] } else { background_row[j] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundOrigin {
    FullDataset,
    Subsample {
        k: usize,
        seed: u64,
    },
    /// Rows supplied directly by the caller.
    Explicit,
    /// Read off an additive model's centred shape functions; no averaging.
    AdditiveModel,
}

/// Rows the coalition value function averages over.
#[derive(Clone, Debug, PartialEq)]
pub struct Background {
    rows: Vec<FeatureVector>,
    origin: BackgroundOrigin,
}

impl Background {
    pub fn full(d: &Dataset) -> Self {
        Self { rows: d.rows().to_vec(), origin: BackgroundOrigin::FullDataset }
    }

    /// `k` rows drawn without replacement by a seeded generator.
    pub fn subsample(d: &Dataset, k: usize, seed: u64) -> Result<Self, ShapError> {
        let idx = d.sample_indices(k, seed)?;
        Ok(Self { rows: idx.iter().map(|&i| d.rows()[i]).collect(), origin: BackgroundOrigin::Subsample { k, seed } })
    }

    pub fn from_rows(rows: Vec<FeatureVector>) -> Result<Self, ShapError> {
        if rows.is_empty() {
            return Err(ShapError::EmptyBackground);
        }
        Ok(Self { rows, origin: BackgroundOrigin::Explicit })
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn origin(&self) -> &BackgroundOrigin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Attributions for one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attribution {
    pub base_value: f64,
    pub values: [f64; NUM_FEATURES],
}

impl Attribution {
    /// `base_value + Σ values`, summed left to right.
    pub fn total(&self) -> f64 {
        self.values.iter().fold(self.base_value, |acc, v| acc + v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Exact,
    Kernel,
}

/// Which estimator [`explain_dataset`] runs per row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Exact,
    Kernel { budget: KernelBudget, seed: u64 },
}

impl Method {
    pub fn tag(&self) -> MethodTag {
        match self {
            Method::Exact => MethodTag::Exact,
            Method::Kernel { .. } => MethodTag::Kernel,
        }
    }

    /// Additivity tolerance the estimator guarantees.
    pub fn tolerance(&self) -> f64 {
        match self {
            Method::Exact => 1e-9,
            Method::Kernel { .. } => 1e-6,
        }
    }
}

/// Per-sample, per-feature attributions with a shared base value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: MethodTag,
    pub base_value: f64,
    pub feature_names: Vec<String>,
    /// Row-major `[n_samples][NUM_FEATURES]`.
    pub values: Vec<[f64; NUM_FEATURES]>,
    pub data: Vec<FeatureVector>,
    pub background_origin: BackgroundOrigin,
}

impl Explanation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> Attribution {
        Attribution { base_value: self.base_value, values: self.values[i] }
    }

    /// `base_value + Σ_j values[i][j]` for every sample.
    pub fn reconstructed(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).total()).collect()
    }

    /// Largest `|reconstructed − prediction|` over all samples.
    pub fn additivity_error(&self, predictions: &[f64]) -> f64 {
        self.reconstructed().iter().zip(predictions).map(|(r, p)| (r - p).abs()).fold(0.0, f64::max)
    }

    /// Attributions of one feature across all samples.
    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[feature]).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::numeric::to_json_string(self)
    }
}

pub(crate) fn feature_names() -> Vec<String> {
    Feature::ALL.iter().map(|f| f.name().to_string()).collect()
}

/// Explains every row of `d`. Rows run in parallel; each row's arithmetic is
/// sequential, so the result does not depend on the thread count.
pub fn explain_dataset<P: Predictor + ?Sized>(
    p: &P,
    background: &Background,
    d: &Dataset,
    method: Method,
) -> Result<Explanation, ShapError> {
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    let attributions: Vec<Attribution> = d
        .rows()
        .par_iter()
        .map(|x| match method {
            Method::Exact => Ok(exact_shapley(p, background, x)),
            Method::Kernel { budget, seed } => kernel_shapley(p, background, x, budget, seed).map(|(a, _)| a),
        })
        .collect::<Result<_, _>>()?;
    let base_value = attributions.first().map(|a| a.base_value).unwrap_or(f64::NAN);
    Ok(Explanation {
        method: method.tag(),
        base_value,
        feature_names: feature_names(),
        values: attributions.iter().map(|a| a.values).collect(),
        data: d.rows().to_vec(),
        background_origin: background.origin().clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub index: usize,
    pub importance: f64,
}

/// Features sorted by mean absolute attribution, descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.feature.as_str()).collect()
    }

    /// Importance of a feature by canonical index.
    pub fn importance_of(&self, feature: usize) -> f64 {
        self.entries.iter().find(|e| e.index == feature).map(|e| e.importance).unwrap_or(f64::NAN)
    }

    /// Names of the first `k` features, as a sorted set.
    pub fn top_set(&self, k: usize) -> Vec<String> {
        let mut top: Vec<String> = self.entries.iter().take(k).map(|e| e.feature.clone()).collect();
        top.sort();
        top
    }
}

/// Mean |attribution| per feature; ties keep canonical order.
pub fn mean_abs_importance(e: &Explanation) -> Result<ImportanceRanking, ShapError> {
    if e.is_empty() {
        return Err(ShapError::EmptyExplanation);
    }
    let n = e.len() as f64;
    let mut entries: Vec<ImportanceEntry> = (0..NUM_FEATURES)
        .map(|j| ImportanceEntry {
            feature: e.feature_names.get(j).cloned().unwrap_or_else(|| Feature::ALL[j].name().into()),
            index: j,
            importance: e.values.iter().map(|v| v[j].abs()).sum::<f64>() / n,
        })
        .collect();
    entries.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(ImportanceRanking { entries })
}
