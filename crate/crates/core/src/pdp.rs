//! Partial dependence curves and their Shapley-scatter overlay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{summarize, Dataset, Feature, FeatureVector, NUM_FEATURES};
use crate::models::Predictor;
use crate::numeric::order_free_mean;
use crate::shapley::Explanation;

#[derive(Debug, Error)]
pub enum PdpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("feature index {0} out of range")]
    InvalidFeature(usize),
    #[error("explanation rows do not match the dataset rows")]
    ExplanationMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdpMode {
    /// Mean prediction over all rows with the feature overwritten.
    Average,
    /// Prediction at the column-means vector with the feature overwritten.
    AtMeans,
}

impl PdpMode {
    pub fn name(self) -> &'static str {
        match self {
            PdpMode::Average => "average",
            PdpMode::AtMeans => "at_means",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// Strictly ascending, finite points.
    Explicit(Vec<f64>),
    /// `n_points ≥ 2` evenly spaced over the feature's observed range. A
    /// constant feature yields its single value.
    Linear { n_points: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Linear { n_points: 25 }
    }
}

impl GridSpec {
    pub fn resolve(&self, d: &Dataset, feature: usize) -> Result<Vec<f64>, PdpError> {
        let grid = match self {
            GridSpec::Explicit(points) => points.clone(),
            GridSpec::Linear { n_points } => {
                if *n_points < 2 {
                    return Err(PdpError::InvalidGrid(format!("need at least 2 points, got {n_points}")));
                }
                let col = d.column(feature);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let step = (hi - lo) / (*n_points - 1) as f64;
                let mut g: Vec<f64> = (0..*n_points).map(|k| lo + step * k as f64).collect();
                g[*n_points - 1] = hi;
                g.dedup();
                g
            }
        };
        if grid.is_empty() {
            return Err(PdpError::InvalidGrid("empty grid".into()));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(PdpError::InvalidGrid("grid contains a non-finite point".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PdpError::InvalidGrid("grid is not strictly ascending".into()));
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: usize,
    pub mode: PdpMode,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Mean prediction over the unmodified rows.
    pub reference: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
}

/// Average-mode curve plus one `(x_ij, base + φ_ij)` point per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdpOverlay {
    pub curve: PdpCurve,
    /// The explanation's base value, drawn as the horizontal reference.
    pub base_value: f64,
    pub scatter: Vec<ScatterPoint>,
}

/// JSON form: `{feature, mode, grid, values, reference, scatter?}`.
#[derive(Serialize)]
struct CurveDocument<'a> {
    feature: &'a str,
    mode: PdpMode,
    grid: &'a [f64],
    values: &'a [f64],
    reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scatter: Option<&'a [ScatterPoint]>,
}

fn feature_name(index: usize) -> &'static str {
    Feature::from_index(index).map(Feature::name).unwrap_or("unknown")
}

impl PdpCurve {
    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::numeric::to_json_string(&CurveDocument {
            feature: feature_name(self.feature),
            mode: self.mode,
            grid: &self.grid,
            values: &self.values,
            reference: self.reference,
            base_value: None,
            scatter: None,
        })
    }
}

impl PdpOverlay {
    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::numeric::to_json_string(&CurveDocument {
            feature: feature_name(self.curve.feature),
            mode: self.curve.mode,
            grid: &self.curve.grid,
            values: &self.curve.values,
            reference: self.curve.reference,
            base_value: Some(self.base_value),
            scatter: Some(&self.scatter),
        })
    }
}

pub fn partial_dependence<P: Predictor + ?Sized>(
    p: &P,
    d: &Dataset,
    feature: usize,
    grid: &GridSpec,
    mode: PdpMode,
) -> Result<PdpCurve, PdpError> {
    if feature >= NUM_FEATURES {
        return Err(PdpError::InvalidFeature(feature));
    }
    let grid = grid.resolve(d, feature)?;
    let means = summarize(d).feature_means();
    let values = grid
        .par_iter()
        .map(|&g| match mode {
            PdpMode::Average => {
                let rows: Vec<FeatureVector> = d.rows().iter().map(|r| with_value(r, feature, g)).collect();
                order_free_mean(&p.predict(&rows))
            }
            PdpMode::AtMeans => p.predict_row(&with_value(&means, feature, g)),
        })
        .collect();
    let reference = order_free_mean(&p.predict(d.rows()));
    Ok(PdpCurve { feature, mode, grid, values, reference })
}

fn with_value(row: &FeatureVector, feature: usize, value: f64) -> FeatureVector {
    let mut r = *row;
    r[feature] = value;
    r
}

/// Average-mode curve with each sample's `base + φ` for `feature` overlaid.
pub fn pdp_with_shap_overlay<P: Predictor + ?Sized>(
    p: &P,
    d: &Dataset,
    e: &Explanation,
    feature: usize,
    grid: &GridSpec,
) -> Result<PdpOverlay, PdpError> {
    if e.data.as_slice() != d.rows() || e.values.len() != d.row_count() {
        return Err(PdpError::ExplanationMismatch);
    }
    let curve = partial_dependence(p, d, feature, grid, PdpMode::Average)?;
    let scatter = d
        .rows()
        .iter()
        .zip(&e.values)
        .map(|(x, v)| ScatterPoint { x: x[feature], y: e.base_value + v[feature] })
        .collect();
    Ok(PdpOverlay { curve, base_value: e.base_value, scatter })
}
