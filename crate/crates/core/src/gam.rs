//! Generalized additive model with binned, piecewise-constant shape
//! functions, fit by cyclic gradient boosting.
//!
//! Each round visits the features in canonical order, adds
//! `learning_rate × (per-bin mean residual)` into that feature's shape and
//! updates the residuals. After the last round every shape is centred on the
//! training rows and the offsets are folded into the intercept, so a shape's
//! value at `x_j` is exactly that feature's Shapley attribution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, Dataset, FeatureVector, NUM_FEATURES};
use crate::models::{score, Predictor};
use crate::shapley::{feature_names, BackgroundOrigin, Explanation, MethodTag};

pub const GAM_FORMAT: &str = "fdmx-gam";
pub const GAM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GamError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),
    #[error("{targets} targets for {rows} rows")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("target {index} is not finite")]
    NonFiniteTarget { index: usize },
    #[error("unsupported GAM document version {0} (expected {GAM_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("not a GAM document: format tag {0:?}")]
    WrongFormat(String),
    #[error("gam json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub bins: usize,
}

impl Default for GamParams {
    fn default() -> Self {
        Self { rounds: 500, learning_rate: 0.2, bins: 8 }
    }
}

impl GamParams {
    fn validate(&self) -> Result<(), GamError> {
        if self.bins < 2 {
            return Err(GamError::InvalidHyperparam(format!("bins must be at least 2, got {}", self.bins)));
        }
        if self.rounds < 1 {
            return Err(GamError::InvalidHyperparam("rounds must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GamError::InvalidHyperparam(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetOrigin {
    RawTargets,
    SurrogateOfModel,
}

/// Piecewise-constant function of one feature. Bin `b` covers
/// `[bin_edges[b-1], bin_edges[b])`; values beyond the outer edges clamp to
/// the first or last bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub feature: usize,
    pub bin_edges: Vec<f64>,
    pub contributions: Vec<f64>,
    /// Training min and max, used as the outer bin limits on export.
    pub domain: (f64, f64),
}

impl ShapeFunction {
    pub fn bin_of(&self, v: f64) -> usize {
        self.bin_edges.partition_point(|e| *e <= v)
    }

    pub fn value(&self, v: f64) -> f64 {
        self.contributions[self.bin_of(v)]
    }

    pub fn n_bins(&self) -> usize {
        self.contributions.len()
    }

    /// `bin_left,bin_right,contribution` rows for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,contribution\n");
        for (b, c) in self.contributions.iter().enumerate() {
            let left = if b == 0 { self.domain.0 } else { self.bin_edges[b - 1] };
            let right = self.bin_edges.get(b).copied().unwrap_or(self.domain.1);
            out.push_str(&format!("{left},{right},{c}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub rounds: usize,
    pub learning_rate: f64,
    pub bins: usize,
    pub target_origin: TargetOrigin,
    /// Features with a single distinct training value; their shapes are 0.
    #[serde(default)]
    pub degenerate_features: Vec<String>,
    /// Training MSE before the first cycle and after each full cycle.
    #[serde(skip)]
    pub mse_trace: Vec<f64>,
}

/// `prediction(x) = intercept + Σ_j shape_j(x_j)`, summed in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub intercept: f64,
    pub shapes: Vec<ShapeFunction>,
    pub training_meta: TrainingMeta,
}

impl Predictor for GamModel {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        self.shapes.iter().fold(self.intercept, |acc, s| acc + s.value(x[s.feature]))
    }
}

#[derive(Serialize, Deserialize)]
struct GamDocument {
    format: String,
    version: u32,
    model: GamModel,
}

#[derive(Deserialize)]
struct DocumentHeader {
    format: String,
    version: u32,
}

impl GamModel {
    /// Shape values at `x`, in canonical order.
    pub fn terms(&self, x: &FeatureVector) -> [f64; NUM_FEATURES] {
        std::array::from_fn(|j| self.shapes[j].value(x[j]))
    }

    pub fn to_json(&self) -> Result<String, GamError> {
        let doc = GamDocument { format: GAM_FORMAT.into(), version: GAM_FORMAT_VERSION, model: self.clone() };
        Ok(crate::numeric::to_json_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GamError> {
        let header: DocumentHeader = serde_json::from_str(text)?;
        if header.format != GAM_FORMAT {
            return Err(GamError::WrongFormat(header.format));
        }
        if header.version != GAM_FORMAT_VERSION {
            return Err(GamError::UnsupportedVersion(header.version));
        }
        Ok(serde_json::from_str::<GamDocument>(text)?.model)
    }
}

/// Interior bin edges from training-value quantiles. Each edge sits midway
/// between the quantile value and the next larger distinct value; features
/// with few distinct values get one bin per value.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= bins {
        return distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::new();
    for k in 1..bins {
        let idx = (k * n).div_ceil(bins).saturating_sub(1);
        let lo = sorted[idx];
        if let Some(&hi) = sorted[idx..].iter().find(|&&v| v > lo) {
            let edge = (lo + hi) / 2.0;
            if edges.last().is_none_or(|&last| edge > last) {
                edges.push(edge);
            }
        }
    }
    edges
}

/// Fits a GAM to `targets` (row-aligned with `d`).
pub fn fit_gam(d: &Dataset, targets: &[f64], params: &GamParams) -> Result<GamModel, GamError> {
    fit_gam_tagged(d, targets, params, TargetOrigin::RawTargets)
}

fn fit_gam_tagged(
    d: &Dataset,
    targets: &[f64],
    params: &GamParams,
    origin: TargetOrigin,
) -> Result<GamModel, GamError> {
    params.validate()?;
    let n = d.row_count();
    if targets.len() != n {
        return Err(GamError::LengthMismatch { rows: n, targets: targets.len() });
    }
    if let Some(index) = targets.iter().position(|t| !t.is_finite()) {
        return Err(GamError::NonFiniteTarget { index });
    }

    let mut shapes = Vec::with_capacity(NUM_FEATURES);
    let mut assignment = Vec::with_capacity(NUM_FEATURES);
    let mut degenerate_features = Vec::new();
    for j in 0..NUM_FEATURES {
        let col = d.column(j);
        let edges = quantile_edges(&col, params.bins);
        if edges.is_empty() {
            degenerate_features.push(crate::dataset::Feature::ALL[j].name().to_string());
        }
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shape = ShapeFunction {
            feature: j,
            contributions: vec![0.0; edges.len() + 1],
            bin_edges: edges,
            domain: (min, max),
        };
        assignment.push(col.iter().map(|&v| shape.bin_of(v)).collect::<Vec<usize>>());
        shapes.push(shape);
    }

    let mean_target = targets.iter().sum::<f64>() / n as f64;
    let mut residuals: Vec<f64> = targets.iter().map(|t| t - mean_target).collect();
    let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut trace = Vec::with_capacity(params.rounds + 1);
    trace.push(mse(&residuals));

    for _ in 0..params.rounds {
        for (shape, bins) in shapes.iter_mut().zip(&assignment) {
            let k = shape.n_bins();
            if k < 2 {
                continue;
            }
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for (&b, r) in bins.iter().zip(&residuals) {
                sums[b] += r;
                counts[b] += 1;
            }
            let steps: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { params.learning_rate * s / c as f64 } else { 0.0 })
                .collect();
            for (c, s) in shape.contributions.iter_mut().zip(&steps) {
                *c += s;
            }
            for (r, &b) in residuals.iter_mut().zip(bins) {
                *r -= steps[b];
            }
        }
        trace.push(mse(&residuals));
    }

    let mut intercept = mean_target;
    for (shape, bins) in shapes.iter_mut().zip(&assignment) {
        let offset = bins.iter().map(|&b| shape.contributions[b]).sum::<f64>() / n as f64;
        for c in shape.contributions.iter_mut() {
            *c -= offset;
        }
        intercept += offset;
    }

    Ok(GamModel {
        intercept,
        shapes,
        training_meta: TrainingMeta {
            rounds: params.rounds,
            learning_rate: params.learning_rate,
            bins: params.bins,
            target_origin: origin,
            degenerate_features,
            mse_trace: trace,
        },
    })
}

/// How closely the surrogate tracks the black box's predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// `None` when the black-box predictions have zero variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub rows: usize,
}

/// Fits a GAM to `p`'s predictions on `d` and scores it on the same rows.
pub fn fit_surrogate<P: Predictor + ?Sized>(
    p: &P,
    d: &Dataset,
    params: &GamParams,
) -> Result<(GamModel, FidelityReport), GamError> {
    let targets = p.predict(d.rows());
    let gam = fit_gam_tagged(d, &targets, params, TargetOrigin::SurrogateOfModel)?;
    let fidelity = fidelity(&gam, d, &targets);
    Ok((gam, fidelity))
}

/// Surrogate trained on a seeded fraction of `d`; fidelity is still scored on
/// every row of `d`.
pub fn fit_surrogate_on_fraction<P: Predictor + ?Sized>(
    p: &P,
    d: &Dataset,
    params: &GamParams,
    fraction: f64,
    seed: u64,
) -> Result<(GamModel, FidelityReport), GamError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(GamError::InvalidHyperparam(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let k = ((d.row_count() as f64) * fraction).round().max(1.0) as usize;
    let train = d.subset(&d.sample_indices(k, seed)?)?;
    let targets = p.predict(train.rows());
    let gam = fit_gam_tagged(&train, &targets, params, TargetOrigin::SurrogateOfModel)?;
    let fidelity = fidelity(&gam, d, &p.predict(d.rows()));
    Ok((gam, fidelity))
}

fn fidelity(gam: &GamModel, d: &Dataset, reference: &[f64]) -> FidelityReport {
    let s = score(&gam.predict(d.rows()), reference);
    FidelityReport { r2: s.r2, rmse: s.rmse, rows: d.row_count() }
}

/// Exact attributions of an additive model: `values[i][j] = shape_j(x_ij)`,
/// base value = intercept. The reconstruction `base + Σ values` uses the same
/// summation as `predict`, so additivity holds bit-for-bit.
pub fn gam_attributions(g: &GamModel, d: &Dataset) -> Explanation {
    Explanation {
        method: MethodTag::Exact,
        base_value: g.intercept,
        feature_names: feature_names(),
        values: d.rows().iter().map(|x| g.terms(x)).collect(),
        data: d.rows().to_vec(),
        background_origin: BackgroundOrigin::AdditiveModel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::embedded_fdm_corpus;
    use crate::models::{fit_linear, metrics, FnPredictor};

    #[test]
    fn edges_fall_between_distinct_values() {
        let d = embedded_fdm_corpus();
        assert_eq!(quantile_edges(&d.column(0), 8), vec![21.75, 44.25, 66.75, 89.0]);
        assert_eq!(quantile_edges(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], 2), vec![5.5]);
        assert!(quantile_edges(&[3.0; 5], 8).is_empty());
    }

    #[test]
    fn constant_targets_give_flat_shapes() {
        let d = embedded_fdm_corpus();
        let g = fit_gam(&d, &[42.0; 31], &GamParams::default()).unwrap();
        assert_eq!(g.intercept, 42.0);
        assert!(g.shapes.iter().all(|s| s.contributions.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn recovers_additive_step_target() {
        let d = embedded_fdm_corpus();
        let g_fn = |v: f64| {
            if v < 44.25 {
                -2.0
            } else if v < 89.0 {
                1.0
            } else {
                3.5
            }
        };
        let h_fn = |v: f64| if v < 205.0 { 0.5 } else { -1.5 };
        let y: Vec<f64> = d.rows().iter().map(|r| g_fn(r[0]) + h_fn(r[3])).collect();
        let g = fit_gam(&d, &y, &GamParams::default()).unwrap();
        let mse = *g.training_meta.mse_trace.last().unwrap();
        assert!(mse < 1e-4, "{mse}");

        // Corner rows of the design are an indicator in the span of both
        // infill and layer height, so only the fitted surface is unique.
        for (x, t) in d.rows().iter().zip(&y) {
            assert!((g.predict_row(x) - t).abs() < 1e-2);
        }
        let e = gam_attributions(&g, &d);
        assert_eq!(e.additivity_error(&g.predict(d.rows())), 0.0);
    }

    #[test]
    fn shapes_are_centred_and_trace_is_monotone() {
        let d = embedded_fdm_corpus();
        let g = fit_gam(&d, d.targets(), &GamParams::default()).unwrap();
        for s in &g.shapes {
            let total: f64 = d.rows().iter().map(|x| s.value(x[s.feature])).sum();
            assert!(total.abs() < 1e-9);
        }
        for w in g.training_meta.mse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let lin = fit_linear(&d, 0.0).unwrap().1.r2.unwrap();
        assert!(metrics(&g, &d).r2.unwrap() >= lin);
    }

    #[test]
    fn degenerate_feature_shape_is_zero() {
        let d = embedded_fdm_corpus();
        let rows = d.rows().iter().map(|r| [r[0], r[1], 50.0, r[3]]).collect();
        let flat = Dataset::new(rows, d.targets().to_vec(), true).unwrap();
        let g = fit_gam(&flat, flat.targets(), &GamParams::default()).unwrap();
        assert_eq!(g.training_meta.degenerate_features, vec!["print_speed".to_string()]);
        assert_eq!(g.shapes[2].contributions, vec![0.0]);
    }

    #[test]
    fn constant_surrogate_has_undefined_fidelity_r2() {
        let d = embedded_fdm_corpus();
        let (g, f) = fit_surrogate(&FnPredictor(|_: &FeatureVector| 44.0), &d, &GamParams::default()).unwrap();
        assert_eq!(g.intercept, 44.0);
        assert!(g.shapes.iter().all(|s| s.contributions.iter().all(|&c| c == 0.0)));
        assert_eq!(f.r2, None);
        assert_eq!(f.rmse, 0.0);
    }

    #[test]
    fn linear_surrogate_fidelity() {
        let d = embedded_fdm_corpus();
        let (lin, _) = fit_linear(&d, 0.0).unwrap();
        let (g, f) = fit_surrogate(&lin, &d, &GamParams::default()).unwrap();
        assert_eq!(g.training_meta.target_origin, TargetOrigin::SurrogateOfModel);
        assert!(f.r2.unwrap() >= 0.95, "{:?}", f.r2);
    }

    #[test]
    fn fraction_surrogate_is_seeded() {
        let d = embedded_fdm_corpus();
        let (lin, _) = fit_linear(&d, 0.0).unwrap();
        let a = fit_surrogate_on_fraction(&lin, &d, &GamParams::default(), 0.65, 3).unwrap();
        let b = fit_surrogate_on_fraction(&lin, &d, &GamParams::default(), 0.65, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.rows, 31);
        assert!(fit_surrogate_on_fraction(&lin, &d, &GamParams::default(), 0.0, 3).is_err());
    }

    #[test]
    fn invalid_hyperparams() {
        let d = embedded_fdm_corpus();
        for p in [
            GamParams { bins: 1, ..GamParams::default() },
            GamParams { rounds: 0, ..GamParams::default() },
            GamParams { learning_rate: 1.5, ..GamParams::default() },
            GamParams { learning_rate: 0.0, ..GamParams::default() },
        ] {
            assert!(matches!(fit_gam(&d, d.targets(), &p), Err(GamError::InvalidHyperparam(_))));
        }
        assert!(matches!(fit_gam(&d, &[1.0; 3], &GamParams::default()), Err(GamError::LengthMismatch { .. })));
    }

    #[test]
    fn document_round_trip_and_csv_export() {
        let d = embedded_fdm_corpus();
        let g = fit_gam(&d, d.targets(), &GamParams::default()).unwrap();
        let back = GamModel::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(d.rows()), g.predict(d.rows()));
        let bumped = g.to_json().unwrap().replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(GamModel::from_json(&bumped), Err(GamError::UnsupportedVersion(9))));

        let csv = g.shapes[0].to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_left,bin_right,contribution");
        assert_eq!(lines.len(), 1 + g.shapes[0].n_bins());
        assert!(lines[1].starts_with("10.5,21.75,"));
        assert!(lines.last().unwrap().starts_with("89,100,"));
    }
}
