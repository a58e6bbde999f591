use serde::{Deserialize, Serialize};

use super::{score, FitReport, ModelError, Predictor};
use crate::dataset::{Dataset, FeatureVector, NUM_FEATURES};
use crate::numeric::{order_free_mean, solve_symmetric};

/// `prediction(x) = intercept + Σ_j weights[j] * x[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: [f64; NUM_FEATURES],
    pub intercept: f64,
    pub ridge_epsilon: f64,
}

impl Predictor for LinearModel {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        let mut acc = self.intercept;
        for (w, v) in self.weights.iter().zip(x) {
            acc += w * v;
        }
        acc
    }
}

/// Minimizes `Σ (y − ŷ)² + ridge_epsilon·‖w‖²` through the normal equations on
/// mean-centred columns; the intercept is not penalized.
pub fn fit_linear(d: &Dataset, ridge_epsilon: f64) -> Result<(LinearModel, FitReport), ModelError> {
    if !(ridge_epsilon.is_finite() && ridge_epsilon >= 0.0) {
        return Err(ModelError::InvalidHyperparam(format!("ridge_epsilon must be non-negative, got {ridge_epsilon}")));
    }
    let n = d.row_count() as f64;
    let x = d.rows();
    let y = d.targets();
    let x_mean: [f64; NUM_FEATURES] = std::array::from_fn(|j| order_free_mean(&d.column(j)));
    let y_mean = y.iter().sum::<f64>() / n;

    let mut gram = vec![vec![0.0; NUM_FEATURES]; NUM_FEATURES];
    let mut rhs = vec![0.0; NUM_FEATURES];
    for (row, &t) in x.iter().zip(y) {
        let c: [f64; NUM_FEATURES] = std::array::from_fn(|j| row[j] - x_mean[j]);
        for a in 0..NUM_FEATURES {
            rhs[a] += c[a] * (t - y_mean);
            for b in 0..NUM_FEATURES {
                gram[a][b] += c[a] * c[b];
            }
        }
    }
    for (a, row) in gram.iter_mut().enumerate() {
        let raw: f64 = x.iter().map(|r| r[a] * r[a]).sum();
        if ridge_epsilon == 0.0 && row[a] <= 1e-20 * raw {
            return Err(ModelError::SingularDesign);
        }
        row[a] += ridge_epsilon;
    }

    let solution = solve_symmetric(&gram, &rhs).ok_or(ModelError::SingularDesign)?;
    let weights: [f64; NUM_FEATURES] = std::array::from_fn(|j| solution[j]);
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    let model = LinearModel { weights, intercept, ridge_epsilon };
    let report = score(&model.predict(x), y);
    Ok((model, report))
}
