//! Regressors the explainers interrogate.

mod gbt;
mod linear;

pub use gbt::{fit_gbt, GbtModel, GbtParams, TreeNode};
pub use linear::{fit_linear, LinearModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureVector};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),
    #[error("normal matrix is singular; add a ridge term or drop constant columns")]
    SingularDesign,
    #[error("unsupported model document version {0} (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("not a model document: format tag {0:?}")]
    WrongFormat(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Batch prediction over feature vectors, in MPa.
///
/// Implementations must be pure: the same row always maps to the same value,
/// independent of the batch it arrives in.
pub trait Predictor: Sync {
    fn predict_row(&self, x: &FeatureVector) -> f64;

    fn predict(&self, batch: &[FeatureVector]) -> Vec<f64> {
        batch.iter().map(|x| self.predict_row(x)).collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        (**self).predict_row(x)
    }

    fn predict(&self, batch: &[FeatureVector]) -> Vec<f64> {
        (**self).predict(batch)
    }
}

impl<P: Predictor + ?Sized + Send> Predictor for Box<P> {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        (**self).predict_row(x)
    }

    fn predict(&self, batch: &[FeatureVector]) -> Vec<f64> {
        (**self).predict(batch)
    }
}

/// Adapts a closure into a [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&FeatureVector) -> f64 + Sync,
{
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        (self.0)(x)
    }
}

/// Training-quality summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rmse: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    /// Training MSE before the first round and after each boosting round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mse_trace: Vec<f64>,
}

/// RMSE and R² of `p` against `d`'s targets.
pub fn metrics<P: Predictor + ?Sized>(p: &P, d: &Dataset) -> FitReport {
    score(&p.predict(d.rows()), d.targets())
}

pub(crate) fn score(predictions: &[f64], targets: &[f64]) -> FitReport {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let sse: f64 = predictions.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    let sst: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    FitReport { rmse: (sse / n).sqrt(), r2: (sst > 0.0).then(|| 1.0 - sse / sst), mse_trace: Vec::new() }
}

pub const MODEL_FORMAT: &str = "fdmx-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted regressor of either family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Gbt(GbtModel),
    Linear(LinearModel),
}

impl Predictor for Model {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        match self {
            Model::Gbt(m) => m.predict_row(x),
            Model::Linear(m) => m.predict_row(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: Model,
}

#[derive(Deserialize)]
struct DocumentHeader {
    format: String,
    version: u32,
}

impl Model {
    pub fn to_json(&self) -> Result<String, ModelError> {
        let doc =
            ModelDocument { format: MODEL_FORMAT.to_string(), version: MODEL_FORMAT_VERSION, model: self.clone() };
        Ok(crate::numeric::to_json_string(&doc)?)
    }

    /// Parses a model document, rejecting unknown format tags or versions
    /// before looking at the payload.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let header: DocumentHeader = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(ModelError::WrongFormat(header.format));
        }
        if header.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(header.version));
        }
        let doc: ModelDocument = serde_json::from_str(text)?;
        Ok(doc.model)
    }
}
