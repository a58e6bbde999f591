use serde::{Deserialize, Serialize};

use super::{score, FitReport, ModelError, Predictor};
use crate::dataset::{Dataset, FeatureVector, NUM_FEATURES};

/// Splits with a variance reduction at or below this are not taken.
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_rounds: 200, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 2 }
    }
}

impl GbtParams {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidHyperparam(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(ModelError::InvalidHyperparam("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ModelError::InvalidHyperparam("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned regression tree node. Rows with `x[feature] < threshold`
/// go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn leaf_value(&self, x: &FeatureVector) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Visits every node depth-first, left before right.
    pub fn for_each(&self, f: &mut impl FnMut(&TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.for_each(f);
            right.for_each(f);
        }
    }
}

/// Least-squares gradient-boosted trees.
///
/// `prediction(x) = init_value + learning_rate * Σ_t leaf_t(x)`, with leaf
/// values stored unshrunk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub init_value: f64,
    pub learning_rate: f64,
    pub params: GbtParams,
    pub trees: Vec<TreeNode>,
}

impl Predictor for GbtModel {
    fn predict_row(&self, x: &FeatureVector) -> f64 {
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.leaf_value(x);
        }
        self.init_value + self.learning_rate * sum
    }
}

/// Fits `params.n_rounds` trees, each to the current residuals by greedy
/// variance-reduction splitting.
///
/// Split search scans features in canonical order and thresholds in
/// ascending order; only a strictly larger gain replaces the incumbent, so
/// ties go to the lowest feature index and then the lowest threshold.
/// There is no subsampling: the fit is a pure function of data and params.
pub fn fit_gbt(d: &Dataset, params: &GbtParams) -> Result<(GbtModel, FitReport), ModelError> {
    params.validate()?;
    let x = d.rows();
    let y = d.targets();
    let n = y.len();
    let init_value = y.iter().sum::<f64>() / n as f64;

    let mut fitted = vec![init_value; n];
    let mut trace = Vec::with_capacity(params.n_rounds + 1);
    trace.push(mse(&fitted, y));
    let all: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut residuals = vec![0.0; n];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            residuals[i] = y[i] - fitted[i];
        }
        let tree = grow(x, &residuals, &all, 0, params);
        for i in 0..n {
            fitted[i] += params.learning_rate * tree.leaf_value(&x[i]);
        }
        trace.push(mse(&fitted, y));
        trees.push(tree);
    }

    let model = GbtModel { init_value, learning_rate: params.learning_rate, params: params.clone(), trees };
    let mut report = score(&model.predict(x), y);
    report.mse_trace = trace;
    Ok((model, report))
}

fn mse(fitted: &[f64], y: &[f64]) -> f64 {
    fitted.iter().zip(y).map(|(f, t)| (t - f) * (t - f)).sum::<f64>() / y.len() as f64
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// `idx` must be ascending.
fn grow(x: &[FeatureVector], residuals: &[f64], idx: &[usize], depth: usize, params: &GbtParams) -> TreeNode {
    let m = idx.len();
    let total: f64 = idx.iter().map(|&i| residuals[i]).sum();
    let leaf = TreeNode::Leaf { value: total / m as f64 };
    if depth >= params.max_depth || m < 2 * params.min_samples_leaf {
        return leaf;
    }

    let parent_score = total * total / m as f64;
    let mut best: Option<SplitCandidate> = None;
    #[allow(clippy::needless_range_loop)]
    for feature in 0..NUM_FEATURES {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let mut prefix = 0.0;
        for k in 1..m {
            prefix += residuals[order[k - 1]];
            let lo = x[order[k - 1]][feature];
            let hi = x[order[k]][feature];
            if lo == hi {
                continue;
            }
            let (n_left, n_right) = (k, m - k);
            if n_left < params.min_samples_leaf || n_right < params.min_samples_leaf {
                continue;
            }
            let rest = total - prefix;
            let gain = prefix * prefix / n_left as f64 + rest * rest / n_right as f64 - parent_score;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    gain,
                    feature,
                    threshold: (lo + hi) / 2.0,
                    left: order[..k].to_vec(),
                    right: order[k..].to_vec(),
                });
            }
        }
    }

    match best {
        None => leaf,
        Some(mut s) => {
            s.left.sort_unstable();
            s.right.sort_unstable();
            TreeNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(grow(x, residuals, &s.left, depth + 1, params)),
                right: Box::new(grow(x, residuals, &s.right, depth + 1, params)),
            }
        }
    }
}
