use serde::{Deserialize, Serialize};

use super::color::diverging;
use super::svg::{fmt_fixed, SvgWriter};
use super::{PlotError, SvgDocument, Theme};
use crate::dataset::NUM_FEATURES;
use crate::shapley::Explanation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapOrdering {
    CorpusOrder,
    /// By `base + Σφ`, descending; ties keep corpus order.
    ByPrediction,
}

/// Samples × features attribution matrix on a diverging scale anchored at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub feature_names: Vec<String>,
    pub ordering: HeatmapOrdering,
    /// Original sample index of each matrix row.
    pub sample_indices: Vec<usize>,
    pub values: Vec<[f64; NUM_FEATURES]>,
    pub predictions: Vec<f64>,
    /// Largest |attribution|; the scale saturates here.
    pub max_abs: f64,
    pub colors: Vec<[String; NUM_FEATURES]>,
}

pub fn build_heatmap(e: &Explanation, ordering: HeatmapOrdering) -> Result<HeatmapSpec, PlotError> {
    if e.is_empty() {
        return Err(PlotError::EmptyExplanation);
    }
    let predictions = e.reconstructed();
    let mut order: Vec<usize> = (0..e.len()).collect();
    if ordering == HeatmapOrdering::ByPrediction {
        order.sort_by(|&a, &b| predictions[b].total_cmp(&predictions[a]));
    }
    let max_abs = e.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let values: Vec<[f64; NUM_FEATURES]> = order.iter().map(|&i| e.values[i]).collect();
    let colors = values.iter().map(|row| std::array::from_fn(|j| diverging(row[j], max_abs).hex())).collect();
    Ok(HeatmapSpec {
        feature_names: e.feature_names.clone(),
        ordering,
        predictions: order.iter().map(|&i| predictions[i]).collect(),
        sample_indices: order,
        values,
        max_abs,
        colors,
    })
}

pub(super) fn render(spec: &HeatmapSpec, theme: &Theme) -> SvgDocument {
    let n = spec.values.len();
    let (left, top) = (150.0, 60.0);
    let legend_w = 90.0;
    let cell_w = ((theme.width - left - legend_w - 20.0) / n as f64).min(40.0);
    let cell_h = 36.0;
    let bottom = top + cell_h * NUM_FEATURES as f64;
    let height = bottom + 70.0;
    let mut warnings = Vec::new();
    if spec.max_abs.is_nan() || spec.max_abs <= 0.0 {
        warnings.push("degenerate extent: every attribution is zero".to_string());
    }
    let scale_max = if spec.max_abs > 0.0 { spec.max_abs } else { 1.0 };

    let mut w = SvgWriter::new(theme.width, height, "heatmap", &theme.font, &[]);
    w.text(theme.width / 2.0, 26.0, 15.0, "middle", "Attributions by sample and feature", "");
    for (j, name) in spec.feature_names.iter().enumerate() {
        w.text(left - 10.0, top + cell_h * (j as f64 + 0.5) + 4.0, 12.0, "end", name, "");
    }
    for (col, row) in spec.colors.iter().enumerate() {
        let x = left + cell_w * col as f64;
        for (j, c) in row.iter().enumerate() {
            w.rect(x, top + cell_h * j as f64, cell_w, cell_h, c, " stroke=\"#ffffff\" stroke-width=\"0.50\"");
        }
        if n <= 40 {
            w.text(x + cell_w / 2.0, bottom + 16.0, 9.0, "middle", &spec.sample_indices[col].to_string(), "");
        }
    }
    w.text(left + cell_w * n as f64 / 2.0, bottom + 40.0, 12.0, "middle", "sample", "");

    let (lx, lh) = (theme.width - legend_w + 20.0, bottom - top);
    let steps = 33;
    for s in 0..steps {
        let v = scale_max * (1.0 - 2.0 * s as f64 / (steps - 1) as f64);
        w.rect(
            lx,
            top + lh * s as f64 / steps as f64,
            14.0,
            lh / steps as f64 + 0.5,
            &diverging(v, scale_max).hex(),
            "",
        );
    }
    w.text(lx + 20.0, top + 8.0, 10.0, "start", &format!("+{}", fmt_fixed(scale_max, 2)), "");
    w.text(lx + 20.0, top + lh / 2.0 + 4.0, 10.0, "start", "0", "");
    w.text(lx + 20.0, bottom, 10.0, "start", &format!("-{}", fmt_fixed(scale_max, 2)), "");
    SvgDocument::new(theme.width, height, w.finish(), warnings)
}
