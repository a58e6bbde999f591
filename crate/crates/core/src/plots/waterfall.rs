use serde::{Deserialize, Serialize};

use super::svg::{exact, fmt_fixed, Axis, SvgWriter};
use super::{Palette, PlotError, SvgDocument, Theme};
use crate::dataset::{Feature, FeatureVector};
use crate::shapley::Explanation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterfallEntry {
    pub feature: String,
    pub index: usize,
    pub feature_value: f64,
    pub contribution: f64,
    pub start: f64,
    pub end: f64,
    pub color: String,
}

/// One sample's walk from the base value to its prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterfallSpec {
    pub sample_index: usize,
    pub base_value: f64,
    pub final_prediction: f64,
    /// Sorted by |contribution| descending, ties in canonical order.
    pub entries: Vec<WaterfallEntry>,
    pub palette: Palette,
}

pub fn build_waterfall(e: &Explanation, sample_index: usize, palette: Palette) -> Result<WaterfallSpec, PlotError> {
    if sample_index >= e.len() {
        return Err(PlotError::IndexOutOfRange { index: sample_index, len: e.len() });
    }
    let values = e.values[sample_index];
    let x: FeatureVector = e.data[sample_index];
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));

    let mut running = e.base_value;
    let entries = order
        .into_iter()
        .map(|j| {
            let start = running;
            running = start + values[j];
            WaterfallEntry {
                feature: e.feature_names[j].clone(),
                index: j,
                feature_value: x[j],
                contribution: values[j],
                start,
                end: running,
                color: palette.waterfall_color(values[j]).hex(),
            }
        })
        .collect();
    Ok(WaterfallSpec { sample_index, base_value: e.base_value, final_prediction: running, entries, palette })
}

pub(super) fn render(spec: &WaterfallSpec, theme: &Theme) -> SvgDocument {
    let n = spec.entries.len();
    let (left, right, top) = (230.0, theme.width - 40.0, 70.0);
    let row_h = 36.0;
    let bottom = top + row_h * n as f64;
    let height = bottom + 60.0;

    let (mut lo, mut hi) = (spec.base_value, spec.base_value);
    for e in &spec.entries {
        lo = lo.min(e.start).min(e.end);
        hi = hi.max(e.start).max(e.end);
    }
    let axis = Axis::covering(lo, hi);
    let mut warnings = Vec::new();
    if axis.degenerate {
        warnings.push("degenerate extent: all bars have zero length".to_string());
    }

    let mut w = SvgWriter::new(
        theme.width,
        height,
        "waterfall",
        &theme.font,
        &[("data-base", exact(spec.base_value)), ("data-final", exact(spec.final_prediction))],
    );
    let xs = |v: f64| axis.scale(v, left, right);
    w.text(
        theme.width / 2.0,
        24.0,
        15.0,
        "middle",
        &format!("Sample {}: contributions to tensile strength", spec.sample_index),
        "",
    );
    w.text(
        xs(spec.final_prediction),
        top - 14.0,
        12.0,
        "middle",
        &format!("f(x) = {}", fmt_fixed(spec.final_prediction, 3)),
        " data-role=\"final\"",
    );
    for &t in &axis.ticks {
        w.line(xs(t), top, xs(t), bottom, "#eeeeee", 1.0, false);
    }

    for (k, e) in spec.entries.iter().enumerate() {
        let y = top + row_h * k as f64;
        let (x0, x1) = (xs(e.start.min(e.end)), xs(e.start.max(e.end)));
        let bar_top = y + 7.0;
        let bar_h = row_h - 14.0;
        if e.contribution != 0.0 {
            let tip = 6.0f64.min(x1 - x0);
            let pts = if e.contribution > 0.0 {
                vec![
                    (x0, bar_top),
                    (x1 - tip, bar_top),
                    (x1, bar_top + bar_h / 2.0),
                    (x1 - tip, bar_top + bar_h),
                    (x0, bar_top + bar_h),
                ]
            } else {
                vec![
                    (x1, bar_top),
                    (x0 + tip, bar_top),
                    (x0, bar_top + bar_h / 2.0),
                    (x0 + tip, bar_top + bar_h),
                    (x1, bar_top + bar_h),
                ]
            };
            w.polygon(&pts, &e.color);
        } else {
            w.line(x0, bar_top, x0, bar_top + bar_h, &e.color, 1.0, false);
        }
        let unit = Feature::from_index(e.index).map(|f| f.unit()).unwrap_or("");
        w.text(
            left - 10.0,
            y + row_h / 2.0 + 4.0,
            12.0,
            "end",
            &format!("{} = {} {unit}", e.feature, e.feature_value),
            "",
        );
        let sign = if e.contribution >= 0.0 { "+" } else { "" };
        w.text(x1 + 6.0, y + row_h / 2.0 + 4.0, 11.0, "start", &format!("{sign}{}", fmt_fixed(e.contribution, 3)), "");
        if k + 1 < n {
            w.line(xs(e.end), bar_top + bar_h, xs(e.end), bar_top + row_h, "#999999", 0.8, true);
        }
    }

    let bx = xs(spec.base_value);
    w.line(bx, top - 4.0, bx, bottom, "#555555", 1.0, true);
    w.text(bx, bottom + 50.0, 11.0, "middle", &format!("E[f(X)] = {}", fmt_fixed(spec.base_value, 3)), "");
    w.x_axis(&axis, left, right, bottom, "");
    SvgDocument::new(theme.width, height, w.finish(), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::{feature_names, BackgroundOrigin, MethodTag};

    pub(crate) fn example(values: [f64; 4], base: f64) -> Explanation {
        Explanation {
            method: MethodTag::Exact,
            base_value: base,
            feature_names: feature_names(),
            values: vec![values],
            data: vec![[78.0, 0.32, 35.0, 220.0]],
            background_origin: BackgroundOrigin::Explicit,
        }
    }

    #[test]
    fn cumulative_chain() {
        let s = build_waterfall(&example([3.0, -1.0, 0.5, 0.0], 47.0), 0, Palette::Paper).unwrap();
        let ends: Vec<f64> = s.entries.iter().map(|e| e.end).collect();
        assert_eq!(ends, vec![50.0, 49.0, 49.5, 49.5]);
        assert_eq!(s.final_prediction, 49.5);
        assert_eq!(s.entries[0].start, 47.0);
        assert_eq!(s.entries[0].color, "#1e88e5");
        assert_eq!(s.entries[1].color, "#ff0d57");
    }

    #[test]
    fn zero_attributions() {
        let s = build_waterfall(&example([0.0; 4], 47.0), 0, Palette::Paper).unwrap();
        assert!(s.entries.iter().all(|e| e.start == e.end));
        assert_eq!(s.final_prediction, 47.0);
        assert_eq!(s.entries.iter().map(|e| e.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let doc = render(&s, &Theme::default());
        assert_eq!(doc.warnings.len(), 1);
    }

    #[test]
    fn sorted_by_magnitude() {
        let s = build_waterfall(&example([0.1, -2.0, 0.1, 1.5], 40.0), 0, Palette::Unified).unwrap();
        assert_eq!(s.entries.iter().map(|e| e.index).collect::<Vec<_>>(), vec![1, 3, 0, 2]);
        assert_eq!(s.entries[0].color, "#1e88e5");
    }

    #[test]
    fn out_of_range_sample() {
        assert!(matches!(
            build_waterfall(&example([0.0; 4], 47.0), 1, Palette::Paper),
            Err(PlotError::IndexOutOfRange { index: 1, len: 1 })
        ));
    }
}
