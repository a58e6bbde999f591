use serde::{Deserialize, Serialize};

use super::color::feature_ramp;
use super::svg::{Axis, SvgWriter};
use super::{PlotError, SvgDocument, Theme};
use crate::shapley::{mean_abs_importance, Explanation};

/// Horizontal buckets used for stacking.
pub const BEESWARM_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeePoint {
    pub sample: usize,
    /// Attribution.
    pub x: f64,
    /// Stacking offset in point units: 0, +1, −1, +2, −2, … within a bucket.
    pub y_offset: f64,
    /// Feature value normalized to [0, 1] per feature; 0.5 when constant.
    pub color_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub feature: String,
    pub index: usize,
    pub mean_abs: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub points: Vec<BeePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmSpec {
    /// Top to bottom, by mean |attribution| descending.
    pub rows: Vec<BeeswarmRow>,
    pub x_min: f64,
    pub x_max: f64,
}

/// Per-feature attribution distributions. Points are bucketed by x into
/// [`BEESWARM_BINS`] bins over the shared x extent and stacked symmetrically
/// in sample order, so the layout needs no randomness.
pub fn build_beeswarm(e: &Explanation) -> Result<BeeswarmSpec, PlotError> {
    let ranking = mean_abs_importance(e).map_err(|_| PlotError::EmptyExplanation)?;
    let all = e.values.iter().flat_map(|v| v.iter().copied());
    let (x_min, x_max) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let width = x_max - x_min;

    let rows = ranking
        .entries
        .iter()
        .map(|entry| {
            let j = entry.index;
            let xs = e.column(j);
            let fv: Vec<f64> = e.data.iter().map(|r| r[j]).collect();
            let (f_lo, f_hi) =
                fv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let mut fill = [0usize; BEESWARM_BINS];
            let points = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let bin = if width > 0.0 {
                        (((x - x_min) / width * BEESWARM_BINS as f64) as usize).min(BEESWARM_BINS - 1)
                    } else {
                        0
                    };
                    let k = fill[bin];
                    fill[bin] += 1;
                    let y_offset = match k {
                        0 => 0.0,
                        k if k % 2 == 1 => k.div_ceil(2) as f64,
                        k => -((k / 2) as f64),
                    };
                    let color_value = if f_hi > f_lo { (fv[i] - f_lo) / (f_hi - f_lo) } else { 0.5 };
                    BeePoint { sample: i, x, y_offset, color_value }
                })
                .collect();
            BeeswarmRow {
                feature: entry.feature.clone(),
                index: j,
                mean_abs: entry.importance,
                min_x: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max_x: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                points,
            }
        })
        .collect();
    Ok(BeeswarmSpec { rows, x_min, x_max })
}

pub(super) fn render(spec: &BeeswarmSpec, theme: &Theme) -> SvgDocument {
    let (left, right, top) = (150.0, theme.width - 110.0, 50.0);
    let row_h = 64.0;
    let bottom = top + row_h * spec.rows.len() as f64;
    let height = bottom + 60.0;
    let axis = Axis::covering(spec.x_min.min(0.0), spec.x_max.max(0.0));
    let mut warnings = Vec::new();
    if axis.degenerate {
        warnings.push("degenerate extent: every attribution is zero".to_string());
    }
    let max_offset = spec.rows.iter().flat_map(|r| r.points.iter().map(|p| p.y_offset.abs())).fold(0.0, f64::max);
    let step = if max_offset > 0.0 { 3.5f64.min((row_h / 2.0 - 6.0) / max_offset) } else { 0.0 };

    let mut w = SvgWriter::new(theme.width, height, "beeswarm", &theme.font, &[]);
    w.text(theme.width / 2.0, 26.0, 15.0, "middle", "Attribution distribution per feature", "");
    let zero = axis.scale(0.0, left, right);
    w.line(zero, top, zero, bottom, "#999999", 1.0, false);
    for (k, row) in spec.rows.iter().enumerate() {
        let cy = top + row_h * (k as f64 + 0.5);
        w.line(left, cy, right, cy, "#eeeeee", 1.0, true);
        w.text(left - 10.0, cy + 4.0, 12.0, "end", &row.feature, "");
        for p in &row.points {
            w.circle(axis.scale(p.x, left, right), cy - p.y_offset * step, 3.2, &feature_ramp(p.color_value).hex());
        }
    }
    w.x_axis(&axis, left, right, bottom, "attribution (MPa)");

    // colour legend
    let (lx, ly, lh) = (right + 40.0, top, bottom - top);
    let steps = 32;
    for s in 0..steps {
        let t = 1.0 - s as f64 / (steps - 1) as f64;
        w.rect(lx, ly + lh * s as f64 / steps as f64, 12.0, lh / steps as f64 + 0.5, &feature_ramp(t).hex(), "");
    }
    w.text(lx + 6.0, ly - 6.0, 11.0, "middle", "high", "");
    w.text(lx + 6.0, ly + lh + 14.0, 11.0, "middle", "low", "");
    SvgDocument::new(theme.width, height, w.finish(), warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::{feature_names, BackgroundOrigin, MethodTag};

    fn explanation(values: Vec<[f64; 4]>, data: Vec<[f64; 4]>) -> Explanation {
        Explanation {
            method: MethodTag::Exact,
            base_value: 0.0,
            feature_names: feature_names(),
            values,
            data,
            background_origin: BackgroundOrigin::Explicit,
        }
    }

    #[test]
    fn single_sample_sits_on_the_centre_line() {
        let s = build_beeswarm(&explanation(vec![[1.0, -2.0, 0.5, 0.0]], vec![[50.0, 0.2, 40.0, 200.0]])).unwrap();
        assert_eq!(s.rows.len(), 4);
        for r in &s.rows {
            assert_eq!(r.points.len(), 1);
            assert_eq!(r.points[0].y_offset, 0.0);
            assert_eq!(r.points[0].color_value, 0.5);
        }
        assert_eq!(s.rows[0].feature, "layer_height");
    }

    #[test]
    fn zero_matrix_stacks_in_canonical_order() {
        let s = build_beeswarm(&explanation(vec![[0.0; 4]; 5], vec![[1.0, 2.0, 3.0, 4.0]; 5])).unwrap();
        assert_eq!(s.rows.iter().map(|r| r.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let offsets: Vec<f64> = s.rows[0].points.iter().map(|p| p.y_offset).collect();
        assert_eq!(offsets, vec![0.0, 1.0, -1.0, 2.0, -2.0]);
        assert!(s.rows[0].points.iter().all(|p| p.x == 0.0));
        let doc = render(&s, &Theme::default());
        assert!(!doc.warnings.is_empty());
    }

    #[test]
    fn row_extent_matches_attributions() {
        let s = build_beeswarm(&explanation(
            vec![[1.0, 0.0, 0.0, 0.0], [-3.0, 0.0, 0.0, 0.2], [2.0, 0.0, 0.0, -0.1]],
            vec![[10.0, 0.2, 40.0, 200.0], [55.0, 0.2, 40.0, 210.0], [100.0, 0.2, 40.0, 220.0]],
        ))
        .unwrap();
        let top = &s.rows[0];
        assert_eq!(top.feature, "infill_pct");
        assert_eq!((top.min_x, top.max_x), (-3.0, 2.0));
        assert_eq!(top.points[1].color_value, 0.5);
        assert_eq!(top.points[2].color_value, 1.0);
    }
}
