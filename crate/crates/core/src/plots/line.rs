use serde::{Deserialize, Serialize};

use super::color::Rgb;
use super::svg::{Axis, SvgWriter};
use super::{SvgDocument, Theme};
use crate::dataset::Feature;
use crate::pdp::{PdpCurve, PdpMode, PdpOverlay, ScatterPoint};

/// Partial dependence line, optionally with the attribution scatter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdpFigureSpec {
    pub feature: String,
    pub unit: String,
    pub mode: PdpMode,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Height of the horizontal reference line.
    pub reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter: Option<Vec<ScatterPoint>>,
}

fn names(feature: usize) -> (String, String) {
    Feature::from_index(feature)
        .map(|f| (f.name().to_string(), f.unit().to_string()))
        .unwrap_or_else(|| (format!("feature_{feature}"), String::new()))
}

pub fn build_pdp_figure(curve: &PdpCurve) -> PdpFigureSpec {
    let (feature, unit) = names(curve.feature);
    PdpFigureSpec {
        feature,
        unit,
        mode: curve.mode,
        grid: curve.grid.clone(),
        values: curve.values.clone(),
        reference: curve.reference,
        scatter: None,
    }
}

pub fn build_pdp_overlay_figure(overlay: &PdpOverlay) -> PdpFigureSpec {
    PdpFigureSpec {
        reference: overlay.base_value,
        scatter: Some(overlay.scatter.clone()),
        ..build_pdp_figure(&overlay.curve)
    }
}

pub(super) fn render(spec: &PdpFigureSpec, theme: &Theme) -> SvgDocument {
    let (left, right, top) = (90.0, theme.width - 30.0, 50.0);
    let bottom = theme.height - 60.0;
    let scatter = spec.scatter.as_deref().unwrap_or(&[]);

    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (x_lo, x_hi) = fold(&mut spec.grid.iter().copied().chain(scatter.iter().map(|p| p.x)));
    let (y_lo, y_hi) = fold(
        &mut spec.values.iter().copied().chain(scatter.iter().map(|p| p.y)).chain(std::iter::once(spec.reference)),
    );
    let x_axis = Axis::covering(x_lo, x_hi);
    let y_axis = Axis::covering(y_lo, y_hi);
    let mut warnings = Vec::new();
    if x_axis.degenerate || y_axis.degenerate {
        warnings.push("degenerate extent: padded to unit width".to_string());
    }

    let mut w =
        SvgWriter::new(theme.width, theme.height, "pdp", &theme.font, &[("data-mode", spec.mode.name().into())]);
    let title = match (spec.mode, spec.scatter.is_some()) {
        (_, true) => format!("Partial dependence of {} with attributions", spec.feature),
        (PdpMode::AtMeans, false) => format!("Partial dependence of {} (others at means)", spec.feature),
        (PdpMode::Average, false) => format!("Partial dependence of {}", spec.feature),
    };
    w.text(theme.width / 2.0, 26.0, 15.0, "middle", &title, "");
    let sx = |v: f64| x_axis.scale(v, left, right);
    let sy = |v: f64| y_axis.scale(v, bottom, top);

    w.line(left, sy(spec.reference), right, sy(spec.reference), "#777777", 1.0, true);
    for p in scatter {
        w.circle(sx(p.x), sy(p.y), 3.5, &Rgb::BLUE.hex());
    }
    let pts: Vec<(f64, f64)> = spec.grid.iter().zip(&spec.values).map(|(&g, &v)| (sx(g), sy(v))).collect();
    w.polyline(&pts, "#222222", 2.0);
    w.x_axis(&x_axis, left, right, bottom, &format!("{} ({})", spec.feature, spec.unit));
    w.y_axis(&y_axis, top, bottom, left, "predicted tensile strength (MPa)");
    SvgDocument::new(theme.width, theme.height, w.finish(), warnings)
}
