//! Deterministic figure emission: each figure is a plain data spec, rendered
//! to self-contained SVG 1.1 and serialized to a JSON twin with the same
//! numbers.

mod beeswarm;
mod color;
mod heatmap;
mod line;
pub mod svg;
mod waterfall;

pub use beeswarm::{build_beeswarm, BeePoint, BeeswarmRow, BeeswarmSpec, BEESWARM_BINS};
pub use color::{diverging, feature_ramp, Palette, Rgb};
pub use heatmap::{build_heatmap, HeatmapOrdering, HeatmapSpec};
pub use line::{build_pdp_figure, build_pdp_overlay_figure, PdpFigureSpec};
pub use waterfall::{build_waterfall, WaterfallEntry, WaterfallSpec};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("explanation is empty")]
    EmptyExplanation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theme {
    pub palette: Palette,
    pub width: f64,
    pub height: f64,
    pub font: String,
}

impl Default for Theme {
    fn default() -> Self {
        Self { palette: Palette::Paper, width: 760.0, height: 480.0, font: "DejaVu Sans, Arial, sans-serif".into() }
    }
}

/// Any figure this crate can draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "figure", rename_all = "snake_case")]
pub enum FigureSpec {
    Waterfall(WaterfallSpec),
    Beeswarm(BeeswarmSpec),
    Heatmap(HeatmapSpec),
    Pdp(PdpFigureSpec),
}

impl FigureSpec {
    /// JSON twin with 17-significant-digit floats.
    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::numeric::to_json_string(self)
    }
}

/// A rendered SVG document.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgDocument {
    pub width: f64,
    pub height: f64,
    pub content: String,
    /// Non-fatal rendering issues, e.g. a zero-width extent that was padded.
    pub warnings: Vec<String>,
}

impl SvgDocument {
    fn new(width: f64, height: f64, content: String, warnings: Vec<String>) -> Self {
        Self { width, height, content, warnings }
    }
}

/// Renders `spec`. Output bytes depend only on `spec` and `theme`.
pub fn render_svg(spec: &FigureSpec, theme: &Theme) -> SvgDocument {
    match spec {
        FigureSpec::Waterfall(s) => waterfall::render(s, theme),
        FigureSpec::Beeswarm(s) => beeswarm::render(s, theme),
        FigureSpec::Heatmap(s) => heatmap::render(s, theme),
        FigureSpec::Pdp(s) => line::render(s, theme),
    }
}
