//! Explainability toolkit for fused-deposition-modeling tensile data.
//!
//! The crate fits regressors on process-parameter data (infill, layer height,
//! print speed, extrusion temperature), attributes their predictions to the
//! four parameters with exact and kernel Shapley values, computes partial
//! dependence curves, fits an additive surrogate, and draws the standard
//! attribution figures as deterministic SVG.
//!
//! ```
//! use fdmx::prelude::*;
//!
//! let data = embedded_fdm_corpus();
//! let (model, _) = fit_gbt(&data, &GbtParams::default()).unwrap();
//! let explanation = explain_dataset(&model, &Background::full(&data), &data, Method::Exact).unwrap();
//! let ranking = mean_abs_importance(&explanation).unwrap();
//! assert_eq!(ranking.entries[0].feature, "infill_pct");
//! ```

pub mod dataset;
pub mod gam;
pub mod models;
pub mod numeric;
pub mod pdp;
pub mod plots;
pub mod shapley;

pub use dataset::{embedded_fdm_corpus, load_csv, summarize, Dataset, Feature, FeatureVector, NUM_FEATURES};
pub use gam::{fit_gam, fit_surrogate, gam_attributions, GamModel, GamParams};
pub use models::{fit_gbt, fit_linear, metrics, GbtModel, GbtParams, LinearModel, Model, Predictor};
pub use shapley::{
    exact_shapley, explain_dataset, kernel_shapley, mean_abs_importance, Background, Explanation, Method,
};

pub mod prelude {
    pub use crate::dataset::{
        embedded_fdm_corpus, load_csv, summarize, BoundsCheck, ColumnSummary, Dataset, Feature, FeatureVector,
        NUM_FEATURES, TARGET_NAME,
    };
    pub use crate::gam::{fit_gam, fit_surrogate, gam_attributions, FidelityReport, GamModel, GamParams};
    pub use crate::models::{
        fit_gbt, fit_linear, metrics, FitReport, FnPredictor, GbtModel, GbtParams, LinearModel, Model, Predictor,
    };
    pub use crate::pdp::{partial_dependence, pdp_with_shap_overlay, GridSpec, PdpCurve, PdpMode, PdpOverlay};
    pub use crate::plots::{
        build_beeswarm, build_heatmap, build_pdp_figure, build_pdp_overlay_figure, build_waterfall, render_svg,
        FigureSpec, HeatmapOrdering, Palette, Theme,
    };
    pub use crate::shapley::{
        coalition_value, exact_shapley, explain_dataset, kernel_shapley, mean_abs_importance, Background, Explanation,
        ImportanceRanking, KernelBudget, Method,
    };
}
