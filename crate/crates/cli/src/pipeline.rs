use fdmx::dataset::{embedded_fdm_corpus, load_csv_path, BoundsCheck, Dataset, Feature, NUM_FEATURES};
use fdmx::gam::{
    fit_gam, fit_surrogate, fit_surrogate_on_fraction, gam_attributions, FidelityReport, GamError, GamModel,
};
use fdmx::models::{fit_gbt, fit_linear, metrics, FitReport, Model, ModelError, Predictor};
use fdmx::pdp::{partial_dependence, pdp_with_shap_overlay, GridSpec, PdpError, PdpMode};
use fdmx::plots::{
    build_beeswarm, build_heatmap, build_pdp_figure, build_pdp_overlay_figure, build_waterfall, FigureSpec, Theme,
};
use fdmx::shapley::{
    explain_dataset, mean_abs_importance, Background, BackgroundOrigin, Explanation, ImportanceRanking, KernelBudget,
    Method, ShapError,
};
use serde::Serialize;

use crate::error::{config, CliError};
use crate::output::RunDir;
use crate::settings::{BackgroundSpec, Command, DataSource, GamTarget, MethodKind, ModeSelection, ModelKind, Settings};
use crate::summary;

/// The pair of features the importance check looks for, sorted.
pub const EXPECTED_TOP2: [&str; 2] = ["extrusion_temp", "infill_pct"];

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidHyperparam(_) => config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn shap_error(e: ShapError) -> CliError {
    match e {
        ShapError::InvalidBudget(_) | ShapError::IndexOutOfRange { .. } | ShapError::Data(_) => config(e.to_string()),
        _ => CliError::Invariant(e.to_string()),
    }
}

fn gam_error(e: GamError) -> CliError {
    match e {
        GamError::InvalidHyperparam(_) => config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn pdp_error(e: PdpError) -> CliError {
    match e {
        PdpError::InvalidGrid(_) | PdpError::InvalidFeature(_) => config(e.to_string()),
        PdpError::ExplanationMismatch => CliError::Invariant(e.to_string()),
    }
}

pub fn load_data(s: &Settings) -> Result<Dataset, CliError> {
    match &s.data {
        DataSource::Embedded => Ok(embedded_fdm_corpus()),
        DataSource::Csv(path) => {
            let bounds = if s.relaxed_bounds { BoundsCheck::Relaxed } else { BoundsCheck::Strict };
            load_csv_path(path, &s.target, bounds).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        }
    }
}

/// The black-box model: loaded from `--model-file` or fit in-run.
pub fn black_box(s: &Settings, d: &Dataset) -> Result<(Model, FitReport), CliError> {
    if let Some(path) = &s.model_file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let m = Model::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let report = metrics(&m, d);
        return Ok((m, report));
    }
    fit_model(s, d, s.model)
}

fn fit_model(s: &Settings, d: &Dataset, kind: ModelKind) -> Result<(Model, FitReport), CliError> {
    match kind {
        ModelKind::Gbt => fit_gbt(d, &s.gbt).map(|(m, r)| (Model::Gbt(m), r)).map_err(model_error),
        ModelKind::Linear => fit_linear(d, s.ridge).map(|(m, r)| (Model::Linear(m), r)).map_err(model_error),
    }
}

fn model_name(m: &Model) -> &'static str {
    match m {
        Model::Gbt(_) => "gbt",
        Model::Linear(_) => "linear",
    }
}

pub fn background(s: &Settings, d: &Dataset) -> Result<Background, CliError> {
    match s.background {
        BackgroundSpec::Full => Ok(Background::full(d)),
        BackgroundSpec::Subsample(k) => {
            Background::subsample(d, k, s.seed).map_err(|e| config(format!("--background {k}: {e}")))
        }
    }
}

fn method(s: &Settings) -> Method {
    match s.method {
        MethodKind::Exact => Method::Exact,
        MethodKind::Kernel => Method::Kernel { budget: s.budget, seed: s.seed },
    }
}

fn check_samples(s: &Settings, d: &Dataset) -> Result<(), CliError> {
    match s.samples.iter().find(|&&i| i >= d.row_count()) {
        Some(i) => Err(config(format!(
            "--sample {i} is out of range for {} rows (valid: 0..={})",
            d.row_count(),
            d.row_count() - 1
        ))),
        None => Ok(()),
    }
}

/// Explains every row and aborts if base + Σφ strays from the prediction.
fn explain_checked<P: Predictor + ?Sized>(
    p: &P,
    bg: &Background,
    d: &Dataset,
    m: Method,
) -> Result<Explanation, CliError> {
    let e = explain_dataset(p, bg, d, m).map_err(shap_error)?;
    let err = e.additivity_error(&p.predict(d.rows()));
    if err.is_nan() || err > m.tolerance() {
        return Err(CliError::Invariant(format!("additivity error {err:e} exceeds {:e}", m.tolerance())));
    }
    Ok(e)
}

fn gam_explanation_checked(g: &GamModel, d: &Dataset) -> Result<Explanation, CliError> {
    let e = gam_attributions(g, d);
    let err = e.additivity_error(&g.predict(d.rows()));
    if err != 0.0 {
        return Err(CliError::Invariant(format!("GAM decomposition is off by {err:e}")));
    }
    Ok(e)
}

/// Per-feature max |φ_kernel − φ_exact| with the complete budget.
#[derive(Clone, Debug, Serialize)]
pub struct KernelComparison {
    pub budget: String,
    pub max_abs_diff: [f64; NUM_FEATURES],
    pub overall: f64,
}

fn compare_kernel<P: Predictor + ?Sized>(
    p: &P,
    bg: &Background,
    d: &Dataset,
    exact: &Explanation,
    budget: KernelBudget,
    seed: u64,
) -> Result<KernelComparison, CliError> {
    let kernel = explain_checked(p, bg, d, Method::Kernel { budget, seed })?;
    let mut max_abs_diff = [0.0; NUM_FEATURES];
    for (a, b) in exact.values.iter().zip(&kernel.values) {
        for j in 0..NUM_FEATURES {
            max_abs_diff[j] = f64::max(max_abs_diff[j], (a[j] - b[j]).abs());
        }
    }
    let budget = match budget {
        KernelBudget::Complete => "complete".to_string(),
        KernelBudget::Coalitions(n) => n.to_string(),
    };
    Ok(KernelComparison { budget, overall: max_abs_diff.iter().copied().fold(0.0, f64::max), max_abs_diff })
}

fn theme(s: &Settings) -> Theme {
    Theme { palette: s.palette, ..Theme::default() }
}

/// Waterfalls for the requested samples, beeswarm and heatmap.
fn attribution_figures(
    out: &mut RunDir,
    prefix: &str,
    e: &Explanation,
    predictions: &[f64],
    s: &Settings,
) -> Result<(), CliError> {
    let th = theme(s);
    for &i in &s.samples {
        let w = build_waterfall(e, i, s.palette).map_err(|err| config(err.to_string()))?;
        let gap = (w.final_prediction - predictions[i]).abs();
        if gap.is_nan() || gap > 1e-9 {
            return Err(CliError::Invariant(format!(
                "waterfall {i} ends at {} but the model predicts {}",
                w.final_prediction, predictions[i]
            )));
        }
        out.write_figure(&format!("{prefix}waterfall_{i}"), &FigureSpec::Waterfall(w), &th)?;
    }
    let invariant = |err: fdmx::plots::PlotError| CliError::Invariant(err.to_string());
    out.write_figure(&format!("{prefix}beeswarm"), &FigureSpec::Beeswarm(build_beeswarm(e).map_err(invariant)?), &th)?;
    out.write_figure(
        &format!("{prefix}heatmap"),
        &FigureSpec::Heatmap(build_heatmap(e, s.ordering).map_err(invariant)?),
        &th,
    )
}

fn pdp_figures<P: Predictor + ?Sized>(
    out: &mut RunDir,
    prefix: &str,
    p: &P,
    d: &Dataset,
    e: &Explanation,
    s: &Settings,
) -> Result<(), CliError> {
    let th = theme(s);
    let grid = GridSpec::Linear { n_points: s.grid_points };
    let modes: &[PdpMode] = match s.mode {
        ModeSelection::Average => &[PdpMode::Average],
        ModeSelection::AtMeans => &[PdpMode::AtMeans],
        ModeSelection::Both => &[PdpMode::Average, PdpMode::AtMeans],
    };
    for f in &s.features {
        let name = f.name();
        for &mode in modes {
            let curve = partial_dependence(p, d, f.index(), &grid, mode).map_err(pdp_error)?;
            let stem = match mode {
                PdpMode::Average => format!("{prefix}pdp_{name}"),
                PdpMode::AtMeans => format!("{prefix}pdp_at_means_{name}"),
            };
            out.write_figure(&stem, &FigureSpec::Pdp(build_pdp_figure(&curve)), &th)?;
        }
        let overlay = pdp_with_shap_overlay(p, d, e, f.index(), &grid).map_err(pdp_error)?;
        out.write_figure(
            &format!("{prefix}pdp_overlay_{name}"),
            &FigureSpec::Pdp(build_pdp_overlay_figure(&overlay)),
            &th,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NamedFit<'a> {
    model: &'a str,
    rows: usize,
    #[serde(flatten)]
    fit: &'a FitReport,
}

#[derive(Serialize)]
struct Metrics<'a> {
    models: Vec<NamedFit<'a>>,
}

/// The additive model and, for a surrogate, its fidelity to the black box.
fn fit_additive(s: &Settings, bb: &Model, d: &Dataset) -> Result<(GamModel, Option<FidelityReport>), CliError> {
    match s.gam_target {
        GamTarget::Raw => Ok((fit_gam(d, d.targets(), &s.gam).map_err(gam_error)?, None)),
        GamTarget::Model if s.surrogate_fraction < 1.0 => {
            fit_surrogate_on_fraction(bb, d, &s.gam, s.surrogate_fraction, s.seed)
                .map(|(g, f)| (g, Some(f)))
                .map_err(gam_error)
        }
        GamTarget::Model => fit_surrogate(bb, d, &s.gam).map(|(g, f)| (g, Some(f))).map_err(gam_error),
    }
}

fn write_gam(out: &mut RunDir, g: &GamModel, fidelity: Option<&FidelityReport>, d: &Dataset) -> Result<(), CliError> {
    out.write("gam.json", &g.to_json().map_err(|e| CliError::Invariant(e.to_string()))?)?;
    for shape in &g.shapes {
        let name = Feature::from_index(shape.feature).map(|f| f.name()).unwrap_or("feature");
        out.write(&format!("gam_shape_{name}.csv"), &shape.to_csv())?;
    }
    match fidelity {
        Some(f) => out.write_json("fidelity.json", f),
        None => out.write_json("gam_fit.json", &NamedFit { model: "gam", rows: d.row_count(), fit: &metrics(g, d) }),
    }
}

fn importance(e: &Explanation) -> Result<ImportanceRanking, CliError> {
    mean_abs_importance(e).map_err(|err| CliError::Invariant(err.to_string()))
}

pub fn top2_matches(r: &ImportanceRanking) -> bool {
    r.top_set(2) == EXPECTED_TOP2
}

/// Everything `report` computed, in machine-readable form.
#[derive(Serialize)]
pub struct ReportData {
    pub rows: usize,
    pub model: String,
    pub model_fit: FitReport,
    pub linear_fit: FitReport,
    pub nonlinear_gain: bool,
    pub background: BackgroundOrigin,
    pub base_value: f64,
    pub additivity_error: f64,
    pub importance: ImportanceRanking,
    pub top2: Vec<String>,
    pub top2_matches_expected: bool,
    pub gam_importance: ImportanceRanking,
    pub gam_top2: Vec<String>,
    pub gam_top2_matches_expected: bool,
    pub fidelity: Option<FidelityReport>,
    pub kernel_vs_exact: KernelComparison,
    pub expected_top2: [&'static str; 2],
}

pub fn run(command: Command, s: &Settings) -> Result<String, CliError> {
    let d = load_data(s)?;
    let mut out = RunDir::create(&s.out)?;
    out.write("config.txt", &s.echo())?;
    let message = match command {
        Command::Train => train(s, &d, &mut out)?,
        Command::Explain => explain(s, &d, &mut out)?,
        Command::Pdp => pdp(s, &d, &mut out)?,
        Command::Gam => gam(s, &d, &mut out)?,
        Command::Report => report(s, &d, &mut out)?,
    };
    let root = out.root().display().to_string();
    let n = out.finish(command_name(command))?;
    Ok(format!("{message}wrote {n} files to {root}\n"))
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Train => "train",
        Command::Explain => "explain",
        Command::Pdp => "pdp",
        Command::Gam => "gam",
        Command::Report => "report",
    }
}

fn fit_line(name: &str, r: &FitReport) -> String {
    match r.r2 {
        Some(r2) => format!("{name}: R² = {r2:.4}, RMSE = {:.4} MPa\n", r.rmse),
        None => format!("{name}: R² undefined (constant target), RMSE = {:.4} MPa\n", r.rmse),
    }
}

fn train(s: &Settings, d: &Dataset, out: &mut RunDir) -> Result<String, CliError> {
    let (m, r) = black_box(s, d)?;
    out.write("model.json", &m.to_json().map_err(|e| CliError::Invariant(e.to_string()))?)?;
    out.write_json(
        "metrics.json",
        &Metrics { models: vec![NamedFit { model: model_name(&m), rows: d.row_count(), fit: &r }] },
    )?;
    Ok(fit_line(model_name(&m), &r))
}

fn explain(s: &Settings, d: &Dataset, out: &mut RunDir) -> Result<String, CliError> {
    check_samples(s, d)?;
    let (m, _) = black_box(s, d)?;
    let bg = background(s, d)?;
    let e = explain_checked(&m, &bg, d, method(s))?;
    out.write("explanation.json", &e.to_json().map_err(|err| CliError::Invariant(err.to_string()))?)?;
    let ranking = importance(&e)?;
    out.write_json("importance.json", &ranking)?;
    let mut msg = format!("mean |φ| order: {}\n", ranking.names().join(", "));
    if s.method == MethodKind::Kernel {
        let exact = explain_checked(&m, &bg, d, Method::Exact)?;
        let cmp = compare_kernel(&m, &bg, d, &exact, s.budget, s.seed)?;
        msg.push_str(&format!("kernel ({}) vs exact: max |Δφ| = {:e}\n", cmp.budget, cmp.overall));
        out.write_json("kernel_vs_exact.json", &cmp)?;
    }
    attribution_figures(out, "", &e, &m.predict(d.rows()), s)?;
    Ok(msg)
}

fn pdp(s: &Settings, d: &Dataset, out: &mut RunDir) -> Result<String, CliError> {
    let (m, _) = black_box(s, d)?;
    let bg = background(s, d)?;
    let e = explain_checked(&m, &bg, d, method(s))?;
    pdp_figures(out, "", &m, d, &e, s)?;
    Ok(String::new())
}

fn gam(s: &Settings, d: &Dataset, out: &mut RunDir) -> Result<String, CliError> {
    check_samples(s, d)?;
    let (m, _) = black_box(s, d)?;
    let (g, fidelity) = fit_additive(s, &m, d)?;
    write_gam(out, &g, fidelity.as_ref(), d)?;
    let e = gam_explanation_checked(&g, d)?;
    out.write("gam_explanation.json", &e.to_json().map_err(|err| CliError::Invariant(err.to_string()))?)?;
    let ranking = importance(&e)?;
    out.write_json("gam_importance.json", &ranking)?;
    attribution_figures(out, "gam_", &e, &g.predict(d.rows()), s)?;
    pdp_figures(out, "gam_", &g, d, &e, s)?;
    let mut msg = format!("GAM mean |φ| order: {}\n", ranking.names().join(", "));
    if let Some(f) = fidelity {
        msg.push_str(&format!("surrogate fidelity R² = {}\n", f.r2.map_or("undefined".into(), |r| format!("{r:.4}"))));
    }
    Ok(msg)
}

fn report(s: &Settings, d: &Dataset, out: &mut RunDir) -> Result<String, CliError> {
    check_samples(s, d)?;
    let (m, model_fit) = black_box(s, d)?;
    let (lin, linear_fit) = fit_model(s, d, ModelKind::Linear)?;
    out.write("model.json", &m.to_json().map_err(|e| CliError::Invariant(e.to_string()))?)?;
    out.write("linear_model.json", &lin.to_json().map_err(|e| CliError::Invariant(e.to_string()))?)?;
    out.write_json(
        "metrics.json",
        &Metrics {
            models: vec![
                NamedFit { model: model_name(&m), rows: d.row_count(), fit: &model_fit },
                NamedFit { model: "linear_baseline", rows: d.row_count(), fit: &linear_fit },
            ],
        },
    )?;

    let bg = background(s, d)?;
    let e = explain_checked(&m, &bg, d, method(s))?;
    let predictions = m.predict(d.rows());
    out.write("explanation.json", &e.to_json().map_err(|err| CliError::Invariant(err.to_string()))?)?;
    let exact = if s.method == MethodKind::Exact { e.clone() } else { explain_checked(&m, &bg, d, Method::Exact)? };
    let budget = if s.method == MethodKind::Kernel { s.budget } else { KernelBudget::Complete };
    let kernel_vs_exact = compare_kernel(&m, &bg, d, &exact, budget, s.seed)?;
    out.write_json("kernel_vs_exact.json", &kernel_vs_exact)?;
    let ranking = importance(&e)?;
    out.write_json("importance.json", &ranking)?;
    attribution_figures(out, "", &e, &predictions, s)?;
    pdp_figures(out, "", &m, d, &e, s)?;

    let (g, fidelity) = fit_additive(s, &m, d)?;
    write_gam(out, &g, fidelity.as_ref(), d)?;
    let ge = gam_explanation_checked(&g, d)?;
    out.write("gam_explanation.json", &ge.to_json().map_err(|err| CliError::Invariant(err.to_string()))?)?;
    let gam_ranking = importance(&ge)?;
    out.write_json("gam_importance.json", &gam_ranking)?;
    attribution_figures(out, "gam_", &ge, &g.predict(d.rows()), s)?;
    pdp_figures(out, "gam_", &g, d, &ge, s)?;

    let nonlinear_gain = matches!((model_fit.r2, linear_fit.r2), (Some(a), Some(b)) if a > b);
    let data = ReportData {
        rows: d.row_count(),
        model: model_name(&m).to_string(),
        additivity_error: e.additivity_error(&predictions),
        base_value: e.base_value,
        background: bg.origin().clone(),
        model_fit,
        linear_fit,
        nonlinear_gain,
        top2: ranking.entries.iter().take(2).map(|x| x.feature.clone()).collect(),
        top2_matches_expected: top2_matches(&ranking),
        importance: ranking,
        gam_top2: gam_ranking.entries.iter().take(2).map(|x| x.feature.clone()).collect(),
        gam_top2_matches_expected: top2_matches(&gam_ranking),
        gam_importance: gam_ranking,
        fidelity,
        kernel_vs_exact,
        expected_top2: EXPECTED_TOP2,
    };
    out.write_json("report.json", &data)?;
    let text = summary::render(s, &data);
    out.write("summary.md", &text)?;
    Ok(summary::headline(&data))
}
