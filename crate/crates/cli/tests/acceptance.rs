//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fdmx::dataset::{load_csv, BoundsCheck, TARGET_NAME};
use fdmx::gam::{fit_surrogate, GamModel};
use fdmx::plots::{build_waterfall, render_svg, FigureSpec, Palette, Theme};
use fdmx::prelude::*;
use fdmx::shapley::{BackgroundOrigin, MethodTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EFFICIENCY_TOL: f64 = 1e-9;
const DUMMY_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;
const LINEAR_CLOSED_FORM_TOL: f64 = 1e-9;
const KERNEL_TOL: f64 = 1e-6;
const PDP_TOL: f64 = 1e-12;
const CENTERING_TOL: f64 = 1e-9;
const MSE_TRACE_TOL: f64 = 1e-12;
const GAM_SHAP_TOL: f64 = 1e-9;
const WATERFALL_TOL: f64 = 1e-9;
const EXPECTED_TOP2: [&str; 2] = ["extrusion_temp", "infill_pct"];
const SUBSAMPLE_BACKGROUND: usize = 20;
const SUBSAMPLE_SEED: u64 = 42;
const PDP_PAIRS_PER_FEATURE: usize = 3;
const PDP_PAIR_SEED: u64 = 2024;

const CORPUS_LIMIT: Duration = Duration::from_secs(1);
const AXIOM_LIMIT: Duration = Duration::from_secs(5);
const KERNEL_LIMIT: Duration = Duration::from_secs(10);
const REPORT_LIMIT: Duration = Duration::from_secs(5);

/// Reference measurements as printed: infill, layer height, print speed, extrusion
/// temperature, tensile strength.
const REFERENCE_TABLE: &str = "\
78	0.32	35	220	46.17
10.5	0.24	50	210	42.78
33	0.16	35	220	45.87
33	0.32	35	200	41.18
33	0.16	65	200	43.59
100	0.24	50	210	54.2
78	0.16	35	200	51.88
33	0.32	65	200	43.19
78	0.32	65	200	50.34
33	0.16	65	220	45.72
78	0.16	35	220	53.35
55.5	0.24	50	210	49.67
33	0.32	35	220	45.08
55.5	0.24	50	190	47.56
55.5	0.24	50	210	48.39
78	0.32	65	220	46.49
55.5	0.24	50	210	47.21
55.5	0.24	50	210	48.3
55.5	0.24	50	230	50.15
33	0.32	65	220	43.35
55.5	0.24	50	210	45.33
55.5	0.24	80	210	45.56
78	0.16	65	200	49.84
55.5	0.24	20	210	48.51
55.5	0.08	50	210	42.63
55.5	0.4	50	210	42.87
55.5	0.24	50	210	47.14
78	0.32	35	200	45.17
55.5	0.24	50	210	47.07
78	0.16	65	220	50.99
33	0.16	35	200	51.55";

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn gbt(d: &Dataset) -> GbtModel {
    fit_gbt(d, &GbtParams::default()).expect("default GBT fit").0
}

fn corpus_fidelity() -> Outcome {
    let start = Instant::now();
    let d = embedded_fdm_corpus();
    let table: Vec<(FeatureVector, f64)> = REFERENCE_TABLE
        .lines()
        .map(|l| {
            let v: Vec<f64> = l.split('\t').map(|c| c.parse().unwrap()).collect();
            ([v[0], v[1], v[2], v[3]], v[4])
        })
        .collect();
    ensure(d.row_count() == 31 && table.len() == 31, || format!("{} rows", d.row_count()))?;
    for (i, ((x, t), (tx, tt))) in d.rows().iter().zip(d.targets()).zip(&table).enumerate() {
        ensure(x == tx && t == tt, || format!("row {i}: {x:?} -> {t} differs from {tx:?} -> {tt}"))?;
    }
    for (x, t) in [([78.0, 0.32, 35.0, 220.0], 46.17), ([100.0, 0.24, 50.0, 210.0], 54.2)] {
        ensure(d.rows().iter().zip(d.targets()).any(|(r, y)| *r == x && *y == t), || format!("{x:?} -> {t} missing"))?;
    }
    let back = load_csv(d.to_csv().as_bytes(), TARGET_NAME, BoundsCheck::Strict).map_err(|e| e.to_string())?;
    let bits =
        |d: &Dataset| -> Vec<u64> { d.rows().iter().flatten().chain(d.targets()).map(|v| v.to_bits()).collect() };
    ensure(bits(&back) == bits(&d), || "CSV round-trip changed bits".into())?;
    let t = within(CORPUS_LIMIT, start)?;
    Ok(format!("31 rows equal the reference table, CSV round-trip bit-exact, {t:.1?}"))
}

fn axiom_suite() -> Outcome {
    let start = Instant::now();
    let d = embedded_fdm_corpus();
    let bg = Background::full(&d);
    let means = summarize(&d).feature_means();
    let w = [0.11, -16.3, -0.035, 0.023];

    let constant = FnPredictor(|_: &FeatureVector| 47.0);
    let linear = FnPredictor(move |x: &FeatureVector| 42.0 + (0..4).map(|j| w[j] * x[j]).sum::<f64>());
    // Symmetric in infill and print speed; the background copies infill into the speed column.
    let sym_bg = Background::from_rows(d.rows().iter().map(|r| [r[0], r[1], r[0], r[3]]).collect()).unwrap();
    let symmetric = FnPredictor(|x: &FeatureVector| 0.02 * x[0] * x[2] + x[0] + x[2] + 0.1 * x[3]);
    // Ignores layer height.
    let dummy = FnPredictor(|x: &FeatureVector| 0.1 * x[0] + (x[3] - 210.0).max(0.0) * x[2] / 50.0);

    let mut worst = [0.0f64; 4];
    for x in d.rows() {
        for (name, p) in [
            ("constant", &constant as &dyn Predictor),
            ("linear", &linear as &dyn Predictor),
            ("dummy", &dummy as &dyn Predictor),
        ] {
            let a = exact_shapley(p, &bg, x);
            let err = (a.total() - p.predict_row(x)).abs();
            worst[0] = worst[0].max(err);
            ensure(err <= EFFICIENCY_TOL, || format!("{name}: efficiency error {err:e}"))?;
            if name == "constant" {
                ensure(a.values.iter().all(|v| v.abs() <= DUMMY_TOL), || "constant model has non-zero φ".into())?;
            }
        }
        let a = exact_shapley(&linear, &bg, x);
        for j in 0..4 {
            let err = (a.values[j] - w[j] * (x[j] - means[j])).abs();
            worst[3] = worst[3].max(err);
            ensure(err <= LINEAR_CLOSED_FORM_TOL, || format!("linear closed form off by {err:e}"))?;
        }
        let a = exact_shapley(&dummy, &bg, x);
        worst[1] = worst[1].max(a.values[1].abs());
        ensure(a.values[1].abs() <= DUMMY_TOL, || format!("dummy φ = {:e}", a.values[1]))?;
        let xs = [x[0], x[1], x[0], x[3]];
        let a = exact_shapley(&symmetric, &sym_bg, &xs);
        let err = (a.values[0] - a.values[2]).abs();
        worst[2] = worst[2].max(err);
        ensure(err <= SYMMETRY_TOL, || format!("symmetric pair differs by {err:e}"))?;
        ensure((a.total() - symmetric.predict_row(&xs)).abs() <= EFFICIENCY_TOL, || "symmetric efficiency".into())?;
    }
    let t = within(AXIOM_LIMIT, start)?;
    Ok(format!(
        "efficiency {:.1e}, dummy {:.1e}, symmetry {:.1e}, linear {:.1e}, {t:.1?}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn kernel_equivalence() -> Outcome {
    let start = Instant::now();
    let d = embedded_fdm_corpus();
    let bg = Background::full(&d);
    let g = gbt(&d);
    let lin = fit_linear(&d, 0.0).map_err(|e| e.to_string())?.0;
    let gam = fit_surrogate(&g, &d, &GamParams::default()).map_err(|e| e.to_string())?.0;
    let mut worst = 0.0f64;
    for (name, p) in [("gbt", &g as &dyn Predictor), ("linear", &lin), ("gam", &gam)] {
        let ex = explain_dataset(p, &bg, &d, Method::Exact).map_err(|e| e.to_string())?;
        let ke = explain_dataset(p, &bg, &d, Method::Kernel { budget: KernelBudget::Complete, seed: 42 })
            .map_err(|e| e.to_string())?;
        for (i, (a, b)) in ex.values.iter().zip(&ke.values).enumerate() {
            for j in 0..4 {
                let diff = (a[j] - b[j]).abs();
                worst = worst.max(diff);
                ensure(diff < KERNEL_TOL, || format!("{name} row {i} feature {j}: |Δφ| = {diff:e}"))?;
            }
        }
    }
    let t = within(KERNEL_LIMIT, start)?;
    Ok(format!("3 models x 31 rows, max |Δφ| {worst:.1e}, {t:.1?}"))
}

fn pdp_oracle() -> Outcome {
    let d = embedded_fdm_corpus();
    let g = gbt(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(PDP_PAIR_SEED);
    let mut worst = 0.0f64;
    for feature in 0..4 {
        let curve =
            partial_dependence(&g, &d, feature, &GridSpec::default(), PdpMode::Average).map_err(|e| e.to_string())?;
        for _ in 0..PDP_PAIRS_PER_FEATURE {
            let k = rng.random_range(0..curve.grid.len());
            let mut total = 0.0;
            for r in d.rows() {
                let mut z = *r;
                z[feature] = curve.grid[k];
                total += g.predict_row(&z);
            }
            let diff = (curve.values[k] - total / d.row_count() as f64).abs();
            worst = worst.max(diff);
            ensure(diff <= PDP_TOL, || format!("feature {feature} grid {k}: off by {diff:e}"))?;
        }
    }
    Ok(format!("{} pairs, max diff {worst:.1e}", 4 * PDP_PAIRS_PER_FEATURE))
}

fn gam_structure() -> Outcome {
    let d = embedded_fdm_corpus();
    let g = gbt(&d);
    let (gam, _) = fit_surrogate(&g, &d, &GamParams::default()).map_err(|e| e.to_string())?;
    let raw = fit_gam(&d, d.targets(), &GamParams::default()).map_err(|e| e.to_string())?;
    let mut worst_center = 0.0f64;
    let mut worst_shap = 0.0f64;
    for (name, m) in [("surrogate", &gam), ("raw", &raw)] {
        check_gam(name, m, &d, &mut worst_center, &mut worst_shap)?;
    }
    Ok(format!("decomposition bit-exact, centering {worst_center:.1e}, GAM vs exact SHAP {worst_shap:.1e}"))
}

fn check_gam(
    name: &str,
    m: &GamModel,
    d: &Dataset,
    worst_center: &mut f64,
    worst_shap: &mut f64,
) -> Result<(), String> {
    for x in d.rows() {
        let terms = m.terms(x);
        let residual = m.predict_row(x) - terms.iter().fold(m.intercept, |acc, t| acc + t);
        ensure(residual == 0.0, || format!("{name}: decomposition off by {residual:e}"))?;
    }
    for s in &m.shapes {
        let mean = d.rows().iter().map(|x| s.value(x[s.feature])).sum::<f64>() / d.row_count() as f64;
        *worst_center = worst_center.max(mean.abs());
        ensure(mean.abs() <= CENTERING_TOL, || format!("{name}: shape {} mean {mean:e}", s.feature))?;
    }
    let trace = &m.training_meta.mse_trace;
    ensure(trace.windows(2).all(|w| w[1] <= w[0] + MSE_TRACE_TOL), || format!("{name}: MSE trace increases"))?;
    let ga = gam_attributions(m, d);
    let ex = explain_dataset(m, &Background::full(d), d, Method::Exact).map_err(|e| e.to_string())?;
    for (a, b) in ga.values.iter().zip(&ex.values) {
        for j in 0..4 {
            let diff = (a[j] - b[j]).abs();
            *worst_shap = worst_shap.max(diff);
            ensure(diff <= GAM_SHAP_TOL, || format!("{name}: gam_attributions vs exact off by {diff:e}"))?;
        }
    }
    Ok(())
}

fn importance_top2() -> Outcome {
    let d = embedded_fdm_corpus();
    let g = gbt(&d);
    let top2 = |e: &Explanation| -> Result<Vec<String>, String> {
        Ok(mean_abs_importance(e).map_err(|e| e.to_string())?.top_set(2))
    };
    let full = explain_dataset(&g, &Background::full(&d), &d, Method::Exact).map_err(|e| e.to_string())?;
    let bg = Background::subsample(&d, SUBSAMPLE_BACKGROUND, SUBSAMPLE_SEED).map_err(|e| e.to_string())?;
    let sub = explain_dataset(&g, &bg, &d, Method::Exact).map_err(|e| e.to_string())?;
    let (gam, _) = fit_surrogate(&g, &d, &GamParams::default()).map_err(|e| e.to_string())?;
    let results = [
        ("full background", top2(&full)?),
        ("20-row background", top2(&sub)?),
        ("GAM surrogate", top2(&gam_attributions(&gam, &d))?),
    ];
    let describe = results.iter().map(|(k, v)| format!("{k}: {{{}}}", v.join(", "))).collect::<Vec<_>>().join("; ");
    ensure(results.iter().all(|(_, v)| v == &EXPECTED_TOP2), || {
        format!("expected {{{}}}, got {describe}", EXPECTED_TOP2.join(", "))
    })?;
    Ok(describe)
}

fn run_report(out: &Path, extra: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_fdmx"))
        .args(["report", "--data", "embedded", "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    let t = start.elapsed();
    ensure(o.status.success(), || format!("report failed: {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok(t)
}

fn nonlinearity_echo() -> Outcome {
    let d = embedded_fdm_corpus();
    let gbt_r2 = metrics(&gbt(&d), &d).r2.ok_or("GBT R² undefined")?;
    let ols_r2 = fit_linear(&d, 0.0).map_err(|e| e.to_string())?.1.r2.ok_or("OLS R² undefined")?;
    ensure(gbt_r2 > ols_r2, || format!("GBT R² {gbt_r2} does not exceed OLS R² {ols_r2}"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_report(dir.path(), &[])?;
    let summary = std::fs::read_to_string(dir.path().join("summary.md")).map_err(|e| e.to_string())?;
    for v in [gbt_r2, ols_r2] {
        let shown = format!("{v:.4}");
        ensure(summary.contains(&shown), || format!("summary does not show R² {shown}"))?;
    }
    Ok(format!("GBT R² {gbt_r2:.4} > OLS R² {ols_r2:.4}, both in summary"))
}

fn svg_attr(svg: &str, name: &str) -> Option<f64> {
    let key = format!("{name}=\"");
    let start = svg.find(&key)? + key.len();
    svg[start..].split('"').next()?.parse().ok()
}

fn waterfall_conservation() -> Outcome {
    let d = embedded_fdm_corpus();
    let g = gbt(&d);
    let e = explain_dataset(&g, &Background::full(&d), &d, Method::Exact).map_err(|e| e.to_string())?;
    let preds = g.predict(d.rows());
    let mut worst = 0.0f64;
    for (i, p) in preds.iter().enumerate() {
        let spec = build_waterfall(&e, i, Palette::Paper).map_err(|e| e.to_string())?;
        let svg = render_svg(&FigureSpec::Waterfall(spec.clone()), &Theme::default()).content;
        let rendered = svg_attr(&svg, "data-final").ok_or("waterfall SVG carries no final value")?;
        let chained = spec.entries.iter().fold(spec.base_value, |acc, en| acc + en.contribution);
        for v in [rendered, chained, spec.final_prediction] {
            let diff = (v - p).abs();
            worst = worst.max(diff);
            ensure(diff <= WATERFALL_TOL, || format!("row {i}: {v} vs prediction {p}"))?;
        }
    }
    Ok(format!("31 rows, max deviation {worst:.1e}"))
}

fn tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn golden_example() -> Explanation {
    Explanation {
        method: MethodTag::Exact,
        base_value: 47.0,
        feature_names: ["infill_pct", "layer_height", "print_speed", "extrusion_temp"].map(String::from).to_vec(),
        values: vec![[3.0, -1.0, 0.5, 0.0]],
        data: vec![[78.0, 0.32, 35.0, 220.0]],
        background_origin: BackgroundOrigin::Explicit,
    }
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_report(a.path(), &[])?;
    run_report(b.path(), &[])?;
    let (ta, tb) = (tree(a.path())?, tree(b.path())?);
    ensure(ta.keys().eq(tb.keys()), || "file lists differ".into())?;
    if let Some(k) = ta.keys().find(|k| ta[*k] != tb[*k]) {
        return Err(format!("{k} differs between runs"));
    }
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/waterfall_example.svg");
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let spec = FigureSpec::Waterfall(build_waterfall(&golden_example(), 0, Palette::Paper).map_err(|e| e.to_string())?);
    ensure(render_svg(&spec, &Theme::default()).content == golden, || "waterfall golden SVG drifted".into())?;
    for (name, bytes) in ta.iter().filter(|(k, _)| k.ends_with(".svg")) {
        let text = String::from_utf8_lossy(bytes);
        ensure(!text.contains("NaN") && !text.contains("=\"inf"), || format!("{name} has a non-finite number"))?;
    }
    Ok(format!("{} files byte-identical across runs, golden SVG stable", ta.len()))
}

fn runtime() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = run_report(dir.path(), &[])?;
    ensure(t < REPORT_LIMIT, || format!("report took {t:?}, limit {REPORT_LIMIT:?}"))?;
    Ok(format!("report in {t:.2?}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("corpus fidelity", corpus_fidelity),
        ("Shapley axioms", axiom_suite),
        ("exact vs kernel", kernel_equivalence),
        ("PDP oracle", pdp_oracle),
        ("GAM structure", gam_structure),
        ("importance top-2", importance_top2),
        ("nonlinearity", nonlinearity_echo),
        ("waterfall conservation", waterfall_conservation),
        ("determinism", determinism),
        ("runtime", runtime),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", n + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
