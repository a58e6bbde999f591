use std::fmt::Write;

use fdmx::shapley::{BackgroundOrigin, ImportanceRanking};

use crate::pipeline::ReportData;
use crate::settings::{DataSource, GamTarget, MethodKind, Settings};

fn r2(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |r| format!("{r:.4}"))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn ranking_table(out: &mut String, r: &ImportanceRanking) {
    out.push_str("| rank | feature | mean abs attribution (MPa) |\n|---:|---|---:|\n");
    for (k, e) in r.entries.iter().enumerate() {
        let _ = writeln!(out, "| {} | {} | {:.4} |", k + 1, e.feature, e.importance);
    }
}

/// One-line-per-fact digest printed on stdout.
pub fn headline(d: &ReportData) -> String {
    format!(
        "top-2 features: {} (matches {{{}}}: {})\n{} R² = {} vs linear R² = {}\n",
        d.top2.join(", "),
        d.expected_top2.join(", "),
        yes_no(d.top2_matches_expected),
        d.model,
        r2(d.model_fit.r2),
        r2(d.linear_fit.r2),
    )
}

pub fn render(s: &Settings, d: &ReportData) -> String {
    let mut out = String::from("# Tensile strength attribution report\n\n");
    let data = match &s.data {
        DataSource::Embedded => "embedded FDM corpus".to_string(),
        DataSource::Csv(p) => format!("`{}`", p.display()),
    };
    let background = match &d.background {
        BackgroundOrigin::FullDataset => format!("all {} rows", d.rows),
        BackgroundOrigin::Subsample { k, seed } => format!("{k} rows drawn with seed {seed}"),
        BackgroundOrigin::Explicit | BackgroundOrigin::AdditiveModel => "explicit rows".to_string(),
    };
    let method = match s.method {
        MethodKind::Exact => "exact enumeration".to_string(),
        MethodKind::Kernel => format!("kernel estimate, budget {}", d.kernel_vs_exact.budget),
    };
    let _ = writeln!(out, "- Data: {data}, {} rows", d.rows);
    let _ = writeln!(out, "- Model: {}", d.model);
    let _ = writeln!(out, "- Attributions: {method}; background {background}; base value {:.4} MPa", d.base_value);
    let _ = writeln!(out, "- Seed: {}\n", s.seed);

    out.push_str("## Fit\n\n| model | training R² | RMSE (MPa) |\n|---|---:|---:|\n");
    let _ = writeln!(out, "| {} | {} | {:.4} |", d.model, r2(d.model_fit.r2), d.model_fit.rmse);
    let _ = writeln!(out, "| linear baseline | {} | {:.4} |\n", r2(d.linear_fit.r2), d.linear_fit.rmse);
    let _ = writeln!(
        out,
        "Nonlinearity: {} training R² {} the linear baseline ({} vs {}).\n",
        d.model,
        if d.nonlinear_gain { "exceeds" } else { "does not exceed" },
        r2(d.model_fit.r2),
        r2(d.linear_fit.r2)
    );

    out.push_str("## Feature importance\n\n");
    ranking_table(&mut out, &d.importance);
    let _ = writeln!(out, "\nTop-2 features: {}", d.top2.join(", "));
    let _ = writeln!(out, "Matches {{{}}}: {}\n", d.expected_top2.join(", "), yes_no(d.top2_matches_expected));

    let gam_source = match s.gam_target {
        GamTarget::Model => format!("surrogate of the {} model", d.model),
        GamTarget::Raw => "fit to the measured targets".to_string(),
    };
    let _ = writeln!(out, "## Additive model ({gam_source})\n");
    ranking_table(&mut out, &d.gam_importance);
    let _ = writeln!(out, "\nTop-2 features: {}", d.gam_top2.join(", "));
    let _ = writeln!(out, "Matches {{{}}}: {}", d.expected_top2.join(", "), yes_no(d.gam_top2_matches_expected));
    if let Some(f) = &d.fidelity {
        let _ = writeln!(
            out,
            "Fidelity to the {} predictions: R² {}, RMSE {:.4} MPa over {} rows",
            d.model,
            r2(f.r2),
            f.rmse,
            f.rows
        );
    }

    out.push_str("\n## Checks\n\n");
    let _ = writeln!(out, "- Additivity, max |base + Σφ − prediction|: {:e}", d.additivity_error);
    let _ = writeln!(
        out,
        "- Kernel ({}) vs exact, max |Δφ| per feature: {}",
        d.kernel_vs_exact.budget,
        d.kernel_vs_exact.max_abs_diff.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ")
    );
    out
}
