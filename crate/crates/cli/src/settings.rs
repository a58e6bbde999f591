//! Flag parsing and the `--config` merge. Every option has one string form
//! shared by flags and config files; flags win over file entries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fdmx::dataset::{Feature, TARGET_NAME};
use fdmx::gam::GamParams;
use fdmx::models::GbtParams;
use fdmx::plots::{HeatmapOrdering, Palette};
use fdmx::shapley::KernelBudget;

use crate::error::{config, CliError};

#[derive(Debug, Parser)]
#[command(name = "fdmx", version, about = "Explain tensile-strength models of FDM process parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit a model and write it with its training metrics.
    Train,
    /// Attribute predictions with Shapley values and draw the attribution figures.
    Explain,
    /// Partial dependence curves, plain and with the attribution overlay.
    Pdp,
    /// Fit the additive surrogate and draw its attributions.
    Gam,
    /// Run the whole pipeline and write a summary.
    Report,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// `embedded` or a CSV path
    #[arg(long, global = true)]
    pub data: Option<String>,
    /// Target column name in a CSV file
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Skip the per-feature physical range check
    #[arg(long, global = true, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub relaxed_bounds: Option<String>,
    /// `gbt` or `linear`
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Previously written model.json to use instead of fitting
    #[arg(long, global = true)]
    pub model_file: Option<String>,
    #[arg(long, global = true)]
    pub rounds: Option<String>,
    #[arg(long, global = true)]
    pub lr: Option<String>,
    #[arg(long, global = true)]
    pub depth: Option<String>,
    #[arg(long, global = true)]
    pub min_leaf: Option<String>,
    /// Ridge penalty for the linear model
    #[arg(long, global = true)]
    pub ridge: Option<String>,
    /// `exact` or `kernel`
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Kernel coalition budget: a count or `complete`
    #[arg(long, global = true)]
    pub budget: Option<String>,
    /// `full` or a row count to subsample
    #[arg(long, global = true)]
    pub background: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Feature name; repeat for several, omit for all
    #[arg(long, global = true)]
    pub feature: Vec<String>,
    /// `average`, `at_means` or `both`
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Number of PDP grid points
    #[arg(long, global = true)]
    pub grid_points: Option<String>,
    /// Row index for a waterfall; repeat for several
    #[arg(long, global = true)]
    pub sample: Vec<String>,
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// `paper` or `unified`
    #[arg(long, global = true)]
    pub palette: Option<String>,
    /// Heatmap sample order: `corpus` or `prediction`
    #[arg(long, global = true)]
    pub ordering: Option<String>,
    #[arg(long, global = true)]
    pub gam_rounds: Option<String>,
    #[arg(long, global = true)]
    pub gam_lr: Option<String>,
    #[arg(long, global = true)]
    pub gam_bins: Option<String>,
    /// Fraction of rows the surrogate trains on
    #[arg(long, global = true)]
    pub surrogate_fraction: Option<String>,
    /// What the GAM is fit to: `model` predictions or `raw` targets
    #[arg(long, global = true)]
    pub gam_target: Option<String>,
    /// key=value file; flags override its entries
    #[arg(long, global = true)]
    pub config: Option<String>,
}

const KEYS: [&str; 26] = [
    "data",
    "target",
    "relaxed_bounds",
    "model",
    "model_file",
    "rounds",
    "lr",
    "depth",
    "min_leaf",
    "ridge",
    "method",
    "budget",
    "background",
    "seed",
    "feature",
    "mode",
    "grid_points",
    "sample",
    "out",
    "palette",
    "ordering",
    "gam_rounds",
    "gam_lr",
    "gam_bins",
    "surrogate_fraction",
    "gam_target",
];

impl Flags {
    fn entries(&self) -> BTreeMap<&'static str, String> {
        let list = |v: &Vec<String>| (!v.is_empty()).then(|| v.join(","));
        let pairs: [(&'static str, Option<String>); 26] = [
            ("data", self.data.clone()),
            ("target", self.target.clone()),
            ("relaxed_bounds", self.relaxed_bounds.clone()),
            ("model", self.model.clone()),
            ("model_file", self.model_file.clone()),
            ("rounds", self.rounds.clone()),
            ("lr", self.lr.clone()),
            ("depth", self.depth.clone()),
            ("min_leaf", self.min_leaf.clone()),
            ("ridge", self.ridge.clone()),
            ("method", self.method.clone()),
            ("budget", self.budget.clone()),
            ("background", self.background.clone()),
            ("seed", self.seed.clone()),
            ("feature", list(&self.feature)),
            ("mode", self.mode.clone()),
            ("grid_points", self.grid_points.clone()),
            ("sample", list(&self.sample)),
            ("out", self.out.clone()),
            ("palette", self.palette.clone()),
            ("ordering", self.ordering.clone()),
            ("gam_rounds", self.gam_rounds.clone()),
            ("gam_lr", self.gam_lr.clone()),
            ("gam_bins", self.gam_bins.clone()),
            ("surrogate_fraction", self.surrogate_fraction.clone()),
            ("gam_target", self.gam_target.clone()),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

/// Reads `key = value` lines; `#` starts a comment. Keys use the long flag
/// names with either `-` or `_`.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<&'static str, String>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('-', "_");
        let key = KEYS
            .iter()
            .find(|known| **known == k)
            .ok_or_else(|| config(format!("{}:{}: unknown key {k:?}", path.display(), n + 1)))?;
        map.insert(*key, v.trim().to_string());
    }
    Ok(map)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Embedded,
    Csv(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Gbt,
    Linear,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Linear => "linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Exact,
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackgroundSpec {
    Full,
    Subsample(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSelection {
    Average,
    AtMeans,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GamTarget {
    Model,
    Raw,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct Settings {
    pub data: DataSource,
    pub target: String,
    pub relaxed_bounds: bool,
    pub model: ModelKind,
    pub model_file: Option<PathBuf>,
    pub gbt: GbtParams,
    pub ridge: f64,
    pub method: MethodKind,
    pub budget: KernelBudget,
    pub background: BackgroundSpec,
    pub seed: u64,
    pub features: Vec<Feature>,
    pub mode: ModeSelection,
    pub grid_points: usize,
    pub samples: Vec<usize>,
    pub out: PathBuf,
    pub palette: Palette,
    pub ordering: HeatmapOrdering,
    pub gam: GamParams,
    pub surrogate_fraction: f64,
    pub gam_target: GamTarget,
}

pub const DEFAULT_SEED: u64 = 42;

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| config(format!("--{}: cannot parse {v:?}", key.replace('_', "-"))))
}

fn choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        config(format!("--{}: expected one of {}, got {v:?}", key.replace('_', "-"), names.join(", ")))
    })
}

pub fn parse_feature(name: &str) -> Result<Feature, CliError> {
    Feature::from_name(name).ok_or_else(|| {
        let lower = name.to_ascii_lowercase();
        let best = Feature::ALL
            .iter()
            .map(|f| (f.name().contains(lower.as_str()), strsim::jaro_winkler(&lower, f.name()), f.name()))
            .max_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
            .map(|(_, _, n)| n)
            .unwrap_or("infill_pct");
        config(format!("unknown feature {name:?}; did you mean {best:?}?"))
    })
}

fn resolve_path(raw: &str) -> Result<PathBuf, std::io::Error> {
    let p = Path::new(raw);
    if p.is_absolute() {
        Ok(p.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(p))
    }
}

impl Settings {
    /// Merges `flags` over the optional config file and validates every value.
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let mut map = match &flags.config {
            Some(path) => read_config_file(Path::new(path))?,
            None => BTreeMap::new(),
        };
        map.extend(flags.entries());
        Self::from_entries(&map)
    }

    pub fn from_entries(map: &BTreeMap<&'static str, String>) -> Result<Self, CliError> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut gbt = GbtParams::default();
        let mut gam = GamParams::default();

        let data = match get("data").unwrap_or("embedded") {
            "embedded" => DataSource::Embedded,
            path => {
                let resolved = resolve_path(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
                if !resolved.is_file() {
                    return Err(CliError::Data(format!("file not found: {}", resolved.display())));
                }
                DataSource::Csv(resolved.canonicalize().map_err(|e| CliError::Data(format!("{path}: {e}")))?)
            }
        };
        let model_file = match get("model_file") {
            None => None,
            Some(path) => {
                let resolved = resolve_path(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
                if !resolved.is_file() {
                    return Err(CliError::Data(format!("file not found: {}", resolved.display())));
                }
                Some(resolved)
            }
        };
        if let Some(v) = get("rounds") {
            gbt.n_rounds = number("rounds", v)?;
        }
        if let Some(v) = get("lr") {
            gbt.learning_rate = number("lr", v)?;
        }
        if let Some(v) = get("depth") {
            gbt.max_depth = number("depth", v)?;
        }
        if let Some(v) = get("min_leaf") {
            gbt.min_samples_leaf = number("min_leaf", v)?;
        }
        if let Some(v) = get("gam_rounds") {
            gam.rounds = number("gam_rounds", v)?;
        }
        if let Some(v) = get("gam_lr") {
            gam.learning_rate = number("gam_lr", v)?;
        }
        if let Some(v) = get("gam_bins") {
            gam.bins = number("gam_bins", v)?;
        }
        let budget = match get("budget").unwrap_or("complete") {
            "complete" => KernelBudget::Complete,
            v => KernelBudget::Coalitions(number("budget", v)?),
        };
        let background = match get("background").unwrap_or("full") {
            "full" => BackgroundSpec::Full,
            v => BackgroundSpec::Subsample(number("background", v)?),
        };
        let features = match get("feature") {
            None => Feature::ALL.to_vec(),
            Some(list) => list.split(',').map(|f| parse_feature(f.trim())).collect::<Result<_, _>>()?,
        };
        let samples = match get("sample") {
            None => vec![0],
            Some(list) => list.split(',').map(|s| number("sample", s.trim())).collect::<Result<_, _>>()?,
        };
        let surrogate_fraction: f64 = number("surrogate_fraction", get("surrogate_fraction").unwrap_or("1"))?;
        if !(surrogate_fraction > 0.0 && surrogate_fraction <= 1.0) {
            return Err(config(format!("--surrogate-fraction must lie in (0, 1], got {surrogate_fraction}")));
        }
        let out = resolve_path(get("out").unwrap_or("fdmx-out"))
            .map_err(|e| config(format!("cannot resolve output directory: {e}")))?;

        Ok(Settings {
            data,
            target: get("target").unwrap_or(TARGET_NAME).to_string(),
            relaxed_bounds: choice(
                "relaxed_bounds",
                get("relaxed_bounds").unwrap_or("false"),
                &[("true", true), ("false", false)],
            )?,
            model: choice(
                "model",
                get("model").unwrap_or("gbt"),
                &[("gbt", ModelKind::Gbt), ("linear", ModelKind::Linear)],
            )?,
            model_file,
            gbt,
            ridge: number("ridge", get("ridge").unwrap_or("0"))?,
            method: choice(
                "method",
                get("method").unwrap_or("exact"),
                &[("exact", MethodKind::Exact), ("kernel", MethodKind::Kernel)],
            )?,
            budget,
            background,
            seed: get("seed").map_or(Ok(DEFAULT_SEED), |v| number("seed", v))?,
            features,
            mode: choice(
                "mode",
                get("mode").unwrap_or("average"),
                &[
                    ("average", ModeSelection::Average),
                    ("at_means", ModeSelection::AtMeans),
                    ("both", ModeSelection::Both),
                ],
            )?,
            grid_points: number("grid_points", get("grid_points").unwrap_or("25"))?,
            samples,
            out,
            palette: choice(
                "palette",
                get("palette").unwrap_or("paper"),
                &[("paper", Palette::Paper), ("unified", Palette::Unified)],
            )?,
            ordering: choice(
                "ordering",
                get("ordering").unwrap_or("corpus"),
                &[("corpus", HeatmapOrdering::CorpusOrder), ("prediction", HeatmapOrdering::ByPrediction)],
            )?,
            gam,
            surrogate_fraction,
            gam_target: choice(
                "gam_target",
                get("gam_target").unwrap_or("model"),
                &[("model", GamTarget::Model), ("raw", GamTarget::Raw)],
            )?,
        })
    }

    /// `key = value` lines in a fixed order. The output directory is left out
    /// so identical runs into different directories produce identical files.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            (
                "data",
                match &self.data {
                    DataSource::Embedded => "embedded".to_string(),
                    DataSource::Csv(p) => p.display().to_string(),
                },
            ),
            ("target", self.target.clone()),
            ("relaxed_bounds", self.relaxed_bounds.to_string()),
            ("model", self.model.name().to_string()),
        ];
        if let Some(p) = &self.model_file {
            lines.push(("model_file", p.display().to_string()));
        }
        lines.extend([
            ("rounds", self.gbt.n_rounds.to_string()),
            ("lr", self.gbt.learning_rate.to_string()),
            ("depth", self.gbt.max_depth.to_string()),
            ("min_leaf", self.gbt.min_samples_leaf.to_string()),
            ("ridge", self.ridge.to_string()),
            (
                "method",
                match self.method {
                    MethodKind::Exact => "exact",
                    MethodKind::Kernel => "kernel",
                }
                .to_string(),
            ),
            (
                "budget",
                match self.budget {
                    KernelBudget::Complete => "complete".to_string(),
                    KernelBudget::Coalitions(n) => n.to_string(),
                },
            ),
            (
                "background",
                match self.background {
                    BackgroundSpec::Full => "full".to_string(),
                    BackgroundSpec::Subsample(k) => k.to_string(),
                },
            ),
            ("seed", self.seed.to_string()),
            ("feature", self.features.iter().map(|f| f.name()).collect::<Vec<_>>().join(",")),
            (
                "mode",
                match self.mode {
                    ModeSelection::Average => "average",
                    ModeSelection::AtMeans => "at_means",
                    ModeSelection::Both => "both",
                }
                .to_string(),
            ),
            ("grid_points", self.grid_points.to_string()),
            ("sample", self.samples.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
            (
                "palette",
                match self.palette {
                    Palette::Paper => "paper",
                    Palette::Unified => "unified",
                }
                .to_string(),
            ),
            (
                "ordering",
                match self.ordering {
                    HeatmapOrdering::CorpusOrder => "corpus",
                    HeatmapOrdering::ByPrediction => "prediction",
                }
                .to_string(),
            ),
            ("gam_rounds", self.gam.rounds.to_string()),
            ("gam_lr", self.gam.learning_rate.to_string()),
            ("gam_bins", self.gam.bins.to_string()),
            ("surrogate_fraction", self.surrogate_fraction.to_string()),
            (
                "gam_target",
                match self.gam_target {
                    GamTarget::Model => "model",
                    GamTarget::Raw => "raw",
                }
                .to_string(),
            ),
        ]);
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
