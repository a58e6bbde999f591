//! Tabular FDM experiment data: schema, validation, CSV I/O and the built-in
//! 31-run corpus.
//!
//! Features are always held in canonical order
//! `[infill_pct, layer_height, print_speed, extrusion_temp]` so attribution
//! indices stay stable no matter how an external CSV orders its columns.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of process parameters.
pub const NUM_FEATURES: usize = 4;

/// One run's process parameters in canonical order.
pub type FeatureVector = [f64; NUM_FEATURES];

/// Name of the response column.
pub const TARGET_NAME: &str = "tensile_strength";

/// Unit of the response column.
pub const TARGET_UNIT: &str = "MPa";

/// The four FDM process parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    InfillPct,
    LayerHeight,
    PrintSpeed,
    ExtrusionTemp,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] =
        [Feature::InfillPct, Feature::LayerHeight, Feature::PrintSpeed, Feature::ExtrusionTemp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::InfillPct => "infill_pct",
            Feature::LayerHeight => "layer_height",
            Feature::PrintSpeed => "print_speed",
            Feature::ExtrusionTemp => "extrusion_temp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn unit(self) -> &'static str {
        match self {
            Feature::InfillPct => "%",
            Feature::LayerHeight => "mm",
            Feature::PrintSpeed => "mm/s",
            Feature::ExtrusionTemp => "°C",
        }
    }

    /// Closed interval of admissible values.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Feature::InfillPct => (10.0, 100.0),
            Feature::LayerHeight => (0.08, 0.4),
            Feature::PrintSpeed => (20.0, 80.0),
            Feature::ExtrusionTemp => (190.0, 230.0),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered feature names, units and bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub units: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
}

impl FeatureSchema {
    pub fn canonical() -> Self {
        Self {
            names: Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
            units: Feature::ALL.iter().map(|f| f.unit().to_string()).collect(),
            bounds: Feature::ALL.iter().map(|f| f.bounds()).collect(),
        }
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::canonical()
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("non-numeric value {value:?} at row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("value {value} at row {row}, column `{column}` is outside [{min}, {max}]")]
    BoundsViolation { row: usize, column: String, value: f64, min: f64, max: f64 },
    #[error("target at row {row} must be positive, got {value}")]
    NonPositiveTarget { row: usize, value: f64 },
    #[error("row count mismatch: {rows} feature rows, {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("dataset has no data rows")]
    EmptyData,
    #[error("invalid sample request: {0}")]
    InvalidSample(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether feature values must lie inside the schema bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsCheck {
    Strict,
    Relaxed,
}

impl From<bool> for BoundsCheck {
    fn from(strict: bool) -> Self {
        if strict {
            BoundsCheck::Strict
        } else {
            BoundsCheck::Relaxed
        }
    }
}

/// Validated, row-aligned feature matrix and tensile-strength targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    rows: Vec<FeatureVector>,
    targets: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset, enforcing finiteness, positive targets and
    /// (optionally) schema bounds. Row numbers in errors are 1-based.
    pub fn new(rows: Vec<FeatureVector>, targets: Vec<f64>, bounds: impl Into<BoundsCheck>) -> Result<Self, DataError> {
        if rows.len() != targets.len() {
            return Err(DataError::LengthMismatch { rows: rows.len(), targets: targets.len() });
        }
        if rows.is_empty() {
            return Err(DataError::EmptyData);
        }
        let strict = bounds.into() == BoundsCheck::Strict;
        for (i, (row, &y)) in rows.iter().zip(&targets).enumerate() {
            let line = i + 1;
            for f in Feature::ALL {
                let v = row[f.index()];
                if !v.is_finite() {
                    return Err(DataError::NonFinite { row: line, column: f.name().into() });
                }
                let (min, max) = f.bounds();
                if strict && !(min..=max).contains(&v) {
                    return Err(DataError::BoundsViolation { row: line, column: f.name().into(), value: v, min, max });
                }
            }
            if !y.is_finite() {
                return Err(DataError::NonFinite { row: line, column: TARGET_NAME.into() });
            }
            if y <= 0.0 {
                return Err(DataError::NonPositiveTarget { row: line, value: y });
            }
        }
        Ok(Self { schema: FeatureSchema::canonical(), rows, targets })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Values of one feature column, in row order.
    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[feature]).collect()
    }

    /// Rows at `indices` (in the given order), skipping bounds validation.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let rows = indices.iter().map(|&i| self.rows[i]).collect();
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        Self::new(rows, targets, BoundsCheck::Relaxed)
    }

    /// `k` distinct row indices drawn with a ChaCha8 stream seeded by `seed`,
    /// returned in ascending order.
    pub fn sample_indices(&self, k: usize, seed: u64) -> Result<Vec<usize>, DataError> {
        let n = self.row_count();
        if k == 0 || k > n {
            return Err(DataError::InvalidSample(format!("cannot draw {k} of {n} rows")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, n, k).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }

    /// Seeded train/test split for model-quality reporting. The test part
    /// receives `round(n * test_fraction)` rows; both parts stay nonempty.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self), DataError> {
        let n = self.row_count();
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(DataError::InvalidSample(format!("test fraction {test_fraction} not in (0, 1)")));
        }
        let n_test = ((n as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(DataError::InvalidSample(format!(
                "test fraction {test_fraction} leaves an empty part of {n} rows"
            )));
        }
        let test_idx = self.sample_indices(n_test, seed)?;
        let train_idx: Vec<usize> = (0..n).filter(|i| test_idx.binary_search(i).is_err()).collect();
        Ok((self.subset(&train_idx)?, self.subset(&test_idx)?))
    }

    /// Canonical CSV serialization. Floats use the shortest representation
    /// that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).chain([TARGET_NAME]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (row, y) in self.rows.iter().zip(&self.targets) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        out
    }
}

/// Parses CSV text with a header row. Feature columns may come in any order
/// and are reordered to canonical order; LF and CRLF are both accepted.
pub fn load_csv<R: Read>(source: R, target_column: &str, bounds: impl Into<BoundsCheck>) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();

    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (pos, name) in headers.iter().enumerate() {
        if positions.insert(name, pos).is_some() {
            return Err(DataError::DuplicateColumn(name.to_string()));
        }
        if name != target_column && Feature::from_name(name).is_none() {
            return Err(DataError::UnknownColumn(name.to_string()));
        }
    }
    let target_pos =
        *positions.get(target_column).ok_or_else(|| DataError::MissingColumn(target_column.to_string()))?;
    let mut feature_pos = [0usize; NUM_FEATURES];
    for f in Feature::ALL {
        feature_pos[f.index()] =
            *positions.get(f.name()).ok_or_else(|| DataError::MissingColumn(f.name().to_string()))?;
    }

    let parse = |record: &csv::StringRecord, pos: usize, row: usize, column: &str| -> Result<f64, DataError> {
        let cell = record.get(pos).unwrap_or("");
        cell.parse::<f64>().map_err(|_| DataError::NonNumericCell {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        })
    };

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        let mut row = [0.0; NUM_FEATURES];
        for f in Feature::ALL {
            row[f.index()] = parse(&record, feature_pos[f.index()], line, f.name())?;
        }
        targets.push(parse(&record, target_pos, line, target_column)?);
        rows.push(row);
    }
    Dataset::new(rows, targets, bounds)
}

/// Reads a CSV file from disk; see [`load_csv`].
pub fn load_csv_path(
    path: impl AsRef<Path>,
    target_column: &str,
    bounds: impl Into<BoundsCheck>,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    load_csv(std::io::BufReader::new(file), target_column, bounds)
}

const FDM_CORPUS: [(FeatureVector, f64); 31] = [
    ([78.0, 0.32, 35.0, 220.0], 46.17),
    ([10.5, 0.24, 50.0, 210.0], 42.78),
    ([33.0, 0.16, 35.0, 220.0], 45.87),
    ([33.0, 0.32, 35.0, 200.0], 41.18),
    ([33.0, 0.16, 65.0, 200.0], 43.59),
    ([100.0, 0.24, 50.0, 210.0], 54.2),
    ([78.0, 0.16, 35.0, 200.0], 51.88),
    ([33.0, 0.32, 65.0, 200.0], 43.19),
    ([78.0, 0.32, 65.0, 200.0], 50.34),
    ([33.0, 0.16, 65.0, 220.0], 45.72),
    ([78.0, 0.16, 35.0, 220.0], 53.35),
    ([55.5, 0.24, 50.0, 210.0], 49.67),
    ([33.0, 0.32, 35.0, 220.0], 45.08),
    ([55.5, 0.24, 50.0, 190.0], 47.56),
    ([55.5, 0.24, 50.0, 210.0], 48.39),
    ([78.0, 0.32, 65.0, 220.0], 46.49),
    ([55.5, 0.24, 50.0, 210.0], 47.21),
    ([55.5, 0.24, 50.0, 210.0], 48.3),
    ([55.5, 0.24, 50.0, 230.0], 50.15),
    ([33.0, 0.32, 65.0, 220.0], 43.35),
    ([55.5, 0.24, 50.0, 210.0], 45.33),
    ([55.5, 0.24, 80.0, 210.0], 45.56),
    ([78.0, 0.16, 65.0, 200.0], 49.84),
    ([55.5, 0.24, 20.0, 210.0], 48.51),
    ([55.5, 0.08, 50.0, 210.0], 42.63),
    ([55.5, 0.4, 50.0, 210.0], 42.87),
    ([55.5, 0.24, 50.0, 210.0], 47.14),
    ([78.0, 0.32, 35.0, 200.0], 45.17),
    ([55.5, 0.24, 50.0, 210.0], 47.07),
    ([78.0, 0.16, 65.0, 220.0], 50.99),
    ([33.0, 0.16, 35.0, 200.0], 51.55),
];

/// The 31 tensile-test runs, in the order they were recorded.
///
/// Run 2 is stored with its recorded 10.5 % infill, not the nominal 10 % level.
pub fn embedded_fdm_corpus() -> Dataset {
    let rows = FDM_CORPUS.iter().map(|(x, _)| *x).collect();
    let targets = FDM_CORPUS.iter().map(|(_, y)| *y).collect();
    Dataset::new(rows, targets, BoundsCheck::Strict).expect("built-in corpus is valid")
}

/// Mean, extrema and population standard deviation of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl ColumnStats {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can push the mean a hair outside the extrema.
        Self { mean: mean.clamp(min, max), min, max, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub features: [ColumnStats; NUM_FEATURES],
    pub target: ColumnStats,
}

impl ColumnSummary {
    /// Feature means in canonical order.
    pub fn feature_means(&self) -> FeatureVector {
        let mut m = [0.0; NUM_FEATURES];
        for (slot, s) in m.iter_mut().zip(&self.features) {
            *slot = s.mean;
        }
        m
    }
}

pub fn summarize(d: &Dataset) -> ColumnSummary {
    let features = std::array::from_fn(|j| ColumnStats::of(&d.column(j)));
    ColumnSummary { features, target: ColumnStats::of(d.targets()) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_spot_checks() {
        let d = embedded_fdm_corpus();
        assert_eq!(d.row_count(), 31);
        assert_eq!(d.rows()[0], [78.0, 0.32, 35.0, 220.0]);
        assert_eq!(d.targets()[0], 46.17);
        assert_eq!(d.rows()[5], [100.0, 0.24, 50.0, 210.0]);
        assert_eq!(d.targets()[5], 54.2);
        let s = summarize(&d);
        assert_eq!(s.target.max, 54.2);
        assert_eq!(s.target.min, 41.18);
    }

    #[test]
    fn summary_means_match_hand_sums() {
        let s = summarize(&embedded_fdm_corpus());
        // 1461.13 / 31 and (8*78 + 8*33 + 13*55.5 + 10.5 + 100) / 31
        assert!((s.target.mean - 1461.13 / 31.0).abs() < 1e-12);
        assert!((s.target.mean - 47.133).abs() < 5e-4);
        assert!((s.features[0].mean - 1720.0 / 31.0).abs() < 1e-12);
        assert!((s.features[0].mean - 55.484).abs() < 5e-4);
        assert!((s.target.std - 3.30038940722667).abs() < 1e-12);
    }

    #[test]
    fn summary_residuals_sum_to_zero() {
        let d = embedded_fdm_corpus();
        let s = summarize(&d);
        for j in 0..NUM_FEATURES {
            let r: f64 = d.column(j).iter().map(|v| v - s.features[j].mean).sum();
            assert!(r.abs() < 1e-9, "column {j}: {r}");
        }
        let r: f64 = d.targets().iter().map(|v| v - s.target.mean).sum();
        assert!(r.abs() < 1e-9);
    }

    #[test]
    fn single_row_summary() {
        let d = Dataset::new(vec![[50.0, 0.2, 40.0, 200.0]], vec![44.0], true).unwrap();
        let s = summarize(&d);
        for (j, v) in [50.0, 0.2, 40.0, 200.0].into_iter().enumerate() {
            let c = s.features[j];
            assert_eq!((c.mean, c.min, c.max, c.std), (v, v, v, 0.0));
        }
        assert_eq!(s.target.std, 0.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = embedded_fdm_corpus();
        let back = load_csv(d.to_csv().as_bytes(), TARGET_NAME, true).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn columns_may_come_in_any_order_with_crlf() {
        let text = "extrusion_temp,tensile_strength,infill_pct,print_speed,layer_height\r\n220,46.17,78,35,0.32\r\n";
        let d = load_csv(text.as_bytes(), TARGET_NAME, true).unwrap();
        assert_eq!(d.rows()[0], [78.0, 0.32, 35.0, 220.0]);
        assert_eq!(d.targets(), &[46.17]);
    }

    #[test]
    fn header_only_is_empty_data() {
        let text = "infill_pct,layer_height,print_speed,extrusion_temp,tensile_strength\n";
        assert!(matches!(load_csv(text.as_bytes(), TARGET_NAME, true), Err(DataError::EmptyData)));
    }

    #[test]
    fn bad_cell_reports_location() {
        let text = "infill_pct,layer_height,print_speed,extrusion_temp,tensile_strength\n\
                    78,0.32,35,220,46.17\n10.5,0.24,50,210,42.78\nabc,0.16,35,220,45.87\n";
        match load_csv(text.as_bytes(), TARGET_NAME, true) {
            Err(DataError::NonNumericCell { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "infill_pct");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_unknown_columns() {
        let text = "infill_pct,layer_height,print_speed,tensile_strength\n78,0.32,35,46.17\n";
        assert!(matches!(
            load_csv(text.as_bytes(), TARGET_NAME, true),
            Err(DataError::MissingColumn(c)) if c == "extrusion_temp"
        ));
        let text = "infill_pct,layer_height,print_speed,extrusion_temp,strength\n78,0.32,35,220,46.17\n";
        assert!(matches!(
            load_csv(text.as_bytes(), TARGET_NAME, true),
            Err(DataError::UnknownColumn(c)) if c == "strength"
        ));
    }

    #[test]
    fn bounds_are_optional_for_external_files() {
        let text = "infill_pct,layer_height,print_speed,extrusion_temp,tensile_strength\n5,0.32,35,220,46.17\n";
        assert!(matches!(load_csv(text.as_bytes(), TARGET_NAME, true), Err(DataError::BoundsViolation { row: 1, .. })));
        assert!(load_csv(text.as_bytes(), TARGET_NAME, false).is_ok());
    }

    #[test]
    fn rejects_non_positive_targets() {
        assert!(matches!(
            Dataset::new(vec![[50.0, 0.2, 40.0, 200.0]], vec![0.0], true),
            Err(DataError::NonPositiveTarget { row: 1, .. })
        ));
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let d = embedded_fdm_corpus();
        let a = d.sample_indices(20, 7).unwrap();
        assert_eq!(a, d.sample_indices(20, 7).unwrap());
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(d.sample_indices(32, 7).is_err());
        let (train, test) = d.train_test_split(0.25, 42).unwrap();
        assert_eq!(train.row_count() + test.row_count(), 31);
        assert_eq!(test.row_count(), 8);
    }
}
