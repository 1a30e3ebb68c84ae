//! File formats: CSV ingestion with cell-level diagnostics, network and
//! config serialization, run manifests, and plot-ready output files.
//!
//! Two formatting regimes coexist deliberately:
//!
//! - Dataset CSVs round-trip bit-exactly (Rust's shortest-representation
//!   float formatting), so a generated dataset can be written and reloaded
//!   without loss.
//! - Result and plot files use scientific notation with six significant
//!   digits, which keeps reruns diffable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::experiments::{selected_lambda_report, CvPlan, RunSummary};
use crate::model::MveNetwork;
use crate::train::TrainConfig;

/// How to pick the target column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetColumn {
    /// The last column (the UCI convention).
    Last,
    /// Zero-based column index.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl TargetColumn {
    /// Parses a CLI spec: `last`, a number, or a column name.
    pub fn parse(spec: &str) -> TargetColumn {
        if spec.eq_ignore_ascii_case("last") {
            TargetColumn::Last
        } else if let Ok(i) = spec.parse::<usize>() {
            TargetColumn::Index(i)
        } else {
            TargetColumn::Name(spec.to_string())
        }
    }
}

/// Loads a numeric CSV into a [`Dataset`].
///
/// Every cell must parse as a number — no imputation. Errors carry the
/// 1-based data row and the column name (or 1-based position without a
/// header).
pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::data(format!("file not found: {}", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;

    let headers: Option<Vec<String>> = if has_header {
        Some(
            reader
                .headers()
                .map_err(|e| Error::data(format!("bad header row: {e}")))?
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    } else {
        None
    };

    let mut records = Vec::new();
    for (ri, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("row {} unreadable: {e}", ri + 1)))?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::data(format!("{} has no data rows", path.display())));
    }
    let width = records[0].len();
    if width < 2 {
        return Err(Error::data("need at least one covariate and one target column"));
    }

    let column_name = |j: usize| -> String {
        headers
            .as_ref()
            .and_then(|h| h.get(j).cloned())
            .unwrap_or_else(|| format!("{}", j + 1))
    };
    let target_idx = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) => {
            if *i >= width {
                return Err(Error::data(format!(
                    "target column index {i} out of range for {width} columns"
                )));
            }
            *i
        }
        TargetColumn::Name(name) => {
            let h = headers.as_ref().ok_or_else(|| {
                Error::data(format!("target column '{name}' requires a header row"))
            })?;
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::data(format!("target column '{name}' not found")))?
        }
    };

    let p = width - 1;
    let mut x = Vec::with_capacity(records.len() * p);
    let mut y = Vec::with_capacity(records.len());
    for (ri, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Data {
                message: format!("expected {width} columns, found {}", rec.len()),
                row: Some(ri + 1),
                column: None,
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Data {
                message: if cell.is_empty() {
                    "blank cell".to_string()
                } else {
                    format!("'{cell}' is not numeric")
                },
                row: Some(ri + 1),
                column: Some(column_name(j)),
            })?;
            if j == target_idx {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Dataset::new(x, y, p, label)
}

/// Writes a dataset as CSV with a header (`x1..xp,y`), the target last.
/// Values round-trip bit-exactly.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for j in 0..data.p() {
        out.push_str(&format!("x{},", j + 1));
    }
    out.push_str("y\n");
    for i in 0..data.n() {
        for v in data.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", data.target(i)));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Scientific notation with six significant digits; the format of every
/// result and plot file.
pub fn fmt_sci(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.5e}")
    }
}

/// Writes aligned columns as a headered CSV in plot-ready form.
pub fn write_columns_csv(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::config("one header per column required"));
    }
    let rows = columns.first().map(|c| c.len()).unwrap_or(0);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::config("plot columns must have equal length"));
    }
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt_sci(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_network(path: &Path, net: &MveNetwork) -> Result<()> {
    let json = serde_json::to_string_pretty(net)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<MveNetwork> {
    let json = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&json)?)
}

pub fn save_train_config(path: &Path, cfg: &TrainConfig) -> Result<()> {
    let json = serde_json::to_string_pretty(cfg)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let json = fs::read_to_string(path)?;
    let cfg: TrainConfig = serde_json::from_str(&json)?;
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of a file, hex encoded.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything needed to reproduce a run exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub created_unix_seconds: Option<u64>,
    pub master_seed: u64,
    pub dataset: Option<DatasetInfo>,
    /// Fully resolved run parameters (CLI flags after defaulting).
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: Option<String>,
    pub sha256: Option<String>,
    pub label: String,
    pub rows: usize,
    pub columns: usize,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, params: serde_json::Value) -> Self {
        let created_unix_seconds = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_unix_seconds,
            master_seed,
            dataset: None,
            params,
        }
    }

    pub fn with_dataset(mut self, info: DatasetInfo) -> Self {
        self.dataset = Some(info);
        self
    }
}

/// A run's output directory. Creating one never clobbers existing files
/// silently — the directory is created if missing and files are written
/// individually.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<()> {
        let json = serde_json::to_string_pretty(manifest)?;
        fs::write(self.path("manifest.json"), json)?;
        Ok(())
    }

    pub fn read_manifest(&self) -> Result<RunManifest> {
        let json = fs::read_to_string(self.path("manifest.json"))?;
        Ok(serde_json::from_str(&json)?)
    }

    pub fn write_text(&self, name: &str, contents: &str) -> Result<()> {
        let mut f = fs::File::create(self.path(name))?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }
}

/// Per-fold results of a benchmark run as CSV.
pub fn fold_results_csv(summary: &RunSummary) -> String {
    let mut out = String::from(
        "dataset,strategy,reg_mode,fold,lambda_mean,lambda_var,loglik,rmse,inner_divergences,final_diverged\n",
    );
    for arm in &summary.arms {
        for fold in &arm.folds {
            let (ll, rmse) = match fold.metrics {
                Some(Metrics { loglik, rmse }) => (fmt_sci(loglik), fmt_sci(rmse)),
                None => ("nan".to_string(), "nan".to_string()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                summary.dataset_label,
                arm.strategy.name(),
                arm.mode.name(),
                fold.fold,
                fmt_sci(fold.lambda_mean),
                fmt_sci(fold.lambda_var),
                ll,
                rmse,
                fold.inner_divergences,
                fold.final_diverged,
            ));
        }
    }
    out
}

/// Aggregate table mirroring the strategy-by-mode layout: one row per metric
/// and mode, one column pair (mean, SE) per strategy.
pub fn aggregate_table_csv(summary: &RunSummary) -> String {
    let mut out =
        String::from("dataset,metric,reg_mode,strategy,mean,standard_error,significant_vs_other_mode\n");
    for metric in ["loglik", "rmse"] {
        for arm in &summary.arms {
            let (mean, se) = match (&arm.aggregate, metric) {
                (Some(a), "loglik") => (a.loglik_mean, a.loglik_se),
                (Some(a), _) => (a.rmse_mean, a.rmse_se),
                (None, _) => (f64::NAN, f64::NAN),
            };
            let significant = summary
                .comparisons
                .iter()
                .find(|c| c.strategy == arm.strategy)
                .map(|c| {
                    if metric == "loglik" {
                        c.loglik.significant
                    } else {
                        c.rmse.significant
                    }
                })
                .unwrap_or(false);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                summary.dataset_label,
                metric,
                arm.mode.name(),
                arm.strategy.name(),
                fmt_sci(mean),
                fmt_sci(se),
                significant,
            ));
        }
    }
    out
}

/// Human-readable aggregate table, one strategy column pair per mode.
pub fn aggregate_table_text(summary: &RunSummary) -> String {
    let mut out = String::new();
    for metric in ["loglik", "rmse"] {
        out.push_str(&format!("{} ({})\n", metric, summary.dataset_label));
        out.push_str(&format!("{:<20}{:>28}{:>28}\n", "strategy", "equal", "separate"));
        let strategies: Vec<_> = {
            let mut s: Vec<_> = summary.arms.iter().map(|a| a.strategy).collect();
            s.dedup();
            s
        };
        for strategy in strategies {
            let cell = |mode: crate::train::RegMode| -> String {
                summary
                    .arms
                    .iter()
                    .find(|a| a.strategy == strategy && a.mode == mode)
                    .and_then(|a| a.aggregate.as_ref())
                    .map(|agg| {
                        let (m, se) = if metric == "loglik" {
                            (agg.loglik_mean, agg.loglik_se)
                        } else {
                            (agg.rmse_mean, agg.rmse_se)
                        };
                        format!("{} +- {}", fmt_sci(m), fmt_sci(se))
                    })
                    .unwrap_or_else(|| "-".to_string())
            };
            let marker = summary
                .comparisons
                .iter()
                .find(|c| c.strategy == strategy)
                .map(|c| {
                    let sig = if metric == "loglik" {
                        c.loglik.significant
                    } else {
                        c.rmse.significant
                    };
                    if sig { " *" } else { "" }
                })
                .unwrap_or("");
            out.push_str(&format!(
                "{:<20}{:>28}{:>28}{}\n",
                strategy.name(),
                cell(crate::train::RegMode::Equal),
                cell(crate::train::RegMode::Separate),
                marker,
            ));
        }
        out.push('\n');
    }
    out.push_str("* significant equal-vs-separate difference (paired two-tailed t-test)\n");
    out
}

/// The chosen regularization constants per arm and fold.
pub fn selected_lambda_csv(summary: &RunSummary) -> String {
    let mut out = String::from("strategy,reg_mode,fold,lambda_mean,lambda_var\n");
    for row in selected_lambda_report(summary) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.strategy.name(),
            row.mode.name(),
            row.fold,
            fmt_sci(row.lambda_mean),
            fmt_sci(row.lambda_var),
        ));
    }
    out
}

/// Paired-test results per strategy.
pub fn comparisons_csv(summary: &RunSummary) -> String {
    let mut out = String::from(
        "strategy,metric,mean_difference,standard_error,t_statistic,degrees_of_freedom,critical_value,significant\n",
    );
    for c in &summary.comparisons {
        for (metric, t) in [("loglik", &c.loglik), ("rmse", &c.rmse)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.strategy.name(),
                metric,
                fmt_sci(t.mean_difference),
                fmt_sci(t.standard_error),
                fmt_sci(t.t_statistic),
                t.degrees_of_freedom,
                fmt_sci(t.critical_value),
                t.significant,
            ));
        }
    }
    out
}

/// A complete, serializable description of a benchmark run. Stored in the
/// manifest so a run can be reproduced from its output directory alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub strategies: Vec<crate::train::Strategy>,
    pub modes: Vec<crate::train::RegMode>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub settings: crate::experiments::HarnessSettings,
}

/// Runs the nested cross-validation described by `spec` and writes every
/// output file into `run`: per-fold results, aggregate table (CSV and text),
/// selected constants, paired-test results, and the fold assignment.
pub fn run_and_write_bench(data: &Dataset, spec: &BenchSpec, run: &RunDir) -> Result<RunSummary> {
    let plan = crate::experiments::CvPlan::new(
        data.n(),
        spec.outer_folds,
        spec.inner_folds,
        &spec.lambda_grid,
        spec.settings.seed,
    )?;
    let summary =
        crate::experiments::nested_cv(data, &spec.strategies, &spec.modes, &plan, &spec.settings)?;
    run.write_text("fold_results.csv", &fold_results_csv(&summary))?;
    run.write_text("aggregate.csv", &aggregate_table_csv(&summary))?;
    run.write_text("aggregate.txt", &aggregate_table_text(&summary))?;
    run.write_text("selected_lambdas.csv", &selected_lambda_csv(&summary))?;
    run.write_text("comparisons.csv", &comparisons_csv(&summary))?;
    run.write_text("fold_assignment.csv", &fold_assignment_csv(&summary.plan))?;
    Ok(summary)
}

/// Outer-fold assignment of every row, recorded for reproducibility.
pub fn fold_assignment_csv(plan: &CvPlan) -> String {
    let mut out = String::from("index,outer_fold\n");
    let mut assignment: Vec<(usize, usize)> = Vec::new();
    for (f, fold) in plan.outer.iter().enumerate() {
        for &i in fold {
            assignment.push((i, f));
        }
    }
    assignment.sort_unstable();
    for (i, f) in assignment {
        out.push_str(&format!("{i},{f}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{generate, SyntheticKind, SyntheticSpec};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn load_csv_happy_path_with_header() {
        let dir = tmp();
        let path = dir.path().join("toy.csv");
        fs::write(&path, "a,b,target\n1.0,2.0,3.0\n4,5,6\n-1e-2,0.5,2.25\n").unwrap();
        let data = load_csv(&path, &TargetColumn::Last, true).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.p(), 2);
        assert_eq!(data.row(2), &[-0.01, 0.5]);
        assert_eq!(data.targets(), &[3.0, 6.0, 2.25]);
        assert_eq!(data.label, "toy");
    }

    #[test]
    fn load_csv_by_name_and_index() {
        let dir = tmp();
        let path = dir.path().join("toy.csv");
        fs::write(&path, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
        let by_name = load_csv(&path, &TargetColumn::Name("b".into()), true).unwrap();
        assert_eq!(by_name.targets(), &[2.0, 5.0]);
        assert_eq!(by_name.row(0), &[1.0, 3.0]);
        let by_index = load_csv(&path, &TargetColumn::Index(0), true).unwrap();
        assert_eq!(by_index.targets(), &[1.0, 4.0]);
    }

    #[test]
    fn load_csv_blank_cell_names_row_and_column() {
        let dir = tmp();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1.0,2.0\n3.0,\n").unwrap();
        let err = load_csv(&path, &TargetColumn::Last, true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("blank cell"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("column b"), "{msg}");
    }

    #[test]
    fn load_csv_non_numeric_cell_is_located() {
        let dir = tmp();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1.0,2.0\nx,4.0\n").unwrap();
        let err = load_csv(&path, &TargetColumn::Last, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'x' is not numeric"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn load_csv_missing_and_empty_files_are_distinct_errors() {
        let dir = tmp();
        let missing = load_csv(&dir.path().join("nope.csv"), &TargetColumn::Last, false)
            .unwrap_err()
            .to_string();
        assert!(missing.contains("file not found"), "{missing}");
        let path = dir.path().join("empty.csv");
        fs::write(&path, "a,b\n").unwrap();
        let empty = load_csv(&path, &TargetColumn::Last, true).unwrap_err().to_string();
        assert!(empty.contains("no data rows"), "{empty}");
    }

    #[test]
    fn dataset_round_trips_bit_exactly() {
        let dir = tmp();
        let path = dir.path().join("sine.csv");
        let data = generate(&SyntheticSpec {
            kind: SyntheticKind::Sine,
            n: 64,
            seed: 3,
        });
        write_dataset_csv(&path, &data).unwrap();
        let reloaded = load_csv(&path, &TargetColumn::Last, true).unwrap();
        assert_eq!(data.covariates(), reloaded.covariates());
        assert_eq!(data.targets(), reloaded.targets());
    }

    #[test]
    fn sci_format_is_idempotent_and_six_digits() {
        for v in [0.0, 1.0, -123.456789, 3.2e-9, 6.0221408e23] {
            let s = fmt_sci(v);
            let reparsed: f64 = s.parse().unwrap();
            assert_eq!(fmt_sci(reparsed), s, "reformatting {v} changed the string");
        }
        assert_eq!(fmt_sci(1.0), "1.00000e0");
        assert_eq!(fmt_sci(-123.456789), "-1.23457e2");
    }

    #[test]
    fn network_round_trips_through_json() {
        let dir = tmp();
        let path = dir.path().join("net.json");
        let net = MveNetwork::init(2, &[6, 3], 17, 1.0, 1e-6).unwrap();
        save_network(&path, &net).unwrap();
        let loaded = load_network(&path).unwrap();
        let p_orig = net.predict(&[0.4, -0.2]).unwrap();
        let p_loaded = loaded.predict(&[0.4, -0.2]).unwrap();
        assert_eq!(p_orig.mean, p_loaded.mean);
        assert_eq!(p_orig.variance, p_loaded.variance);
    }

    #[test]
    fn train_config_round_trips_and_validates() {
        let dir = tmp();
        let path = dir.path().join("cfg.json");
        let cfg = TrainConfig::default();
        save_train_config(&path, &cfg).unwrap();
        let loaded = load_train_config(&path).unwrap();
        assert_eq!(loaded.epochs_per_stage, cfg.epochs_per_stage);
        // An invalid config (equal mode, distinct lambdas) fails on load.
        fs::write(
            &path,
            serde_json::to_string(&TrainConfig {
                lambda_mean: 0.1,
                lambda_var: 0.2,
                ..TrainConfig::default()
            })
            .unwrap(),
        )
        .unwrap();
        assert!(load_train_config(&path).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tmp();
        let run = RunDir::create(dir.path().join("run")).unwrap();
        let manifest = RunManifest::new("demo sine", 7, serde_json::json!({"epochs": 10}));
        run.write_manifest(&manifest).unwrap();
        let loaded = run.read_manifest().unwrap();
        assert_eq!(loaded.command, "demo sine");
        assert_eq!(loaded.master_seed, 7);
        assert_eq!(loaded.params["epochs"], 10);
    }

    #[test]
    fn columns_csv_rejects_ragged_input() {
        let dir = tmp();
        let path = dir.path().join("x.csv");
        let a = [1.0, 2.0];
        let b = [1.0];
        assert!(write_columns_csv(&path, &["a", "b"], &[&a, &b]).is_err());
    }
}
