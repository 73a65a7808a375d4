//! Benchmark sweep over datasets, missing rates, seeds and methods.
//!
//! One mask is drawn per (dataset, rate, seed) and shared by every method.
//! Truth parameters are the classical estimates on the complete, normalized
//! data. Failures and budget overruns become `NA` rows; the sweep goes on.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{classical_estimate, listwise_deletion_estimate, mean_impute_estimate};
use crate::error::{DperError, Result};
use crate::estimate::{estimate, EstimateOptions};
use crate::io::{parse_csv, parse_csv_str, CsvOptions};
use crate::model::{BenchReport, BenchRow, LabeledDataset, Regime};
use crate::sim::{apply_mcar, metric_r, normalize, MaskSpec};

const IRIS_CSV: &str = include_str!("../data/iris.csv");
const WINE_CSV: &str = include_str!("../data/wine.csv");

/// Names accepted by [`builtin_dataset`].
pub const BUILTIN_DATASETS: &[&str] = &["iris", "wine"];

/// The bundled Iris and Wine tables, labeled by their `class` column.
pub fn builtin_dataset(name: &str) -> Option<LabeledDataset> {
    let text = match name {
        "iris" => IRIS_CSV,
        "wine" => WINE_CSV,
        _ => return None,
    };
    let table = parse_csv_str(text, &CsvOptions::with_label("class")).expect("bundled data parses");
    Some(table.dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dper,
    #[serde(alias = "listwise_deletion", alias = "listwise-deletion")]
    Listwise,
    #[serde(alias = "mean_impute")]
    MeanImpute,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dper => "dper",
            Method::Listwise => "listwise",
            Method::MeanImpute => "mean-impute",
        }
    }

    pub fn run(
        self,
        dataset: &LabeledDataset,
        regime: Regime,
        opts: EstimateOptions,
    ) -> Result<crate::model::EstimationResult> {
        match self {
            Method::Dper => estimate(dataset, regime, opts),
            Method::Listwise => listwise_deletion_estimate(dataset, regime),
            Method::MeanImpute => mean_impute_estimate(dataset, regime),
        }
    }
}

impl FromStr for Method {
    type Err = DperError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "dper" => Ok(Method::Dper),
            "listwise" | "listwise-deletion" => Ok(Method::Listwise),
            "mean-impute" => Ok(Method::MeanImpute),
            other => Err(DperError::Config(format!("unknown method '{other}'"))),
        }
    }
}

fn default_budget() -> f64 {
    300.0
}

fn default_label() -> String {
    "class".into()
}

fn default_true() -> bool {
    true
}

/// Sweep description, usually read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Built-in names (`iris`, `wine`) or CSV paths, relative to the config file.
    pub datasets: Vec<String>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub regime: Regime,
    #[serde(default = "default_budget")]
    pub time_budget_s: f64,
    #[serde(default)]
    pub psd_repair: bool,
    /// Label column for CSV datasets.
    #[serde(default = "default_label")]
    pub label_col: String,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty()
            || self.rates.is_empty()
            || self.seeds.is_empty()
            || self.methods.is_empty()
        {
            return Err(DperError::Config(
                "datasets, rates, seeds and methods must be non-empty".into(),
            ));
        }
        if let Some(bad) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(DperError::Config(format!("rate {bad} outside [0, 1)")));
        }
        if self.time_budget_s.is_nan() || self.time_budget_s <= 0.0 {
            return Err(DperError::Config("time_budget_s must be positive".into()));
        }
        Ok(())
    }
}

/// A dataset ready for the sweep.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub id: String,
    pub data: LabeledDataset,
}

/// Resolves every dataset entry of `config`; paths are taken relative to `base_dir`.
pub fn load_datasets(config: &BenchConfig, base_dir: &Path) -> Result<Vec<NamedDataset>> {
    config
        .datasets
        .iter()
        .map(|entry| {
            if let Some(data) = builtin_dataset(entry) {
                return Ok(NamedDataset {
                    id: entry.clone(),
                    data,
                });
            }
            let path: PathBuf = if Path::new(entry).is_absolute() {
                entry.into()
            } else {
                base_dir.join(entry)
            };
            let table = parse_csv(&path, &CsvOptions::with_label(config.label_col.clone()))
                .map_err(|e| DperError::Config(format!("dataset '{entry}': {e}")))?;
            let id = path
                .file_stem()
                .map_or_else(|| entry.clone(), |s| s.to_string_lossy().into_owned());
            Ok(NamedDataset {
                id,
                data: table.dataset,
            })
        })
        .collect()
}

/// Runs the sweep. Rows come out ordered by dataset, rate, seed, method.
pub fn run_benchmark(config: &BenchConfig, datasets: &[NamedDataset]) -> Result<BenchReport> {
    config.validate()?;
    let opts = EstimateOptions {
        psd_repair: config.psd_repair,
    };
    let mut rows = Vec::new();
    for named in datasets {
        let complete = if config.normalize {
            normalize(&named.data)?
        } else {
            named.data.clone()
        };
        let truth = classical_estimate(&complete, config.regime)?;
        for &rate in &config.rates {
            for &seed in &config.seeds {
                let masked = MaskSpec::new(rate, seed).and_then(|spec| apply_mcar(&complete, &spec));
                for &method in &config.methods {
                    let mut row = BenchRow {
                        dataset: named.id.clone(),
                        rate,
                        seed,
                        method: method.as_str().to_string(),
                        regime: config.regime,
                        r: None,
                        status: String::new(),
                        runtime_s: 0.0,
                    };
                    match &masked {
                        Err(e) => row.status = format!("NA: {}", e.kind()),
                        Ok(ds) => {
                            let start = Instant::now();
                            let result = method.run(ds, config.regime, opts);
                            row.runtime_s = start.elapsed().as_secs_f64();
                            match result.and_then(|est| metric_r(&truth.means, &truth.covariances, &est)) {
                                Err(e) => row.status = format!("NA: {}", e.kind()),
                                Ok(_) if row.runtime_s > config.time_budget_s => {
                                    row.status = "NA: timeout".into()
                                }
                                Ok(m) => {
                                    row.r = Some(m.r);
                                    row.status = "ok".into();
                                }
                            }
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    Ok(BenchReport { rows })
}

/// Mean `r` over the successful seeds of one (dataset, rate, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCell {
    pub dataset: String,
    pub rate: f64,
    pub method: String,
    pub mean_r: Option<f64>,
    pub ok_runs: usize,
    pub total_runs: usize,
}

pub fn summarize(report: &BenchReport) -> Vec<SummaryCell> {
    let mut cells: Vec<SummaryCell> = Vec::new();
    let mut index: BTreeMap<(String, u64, String), usize> = BTreeMap::new();
    for row in &report.rows {
        let key = (row.dataset.clone(), row.rate.to_bits(), row.method.clone());
        let k = *index.entry(key).or_insert_with(|| {
            cells.push(SummaryCell {
                dataset: row.dataset.clone(),
                rate: row.rate,
                method: row.method.clone(),
                mean_r: None,
                ok_runs: 0,
                total_runs: 0,
            });
            cells.len() - 1
        });
        let cell = &mut cells[k];
        cell.total_runs += 1;
        if let Some(r) = row.r {
            cell.ok_runs += 1;
            cell.mean_r = Some(cell.mean_r.unwrap_or(0.0) + r);
        }
    }
    for cell in &mut cells {
        if let Some(sum) = cell.mean_r {
            cell.mean_r = Some(sum / cell.ok_runs as f64);
        }
    }
    cells
}

/// One table per dataset: missing rate down, methods across.
pub fn format_summary(report: &BenchReport) -> String {
    let cells = summarize(report);
    let mut out = String::new();
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    let mut rates: Vec<f64> = Vec::new();
    for c in &cells {
        if !datasets.contains(&c.dataset.as_str()) {
            datasets.push(&c.dataset);
        }
        if !methods.contains(&c.method.as_str()) {
            methods.push(&c.method);
        }
        if !rates.iter().any(|r| r.to_bits() == c.rate.to_bits()) {
            rates.push(c.rate);
        }
    }
    let regime = report.rows.first().map_or("", |r| r.regime.as_str());
    for ds in datasets {
        let _ = writeln!(out, "{ds} ({regime})");
        let _ = write!(out, "{:>8}", "rate");
        for m in &methods {
            let _ = write!(out, " {m:>12}");
        }
        out.push('\n');
        for &rate in &rates {
            let _ = write!(out, "{:>7}%", format!("{}", (rate * 100.0).round()));
            for m in &methods {
                let cell = cells
                    .iter()
                    .find(|c| c.dataset == ds && c.method == *m && c.rate.to_bits() == rate.to_bits());
                let text = match cell.and_then(|c| c.mean_r) {
                    Some(r) => format!("{r:.4}"),
                    None => "NA".to_string(),
                };
                let _ = write!(out, " {text:>12}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Delimiter-separated report: one line per row, no timings.
pub fn write_report_csv<W: Write>(mut out: W, report: &BenchReport) -> Result<()> {
    writeln!(out, "dataset,rate,seed,method,regime,r,status")?;
    for row in &report.rows {
        let r = row.r.map_or_else(|| "NA".to_string(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.dataset, row.rate, row.seed, row.method, row.regime, r, row.status
        )?;
    }
    Ok(())
}

pub fn write_report_json<W: Write>(mut out: W, report: &BenchReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| DperError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

/// Wall-clock seconds per row, kept apart from the deterministic report.
pub fn write_timings_csv<W: Write>(mut out: W, report: &BenchReport) -> Result<()> {
    writeln!(out, "dataset,rate,seed,method,runtime_s")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.dataset, row.rate, row.seed, row.method, row.runtime_s
        )?;
    }
    Ok(())
}
