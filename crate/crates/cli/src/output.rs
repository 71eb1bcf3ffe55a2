//! CSV rendering and atomic result files.
//!
//! Column order is fixed per case:
//!
//! * `cache`: strategy, cache_fraction, processing_capacity_mbps,
//!   arrival_rate, backhaul_load, backhaul_bits, inter_bs_bits,
//!   local_hit_rate, processing_utilization, seed
//! * `orchestrate`: strategy, makespan_s, reassignments, seed
//! * `interference`: snapshot, layer2_fraction, mean_pre_sinr_db,
//!   mean_post_sinr_db, bpu_load_mbps, savings
//!
//! A swept parameter that is not already a column is prepended as the first
//! column.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::{Case, ExperimentConfig};
use crate::experiment::{ExperimentResult, Rows};

pub const CACHE_COLUMNS: [&str; 10] = [
    "strategy",
    "cache_fraction",
    "processing_capacity_mbps",
    "arrival_rate",
    "backhaul_load",
    "backhaul_bits",
    "inter_bs_bits",
    "local_hit_rate",
    "processing_utilization",
    "seed",
];
pub const ORCHESTRATE_COLUMNS: [&str; 4] = ["strategy", "makespan_s", "reassignments", "seed"];
pub const INTERFERENCE_COLUMNS: [&str; 6] = [
    "snapshot",
    "layer2_fraction",
    "mean_pre_sinr_db",
    "mean_post_sinr_db",
    "bpu_load_mbps",
    "savings",
];

pub fn columns(case: Case) -> &'static [&'static str] {
    match case {
        Case::Cache => &CACHE_COLUMNS,
        Case::Orchestrate => &ORCHESTRATE_COLUMNS,
        Case::Interference => &INTERFERENCE_COLUMNS,
    }
}

/// The extra leading column, if the sweep needs one.
pub fn sweep_column(config: &ExperimentConfig) -> Option<&str> {
    let sweep = config.sweep.as_ref()?;
    let p = sweep.parameter.as_str();
    (!columns(config.case()).contains(&p)).then_some(p)
}

fn body(rows: &Rows) -> Vec<Vec<String>> {
    match rows {
        Rows::Cache(rows) => rows
            .iter()
            .map(|r| {
                vec![
                    r.strategy.to_string(),
                    r.cache_fraction.to_string(),
                    r.processing_capacity_mbps.to_string(),
                    r.arrival_rate.to_string(),
                    r.backhaul_load.to_string(),
                    r.backhaul_bits.to_string(),
                    r.inter_bs_bits.to_string(),
                    r.local_hit_rate.to_string(),
                    r.processing_utilization.to_string(),
                    r.seed.to_string(),
                ]
            })
            .collect(),
        Rows::Orchestrate(rows) => rows
            .iter()
            .map(|r| {
                vec![
                    r.strategy.to_string(),
                    r.makespan_s.to_string(),
                    r.reassignments.to_string(),
                    r.seed.to_string(),
                ]
            })
            .collect(),
        Rows::Interference(rows) => rows
            .iter()
            .map(|r| {
                vec![
                    r.snapshot.to_string(),
                    r.layer2_fraction.to_string(),
                    r.mean_pre_sinr_db.to_string(),
                    r.mean_post_sinr_db.to_string(),
                    r.bpu_load_mbps.to_string(),
                    r.savings.to_string(),
                ]
            })
            .collect(),
    }
}

/// Renders the successful points as CSV, in point order.
pub fn render_csv(config: &ExperimentConfig, result: &ExperimentResult) -> Vec<u8> {
    let extra = sweep_column(config);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = extra.into_iter().collect();
    header.extend(columns(config.case()));
    w.write_record(&header).expect("in-memory write");
    for point in &result.points {
        let Ok(rows) = &point.outcome else { continue };
        for mut record in body(rows) {
            if extra.is_some() {
                record.insert(0, point.label.clone().unwrap_or_default());
            }
            w.write_record(&record).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Serialize)]
pub struct FailedPoint {
    pub sweep_value: Option<String>,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub case: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_clock_s: f64,
    pub rows: usize,
    pub outputs: Vec<PathBuf>,
    pub failed_points: Vec<FailedPoint>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, result: &ExperimentResult, elapsed: Duration, outputs: Vec<PathBuf>) -> Self {
        Self {
            tool: "mecsim",
            version: env!("CARGO_PKG_VERSION"),
            case: config.case().name(),
            seed: config.seed,
            config: config.to_json(),
            wall_clock_s: elapsed.as_secs_f64(),
            rows: result
                .points
                .iter()
                .filter_map(|p| p.outcome.as_ref().ok())
                .map(Rows::len)
                .sum(),
            outputs,
            failed_points: result
                .failures()
                .map(|(label, e)| FailedPoint {
                    sweep_value: label.clone(),
                    error: e.clone(),
                })
                .collect(),
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes `<case>.csv` and `manifest.json` into `out_dir`; returns both paths.
pub fn write_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
    elapsed: Duration,
) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", config.case().name()));
    let manifest_path = out_dir.join("manifest.json");
    write_atomic(&csv_path, &render_csv(config, result))?;
    let manifest = RunManifest::new(config, result, elapsed, vec![csv_path.clone(), manifest_path.clone()]);
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
    json.push(b'\n');
    write_atomic(&manifest_path, &json)?;
    Ok((csv_path, manifest_path))
}
