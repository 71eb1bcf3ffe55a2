//! Runs every point of an experiment and collects typed result rows.

use mecsim_core::cache_sim::{backhaul_load, local_hit_rate, processing_utilization, CacheScenario, SimOptions};
use mecsim_core::interference::{
    dbm_to_watts, drop_stations, evaluate_snapshot, CellLayout, ChannelModel, InterferenceScenario, Point,
    SnapshotResult,
};
use mecsim_core::orchestration::{
    calibrate_overhead, compare_strategies, ExecutionStrategy, Inventory, ResourceNode, TaskBatch,
    REFERENCE_COLLAB_GAIN,
};
use mecsim_core::workload::{uniform_variant_dist, VideoCatalog};
use mecsim_core::StrategyKind;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CacheBlock, CaseConfig, ExperimentConfig, InterferenceBlock, OrchestrationBlock};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheRow {
    pub strategy: StrategyKind,
    pub cache_fraction: f64,
    pub processing_capacity_mbps: f64,
    pub arrival_rate: f64,
    pub backhaul_load: f64,
    pub backhaul_bits: f64,
    pub inter_bs_bits: f64,
    pub local_hit_rate: f64,
    pub processing_utilization: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrchestrateRow {
    pub strategy: ExecutionStrategy,
    pub makespan_s: f64,
    pub reassignments: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceRow {
    pub snapshot: usize,
    pub layer2_fraction: f64,
    pub mean_pre_sinr_db: f64,
    pub mean_post_sinr_db: f64,
    pub bpu_load_mbps: f64,
    pub savings: f64,
}

impl From<SnapshotResult<f64>> for InterferenceRow {
    fn from(s: SnapshotResult<f64>) -> Self {
        Self {
            snapshot: s.snapshot,
            layer2_fraction: s.layer2_fraction,
            mean_pre_sinr_db: s.mean_pre_sinr_db,
            mean_post_sinr_db: s.mean_post_sinr_db,
            bpu_load_mbps: s.bpu_load_mbps,
            savings: s.savings,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Cache(Vec<CacheRow>),
    Orchestrate(Vec<OrchestrateRow>),
    Interference(Vec<InterferenceRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Cache(r) => r.len(),
            Rows::Orchestrate(r) => r.len(),
            Rows::Interference(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rows of one sweep point, or why it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub label: Option<String>,
    pub outcome: Result<Rows, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub points: Vec<PointResult>,
}

impl ExperimentResult {
    pub fn failures(&self) -> impl Iterator<Item = (&Option<String>, &String)> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().err().map(|e| (&p.label, e)))
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

pub fn cache_scenario(b: &CacheBlock) -> mecsim_core::Result<CacheScenario<f64>> {
    let catalog = VideoCatalog::new(b.n_videos, b.original_bitrate_mbps, b.duration_s, b.variant_ratios.clone())?;
    let options = SimOptions {
        warmup: b.warmup_s,
        variant_dist: b
            .variant_dist
            .clone()
            .unwrap_or_else(|| uniform_variant_dist(catalog.n_variants())),
        cost: b.transcode_cost,
        reactive_lru: b.reactive_lru,
    };
    Ok(CacheScenario {
        n_bs: b.n_bs,
        catalog,
        alpha: b.alpha,
        cache_fraction: b.cache_fraction,
        processing_capacity: b.processing_capacity_mbps,
        arrival_rate: b.arrival_rate,
        horizon: b.horizon_s,
        options,
    })
}

fn run_cache(b: &CacheBlock, seed: u64) -> Result<Rows, String> {
    let scenario = cache_scenario(b).map_err(|e| e.to_string())?;
    let jobs: Vec<(StrategyKind, u64)> = b
        .strategies
        .iter()
        .flat_map(|&k| (0..b.replicates as u64).map(move |r| (k, seed.wrapping_add(r))))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(strategy, seed)| {
            let out = scenario.run(strategy, seed)?;
            let m = &out.metrics;
            Ok(CacheRow {
                strategy,
                cache_fraction: b.cache_fraction,
                processing_capacity_mbps: b.processing_capacity_mbps,
                arrival_rate: b.arrival_rate,
                backhaul_load: backhaul_load(m)?,
                backhaul_bits: m.backhaul_bits,
                inter_bs_bits: m.inter_bs_bits,
                local_hit_rate: local_hit_rate(m)?,
                processing_utilization: processing_utilization(m)?,
                seed,
            })
        })
        .collect::<mecsim_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    rows.sort_by_key(|r| (r.strategy, r.seed));
    Ok(Rows::Cache(rows))
}

pub fn inventory(b: &OrchestrationBlock, batch: &TaskBatch<f64>) -> mecsim_core::Result<Inventory<f64>> {
    let edge = ResourceNode::edge(b.edge_speed, b.link_mbps, 0.0);
    let overhead = match b.offload_overhead_s {
        Some(o) => o,
        None => calibrate_overhead(batch, &edge, 2, REFERENCE_COLLAB_GAIN)?,
    };
    Ok(Inventory {
        local: ResourceNode::local(b.local_speed),
        peers: vec![ResourceNode::peer(b.peer_speed, b.link_mbps, b.mu, b.sigma); b.n_peers],
        servers: vec![ResourceNode { offload_overhead: overhead, ..edge }; b.n_edge_servers],
    })
}

fn run_orchestrate(b: &OrchestrationBlock, seed: u64) -> Result<Rows, String> {
    let go = || -> mecsim_core::Result<Rows> {
        let batch = TaskBatch::new(b.n_tasks, b.input_bits_per_task, b.work_per_task)?;
        let inv = inventory(b, &batch)?;
        let seeds: Vec<u64> = (0..b.seeds as u64).map(|i| seed.wrapping_add(i)).collect();
        let cmp = compare_strategies(&batch, &inv, b.k, &seeds)?;
        let mut rows: Vec<OrchestrateRow> = Vec::with_capacity(4);
        for r in cmp.reports {
            if rows.iter().any(|x| x.strategy == r.strategy) {
                continue;
            }
            rows.push(OrchestrateRow {
                strategy: r.strategy,
                makespan_s: r.makespan,
                reassignments: r.reassignments,
                seed,
            });
        }
        Ok(Rows::Orchestrate(rows))
    };
    go().map_err(|e| e.to_string())
}

pub fn interference_scenario(b: &InterferenceBlock) -> mecsim_core::Result<InterferenceScenario<f64>> {
    let sites = match &b.bs_positions {
        Some(p) => p.iter().map(|&[x, y]| Point::new(x, y)).collect(),
        None => CellLayout::hex_positions(b.hex_rings, b.site_spacing),
    };
    let radius = b.resolved_cell_radius();
    let layout = CellLayout::new(sites, radius, radius * b.radius_fraction)?;
    let channel = ChannelModel {
        pathloss_exponent: b.pathloss_exponent,
        noise_power: dbm_to_watts(b.noise_dbm),
        cqi_threshold_db: b.cqi_threshold_db,
        residual: b.residual,
    };
    channel.validate()?;
    Ok(InterferenceScenario {
        layout,
        channel,
        tx_power: dbm_to_watts(b.tx_power_dbm),
        mode: b.mode,
        raw_rate: b.raw_rate_mbps,
    })
}

fn run_interference(b: &InterferenceBlock, seed: u64) -> Result<Rows, String> {
    let scenario = interference_scenario(b).map_err(|e| e.to_string())?;
    let rows = (0..b.n_snapshots)
        .into_par_iter()
        .map(|s| {
            let ms = drop_stations(&scenario.layout, scenario.tx_power, seed, s);
            evaluate_snapshot(&scenario, &ms, s).map(InterferenceRow::from)
        })
        .collect::<mecsim_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(Rows::Interference(rows))
}

pub fn run_point(config: &CaseConfig, seed: u64) -> Result<Rows, String> {
    match config {
        CaseConfig::Cache(b) => run_cache(b, seed),
        CaseConfig::Orchestrate(b) => run_orchestrate(b, seed),
        CaseConfig::Interference(b) => run_interference(b, seed),
    }
}

/// Runs all points in parallel; results keep the configured point order.
pub fn run_experiment(config: &ExperimentConfig) -> ExperimentResult {
    let points = config
        .points
        .par_iter()
        .map(|p| PointResult {
            label: p.label(),
            outcome: run_point(&p.config, config.seed),
        })
        .collect();
    ExperimentResult { points }
}
