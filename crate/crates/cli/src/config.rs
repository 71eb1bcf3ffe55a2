//! Experiment configuration: a TOML file with a `case`, a mandatory `seed`,
//! one block for the case and an optional `[sweep]`.
//!
//! ```toml
//! case = "cache"
//! seed = 7
//!
//! [cache]
//! processing_capacity_mbps = 20
//!
//! [sweep]
//! parameter = "cache_fraction"
//! values = [0.1, 0.2, 0.3]
//! ```
//!
//! Every key has a default and unknown keys are rejected.

use std::fmt;
use std::path::Path;

use mecsim_core::interference::{ClassifyMode, DEFAULT_RADIUS_FRACTION};
use mecsim_core::orchestration::COMPRESSED_IMAGE_BITS;
use mecsim_core::{StrategyKind, TranscodeCost};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("invalid `{key}`: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Cache,
    Orchestrate,
    Interference,
}

impl Case {
    /// Name of the TOML block holding this case's parameters.
    pub fn block(self) -> &'static str {
        match self {
            Case::Cache => "cache",
            Case::Orchestrate => "orchestration",
            Case::Interference => "interference",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Cache => "cache",
            Case::Orchestrate => "orchestrate",
            Case::Interference => "interference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheBlock {
    pub n_bs: usize,
    pub n_videos: usize,
    pub alpha: f64,
    pub original_bitrate_mbps: f64,
    pub duration_s: f64,
    pub variant_ratios: Vec<f64>,
    /// Request share per variant; uniform when absent.
    pub variant_dist: Option<Vec<f64>>,
    pub cache_fraction: f64,
    pub processing_capacity_mbps: f64,
    /// Requests per BS per minute.
    pub arrival_rate: f64,
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub strategies: Vec<StrategyKind>,
    pub transcode_cost: TranscodeCost,
    pub reactive_lru: bool,
    /// Independent runs per point, seeded `seed`, `seed + 1`, ...
    pub replicates: usize,
}

impl Default for CacheBlock {
    fn default() -> Self {
        Self {
            n_bs: 5,
            n_videos: 1000,
            alpha: 0.8,
            original_bitrate_mbps: 2.0,
            duration_s: 600.0,
            variant_ratios: vec![0.82, 0.67, 0.55, 0.45],
            variant_dist: None,
            cache_fraction: 0.3,
            processing_capacity_mbps: 40.0,
            arrival_rate: 2.0,
            horizon_s: 86_400.0,
            warmup_s: 3600.0,
            strategies: StrategyKind::ALL.to_vec(),
            transcode_cost: TranscodeCost::Input,
            reactive_lru: false,
            replicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestrationBlock {
    pub n_tasks: usize,
    pub input_bits_per_task: f64,
    pub work_per_task: f64,
    pub local_speed: f64,
    pub n_peers: usize,
    pub peer_speed: f64,
    pub n_edge_servers: usize,
    pub edge_speed: f64,
    /// Per-task dispatch cost at the requester; calibrated when absent.
    pub offload_overhead_s: Option<f64>,
    /// Mean peer availability (s).
    pub mu: f64,
    pub sigma: f64,
    pub link_mbps: f64,
    pub k: usize,
    /// Number of MDC availability draws averaged per point.
    pub seeds: usize,
}

impl Default for OrchestrationBlock {
    fn default() -> Self {
        Self {
            n_tasks: 20,
            input_bits_per_task: COMPRESSED_IMAGE_BITS,
            work_per_task: 16.0,
            local_speed: 1.0,
            n_peers: 5,
            peer_speed: 1.0,
            n_edge_servers: 2,
            edge_speed: 8.0,
            offload_overhead_s: None,
            mu: 100.0,
            sigma: 5.0,
            link_mbps: 1.0,
            k: 2,
            seeds: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceBlock {
    /// Explicit sites (m); overrides the hexagonal grid.
    pub bs_positions: Option<Vec<[f64; 2]>>,
    pub hex_rings: usize,
    pub site_spacing: f64,
    /// Metres; defaults to `site_spacing / sqrt(3)`.
    pub cell_radius: Option<f64>,
    pub radius_fraction: f64,
    pub cqi_threshold_db: f64,
    pub pathloss_exponent: f64,
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
    pub raw_rate_mbps: f64,
    pub n_snapshots: usize,
    pub mode: ClassifyMode,
    pub residual: f64,
}

impl Default for InterferenceBlock {
    fn default() -> Self {
        Self {
            bs_positions: None,
            hex_rings: 1,
            site_spacing: 1000.0,
            cell_radius: None,
            radius_fraction: DEFAULT_RADIUS_FRACTION,
            cqi_threshold_db: 3.0,
            pathloss_exponent: 3.5,
            noise_dbm: -104.0,
            tx_power_dbm: 23.0,
            raw_rate_mbps: 30.0,
            n_snapshots: 1000,
            mode: ClassifyMode::Cqi,
            residual: 0.0,
        }
    }
}

impl InterferenceBlock {
    pub fn resolved_cell_radius(&self) -> f64 {
        self.cell_radius.unwrap_or(self.site_spacing / 3f64.sqrt())
    }
}

/// One case's fully resolved parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CaseConfig {
    Cache(CacheBlock),
    Orchestrate(OrchestrationBlock),
    Interference(InterferenceBlock),
}

impl CaseConfig {
    pub fn case(&self) -> Case {
        match self {
            CaseConfig::Cache(_) => Case::Cache,
            CaseConfig::Orchestrate(_) => Case::Orchestrate,
            CaseConfig::Interference(_) => Case::Interference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

/// A sweep value with the configuration it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Option<toml::Value>,
    pub config: CaseConfig,
}

impl SweepPoint {
    /// Sweep value as it appears in CSV output.
    pub fn label(&self) -> Option<String> {
        self.value.as_ref().map(value_label)
    }
}

pub fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => other.to_string(),
    }
}

fn numeric(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub base: CaseConfig,
    pub sweep: Option<Sweep>,
    /// Sweep points in output order; a single unlabelled point without a sweep.
    pub points: Vec<SweepPoint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case: Case,
    seed: u64,
    sweep: Option<Sweep>,
    cache: Option<toml::Table>,
    orchestration: Option<toml::Table>,
    interference: Option<toml::Table>,
}

/// The resolved configuration as echoed by `validate` and in manifests.
#[derive(Serialize)]
struct Echo<'a> {
    case: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cache: Option<&'a CacheBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orchestration: Option<&'a OrchestrationBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interference: Option<&'a InterferenceBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<&'a Sweep>,
}

impl ExperimentConfig {
    pub fn case(&self) -> Case {
        self.base.case()
    }

    fn echo(&self) -> Echo<'_> {
        let (mut cache, mut orchestration, mut interference) = (None, None, None);
        match &self.base {
            CaseConfig::Cache(b) => cache = Some(b),
            CaseConfig::Orchestrate(b) => orchestration = Some(b),
            CaseConfig::Interference(b) => interference = Some(b),
        }
        Echo {
            case: self.case().name(),
            seed: self.seed,
            cache,
            orchestration,
            interference,
            sweep: self.sweep.as_ref(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.echo()).expect("resolved config serializes")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.echo()).expect("resolved config serializes")
    }
}

pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, seed_override)
}

/// Parses, fills defaults, expands the sweep and checks every point.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    if let Some(seed) = seed_override {
        let seed = i64::try_from(seed).map_err(|_| bad("seed", "exceeds the TOML integer range"))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    // Re-parse the text for typed errors with line context, unless the
    // seed was patched in.
    let raw: RawConfig = if seed_override.is_none() {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?
    } else {
        RawConfig::deserialize(table).map_err(|e| ConfigError(e.to_string()))?
    };

    let case = raw.case;
    let blocks = [
        (Case::Cache, raw.cache),
        (Case::Orchestrate, raw.orchestration),
        (Case::Interference, raw.interference),
    ];
    let mut block = toml::Table::new();
    for (c, b) in blocks {
        match b {
            Some(_) if c != case => {
                return Err(ConfigError(format!(
                    "block [{}] does not apply to case \"{}\"",
                    c.block(),
                    case.name()
                )))
            }
            Some(b) => block = b,
            None => {}
        }
    }

    let base = resolve(case, &block, None)?;
    let points = match &raw.sweep {
        None => vec![SweepPoint {
            value: None,
            config: base.clone(),
        }],
        Some(sweep) => expand(case, &block, sweep)?,
    };
    Ok(ExperimentConfig {
        seed: raw.seed,
        base,
        sweep: raw.sweep,
        points,
    })
}

fn typed<B: DeserializeOwned>(block: &toml::Table) -> Result<B, String> {
    B::deserialize(block.clone()).map_err(|e| e.message().to_string())
}

fn resolve(case: Case, block: &toml::Table, context: Option<&str>) -> Result<CaseConfig, ConfigError> {
    let wrap = |msg: String| {
        let msg = format!("[{}] {msg}", case.block());
        ConfigError(match context {
            Some(c) => format!("{c}: {msg}"),
            None => msg,
        })
    };
    let config = match case {
        Case::Cache => CaseConfig::Cache(typed(block).map_err(wrap)?),
        Case::Orchestrate => CaseConfig::Orchestrate(typed(block).map_err(wrap)?),
        Case::Interference => CaseConfig::Interference(typed(block).map_err(wrap)?),
    };
    check(&config).map_err(|e| match context {
        Some(c) => ConfigError(format!("{c}: {e}")),
        None => e,
    })?;
    Ok(config)
}

fn expand(case: Case, block: &toml::Table, sweep: &Sweep) -> Result<Vec<SweepPoint>, ConfigError> {
    if sweep.values.is_empty() {
        return Err(bad("sweep.values", "needs at least one value"));
    }
    // Probe with the base block to tell a misspelt parameter from a bad value.
    let known = match case {
        Case::Cache => serde_keys(&CacheBlock::default()),
        Case::Orchestrate => serde_keys(&OrchestrationBlock::default()),
        Case::Interference => serde_keys(&InterferenceBlock::default()),
    };
    let optional = ["variant_dist", "offload_overhead_s", "bs_positions", "cell_radius"];
    if !known.iter().any(|k| k == &sweep.parameter) && !optional.contains(&sweep.parameter.as_str()) {
        return Err(ConfigError(format!(
            "invalid `sweep.parameter`: \"{}\" is not a key of [{}]",
            sweep.parameter,
            case.block()
        )));
    }
    let mut points: Vec<(usize, SweepPoint)> = Vec::with_capacity(sweep.values.len());
    for (i, value) in sweep.values.iter().enumerate() {
        let mut patched = block.clone();
        patched.insert(sweep.parameter.clone(), value.clone());
        let context = format!("sweep {} = {}", sweep.parameter, value_label(value));
        let config = resolve(case, &patched, Some(&context))?;
        points.push((i, SweepPoint { value: Some(value.clone()), config }));
    }
    let all_numeric = sweep.values.iter().all(|v| numeric(v).is_some());
    if all_numeric {
        points.sort_by(|a, b| {
            let (x, y) = (numeric(a.1.value.as_ref().unwrap()), numeric(b.1.value.as_ref().unwrap()));
            x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
        });
    }
    Ok(points.into_iter().map(|(_, p)| p).collect())
}

fn serde_keys<B: Serialize>(block: &B) -> Vec<String> {
    match toml::Table::try_from(block) {
        Ok(t) => t.keys().cloned().collect(),
        Err(_) => Vec::new(),
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("{v} must be a positive number")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("{v} must be >= 0")))
    }
}

fn at_least_one(key: &str, n: usize) -> Result<(), ConfigError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(bad(key, "must be at least 1"))
    }
}

fn check(config: &CaseConfig) -> Result<(), ConfigError> {
    match config {
        CaseConfig::Cache(b) => {
            at_least_one("cache.n_bs", b.n_bs)?;
            at_least_one("cache.n_videos", b.n_videos)?;
            non_negative("cache.alpha", b.alpha)?;
            positive("cache.original_bitrate_mbps", b.original_bitrate_mbps)?;
            positive("cache.duration_s", b.duration_s)?;
            if b.variant_ratios.is_empty() {
                return Err(bad("cache.variant_ratios", "needs at least one ratio"));
            }
            if !b.variant_ratios.windows(2).all(|w| w[0] > w[1]) || !b.variant_ratios.iter().all(|r| *r > 0.0 && *r <= 1.0) {
                return Err(bad("cache.variant_ratios", "ratios must lie in (0, 1] and strictly decrease"));
            }
            if let Some(d) = &b.variant_dist {
                if d.len() != b.variant_ratios.len() {
                    return Err(bad("cache.variant_dist", "needs one share per variant ratio"));
                }
                if d.iter().any(|p| !(*p >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                    return Err(bad("cache.variant_dist", "shares must be >= 0 and sum to 1"));
                }
            }
            non_negative("cache.cache_fraction", b.cache_fraction)?;
            non_negative("cache.processing_capacity_mbps", b.processing_capacity_mbps)?;
            positive("cache.arrival_rate", b.arrival_rate)?;
            positive("cache.horizon_s", b.horizon_s)?;
            non_negative("cache.warmup_s", b.warmup_s)?;
            if b.warmup_s >= b.horizon_s {
                return Err(bad("cache.warmup_s", "must be shorter than horizon_s"));
            }
            if b.strategies.is_empty() {
                return Err(bad("cache.strategies", "needs at least one strategy"));
            }
            at_least_one("cache.replicates", b.replicates)?;
        }
        CaseConfig::Orchestrate(b) => {
            at_least_one("orchestration.n_tasks", b.n_tasks)?;
            non_negative("orchestration.input_bits_per_task", b.input_bits_per_task)?;
            positive("orchestration.work_per_task", b.work_per_task)?;
            positive("orchestration.local_speed", b.local_speed)?;
            at_least_one("orchestration.n_peers", b.n_peers)?;
            positive("orchestration.peer_speed", b.peer_speed)?;
            at_least_one("orchestration.n_edge_servers", b.n_edge_servers)?;
            positive("orchestration.edge_speed", b.edge_speed)?;
            if let Some(o) = b.offload_overhead_s {
                non_negative("orchestration.offload_overhead_s", o)?;
            }
            non_negative("orchestration.mu", b.mu)?;
            non_negative("orchestration.sigma", b.sigma)?;
            positive("orchestration.link_mbps", b.link_mbps)?;
            if b.k == 0 || b.k > b.n_edge_servers {
                return Err(bad("orchestration.k", format!("{} must be between 1 and n_edge_servers", b.k)));
            }
            at_least_one("orchestration.seeds", b.seeds)?;
        }
        CaseConfig::Interference(b) => {
            if let Some(p) = &b.bs_positions {
                if p.is_empty() {
                    return Err(bad("interference.bs_positions", "needs at least one site"));
                }
                if p.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(bad("interference.bs_positions", "coordinates must be finite"));
                }
            }
            positive("interference.site_spacing", b.site_spacing)?;
            positive("interference.cell_radius", b.resolved_cell_radius())?;
            non_negative("interference.radius_fraction", b.radius_fraction)?;
            if b.cqi_threshold_db.is_nan() {
                return Err(bad("interference.cqi_threshold_db", "is NaN"));
            }
            if !(b.pathloss_exponent > 2.0) {
                return Err(bad("interference.pathloss_exponent", "must exceed 2"));
            }
            if !b.noise_dbm.is_finite() {
                return Err(bad("interference.noise_dbm", "must be finite"));
            }
            if !b.tx_power_dbm.is_finite() {
                return Err(bad("interference.tx_power_dbm", "must be finite"));
            }
            positive("interference.raw_rate_mbps", b.raw_rate_mbps)?;
            at_least_one("interference.n_snapshots", b.n_snapshots)?;
            if !(0.0..=1.0).contains(&b.residual) {
                return Err(bad("interference.residual", "must be in [0, 1]"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cache_block_takes_defaults() {
        let c = parse_config("case = \"cache\"\nseed = 1\n", None).unwrap();
        let CaseConfig::Cache(b) = &c.base else { panic!() };
        assert_eq!(b, &CacheBlock::default());
        assert_eq!((b.n_bs, b.n_videos), (5, 1000));
        assert_eq!(b.alpha, 0.8);
        assert_eq!(b.original_bitrate_mbps, 2.0);
        assert_eq!(b.duration_s, 600.0);
        assert_eq!(b.variant_ratios, vec![0.82, 0.67, 0.55, 0.45]);
        assert_eq!(b.cache_fraction, 0.3);
        assert_eq!(b.processing_capacity_mbps, 40.0);
        assert_eq!(c.points.len(), 1);
    }

    #[test]
    fn override_is_reflected() {
        let c = parse_config("case = \"cache\"\nseed = 1\n[cache]\nn_bs = 2\n", None).unwrap();
        let CaseConfig::Cache(b) = &c.base else { panic!() };
        assert_eq!(b.n_bs, 2);
        assert!(c.to_toml().contains("n_bs = 2"));
    }

    #[test]
    fn missing_seed_is_named() {
        let e = parse_config("case = \"cache\"\n", None).unwrap_err();
        assert!(e.0.contains("seed"), "{e}");
        assert!(parse_config("case = \"cache\"\n", Some(3)).is_ok());
    }

    #[test]
    fn typo_is_named() {
        let e = parse_config("case = \"cache\"\nseed = 1\n[cache]\nprocesing = 3\n", None).unwrap_err();
        assert!(e.0.contains("procesing"), "{e}");
    }

    #[test]
    fn foreign_block_rejected() {
        let e = parse_config("case = \"cache\"\nseed = 1\n[interference]\n", None).unwrap_err();
        assert!(e.0.contains("interference"), "{e}");
    }

    #[test]
    fn sweep_expands_in_value_order() {
        let text = "case = \"cache\"\nseed = 1\n[sweep]\nparameter = \"cache_fraction\"\nvalues = [0.5, 0.1, 0.3]\n";
        let c = parse_config(text, None).unwrap();
        let fr: Vec<f64> = c
            .points
            .iter()
            .map(|p| match &p.config {
                CaseConfig::Cache(b) => b.cache_fraction,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(fr, vec![0.1, 0.3, 0.5]);
    }

    #[test]
    fn sweep_parameter_must_exist() {
        let text = "case = \"orchestrate\"\nseed = 1\n[sweep]\nparameter = \"cache_fraction\"\nvalues = [0.1]\n";
        let e = parse_config(text, None).unwrap_err();
        assert!(e.0.contains("cache_fraction") && e.0.contains("orchestration"), "{e}");
        let text = "case = \"orchestrate\"\nseed = 1\n[sweep]\nparameter = \"offload_overhead_s\"\nvalues = [0.5, 1]\n";
        assert_eq!(parse_config(text, None).unwrap().points.len(), 2);
    }

    #[test]
    fn bad_sweep_value_names_the_point() {
        let text = "case = \"cache\"\nseed = 1\n[sweep]\nparameter = \"cache_fraction\"\nvalues = [0.1, -1]\n";
        let e = parse_config(text, None).unwrap_err();
        assert!(e.0.contains("cache_fraction = -1"), "{e}");
    }

    #[test]
    fn infinite_thresholds_parse() {
        let text = "case = \"interference\"\nseed = 1\n[sweep]\nparameter = \"cqi_threshold_db\"\nvalues = [inf, 0.0, -inf]\n";
        let c = parse_config(text, None).unwrap();
        let labels: Vec<String> = c.points.iter().map(|p| p.label().unwrap()).collect();
        assert_eq!(labels, vec!["-inf", "0", "inf"]);
    }

    #[test]
    fn strategies_and_modes_use_tokens() {
        let text = "case = \"cache\"\nseed = 1\n[cache]\nstrategies = [\"co-cache\", \"copro-cocache\"]\ntranscode_cost = \"output\"\n";
        let c = parse_config(text, None).unwrap();
        let CaseConfig::Cache(b) = &c.base else { panic!() };
        assert_eq!(b.strategies, vec![StrategyKind::CoCache, StrategyKind::CoProCoCache]);
        assert_eq!(b.transcode_cost, TranscodeCost::Output);
        let e = parse_config("case = \"interference\"\nseed = 1\n[interference]\nmode = \"radius\"\n", None).unwrap_err();
        assert!(e.0.contains("radius"), "{e}");
    }
}
