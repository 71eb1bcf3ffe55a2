//! Two-layer uplink interference handling.
//!
//! Cell-centre users are demodulated at their own base station (layer 1).
//! Users that interfere strongly with neighbouring cells are forwarded to the
//! shared backhaul processing unit (layer 2), where interference among
//! layer-2 users is cancelled jointly.
//!
//! One co-channel mobile station per cell is active in a snapshot. Path gain
//! is `d^-exponent` with `d` clamped to at least 1 m.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::seed::{stream_rng, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellLayout<T> {
    pub bs_positions: Vec<Point<T>>,
    pub cell_radius: T,
    pub interference_radius: T,
}

/// Interference radius as a fraction of the cell radius, by default.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.8;

impl<T: Scalar> CellLayout<T> {
    pub fn new(bs_positions: Vec<Point<T>>, cell_radius: T, interference_radius: T) -> Result<Self> {
        if bs_positions.is_empty() {
            return Err(invalid("layout needs at least one base station"));
        }
        if !(cell_radius > T::zero()) {
            return Err(invalid("cell radius must be positive"));
        }
        if !(interference_radius >= T::zero()) {
            return Err(invalid("interference radius must be >= 0"));
        }
        Ok(Self {
            bs_positions,
            cell_radius,
            interference_radius,
        })
    }

    /// Hexagonal grid: `rings` rings around a centre site, `spacing` metres
    /// between neighbouring sites. Ring 0 is the single centre site.
    pub fn hex_positions(rings: usize, spacing: T) -> Vec<Point<T>> {
        let mut out = vec![Point::new(T::zero(), T::zero())];
        // Axial directions around a hexagon.
        let dirs: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
        let half = T::lit(0.5);
        let root3_2 = T::lit(3f64.sqrt() / 2.0);
        for ring in 1..=rings as i64 {
            let (mut q, mut r) = (dirs[4].0 * ring, dirs[4].1 * ring);
            for d in dirs {
                for _ in 0..ring {
                    let (qf, rf) = (T::lit(q as f64), T::lit(r as f64));
                    out.push(Point::new(spacing * (qf + rf * half), spacing * rf * root3_2));
                    q += d.0;
                    r += d.1;
                }
            }
        }
        out
    }

    pub fn n_cells(&self) -> usize {
        self.bs_positions.len()
    }

    /// Nearest base station; ties go to the lower id.
    pub fn serving_bs(&self, p: &Point<T>) -> usize {
        let mut best = 0;
        for (i, bs) in self.bs_positions.iter().enumerate().skip(1) {
            if bs.distance(p) < self.bs_positions[best].distance(p) {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobileStation<T> {
    pub position: Point<T>,
    pub serving_bs: usize,
    /// Watts.
    pub tx_power: T,
}

impl<T: Scalar> MobileStation<T> {
    /// Associates with the nearest base station.
    pub fn new(position: Point<T>, layout: &CellLayout<T>, tx_power: T) -> Self {
        Self {
            position,
            serving_bs: layout.serving_bs(&position),
            tx_power,
        }
    }
}

pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf((dbm - T::lit(30.0)) / T::lit(10.0))
}

pub fn to_db<T: Scalar>(linear: T) -> T {
    T::lit(10.0) * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel<T> {
    pub pathloss_exponent: T,
    /// Watts.
    pub noise_power: T,
    pub cqi_threshold_db: T,
    /// Fraction of cancelled interference that survives joint processing.
    pub residual: T,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn new(pathloss_exponent: T, noise_power: T, cqi_threshold_db: T) -> Result<Self> {
        let m = Self {
            pathloss_exponent,
            noise_power,
            cqi_threshold_db,
            residual: T::zero(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > T::lit(2.0)) {
            return Err(invalid("path-loss exponent must exceed 2"));
        }
        if !(self.noise_power > T::zero()) {
            return Err(invalid("noise power must be positive"));
        }
        if !(self.residual >= T::zero() && self.residual <= T::one()) {
            return Err(invalid("residual interference factor must be in [0, 1]"));
        }
        if self.cqi_threshold_db.is_nan() {
            return Err(invalid("CQI threshold is NaN"));
        }
        Ok(())
    }

    /// Exponent 3.5, noise -104 dBm, CQI threshold 3 dB, perfect cancellation.
    pub fn reference() -> Self {
        Self::new(T::lit(3.5), dbm_to_watts(T::lit(-104.0)), T::lit(3.0)).expect("valid channel")
    }

    fn gain(&self, d: T) -> T {
        d.max(T::one()).powf(-self.pathloss_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    Layer1,
    Layer2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyMode {
    Geometric,
    #[default]
    Cqi,
}

/// Per-station placement and SINRs (dB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerAssignment<T> {
    pub layer: Layer,
    pub pre_sinr_db: T,
    pub post_sinr_db: T,
}

fn sinr_linear<T: Scalar>(
    victim: usize,
    all_ms: &[MobileStation<T>],
    layout: &CellLayout<T>,
    channel: &ChannelModel<T>,
    weight: impl Fn(usize) -> T,
) -> T {
    let ms = &all_ms[victim];
    let bs = &layout.bs_positions[ms.serving_bs];
    let signal = ms.tx_power * channel.gain(ms.position.distance(bs));
    let interference: T = all_ms
        .iter()
        .enumerate()
        .filter(|(j, other)| *j != victim && other.serving_bs != ms.serving_bs)
        .map(|(j, other)| weight(j) * other.tx_power * channel.gain(other.position.distance(bs)))
        .sum();
    signal / (interference + channel.noise_power)
}

/// Uplink SINR of `all_ms[victim]` at its serving base station, in dB.
pub fn uplink_sinr<T: Scalar>(
    victim: usize,
    all_ms: &[MobileStation<T>],
    layout: &CellLayout<T>,
    channel: &ChannelModel<T>,
) -> T {
    to_db(sinr_linear(victim, all_ms, layout, channel, |_| T::one()))
}

pub fn classify<T: Scalar>(
    ms: usize,
    all_ms: &[MobileStation<T>],
    layout: &CellLayout<T>,
    channel: &ChannelModel<T>,
    mode: ClassifyMode,
) -> Layer {
    let edge = match mode {
        ClassifyMode::Geometric => {
            let station = &all_ms[ms];
            layout.bs_positions.iter().enumerate().any(|(b, pos)| {
                b != station.serving_bs && station.position.distance(pos) < layout.interference_radius
            })
        }
        ClassifyMode::Cqi => uplink_sinr(ms, all_ms, layout, channel) < channel.cqi_threshold_db,
    };
    if edge {
        Layer::Layer2
    } else {
        Layer::Layer1
    }
}

/// Classifies every station; post-SINR starts equal to pre-SINR.
pub fn assign_layers<T: Scalar>(
    all_ms: &[MobileStation<T>],
    layout: &CellLayout<T>,
    channel: &ChannelModel<T>,
    mode: ClassifyMode,
) -> Vec<LayerAssignment<T>> {
    (0..all_ms.len())
        .map(|i| {
            let sinr = uplink_sinr(i, all_ms, layout, channel);
            LayerAssignment {
                layer: classify(i, all_ms, layout, channel, mode),
                pre_sinr_db: sinr,
                post_sinr_db: sinr,
            }
        })
        .collect()
}

/// Joint processing at the BPU: each layer-2 station's interference from
/// other layer-2 stations is scaled by the channel's residual factor
/// (zero by default). Layer-1 interferers are untouched.
pub fn cancel_intra_cluster<T: Scalar>(
    assignments: &[LayerAssignment<T>],
    all_ms: &[MobileStation<T>],
    layout: &CellLayout<T>,
    channel: &ChannelModel<T>,
) -> Vec<LayerAssignment<T>> {
    let in_cluster = |j: usize| assignments[j].layer == Layer::Layer2;
    assignments
        .iter()
        .enumerate()
        .map(|(i, a)| match a.layer {
            Layer::Layer1 => *a,
            Layer::Layer2 => {
                let post = to_db(sinr_linear(i, all_ms, layout, channel, |j| {
                    if in_cluster(j) {
                        channel.residual
                    } else {
                        T::one()
                    }
                }));
                LayerAssignment {
                    post_sinr_db: post.max(a.pre_sinr_db),
                    ..*a
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FronthaulReport<T> {
    /// Mbps carried to the BPU.
    pub bpu_load: T,
    /// Mbps a C-RAN would carry (every station's raw stream).
    pub cran_load: T,
    pub savings_vs_cran: T,
}

pub fn fronthaul_report<T: Scalar>(assignments: &[LayerAssignment<T>], raw_rate: T) -> Result<FronthaulReport<T>> {
    if !(raw_rate > T::zero()) {
        return Err(invalid("raw fronthaul rate must be positive"));
    }
    if assignments.is_empty() {
        return Err(invalid("fronthaul report needs at least one station"));
    }
    let layer2 = assignments.iter().filter(|a| a.layer == Layer::Layer2).count();
    let n = assignments.len();
    Ok(FronthaulReport {
        bpu_load: raw_rate * T::from_count(layer2),
        cran_load: raw_rate * T::from_count(n),
        savings_vs_cran: T::one() - T::from_count(layer2) / T::from_count(n),
    })
}

/// Three sites on an equilateral triangle (1 km sides, 800 m cells) with
/// three stations: #1 at the centre of cell 1, #2 in cell 2 near the
/// cell 1 / cell 2 border and inside the interference regions of BS 1 and
/// BS 3, #3 in cell 3 on the cell 2 / cell 3 border.
pub fn triangle_fixture<T: Scalar>() -> (CellLayout<T>, Vec<MobileStation<T>>) {
    let p = |x: f64, y: f64| Point::new(T::lit(x), T::lit(y));
    let cell_radius = T::lit(800.0);
    let layout = CellLayout::new(
        vec![p(0.0, 0.0), p(1000.0, 0.0), p(500.0, 500.0 * 3f64.sqrt())],
        cell_radius,
        cell_radius * T::lit(DEFAULT_RADIUS_FRACTION),
    )
    .expect("valid fixture");
    let tx = dbm_to_watts(T::lit(23.0));
    let ms = [p(100.0, 0.0), p(540.0, 250.0), p(750.0, 440.0)]
        .into_iter()
        .map(|pos| MobileStation::new(pos, &layout, tx))
        .collect();
    (layout, ms)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceScenario<T> {
    pub layout: CellLayout<T>,
    pub channel: ChannelModel<T>,
    /// Watts.
    pub tx_power: T,
    pub mode: ClassifyMode,
    /// Mbps per station.
    pub raw_rate: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotResult<T> {
    pub snapshot: usize,
    pub layer2_fraction: T,
    pub mean_pre_sinr_db: T,
    pub mean_post_sinr_db: T,
    pub bpu_load_mbps: T,
    pub savings: T,
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// One station per cell, uniform over the part of the cell-radius disk
/// where that cell's BS is the nearest.
pub fn drop_stations<T: Scalar>(layout: &CellLayout<T>, tx_power: T, seed: u64, snapshot: usize) -> Vec<MobileStation<T>> {
    let mut rng = stream_rng(seed, Domain::Snapshot, snapshot);
    let r = layout.cell_radius.as_f64();
    layout
        .bs_positions
        .iter()
        .enumerate()
        .map(|(cell, centre)| {
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let rho = r * rng.random::<f64>().sqrt();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                let p = Point::new(
                    centre.x + T::lit(rho * theta.cos()),
                    centre.y + T::lit(rho * theta.sin()),
                );
                if layout.serving_bs(&p) == cell {
                    return MobileStation::new(p, layout, tx_power);
                }
            }
            // Cells fully shadowed by co-located sites: stand at the BS.
            MobileStation::new(*centre, layout, tx_power)
        })
        .collect()
}

pub fn evaluate_snapshot<T: Scalar>(
    scenario: &InterferenceScenario<T>,
    all_ms: &[MobileStation<T>],
    snapshot: usize,
) -> Result<SnapshotResult<T>> {
    let pre = assign_layers(all_ms, &scenario.layout, &scenario.channel, scenario.mode);
    let post = cancel_intra_cluster(&pre, all_ms, &scenario.layout, &scenario.channel);
    let report = fronthaul_report(&post, scenario.raw_rate)?;
    let n = T::from_count(post.len());
    Ok(SnapshotResult {
        snapshot,
        layer2_fraction: T::one() - report.savings_vs_cran,
        mean_pre_sinr_db: post.iter().map(|a| a.pre_sinr_db).sum::<T>() / n,
        mean_post_sinr_db: post.iter().map(|a| a.post_sinr_db).sum::<T>() / n,
        bpu_load_mbps: report.bpu_load,
        savings: report.savings_vs_cran,
    })
}

pub fn run_snapshots<T: Scalar>(
    scenario: &InterferenceScenario<T>,
    n_snapshots: usize,
    seed: u64,
) -> Result<Vec<SnapshotResult<T>>> {
    scenario.channel.validate()?;
    (0..n_snapshots)
        .map(|s| {
            let ms = drop_stations(&scenario.layout, scenario.tx_power, seed, s);
            evaluate_snapshot(scenario, &ms, s)
        })
        .collect()
}
