//! Transcoding processors modelled as fluid Mbps capacity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::workload::VideoCatalog;

/// One server's transcoding processor.
///
/// `busy_integral` is the integral of `in_use` over time (Mbps·s), advanced
/// lazily whenever the processor is touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Processor<T> {
    capacity: T,
    in_use: T,
    busy_integral: T,
    last_update: T,
    active: usize,
}

impl<T: Scalar> Processor<T> {
    pub fn new(capacity: T) -> Self {
        Self {
            capacity: capacity.max(T::zero()),
            in_use: T::zero(),
            busy_integral: T::zero(),
            last_update: T::zero(),
            active: 0,
        }
    }

    pub fn capacity(&self) -> T {
        self.capacity
    }

    pub fn in_use(&self) -> T {
        self.in_use
    }

    pub fn busy_integral(&self) -> T {
        self.busy_integral
    }

    pub fn active_jobs(&self) -> usize {
        self.active
    }

    /// Integrates load up to `now`. Time never runs backwards.
    pub fn advance(&mut self, now: T) {
        if now > self.last_update {
            self.busy_integral = self.busy_integral + self.in_use * (now - self.last_update);
            self.last_update = now;
        }
    }

    // Slack for accumulated rounding in `in_use`.
    fn slack(&self) -> T {
        self.capacity * T::lit(1e-12)
    }

    pub fn would_admit(&self, load: T) -> bool {
        load > T::zero() && self.in_use + load <= self.capacity + self.slack()
    }

    /// All-or-nothing admission. On success returns the release time
    /// `now + duration`; the caller owns the release event.
    pub fn admit(&mut self, load: T, now: T, duration: T) -> Option<T> {
        self.advance(now);
        if !self.would_admit(load) {
            return None;
        }
        self.in_use = self.in_use + load;
        self.active += 1;
        Some(now + duration)
    }

    pub fn release(&mut self, load: T, now: T) {
        self.advance(now);
        debug_assert!(self.active > 0, "release without an admitted job");
        self.active = self.active.saturating_sub(1);
        self.in_use = if self.active == 0 {
            T::zero()
        } else {
            (self.in_use - load).max(T::zero())
        };
    }

    /// Fraction of capacity used over `[0, horizon]`.
    pub fn utilization(&self, horizon: T) -> Result<T> {
        utilization(self.busy_integral, self.capacity, horizon)
    }
}

/// `busy / (capacity * horizon)`; zero capacity counts as never busy.
pub fn utilization<T: Scalar>(busy_integral: T, capacity: T, horizon: T) -> Result<T> {
    if !(horizon > T::zero()) {
        return Err(invalid(format!("utilization horizon {horizon} must be positive")));
    }
    if capacity <= T::zero() {
        return Ok(T::zero());
    }
    Ok((busy_integral / (capacity * horizon)).min(T::one()))
}

/// Higher bitrates transcode down, never up or sideways.
pub fn can_transcode<T: Scalar>(catalog: &VideoCatalog<T>, from: usize, to: usize) -> bool {
    catalog.variant_bitrate(from) > catalog.variant_bitrate(to)
}

/// Which end of a collaborative fetch does the transcoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TranscodeSite {
    Provider,
    Delivery,
}

impl TranscodeSite {
    pub fn other(self) -> Self {
        match self {
            TranscodeSite::Provider => TranscodeSite::Delivery,
            TranscodeSite::Delivery => TranscodeSite::Provider,
        }
    }
}

/// The less loaded node wins; ties go to the delivery node. Loads closer
/// than accumulated rounding error count as tied.
pub fn pick_transcoder<T: Scalar>(provider_in_use: T, delivery_in_use: T) -> TranscodeSite {
    let eps = T::lit(1e-9) * provider_in_use.abs().max(delivery_in_use.abs()).max(T::one());
    if provider_in_use < delivery_in_use - eps {
        TranscodeSite::Provider
    } else {
        TranscodeSite::Delivery
    }
}

/// What a transcode job costs the processor for its whole duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranscodeCost {
    /// Bitrate of the source variant.
    #[default]
    Input,
    /// Bitrate of the produced variant.
    Output,
}

impl TranscodeCost {
    pub fn load<T: Scalar>(self, catalog: &VideoCatalog<T>, from: usize, to: usize) -> T {
        match self {
            TranscodeCost::Input => catalog.variant_bitrate(from),
            TranscodeCost::Output => catalog.variant_bitrate(to),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranscodeJob<T> {
    pub video_id: usize,
    pub from_variant: usize,
    pub to_variant: usize,
    pub load: T,
    pub start: T,
    pub end: T,
    pub host: usize,
}
