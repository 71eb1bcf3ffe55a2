//! Discrete-event replay of a request trace against placed caches and
//! transcoding processors.
//!
//! Events are request arrivals and transcode releases. They are processed in
//! time order; at equal times releases go first so a job ending at `t` frees
//! capacity for a request arriving at `t`, and remaining ties follow
//! insertion order.
//!
//! Requests arriving before the warm-up cut still drive cache and processor
//! state but are not counted; processor busy time is measured over
//! `[warmup, horizon]`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::edge_cache::{library_size, plan_placement, variant_size, CacheEntry, CacheState};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::strategies::{account, serve_request, ServiceSource, StrategyKind};
use crate::transcode::{utilization, Processor, TranscodeCost};
use crate::workload::{
    check_variant_dist, generate_trace, shuffle_popularity, uniform_variant_dist,
    PopularityProfile, Request, RequestTrace, VideoCatalog,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind<T> {
    TranscodeRelease { host: usize, load: T },
    RequestArrival(Request<T>),
}

impl<T> EventKind<T> {
    fn class(&self) -> u8 {
        match self {
            EventKind::TranscodeRelease { .. } => 0,
            EventKind::RequestArrival(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event<T> {
    pub time: T,
    pub seq: u64,
    pub kind: EventKind<T>,
}

impl<T: Scalar> Ord for Event<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .partial_cmp(&other.time)
            .expect("event times are finite")
            .then(self.kind.class().cmp(&other.kind.class()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl<T: Scalar> PartialOrd for Event<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> PartialEq for Event<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Event<T> {}

/// Requests served per [`ServiceSource`] kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SourceCounts {
    pub local_hit: u64,
    pub local_transcode: u64,
    pub neighbor_hit: u64,
    pub neighbor_transcode_at_provider: u64,
    pub neighbor_fetch_transcode_at_delivery: u64,
    pub origin_fetch: u64,
}

impl SourceCounts {
    pub fn total(&self) -> u64 {
        self.local_hit
            + self.local_transcode
            + self.neighbor_hit
            + self.neighbor_transcode_at_provider
            + self.neighbor_fetch_transcode_at_delivery
            + self.origin_fetch
    }

    pub fn transcodes(&self) -> u64 {
        self.local_transcode
            + self.neighbor_transcode_at_provider
            + self.neighbor_fetch_transcode_at_delivery
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics<T> {
    pub demand_bits: T,
    pub backhaul_bits: T,
    pub inter_bs_bits: T,
    pub requests: u64,
    pub counts: SourceCounts,
    /// Counted requests per BS and their local exact hits.
    pub per_bs_requests: Vec<u64>,
    pub per_bs_local_hits: Vec<u64>,
    /// Busy Mbps·s of each processor inside the measurement window.
    pub busy_integral: Vec<T>,
    pub processing_capacity: T,
    pub horizon: T,
    pub warmup: T,
    pub jobs_admitted: u64,
    pub jobs_released: u64,
    pub arrivals_processed: u64,
}

impl<T: Scalar> Metrics<T> {
    pub fn empty(n_bs: usize, processing_capacity: T, horizon: T, warmup: T) -> Self {
        Self {
            demand_bits: T::zero(),
            backhaul_bits: T::zero(),
            inter_bs_bits: T::zero(),
            requests: 0,
            counts: SourceCounts::default(),
            per_bs_requests: vec![0; n_bs],
            per_bs_local_hits: vec![0; n_bs],
            busy_integral: vec![T::zero(); n_bs],
            processing_capacity,
            horizon,
            warmup,
            jobs_admitted: 0,
            jobs_released: 0,
            arrivals_processed: 0,
        }
    }

    /// Length of the measurement window.
    pub fn window(&self) -> T {
        (self.horizon - self.warmup).max(T::zero())
    }
}

/// Origin bits over demanded bits.
pub fn backhaul_load<T: Scalar>(metrics: &Metrics<T>) -> Result<T> {
    if !(metrics.demand_bits > T::zero()) {
        return Err(Error::UndefinedMetric("backhaul load with zero demand".into()));
    }
    Ok(metrics.backhaul_bits / metrics.demand_bits)
}

/// Fraction of counted requests served by an exact local hit.
pub fn local_hit_rate<T: Scalar>(metrics: &Metrics<T>) -> Result<T> {
    if metrics.requests == 0 {
        return Err(Error::UndefinedMetric("hit rate with zero requests".into()));
    }
    Ok(T::lit(metrics.counts.local_hit as f64) / T::lit(metrics.requests as f64))
}

/// Mean processor utilization across servers over the measurement window.
pub fn processing_utilization<T: Scalar>(metrics: &Metrics<T>) -> Result<T> {
    let n = metrics.busy_integral.len();
    if n == 0 {
        return Err(Error::UndefinedMetric("no processors".into()));
    }
    let total: T = metrics.busy_integral.iter().copied().sum();
    utilization(total, metrics.processing_capacity * T::from_count(n), metrics.window())
}

/// Expected exact-local-hit probability per BS under a static placement.
pub fn analytic_local_hit_rate<T: Scalar>(
    placement: &[CacheState<T>],
    profile: &PopularityProfile<T>,
    variant_dist: &[T],
) -> Vec<T> {
    placement
        .iter()
        .enumerate()
        .map(|(bs, cache)| {
            cache
                .entries()
                .map(|e| profile.prob(bs, e.video_id) * variant_dist[e.variant_idx])
                .sum()
        })
        .collect()
}

/// Knobs that are not part of the figure axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions<T> {
    pub warmup: T,
    pub variant_dist: Vec<T>,
    pub cost: TranscodeCost,
    /// Insert origin fetches into the delivery cache, evicting LRU.
    pub reactive_lru: bool,
}

impl<T: Scalar> SimOptions<T> {
    pub fn for_catalog(catalog: &VideoCatalog<T>) -> Self {
        Self {
            warmup: T::zero(),
            variant_dist: uniform_variant_dist(catalog.n_variants()),
            cost: TranscodeCost::Input,
            reactive_lru: false,
        }
    }
}

/// Outcome of [`run`]: the metrics plus the placement that produced them.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub metrics: Metrics<T>,
    pub placement: Vec<CacheState<T>>,
}

/// Places caches for `strategy`, then replays `trace`.
pub fn run<T: Scalar>(
    catalog: &VideoCatalog<T>,
    profile: &PopularityProfile<T>,
    trace: &RequestTrace<T>,
    strategy: StrategyKind,
    cache_fraction: T,
    processing_capacity: T,
    options: &SimOptions<T>,
) -> Result<RunOutput<T>> {
    if !(cache_fraction >= T::zero()) {
        return Err(invalid(format!("cache fraction {cache_fraction} must be >= 0")));
    }
    if !(processing_capacity >= T::zero()) {
        return Err(invalid(format!(
            "processing capacity {processing_capacity} must be >= 0"
        )));
    }
    check_variant_dist(&options.variant_dist, catalog.n_variants())?;
    let capacity = cache_fraction * library_size(catalog);
    let placement = plan_placement(
        profile,
        catalog,
        capacity,
        strategy.has_processing(),
        &options.variant_dist,
    )?;
    let metrics = replay(
        catalog,
        placement.clone(),
        trace,
        strategy,
        processing_capacity,
        options,
    )?;
    Ok(RunOutput { metrics, placement })
}

/// Replays `trace` against an explicit initial placement.
pub fn replay<T: Scalar>(
    catalog: &VideoCatalog<T>,
    mut caches: Vec<CacheState<T>>,
    trace: &RequestTrace<T>,
    strategy: StrategyKind,
    processing_capacity: T,
    options: &SimOptions<T>,
) -> Result<Metrics<T>> {
    let n_bs = caches.len();
    for r in &trace.requests {
        if r.bs_id >= n_bs || r.video_id >= catalog.n_videos() || r.variant_idx >= catalog.n_variants() {
            return Err(invalid(format!("request {r:?} out of range")));
        }
    }
    let warmup = options.warmup.max(T::zero()).min(trace.horizon);
    let mut metrics = Metrics::empty(n_bs, processing_capacity, trace.horizon, warmup);
    let mut processors: Vec<Processor<T>> =
        (0..n_bs).map(|_| Processor::new(processing_capacity)).collect();

    let mut queue: BinaryHeap<Reverse<Event<T>>> = BinaryHeap::with_capacity(trace.len());
    let mut seq = 0u64;
    for r in &trace.requests {
        queue.push(Reverse(Event {
            time: r.arrival_time,
            seq,
            kind: EventKind::RequestArrival(*r),
        }));
        seq += 1;
    }

    let mut busy_at_warmup: Option<Vec<T>> = None;
    let mut busy_at_horizon: Option<Vec<T>> = None;
    let snapshot = |procs: &mut [Processor<T>], at: T| -> Vec<T> {
        procs
            .iter_mut()
            .map(|p| {
                p.advance(at);
                p.busy_integral()
            })
            .collect()
    };

    while let Some(Reverse(event)) = queue.pop() {
        let now = event.time;
        if busy_at_warmup.is_none() && now >= warmup {
            busy_at_warmup = Some(snapshot(&mut processors, warmup));
        }
        if busy_at_horizon.is_none() && now > trace.horizon {
            busy_at_horizon = Some(snapshot(&mut processors, trace.horizon));
        }
        match event.kind {
            EventKind::TranscodeRelease { host, load } => {
                processors[host].release(load, now);
                metrics.jobs_released += 1;
            }
            EventKind::RequestArrival(request) => {
                metrics.arrivals_processed += 1;
                let decision = serve_request(
                    strategy,
                    &request,
                    catalog,
                    &caches,
                    &processors,
                    now,
                    options.cost,
                );
                if let Some(job) = decision.transcode {
                    let end = processors[job.host]
                        .admit(job.load, now, job.end - job.start)
                        .expect("serve_request only emits jobs that fit");
                    debug_assert!(processors[job.host].in_use() <= processing_capacity * T::lit(1.0 + 1e-9));
                    metrics.jobs_admitted += 1;
                    queue.push(Reverse(Event {
                        time: end,
                        seq,
                        kind: EventKind::TranscodeRelease {
                            host: job.host,
                            load: job.load,
                        },
                    }));
                    seq += 1;
                }
                if options.reactive_lru {
                    refresh_lru(&mut caches, catalog, &request, decision.source);
                }
                if now >= warmup {
                    account(&decision, &mut metrics);
                    metrics.per_bs_requests[request.bs_id] += 1;
                    if decision.source == ServiceSource::LocalHit {
                        metrics.per_bs_local_hits[request.bs_id] += 1;
                    }
                }
            }
        }
    }

    let start = busy_at_warmup.unwrap_or_else(|| snapshot(&mut processors, warmup));
    let end = busy_at_horizon.unwrap_or_else(|| snapshot(&mut processors, trace.horizon));
    metrics.busy_integral = end.into_iter().zip(start).map(|(e, s)| e - s).collect();
    Ok(metrics)
}

fn refresh_lru<T: Scalar>(
    caches: &mut [CacheState<T>],
    catalog: &VideoCatalog<T>,
    request: &Request<T>,
    source: ServiceSource,
) {
    let (bs, v, q) = (request.bs_id, request.video_id, request.variant_idx);
    match source {
        ServiceSource::LocalHit => caches[bs].touch(v, q),
        ServiceSource::OriginFetch => {
            caches[bs].insert_lru(CacheEntry {
                video_id: v,
                variant_idx: q,
                size: variant_size(catalog, q),
            });
        }
        _ => {}
    }
}

/// Everything needed to generate and run one caching experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheScenario<T> {
    pub n_bs: usize,
    pub catalog: VideoCatalog<T>,
    pub alpha: T,
    pub cache_fraction: T,
    pub processing_capacity: T,
    /// Requests per BS per minute.
    pub arrival_rate: T,
    pub horizon: T,
    pub options: SimOptions<T>,
}

impl<T: Scalar> CacheScenario<T> {
    /// Five BSs, the reference catalog, Zipf 0.8, 30 % cache, 40 Mbps,
    /// 2 requests/BS/min over 24 h with a 1 h warm-up.
    pub fn reference() -> Self {
        let catalog = VideoCatalog::reference();
        let mut options = SimOptions::for_catalog(&catalog);
        options.warmup = T::lit(3600.0);
        Self {
            n_bs: 5,
            catalog,
            alpha: T::lit(0.8),
            cache_fraction: T::lit(0.3),
            processing_capacity: T::lit(40.0),
            arrival_rate: T::lit(2.0),
            horizon: T::lit(86_400.0),
            options,
        }
    }

    pub fn profile(&self, seed: u64) -> Result<PopularityProfile<T>> {
        shuffle_popularity(self.catalog.n_videos(), self.n_bs, self.alpha, seed)
    }

    pub fn trace(&self, profile: &PopularityProfile<T>, seed: u64) -> Result<RequestTrace<T>> {
        generate_trace(
            profile,
            &self.catalog,
            self.arrival_rate,
            self.horizon,
            &self.options.variant_dist,
            seed,
        )
    }

    /// Popularity, trace and replay all derived from one seed.
    pub fn run(&self, strategy: StrategyKind, seed: u64) -> Result<RunOutput<T>> {
        let profile = self.profile(seed)?;
        let trace = self.trace(&profile, seed)?;
        run(
            &self.catalog,
            &profile,
            &trace,
            strategy,
            self.cache_fraction,
            self.processing_capacity,
            &self.options,
        )
    }
}
