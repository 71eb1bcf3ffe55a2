//! The four request-service policies.
//!
//! Each policy is an ordered rule list; the first rule that matches serves
//! the request and `OriginFetch` is the universal fallback.
//!
//! | policy          | local exact | local transcode | neighbour exact | neighbour transcode            |
//! |-----------------|-------------|-----------------|-----------------|--------------------------------|
//! | `pro-cache`     | yes         | yes             | -               | -                              |
//! | `co-cache`      | yes         | -               | yes             | -                              |
//! | `pro-cocache`   | yes         | yes             | yes             | at the delivery node only      |
//! | `copro-cocache` | yes         | yes             | yes             | less loaded of provider/delivery, then the other |
//!
//! Neighbours are scanned in ascending BS id.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache_sim::Metrics;
use crate::edge_cache::{lookup, variant_size, CacheState, LookupOutcome};
use crate::error::{invalid, Error};
use crate::scalar::Scalar;
use crate::transcode::{pick_transcoder, Processor, TranscodeCost, TranscodeJob, TranscodeSite};
use crate::workload::{Request, VideoCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "pro-cache")]
    ProCache,
    #[serde(rename = "co-cache")]
    CoCache,
    #[serde(rename = "pro-cocache")]
    ProCoCache,
    #[serde(rename = "copro-cocache")]
    CoProCoCache,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::ProCache,
        StrategyKind::CoCache,
        StrategyKind::ProCoCache,
        StrategyKind::CoProCoCache,
    ];

    pub fn token(self) -> &'static str {
        match self {
            StrategyKind::ProCache => "pro-cache",
            StrategyKind::CoCache => "co-cache",
            StrategyKind::ProCoCache => "pro-cocache",
            StrategyKind::CoProCoCache => "copro-cocache",
        }
    }

    pub fn has_processing(self) -> bool {
        !matches!(self, StrategyKind::CoCache)
    }

    pub fn is_collaborative(self) -> bool {
        !matches!(self, StrategyKind::ProCache)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| invalid(format!("unknown strategy {s:?}")))
    }
}

/// Where a request was served from. Neighbour variants carry the neighbour
/// (provider) BS id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ServiceSource {
    LocalHit,
    LocalTranscode,
    NeighborHit(usize),
    NeighborTranscodeAtProvider(usize),
    NeighborFetchTranscodeAtDelivery(usize),
    OriginFetch,
}

impl ServiceSource {
    pub fn neighbor(self) -> Option<usize> {
        match self {
            ServiceSource::NeighborHit(n)
            | ServiceSource::NeighborTranscodeAtProvider(n)
            | ServiceSource::NeighborFetchTranscodeAtDelivery(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_transcode(self) -> bool {
        matches!(
            self,
            ServiceSource::LocalTranscode
                | ServiceSource::NeighborTranscodeAtProvider(_)
                | ServiceSource::NeighborFetchTranscodeAtDelivery(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ServiceDecision<T> {
    pub source: ServiceSource,
    /// Size of the variant the user asked for.
    pub requested_bits: T,
    pub origin_bits: T,
    pub inter_bs_bits: T,
    pub transcode: Option<TranscodeJob<T>>,
}

struct Ctx<'a, T> {
    catalog: &'a VideoCatalog<T>,
    request: &'a Request<T>,
    now: T,
    cost: TranscodeCost,
}

impl<T: Scalar> Ctx<'_, T> {
    fn plain(&self, source: ServiceSource, origin_bits: T, inter_bs_bits: T) -> ServiceDecision<T> {
        ServiceDecision {
            source,
            requested_bits: variant_size(self.catalog, self.request.variant_idx),
            origin_bits,
            inter_bs_bits,
            transcode: None,
        }
    }

    fn job(&self, from: usize, host: usize) -> TranscodeJob<T> {
        let to = self.request.variant_idx;
        TranscodeJob {
            video_id: self.request.video_id,
            from_variant: from,
            to_variant: to,
            load: self.cost.load(self.catalog, from, to),
            start: self.now,
            end: self.now + self.catalog.duration(),
            host,
        }
    }

    fn load(&self, from: usize) -> T {
        self.cost.load(self.catalog, from, self.request.variant_idx)
    }
}

/// Decides how `request` is served. Pure: processors are only inspected,
/// the caller admits the returned job (which is guaranteed to fit).
pub fn serve_request<T: Scalar>(
    strategy: StrategyKind,
    request: &Request<T>,
    catalog: &VideoCatalog<T>,
    caches: &[CacheState<T>],
    processors: &[Processor<T>],
    now: T,
    cost: TranscodeCost,
) -> ServiceDecision<T> {
    let ctx = Ctx {
        catalog,
        request,
        now,
        cost,
    };
    let bs = request.bs_id;
    let (video, want) = (request.video_id, request.variant_idx);
    let want_bits = variant_size(catalog, want);
    let zero = T::zero();
    let origin = ctx.plain(ServiceSource::OriginFetch, want_bits, zero);

    match lookup(&caches[bs], video, want) {
        LookupOutcome::LocalExact => return ctx.plain(ServiceSource::LocalHit, zero, zero),
        LookupOutcome::LocalHigher(src)
            if strategy.has_processing() && processors[bs].would_admit(ctx.load(src)) =>
        {
            return ServiceDecision {
                transcode: Some(ctx.job(src, bs)),
                ..ctx.plain(ServiceSource::LocalTranscode, zero, zero)
            };
        }
        _ => {}
    }
    if !strategy.is_collaborative() {
        return origin;
    }

    let neighbors = || (0..caches.len()).filter(move |&n| n != bs);
    if let Some(nb) = neighbors().find(|&n| caches[n].contains(video, want)) {
        return ctx.plain(ServiceSource::NeighborHit(nb), zero, want_bits);
    }
    if !strategy.has_processing() {
        return origin;
    }

    let Some((provider, src)) = neighbors().find_map(|n| match lookup(&caches[n], video, want) {
        LookupOutcome::LocalHigher(src) => Some((n, src)),
        _ => None,
    }) else {
        return origin;
    };
    let load = ctx.load(src);
    let at = |site: TranscodeSite| -> Option<ServiceDecision<T>> {
        let (host, source, inter) = match site {
            TranscodeSite::Provider => (
                provider,
                ServiceSource::NeighborTranscodeAtProvider(provider),
                want_bits,
            ),
            TranscodeSite::Delivery => (
                bs,
                ServiceSource::NeighborFetchTranscodeAtDelivery(provider),
                variant_size(catalog, src),
            ),
        };
        processors[host].would_admit(load).then(|| ServiceDecision {
            transcode: Some(ctx.job(src, host)),
            ..ctx.plain(source, zero, inter)
        })
    };

    let placed = match strategy {
        StrategyKind::ProCoCache => at(TranscodeSite::Delivery),
        StrategyKind::CoProCoCache => {
            let first = pick_transcoder(processors[provider].in_use(), processors[bs].in_use());
            at(first).or_else(|| at(first.other()))
        }
        _ => unreachable!("non-collaborative or non-processing strategies returned above"),
    };
    placed.unwrap_or(origin)
}

/// Folds one decision into the running totals.
pub fn account<T: Scalar>(decision: &ServiceDecision<T>, metrics: &mut Metrics<T>) {
    metrics.requests += 1;
    metrics.demand_bits = metrics.demand_bits + decision.requested_bits;
    metrics.backhaul_bits = metrics.backhaul_bits + decision.origin_bits;
    metrics.inter_bs_bits = metrics.inter_bs_bits + decision.inter_bs_bits;
    let c = &mut metrics.counts;
    match decision.source {
        ServiceSource::LocalHit => c.local_hit += 1,
        ServiceSource::LocalTranscode => c.local_transcode += 1,
        ServiceSource::NeighborHit(_) => c.neighbor_hit += 1,
        ServiceSource::NeighborTranscodeAtProvider(_) => c.neighbor_transcode_at_provider += 1,
        ServiceSource::NeighborFetchTranscodeAtDelivery(_) => {
            c.neighbor_fetch_transcode_at_delivery += 1
        }
        ServiceSource::OriginFetch => c.origin_fetch += 1,
    }
}
