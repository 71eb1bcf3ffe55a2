//! Video catalog, per-base-station Zipf popularity and Poisson request traces.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand_distr::Exp;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::seed::{stream_rng, Domain};

/// The video library: every video shares one original bitrate, one duration
/// and one ladder of requestable variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoCatalog<T> {
    n_videos: usize,
    original_bitrate: T,
    duration: T,
    variant_ratios: Vec<T>,
}

impl<T: Scalar> VideoCatalog<T> {
    /// `original_bitrate` in Mbps, `duration` in seconds. `variant_ratios`
    /// must be strictly decreasing, each in (0, 1].
    pub fn new(
        n_videos: usize,
        original_bitrate: T,
        duration: T,
        variant_ratios: Vec<T>,
    ) -> Result<Self> {
        if n_videos == 0 {
            return Err(invalid("catalog needs at least one video"));
        }
        if !(original_bitrate > T::zero()) || !original_bitrate.is_finite() {
            return Err(invalid("original bitrate must be positive"));
        }
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(invalid("video duration must be positive"));
        }
        for &r in &variant_ratios {
            if !(r > T::zero() && r <= T::one()) {
                return Err(invalid(format!("variant ratio {r} outside (0, 1]")));
            }
        }
        if variant_ratios.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("variant ratios must be strictly decreasing"));
        }
        Ok(Self {
            n_videos,
            original_bitrate,
            duration,
            variant_ratios,
        })
    }

    /// 1000 ten-minute videos at 2 Mbps with variants at 0.82/0.67/0.55/0.45.
    pub fn reference() -> Self {
        Self::new(
            1000,
            T::lit(2.0),
            T::lit(600.0),
            [0.82, 0.67, 0.55, 0.45].into_iter().map(T::lit).collect(),
        )
        .expect("reference catalog is valid")
    }

    pub fn n_videos(&self) -> usize {
        self.n_videos
    }

    pub fn n_variants(&self) -> usize {
        self.variant_ratios.len()
    }

    pub fn original_bitrate(&self) -> T {
        self.original_bitrate
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn variant_ratios(&self) -> &[T] {
        &self.variant_ratios
    }

    /// Bitrate of variant `q` in Mbps.
    pub fn variant_bitrate(&self, q: usize) -> T {
        self.original_bitrate * self.variant_ratios[q]
    }
}

/// Zipf probabilities indexed by rank (`p[0]` is the most popular item).
///
/// The normalizer is summed directly, smallest terms first.
pub fn zipf_pmf<T: Scalar>(n: usize, alpha: T) -> Result<Vec<T>> {
    if n == 0 {
        return Err(invalid("zipf_pmf needs n >= 1"));
    }
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(invalid(format!("zipf exponent {alpha} must be >= 0")));
    }
    let weights: Vec<T> = (1..=n)
        .map(|i| T::from_count(i).powf(-alpha))
        .collect();
    let norm: T = weights.iter().rev().copied().sum();
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

/// Per-base-station popularity: one shared Zipf law, a different
/// video→rank permutation at each BS.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile<T> {
    alpha: T,
    pmf: Vec<T>,
    rank_of: Vec<Vec<usize>>,
    by_rank: Vec<Vec<usize>>,
}

impl<T: Scalar> PopularityProfile<T> {
    /// Builds a profile from explicit video→rank maps, one per BS (ranks are
    /// 0-based).
    pub fn from_ranks(alpha: T, rank_of: Vec<Vec<usize>>) -> Result<Self> {
        let n = rank_of
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("profile needs at least one base station"))?;
        let pmf = zipf_pmf(n, alpha)?;
        let mut by_rank = Vec::with_capacity(rank_of.len());
        for (bs, ranks) in rank_of.iter().enumerate() {
            if ranks.len() != n {
                return Err(invalid(format!("BS {bs}: rank map has wrong length")));
            }
            let mut inverse = vec![usize::MAX; n];
            for (video, &rank) in ranks.iter().enumerate() {
                if rank >= n || inverse[rank] != usize::MAX {
                    return Err(invalid(format!("BS {bs}: rank map is not a permutation")));
                }
                inverse[rank] = video;
            }
            by_rank.push(inverse);
        }
        Ok(Self {
            alpha,
            pmf,
            rank_of,
            by_rank,
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn n_bs(&self) -> usize {
        self.rank_of.len()
    }

    pub fn n_videos(&self) -> usize {
        self.pmf.len()
    }

    /// Rank-indexed Zipf pmf shared by all BSs.
    pub fn pmf(&self) -> &[T] {
        &self.pmf
    }

    pub fn rank(&self, bs: usize, video: usize) -> usize {
        self.rank_of[bs][video]
    }

    pub fn video_at_rank(&self, bs: usize, rank: usize) -> usize {
        self.by_rank[bs][rank]
    }

    /// Videos of `bs` in descending popularity.
    pub fn videos_by_rank(&self, bs: usize) -> &[usize] {
        &self.by_rank[bs]
    }

    /// Request probability of `video` at `bs`.
    pub fn prob(&self, bs: usize, video: usize) -> T {
        self.pmf[self.rank_of[bs][video]]
    }
}

/// Draws an independent uniform permutation of the catalog for each BS.
pub fn shuffle_popularity<T: Scalar>(
    n_videos: usize,
    n_bs: usize,
    alpha: T,
    seed: u64,
) -> Result<PopularityProfile<T>> {
    if n_videos == 0 || n_bs == 0 {
        return Err(invalid("popularity needs at least one video and one BS"));
    }
    let rank_of = (0..n_bs)
        .map(|bs| {
            let mut rng = stream_rng(seed, Domain::Popularity, bs);
            let mut order: Vec<usize> = (0..n_videos).collect();
            order.shuffle(&mut rng);
            let mut ranks = vec![0; n_videos];
            for (rank, video) in order.into_iter().enumerate() {
                ranks[video] = rank;
            }
            ranks
        })
        .collect();
    PopularityProfile::from_ranks(alpha, rank_of)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Request<T> {
    pub arrival_time: T,
    pub bs_id: usize,
    pub video_id: usize,
    pub variant_idx: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace<T> {
    pub requests: Vec<Request<T>>,
    pub horizon: T,
    pub seed: u64,
}

impl<T: Scalar> RequestTrace<T> {
    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

/// Uniform request mix over `n` variants.
pub fn uniform_variant_dist<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::one() / T::from_count(n.max(1)); n]
}

pub(crate) fn check_variant_dist<T: Scalar>(dist: &[T], n_variants: usize) -> Result<()> {
    if dist.len() != n_variants {
        return Err(invalid(format!(
            "variant distribution has {} entries, catalog has {n_variants} variants",
            dist.len()
        )));
    }
    if dist.iter().any(|p| !(*p >= T::zero())) {
        return Err(invalid("variant probabilities must be non-negative"));
    }
    let total: T = dist.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(invalid(format!("variant distribution sums to {total}, not 1")));
    }
    Ok(())
}

/// Poisson arrivals at every BS, `rate` requests per BS per minute, merged
/// into one time-ordered trace over `[0, horizon]`.
///
/// Each BS draws from its own stream, in the order gap, video rank, variant.
/// Simultaneous arrivals are ordered by BS id.
pub fn generate_trace<T: Scalar>(
    profile: &PopularityProfile<T>,
    catalog: &VideoCatalog<T>,
    rate: T,
    horizon: T,
    variant_dist: &[T],
    seed: u64,
) -> Result<RequestTrace<T>> {
    if !(rate >= T::zero()) || !rate.is_finite() {
        return Err(invalid(format!("arrival rate {rate} must be >= 0")));
    }
    if !(horizon >= T::zero()) || !horizon.is_finite() {
        return Err(invalid(format!("horizon {horizon} must be >= 0")));
    }
    if profile.n_videos() != catalog.n_videos() {
        return Err(invalid("profile and catalog disagree on the number of videos"));
    }
    check_variant_dist(variant_dist, catalog.n_variants())?;

    let mut requests = Vec::new();
    if rate > T::zero() && horizon > T::zero() {
        let per_second = rate.as_f64() / 60.0;
        let gap = Exp::new(per_second).map_err(|e| invalid(e.to_string()))?;
        let pmf: Vec<f64> = profile.pmf().iter().map(|p| p.as_f64()).collect();
        let rank_dist = WeightedIndex::new(&pmf).map_err(|e| invalid(e.to_string()))?;
        let vd: Vec<f64> = variant_dist.iter().map(|p| p.as_f64()).collect();
        let variant = WeightedIndex::new(&vd).map_err(|e| invalid(e.to_string()))?;
        let end = horizon.as_f64();

        for bs in 0..profile.n_bs() {
            let mut rng = stream_rng(seed, Domain::Arrivals, bs);
            let mut t = 0.0;
            loop {
                t += gap.sample(&mut rng);
                if t > end {
                    break;
                }
                let rank = rank_dist.sample(&mut rng);
                let q = variant.sample(&mut rng);
                requests.push(Request {
                    arrival_time: T::lit(t),
                    bs_id: bs,
                    video_id: profile.video_at_rank(bs, rank),
                    variant_idx: q,
                });
            }
        }
        // Stable: per-BS order is already chronological.
        requests.sort_by(|a, b| {
            a.arrival_time
                .partial_cmp(&b.arrival_time)
                .expect("finite arrival times")
                .then(a.bs_id.cmp(&b.bs_id))
        });
    }
    Ok(RequestTrace {
        requests,
        horizon,
        seed,
    })
}
