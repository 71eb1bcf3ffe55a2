//! Per-server video cache: sizes, proactive placement and local lookup.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{mega, Scalar};
use crate::workload::{check_variant_dist, PopularityProfile, VideoCatalog};

/// Size in bits of a stream of `bitrate` Mbps lasting `duration` seconds,
/// rounded to a whole number of bits.
pub fn video_size<T: Scalar>(bitrate: T, duration: T) -> Result<T> {
    if !(bitrate > T::zero()) || !(duration > T::zero()) {
        return Err(invalid(format!(
            "video size needs positive bitrate and duration, got {bitrate} Mbps x {duration} s"
        )));
    }
    Ok((bitrate * mega::<T>() * duration).round())
}

/// Size in bits of variant `q` of any video in `catalog`.
pub fn variant_size<T: Scalar>(catalog: &VideoCatalog<T>, q: usize) -> T {
    video_size(catalog.variant_bitrate(q), catalog.duration())
        .expect("catalog invariants guarantee positive sizes")
}

/// Total bits of every requestable variant of every video. The original
/// encoding is not requestable and is not counted.
pub fn library_size<T: Scalar>(catalog: &VideoCatalog<T>) -> T {
    let per_video: T = (0..catalog.n_variants())
        .map(|q| variant_size(catalog, q))
        .sum();
    per_video * T::from_count(catalog.n_videos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CacheEntry<T> {
    pub video_id: usize,
    pub variant_idx: usize,
    pub size: T,
}

#[derive(Debug, Clone, PartialEq)]
struct Slot<T> {
    size: T,
    stamp: u64,
}

/// Contents of one server's cache.
///
/// Entries also carry a recency stamp so the optional reactive LRU mode can
/// evict; static placement never looks at it.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheState<T> {
    capacity: T,
    used: T,
    entries: BTreeMap<(usize, usize), Slot<T>>,
    recency: BTreeMap<u64, (usize, usize)>,
    clock: u64,
}

impl<T: Scalar> CacheState<T> {
    pub fn new(capacity: T) -> Self {
        Self {
            capacity: capacity.max(T::zero()),
            used: T::zero(),
            entries: BTreeMap::new(),
            recency: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn capacity(&self) -> T {
        self.capacity
    }

    pub fn used(&self) -> T {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, video_id: usize, variant_idx: usize) -> bool {
        self.entries.contains_key(&(video_id, variant_idx))
    }

    pub fn fits(&self, size: T) -> bool {
        self.used + size <= self.capacity
    }

    /// Entries in (video, variant) order.
    pub fn entries(&self) -> impl Iterator<Item = CacheEntry<T>> + '_ {
        self.entries.iter().map(|(&(v, q), slot)| CacheEntry {
            video_id: v,
            variant_idx: q,
            size: slot.size,
        })
    }

    /// Inserts without eviction. Returns `false` (and leaves the cache
    /// untouched) if the entry is already present or does not fit.
    pub fn insert(&mut self, entry: CacheEntry<T>) -> bool {
        let key = (entry.video_id, entry.variant_idx);
        if self.entries.contains_key(&key) || !self.fits(entry.size) {
            return false;
        }
        self.clock += 1;
        self.used = self.used + entry.size;
        self.entries.insert(
            key,
            Slot {
                size: entry.size,
                stamp: self.clock,
            },
        );
        self.recency.insert(self.clock, key);
        debug_assert!(self.used <= self.capacity);
        true
    }

    pub fn remove(&mut self, video_id: usize, variant_idx: usize) -> Option<CacheEntry<T>> {
        let slot = self.entries.remove(&(video_id, variant_idx))?;
        self.recency.remove(&slot.stamp);
        self.used = if self.entries.is_empty() {
            T::zero()
        } else {
            self.used - slot.size
        };
        Some(CacheEntry {
            video_id,
            variant_idx,
            size: slot.size,
        })
    }

    /// Marks an entry as most recently used.
    pub fn touch(&mut self, video_id: usize, variant_idx: usize) {
        let key = (video_id, variant_idx);
        if let Some(slot) = self.entries.get_mut(&key) {
            self.recency.remove(&slot.stamp);
            self.clock += 1;
            slot.stamp = self.clock;
            self.recency.insert(self.clock, key);
        }
    }

    /// Reactive insertion: evicts least recently used entries until `entry`
    /// fits. Entries larger than the whole cache are refused.
    pub fn insert_lru(&mut self, entry: CacheEntry<T>) -> Vec<CacheEntry<T>> {
        let mut evicted = Vec::new();
        if entry.size > self.capacity || self.contains(entry.video_id, entry.variant_idx) {
            return evicted;
        }
        while !self.fits(entry.size) {
            let (_, &(v, q)) = self
                .recency
                .iter()
                .next()
                .expect("non-empty cache while over capacity");
            evicted.extend(self.remove(v, q));
        }
        let inserted = self.insert(entry);
        debug_assert!(inserted);
        evicted
    }
}

/// Result of probing one cache for a (video, variant) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LookupOutcome {
    LocalExact,
    /// A strictly higher-bitrate variant of the same video is cached.
    LocalHigher(usize),
    Miss,
}

/// Variant indices follow the catalog's strictly decreasing bitrate order,
/// so the cheapest transcode source is the largest cached index below the
/// requested one.
pub fn lookup<T: Scalar>(state: &CacheState<T>, video_id: usize, variant_idx: usize) -> LookupOutcome {
    if state.contains(video_id, variant_idx) {
        return LookupOutcome::LocalExact;
    }
    (0..variant_idx)
        .rev()
        .find(|&q| state.contains(video_id, q))
        .map_or(LookupOutcome::Miss, LookupOutcome::LocalHigher)
}

fn by_joint_probability<T: Scalar>(
    pairs: &mut [(usize, usize)],
    profile: &PopularityProfile<T>,
    bs: usize,
    variant_dist: &[T],
) {
    pairs.sort_by(|&(va, qa), &(vb, qb)| {
        let pa = profile.prob(bs, va) * variant_dist[qa];
        let pb = profile.prob(bs, vb) * variant_dist[qb];
        pb.partial_cmp(&pa)
            .unwrap_or(Ordering::Equal)
            .then(va.cmp(&vb))
            .then(qa.cmp(&qb))
    });
}

/// The sequence in which `bs` fills its cache.
///
/// Without processing: every (video, variant) pair by joint request
/// probability. With processing: first the top variant of every video in
/// descending local popularity, then the remaining lower variants by joint
/// probability. Ties go to the lower video id, then the higher bitrate.
pub fn placement_order<T: Scalar>(
    profile: &PopularityProfile<T>,
    catalog: &VideoCatalog<T>,
    bs: usize,
    with_processing: bool,
    variant_dist: &[T],
) -> Vec<(usize, usize)> {
    let n_var = catalog.n_variants();
    if n_var == 0 {
        return Vec::new();
    }
    if !with_processing {
        let mut pairs: Vec<(usize, usize)> = (0..catalog.n_videos())
            .flat_map(|v| (0..n_var).map(move |q| (v, q)))
            .collect();
        by_joint_probability(&mut pairs, profile, bs, variant_dist);
        return pairs;
    }
    let mut tops: Vec<usize> = (0..catalog.n_videos()).collect();
    tops.sort_by(|&a, &b| {
        profile
            .prob(bs, b)
            .partial_cmp(&profile.prob(bs, a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rest: Vec<(usize, usize)> = (0..catalog.n_videos())
        .flat_map(|v| (1..n_var).map(move |q| (v, q)))
        .collect();
    by_joint_probability(&mut rest, profile, bs, variant_dist);
    tops.into_iter().map(|v| (v, 0)).chain(rest).collect()
}

/// Proactive placement: each BS fills its cache greedily along
/// [`placement_order`] and stops at the first item that does not fit.
pub fn plan_placement<T: Scalar>(
    profile: &PopularityProfile<T>,
    catalog: &VideoCatalog<T>,
    capacity: T,
    with_processing: bool,
    variant_dist: &[T],
) -> Result<Vec<CacheState<T>>> {
    if !(capacity >= T::zero()) {
        return Err(invalid(format!("cache capacity {capacity} must be >= 0")));
    }
    if profile.n_videos() != catalog.n_videos() {
        return Err(invalid("profile and catalog disagree on the number of videos"));
    }
    check_variant_dist(variant_dist, catalog.n_variants())?;
    let sizes: Vec<T> = (0..catalog.n_variants())
        .map(|q| variant_size(catalog, q))
        .collect();
    Ok((0..profile.n_bs())
        .map(|bs| {
            let mut state = CacheState::new(capacity);
            for (video_id, variant_idx) in
                placement_order(profile, catalog, bs, with_processing, variant_dist)
            {
                let entry = CacheEntry {
                    video_id,
                    variant_idx,
                    size: sizes[variant_idx],
                };
                if !state.insert(entry) {
                    break;
                }
            }
            state
        })
        .collect())
}

/// Which BSs hold each (video, variant); handy for neighbour scans.
pub fn holders<T: Scalar>(caches: &[CacheState<T>]) -> HashMap<(usize, usize), Vec<usize>> {
    let mut out: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (bs, c) in caches.iter().enumerate() {
        for e in c.entries() {
            out.entry((e.video_id, e.variant_idx)).or_default().push(bs);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::uniform_variant_dist;

    #[test]
    fn sizes() {
        assert_eq!(video_size(2.0f64, 600.0).unwrap(), 1.2e9);
        assert_eq!(video_size(0.9f64, 600.0).unwrap(), 5.4e8);
        assert!(video_size(1.0f64, 0.0).is_err());
        assert!(video_size(-1.0f64, 10.0).is_err());
    }

    #[test]
    fn reference_library_size() {
        let c = VideoCatalog::<f64>::reference();
        assert_eq!(library_size(&c), 2.988e12);
        let one = VideoCatalog::new(1, 2.0f64, 600.0, vec![1.0]).unwrap();
        assert_eq!(library_size(&one), 1.2e9);
        let none = VideoCatalog::new(5, 2.0f64, 600.0, vec![]).unwrap();
        assert_eq!(library_size(&none), 0.0);
    }

    #[test]
    fn lookup_rules() {
        let mut s = CacheState::new(1e12f64);
        assert_eq!(lookup(&s, 7, 3), LookupOutcome::Miss);
        s.insert(CacheEntry { video_id: 7, variant_idx: 0, size: 1.0 });
        assert_eq!(lookup(&s, 7, 3), LookupOutcome::LocalHigher(0));
        assert_eq!(lookup(&s, 7, 0), LookupOutcome::LocalExact);
        s.insert(CacheEntry { video_id: 7, variant_idx: 2, size: 1.0 });
        assert_eq!(lookup(&s, 7, 3), LookupOutcome::LocalHigher(2));
        assert_eq!(lookup(&s, 7, 1), LookupOutcome::LocalHigher(0));
        assert_eq!(lookup(&s, 8, 3), LookupOutcome::Miss);
    }

    #[test]
    fn lookup_picks_lowest_sufficient_candidate() {
        // Enumerate every cached subset of a 4-variant ladder and compare
        // with a direct scan for the minimum-bitrate candidate above target.
        let ratios = [0.82, 0.67, 0.55, 0.45];
        for mask in 0u32..16 {
            let mut s = CacheState::new(1e12f64);
            for q in 0..4 {
                if mask & (1 << q) != 0 {
                    s.insert(CacheEntry { video_id: 1, variant_idx: q, size: 1.0 });
                }
            }
            for want in 0..4 {
                let expected = if mask & (1 << want) != 0 {
                    LookupOutcome::LocalExact
                } else {
                    (0..4)
                        .filter(|&q| mask & (1 << q) != 0 && ratios[q] > ratios[want])
                        .min_by(|&a, &b| ratios[a].partial_cmp(&ratios[b]).unwrap())
                        .map_or(LookupOutcome::Miss, LookupOutcome::LocalHigher)
                };
                assert_eq!(lookup(&s, 1, want), expected, "mask {mask:04b} want {want}");
            }
        }
    }

    #[test]
    fn insert_respects_capacity_and_duplicates() {
        let mut s = CacheState::new(10.0f64);
        assert!(s.insert(CacheEntry { video_id: 0, variant_idx: 0, size: 6.0 }));
        assert!(!s.insert(CacheEntry { video_id: 0, variant_idx: 0, size: 1.0 }));
        assert!(!s.insert(CacheEntry { video_id: 1, variant_idx: 0, size: 5.0 }));
        assert!(s.insert(CacheEntry { video_id: 1, variant_idx: 0, size: 4.0 }));
        assert_eq!(s.used(), 10.0);
        s.remove(0, 0);
        assert_eq!(s.used(), 4.0);
    }

    #[test]
    fn lru_evicts_oldest_untouched() {
        let mut s = CacheState::new(3.0f64);
        for v in 0..3 {
            s.insert(CacheEntry { video_id: v, variant_idx: 0, size: 1.0 });
        }
        s.touch(0, 0);
        let evicted = s.insert_lru(CacheEntry { video_id: 9, variant_idx: 0, size: 1.0 });
        assert_eq!(evicted.len(), 1);
        assert_eq!(evicted[0].video_id, 1);
        assert!(s.contains(0, 0) && s.contains(9, 0));
        assert!(s.insert_lru(CacheEntry { video_id: 5, variant_idx: 0, size: 4.0 }).is_empty());
        assert!(!s.contains(5, 0));
    }

    #[test]
    fn zero_capacity_places_nothing() {
        let c = VideoCatalog::<f64>::reference();
        let p = crate::workload::shuffle_popularity(1000, 2, 0.8, 1).unwrap();
        let d = uniform_variant_dist(4);
        for proc in [false, true] {
            let caches = plan_placement(&p, &c, 0.0, proc, &d).unwrap();
            assert!(caches.iter().all(CacheState::is_empty));
        }
    }

    #[test]
    fn full_capacity_places_everything() {
        let c = VideoCatalog::new(20, 2.0f64, 600.0, vec![0.82, 0.67, 0.55, 0.45]).unwrap();
        let p = crate::workload::shuffle_popularity(20, 3, 0.8, 4).unwrap();
        let d = uniform_variant_dist(4);
        for proc in [false, true] {
            let caches = plan_placement(&p, &c, library_size(&c), proc, &d).unwrap();
            for s in &caches {
                assert_eq!(s.len(), 80);
                assert_eq!(s.used(), library_size(&c));
            }
        }
    }

    #[test]
    fn processing_placement_tiny_instance() {
        // Three videos, capacity for two top variants. Greedy oracle: rank
        // videos by local probability and keep the 0.82 variant of the first
        // two.
        let c = VideoCatalog::new(3, 2.0f64, 600.0, vec![0.82, 0.67, 0.55, 0.45]).unwrap();
        let p = PopularityProfile::from_ranks(0.8, vec![vec![2, 0, 1]]).unwrap();
        let d = uniform_variant_dist(4);
        let top = variant_size(&c, 0);
        let caches = plan_placement(&p, &c, 2.0 * top, true, &d).unwrap();

        let mut oracle: Vec<usize> = (0..3).collect();
        oracle.sort_by(|&a, &b| p.prob(0, b).partial_cmp(&p.prob(0, a)).unwrap());
        let mut expected: Vec<(usize, usize)> = oracle[..2].iter().map(|&v| (v, 0)).collect();
        expected.sort_unstable();
        let got: Vec<(usize, usize)> = caches[0].entries().map(|e| (e.video_id, e.variant_idx)).collect();
        assert_eq!(got, expected);
        assert_eq!(got, vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn greedy_stops_at_first_misfit() {
        // Order for one BS, no processing, uniform popularity: (0,0) (0,1) ...
        // Capacity fits (0,0) and (0,1) but not (0,2)=size 1.1e6*600; smaller
        // items further down the list must not be skip-filled.
        let c = VideoCatalog::new(2, 2.0f64, 600.0, vec![0.82, 0.67, 0.55, 0.45]).unwrap();
        let p = PopularityProfile::from_ranks(0.0, vec![vec![0, 1]]).unwrap();
        let d = uniform_variant_dist(4);
        let cap = variant_size(&c, 0) + variant_size(&c, 1) + variant_size(&c, 3);
        let caches = plan_placement(&p, &c, cap, false, &d).unwrap();
        let got: Vec<(usize, usize)> = caches[0].entries().map(|e| (e.video_id, e.variant_idx)).collect();
        assert_eq!(got, vec![(0, 0), (0, 1)]);
    }
}
