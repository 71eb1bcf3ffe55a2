use std::collections::BTreeSet;

use mecsim_core::edge_cache::{lookup, placement_order, plan_placement, variant_size, CacheEntry, CacheState, LookupOutcome};
use mecsim_core::interference::{
    assign_layers, cancel_intra_cluster, drop_stations, dbm_to_watts, CellLayout, ChannelModel, ClassifyMode, Layer,
};
use mecsim_core::orchestration::{collab_gain, estimate_local, estimate_mdc, estimate_mec, ResourceNode, TaskBatch};
use mecsim_core::transcode::{pick_transcoder, Processor};
use mecsim_core::workload::{shuffle_popularity, uniform_variant_dist, zipf_pmf, VideoCatalog};
use proptest::prelude::*;

fn catalog(n: usize) -> VideoCatalog<f64> {
    VideoCatalog::new(n, 2.0, 600.0, vec![0.82, 0.67, 0.55, 0.45]).unwrap()
}

fn held(s: &CacheState<f64>) -> BTreeSet<(usize, usize)> {
    s.entries().map(|e| (e.video_id, e.variant_idx)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zipf_is_a_nonincreasing_pmf(n in 1usize..2000, alpha in 0.0f64..2.5) {
        let p = zipf_pmf::<f64>(n, alpha).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn placement_is_a_prefix_within_capacity(
        n in 1usize..40,
        seed in any::<u64>(),
        fraction in 0.0f64..1.2,
        processing in any::<bool>(),
    ) {
        let cat = catalog(n);
        let profile = shuffle_popularity(n, 3, 0.8, seed).unwrap();
        let dist = uniform_variant_dist::<f64>(4);
        let lib: f64 = (0..4).map(|q| variant_size(&cat, q)).sum::<f64>() * n as f64;
        let caches = plan_placement(&profile, &cat, fraction * lib, processing, &dist).unwrap();
        for (bs, c) in caches.iter().enumerate() {
            prop_assert!(c.used() <= c.capacity());
            let order = placement_order(&profile, &cat, bs, processing, &dist);
            let prefix: BTreeSet<_> = order[..c.len()].iter().copied().collect();
            prop_assert_eq!(held(c), prefix);
            if c.len() < order.len() {
                let (v, q) = order[c.len()];
                prop_assert!(!c.fits(variant_size(&cat, q)), "stopped early before {:?}", (v, q));
            }
        }
    }

    #[test]
    fn placement_grows_with_capacity(n in 1usize..30, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let cat = catalog(n);
        let profile = shuffle_popularity(n, 2, 0.8, seed).unwrap();
        let dist = uniform_variant_dist::<f64>(4);
        let lib = 2.988e9 * n as f64;
        for processing in [false, true] {
            let small = plan_placement(&profile, &cat, lo * lib, processing, &dist).unwrap();
            let big = plan_placement(&profile, &cat, hi * lib, processing, &dist).unwrap();
            for (s, l) in small.iter().zip(&big) {
                prop_assert!(held(s).is_subset(&held(l)));
            }
        }
    }

    #[test]
    fn lookup_only_offers_higher_bitrates(items in prop::collection::btree_set((0usize..3, 0usize..4), 0..12), v in 0usize..3, q in 0usize..4) {
        let cat = catalog(3);
        let mut s = CacheState::new(1e13);
        for &(vi, qi) in &items {
            s.insert(CacheEntry { video_id: vi, variant_idx: qi, size: variant_size(&cat, qi) });
        }
        match lookup(&s, v, q) {
            LookupOutcome::LocalExact => prop_assert!(items.contains(&(v, q))),
            LookupOutcome::LocalHigher(src) => {
                prop_assert!(src < q && items.contains(&(v, src)) && !items.contains(&(v, q)));
                prop_assert!(((src + 1)..q).all(|m| !items.contains(&(v, m))));
            }
            LookupOutcome::Miss => prop_assert!((0..=q).all(|m| !items.contains(&(v, m)))),
        }
    }

    #[test]
    fn transcoder_choice_ignores_a_common_offset(a in 0u32..40, b in 0u32..40, c in 0u32..40) {
        let (a, b, c) = (a as f64, b as f64, c as f64);
        prop_assert_eq!(pick_transcoder(a, b), pick_transcoder(a + c, b + c));
    }

    #[test]
    fn processor_never_exceeds_capacity(loads in prop::collection::vec(0.1f64..5.0, 1..50), cap in 0.0f64..20.0) {
        let mut p = Processor::new(cap);
        for (i, &l) in loads.iter().enumerate() {
            let admitted = p.admit(l, i as f64, 1e6).is_some();
            prop_assert!(p.in_use() <= cap * (1.0 + 1e-12));
            if !admitted {
                prop_assert!(p.in_use() + l > cap);
            }
        }
    }

    #[test]
    fn layer_two_grows_with_threshold_and_radius(seed in any::<u64>(), t1 in -10.0f64..20.0, t2 in -10.0f64..20.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
        let sites = CellLayout::hex_positions(1, 1000.0);
        let tx = dbm_to_watts(23.0);
        let count = |layout: &CellLayout<f64>, ch: &ChannelModel<f64>, mode| {
            let ms = drop_stations(layout, tx, seed, 0);
            assign_layers(&ms, layout, ch, mode).iter().filter(|a| a.layer == Layer::Layer2).count()
        };
        let layout = CellLayout::new(sites.clone(), 577.0, 400.0).unwrap();
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let mut ch = ChannelModel::reference();
        ch.cqi_threshold_db = lo;
        let n_lo = count(&layout, &ch, ClassifyMode::Cqi);
        ch.cqi_threshold_db = hi;
        prop_assert!(n_lo <= count(&layout, &ch, ClassifyMode::Cqi));

        let ch = ChannelModel::reference();
        let small = CellLayout::new(sites.clone(), 577.0, 577.0 * f1.min(f2)).unwrap();
        let large = CellLayout::new(sites, 577.0, 577.0 * f1.max(f2)).unwrap();
        // Station drops depend only on the sites and cell radius.
        prop_assert!(count(&small, &ch, ClassifyMode::Geometric) <= count(&large, &ch, ClassifyMode::Geometric));
    }

    #[test]
    fn cancellation_never_hurts(seed in any::<u64>(), residual in 0.0f64..1.0, threshold in -5.0f64..15.0) {
        let layout = CellLayout::new(CellLayout::hex_positions(1, 1000.0), 577.0, 460.0).unwrap();
        let ms = drop_stations(&layout, dbm_to_watts(23.0), seed, 3);
        let mut ch = ChannelModel::reference();
        ch.cqi_threshold_db = threshold;
        let pre = assign_layers(&ms, &layout, &ch, ClassifyMode::Cqi);
        ch.residual = residual;
        let post = cancel_intra_cluster(&pre, &ms, &layout, &ch);
        ch.residual = 0.0;
        let ideal = cancel_intra_cluster(&pre, &ms, &layout, &ch);
        for ((a, b), c) in pre.iter().zip(&post).zip(&ideal) {
            prop_assert!(b.post_sinr_db >= a.pre_sinr_db);
            prop_assert!(c.post_sinr_db >= b.post_sinr_db - 1e-9);
            if a.layer == Layer::Layer1 {
                prop_assert_eq!(b.post_sinr_db, a.pre_sinr_db);
            }
        }
    }

    #[test]
    fn stations_sit_in_their_own_cell(seed in any::<u64>(), snap in 0usize..100) {
        let layout = CellLayout::new(CellLayout::hex_positions(2, 1000.0), 577.0, 460.0).unwrap();
        let ms = drop_stations(&layout, 0.2, seed, snap);
        prop_assert_eq!(ms.len(), 19);
        for (cell, m) in ms.iter().enumerate() {
            prop_assert_eq!(m.serving_bs, cell);
            prop_assert!(m.position.distance(&layout.bs_positions[cell]) <= 577.0 + 1e-9);
        }
    }

    #[test]
    fn identical_servers_split_evenly(n in 1usize..200, k in 1usize..5, work in 0.5f64..50.0) {
        let batch = TaskBatch::new(n, 3.7e5, work).unwrap();
        let servers = vec![ResourceNode::edge(8.0, 1.0, 0.0); 4];
        let one = estimate_mec(&batch, &servers, 1).unwrap().makespan;
        let many = estimate_mec(&batch, &servers, k).unwrap().makespan;
        let want = n.div_ceil(k) as f64 / n as f64;
        prop_assert!((many / one - want).abs() < 1e-12);
        let gain = collab_gain(&batch, &servers, k).unwrap();
        prop_assert!((0.0..1.0).contains(&gain));
    }

    #[test]
    fn long_lived_peers_follow_round_robin(n in 1usize..60, peers in 1usize..8, seed in any::<u64>()) {
        let batch = TaskBatch::new(n, 3.7e5, 16.0).unwrap();
        let nodes = vec![ResourceNode::peer(1.0, 1.0, 1e9, 1.0); peers];
        let r = estimate_mdc(&batch, &nodes, seed).unwrap();
        let per_task = 0.37 + 16.0;
        prop_assert_eq!(r.reassignments, 0);
        prop_assert!((r.makespan - n.div_ceil(peers) as f64 * per_task).abs() < 1e-9);
        let local = estimate_local(&batch, &ResourceNode::local(1.0)).unwrap();
        prop_assert!((local.makespan - 16.0 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn churn_never_loses_work(n in 1usize..40, mean in 10.0f64..200.0, seed in any::<u64>()) {
        let batch = TaskBatch::new(n, 3.7e5, 16.0).unwrap();
        let nodes = vec![ResourceNode::peer(1.0, 1.0, mean, 5.0); 5];
        if let Ok(r) = estimate_mdc(&batch, &nodes, seed) {
            prop_assert!((r.completed_work - batch.total_work()).abs() < 1e-9);
            prop_assert!(r.makespan >= n.div_ceil(5) as f64 * 16.37 - 1e-9);
        }
    }
}
