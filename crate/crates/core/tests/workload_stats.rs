use mecsim_core::workload::{generate_trace, shuffle_popularity, uniform_variant_dist, zipf_pmf, VideoCatalog};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ranks(n: usize, rate_per_min: f64, horizon: f64, seed: u64) -> (Vec<usize>, Vec<f64>) {
    let catalog = VideoCatalog::<f64>::reference();
    let profile = shuffle_popularity(n, 1, 0.8, seed).unwrap();
    let trace = generate_trace(&profile, &catalog, rate_per_min, horizon, &uniform_variant_dist(4), seed).unwrap();
    let ranks = trace.requests.iter().map(|r| profile.rank(0, r.video_id)).collect();
    (ranks, profile.pmf().to_vec())
}

#[test]
fn sampled_ranks_pass_chi_square_at_one_percent() {
    // ~1e5 requests at one BS.
    let (ranks, pmf) = ranks(1000, 100.0, 60_000.0, 21);
    let n = ranks.len() as f64;
    assert!(n >= 9.5e4, "only {n} samples");
    let mut observed = vec![0.0; pmf.len()];
    for r in ranks {
        observed[r] += 1.0;
    }
    // Pool the tail until every cell expects at least 5 samples.
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(&pmf) {
        o_acc += o;
        e_acc += p * n;
        if e_acc >= 5.0 {
            stat += (o_acc - e_acc) * (o_acc - e_acc) / e_acc;
            cells += 1;
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        stat += (o_acc - e_acc) * (o_acc - e_acc) / e_acc;
        cells += 1;
    }
    let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} >= {critical} with {cells} cells");
}

#[test]
fn empirical_rank_cdf_converges() {
    // ~1e6 requests; Kolmogorov-Smirnov distance on the discrete CDF.
    let (ranks, pmf) = ranks(1000, 1000.0, 60_000.0, 5);
    let n = ranks.len() as f64;
    assert!(n >= 9.5e5);
    let mut counts = vec![0.0; pmf.len()];
    for r in ranks {
        counts[r] += 1.0;
    }
    let (mut emp, mut theo, mut ks) = (0.0, 0.0, 0.0f64);
    for (c, p) in counts.iter().zip(&pmf) {
        emp += c / n;
        theo += p;
        ks = ks.max((emp - theo).abs());
    }
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn pmf_matches_direct_sum() {
    for (n, alpha) in [(1usize, 0.8), (7, 0.0), (1000, 0.8), (5000, 1.2)] {
        let p = zipf_pmf(n, alpha).unwrap();
        let norm: f64 = (1..=n).map(|i| (i as f64).powf(-alpha)).sum();
        for (i, pi) in p.iter().enumerate() {
            let expected = ((i + 1) as f64).powf(-alpha) / norm;
            assert!((pi - expected).abs() <= 1e-13 * expected);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn traces_are_reproducible() {
    let catalog = VideoCatalog::<f64>::reference();
    let profile = shuffle_popularity(1000, 5, 0.8, 77).unwrap();
    let d = uniform_variant_dist(4);
    let a = generate_trace(&profile, &catalog, 2.0, 86_400.0, &d, 77).unwrap();
    let b = generate_trace(&profile, &catalog, 2.0, 86_400.0, &d, 77).unwrap();
    assert_eq!(a, b);
    let c = generate_trace(&profile, &catalog, 2.0, 86_400.0, &d, 78).unwrap();
    assert_ne!(a, c);
}

#[test]
fn adding_base_stations_keeps_existing_streams() {
    let catalog = VideoCatalog::<f64>::reference();
    let d = uniform_variant_dist(4);
    let small = shuffle_popularity(1000, 3, 0.8, 4).unwrap();
    let large = shuffle_popularity(1000, 5, 0.8, 4).unwrap();
    for bs in 0..3 {
        assert_eq!(small.videos_by_rank(bs), large.videos_by_rank(bs));
    }
    let ta = generate_trace(&small, &catalog, 2.0, 7200.0, &d, 4).unwrap();
    let tb = generate_trace(&large, &catalog, 2.0, 7200.0, &d, 4).unwrap();
    let only: Vec<_> = tb.requests.iter().filter(|r| r.bs_id < 3).copied().collect();
    assert_eq!(ta.requests, only);
}

#[test]
fn variant_mix_follows_configuration() {
    let catalog = VideoCatalog::<f64>::reference();
    let profile = shuffle_popularity(1000, 1, 0.8, 2).unwrap();
    let d = vec![0.7, 0.1, 0.1, 0.1];
    let t = generate_trace(&profile, &catalog, 100.0, 60_000.0, &d, 2).unwrap();
    let share = t.requests.iter().filter(|r| r.variant_idx == 0).count() as f64 / t.len() as f64;
    let sigma = (0.7f64 * 0.3 / t.len() as f64).sqrt();
    assert!((share - 0.7).abs() < 4.0 * sigma, "share {share}");
}
