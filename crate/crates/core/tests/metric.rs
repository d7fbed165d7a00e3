use hitlab_core::error::Error;
use hitlab_core::metric::*;
use hitlab_core::svf::SlowVarySpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    PointCloud::new(dim, coords, 1e-9, MetricDescriptor::Euclidean).unwrap()
}

/// Exhaustive minimum number of open r-balls centred at cloud points.
fn brute_cover(cloud: &PointCloud, r: f64) -> usize {
    let n = cloud.len();
    let masks: Vec<u32> = (0..n)
        .map(|c| {
            (0..n)
                .filter(|&j| cloud.metric.dist(cloud.point(c), cloud.point(j)) < r)
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();
    let full = (1u32 << n) - 1;
    (1..=n)
        .find(|&k| subsets(n, k).any(|s| s.iter().fold(0, |m, &c| m | masks[c]) == full))
        .unwrap()
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1 << n)).filter(move |m| m.count_ones() as usize == k).map(move |m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
}

#[test]
fn axioms_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let metrics = [
        (MetricDescriptor::Euclidean, 3),
        (MetricDescriptor::power_time(0.3).unwrap(), 1),
        (MetricDescriptor::power_time(0.9).unwrap(), 1),
        (MetricDescriptor::parabolic(0.5).unwrap(), 3),
    ];
    for (m, dim) in metrics {
        for _ in 0..1000 {
            let p: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
            let d = |a: &Vec<f64>, b: &Vec<f64>| eval_metric(&m, a, b).unwrap();
            assert_eq!(d(&p[0], &p[1]), d(&p[1], &p[0]));
            assert_eq!(d(&p[0], &p[0]), 0.0);
            assert!(d(&p[0], &p[2]) <= d(&p[0], &p[1]) + d(&p[1], &p[2]) + 1e-12);
        }
    }
}

#[test]
fn reg_var_time_respects_window() {
    let m = MetricDescriptor::from_spec(&MetricSpec::RegVarTime {
        hurst: 0.5,
        theta: SlowVarySpec::log_power(1.0),
    })
    .unwrap();
    let w = m.window().unwrap();
    assert!(w > 1e-6 && w <= 1.0, "{w}");
    if w < 1.0 {
        assert!(eval_metric(&m, &[0.0], &[(w * 1.5).min(1.0)]).is_err());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let mut t: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * w).collect();
        t.sort_by(f64::total_cmp);
        let d = |a: f64, b: f64| eval_metric(&m, &[a], &[b]).unwrap();
        assert_eq!(d(t[0], t[1]), d(t[1], t[0]));
        assert!(d(t[0], t[2]) <= d(t[0], t[1]) + d(t[1], t[2]) + 1e-12);
    }
}

#[test]
fn greedy_cover_close_to_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = random_cloud(&mut rng, 10, 2);
        let r = rng.gen_range(0.1..0.6);
        let g = covering_number(&c, r).unwrap();
        let b = brute_cover(&c, r);
        assert!(g >= b && g <= 2 * b, "greedy {g} exhaustive {b}");
    }
}

#[test]
fn packing_matches_exhaustive_maximal_set_on_grid() {
    // On an ordered line the greedy scan finds a maximum separated set.
    let grid = PointCloud::interval_grid(0.0, 1.0, 20, MetricDescriptor::Euclidean).unwrap();
    for r in [0.05, 0.1, 0.25, 0.3] {
        let best = (0u32..(1 << 21))
            .filter(|m| {
                let idx: Vec<usize> = (0..21).filter(|&i| m >> i & 1 == 1).collect();
                idx.windows(2).all(|w| grid.metric.dist(grid.point(w[0]), grid.point(w[1])) >= 2.0 * r)
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap();
        assert_eq!(packing_number(&grid, r).unwrap(), best, "r={r}");
    }
}

#[test]
fn sandwich_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let dim = 1 + case % 3;
        let c = random_cloud(&mut rng, 200, dim);
        let r = rng.gen_range(0.02..0.3);
        let n2r = covering_number(&c, 2.0 * r).unwrap();
        let p = packing_number(&c, r).unwrap();
        let nhalf = covering_number(&c, r / 2.0).unwrap();
        assert!(n2r <= p && p <= nhalf, "case {case}: {n2r} {p} {nhalf}");
    }
}

#[test]
fn interval_dimensions() {
    let grid = PointCloud::interval_grid(0.0, 1.0, 1000, MetricDescriptor::Euclidean).unwrap();
    let s = box_dimension(&grid, &log_radii(0.3, 0.002, 12)).unwrap();
    assert!((s.slope - 1.0).abs() < 0.05, "{}", s.slope);
    assert!(s.counts.windows(2).all(|w| w[1] >= w[0]));

    let fine = PointCloud::interval_grid(0.0, 1.0, 10_000, MetricDescriptor::power_time(0.5).unwrap()).unwrap();
    let s = box_dimension(&fine, &log_radii(0.35, 0.01, 12)).unwrap();
    assert!((s.slope - 2.0).abs() < 0.1, "{}", s.slope);
}

#[test]
fn product_dimension_is_subadditive() {
    // Graph of t ↦ (t, 0.5 t) is a segment; parabolic dimension 1/H.
    let n = 10_000;
    let coords: Vec<f64> = (0..=n).flat_map(|i| {
        let t = i as f64 / n as f64;
        [t, 0.5 * t]
    }).collect();
    let h = 0.5;
    let step = (1.0 / n as f64).powf(h);
    let cloud = PointCloud::new(2, coords, step, MetricDescriptor::parabolic(h).unwrap()).unwrap();
    let radii = log_radii(0.5, 0.0125, 10);
    let prod = box_dimension(&cloud, &radii).unwrap().slope;
    let time = PointCloud::interval_grid(0.0, 1.0, n, MetricDescriptor::power_time(h).unwrap()).unwrap();
    let t_slope = box_dimension(&time, &radii).unwrap().slope;
    let state = PointCloud::interval_grid(0.0, 0.5, n, MetricDescriptor::Euclidean).unwrap();
    let s_slope = box_dimension(&state, &log_radii(0.1, 0.001, 10)).unwrap().slope;
    assert!(prod <= t_slope + s_slope + 0.1, "{prod} {t_slope} {s_slope}");
}

#[test]
fn below_resolution_is_refused() {
    let grid = PointCloud::interval_grid(0.0, 1.0, 100, MetricDescriptor::Euclidean).unwrap();
    assert!(matches!(covering_number(&grid, 0.001), Err(Error::Precondition(_))));
    assert!(matches!(packing_number(&grid, 0.001), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_monotone_in_radius(seed in 0u64..1000, r in 0.01f64..0.4, f in 1.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_cloud(&mut rng, 120, 2);
        prop_assert!(covering_number(&c, r * f).unwrap() <= covering_number(&c, r).unwrap());
        prop_assert!(packing_number(&c, r * f).unwrap() <= packing_number(&c, r).unwrap());
    }

    #[test]
    fn sandwich_holds(seed in 0u64..1000, r in 0.01f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_cloud(&mut rng, 150, 1 + (seed % 2) as usize);
        let p = packing_number(&c, r).unwrap();
        prop_assert!(covering_number(&c, 2.0 * r).unwrap() <= p);
        prop_assert!(p <= covering_number(&c, r / 2.0).unwrap());
    }
}
