use hitlab_core::metric::{log_radii, packing_number, MetricDescriptor, PointCloud};
use hitlab_core::potential::*;
use hitlab_core::sets::{build_cantor_lambda, build_nu_pair, certify_ahlfors};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn energy(cloud: &PointCloud, k: &RadialKernel, w: &[f64]) -> f64 {
    let n = cloud.len();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += w[i] * w[j] * k.eval(cloud.metric.dist(cloud.point(i), cloud.point(j)));
        }
    }
    e
}

/// Simplex grid search with step 1/50, then pairwise mass transfers with
/// shrinking step.
fn brute_min_energy(cloud: &PointCloud, k: &RadialKernel) -> f64 {
    let n = cloud.len();
    let m = 50usize;
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut counts = vec![0usize; n];
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, f);
        }
    }
    rec(0, m, &mut counts, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&x| x as f64 / m as f64).collect();
        let e = energy(cloud, k, &w);
        if e < best.0 {
            best = (e, w);
        }
    });
    let (mut e, mut w) = best;
    let mut step = 1.0 / m as f64;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || w[j] < step {
                    continue;
                }
                let mut t = w.clone();
                t[i] += step;
                t[j] -= step;
                let et = energy(cloud, k, &t);
                if et < e {
                    e = et;
                    w = t;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    e
}

#[test]
fn frank_wolfe_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..25 {
        let n = 2 + case % 5;
        let dim = 1 + case % 2;
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        let cloud = PointCloud::new(dim, coords, 1e-3, MetricDescriptor::Euclidean);
        let Ok(cloud) = cloud else { continue };
        let alpha = rng.gen_range(0.2..1.5);
        let r0 = cloud.min_separation().min(0.05);
        let cloud = cloud.with_metric(MetricDescriptor::Euclidean, r0).unwrap();
        let k = RadialKernel::bessel_riesz(alpha, r0).unwrap();
        let fw = capacity(&cloud, &k, 1e-10, 100_000).unwrap();
        let brute = brute_min_energy(&cloud, &k);
        assert!(((fw.energy - brute) / brute).abs() < 1e-3, "case {case}: {} vs {brute}", fw.energy);
        assert!(fw.converged);
        assert!((fw.capacity * fw.energy - 1.0).abs() < 1e-15);
    }
}

#[test]
fn two_point_closed_form() {
    for (d, alpha, r0) in [(0.5, 1.0, 0.01), (0.3, 0.5, 0.1), (0.9, 2.0, 0.2)] {
        let c = PointCloud::new(1, vec![0.1, 0.1 + d], r0, MetricDescriptor::Euclidean).unwrap();
        let k = RadialKernel::bessel_riesz(alpha, r0).unwrap();
        let res = capacity(&c, &k, 1e-12, 1000).unwrap();
        let exact = 0.5 * r0.powf(-alpha) + 0.5 * f64::powf(d, -alpha);
        assert!((res.energy - exact).abs() <= 1e-10 * exact);
        assert!((res.weights[0] - 0.5).abs() < 1e-10);
    }
}

#[test]
fn uniform_interval_energy() {
    let n = 2048;
    let c = PointCloud::interval_grid(0.0, 1.0, n, MetricDescriptor::Euclidean).unwrap();
    let mu = WeightedMeasure::uniform(c);
    let e = energy_of_measure(&mu, &RadialKernel::bessel_riesz(0.5, 2f64.powi(-11)).unwrap()).unwrap();
    assert!((e / (8.0 / 3.0) - 1.0).abs() < 0.02, "{e}");
}

#[test]
fn single_point_capacity_scales_with_truncation() {
    let mut pts = Vec::new();
    for k in 4..12 {
        let r0 = 2f64.powi(-k);
        let c = PointCloud::new(1, vec![0.3], r0, MetricDescriptor::Euclidean).unwrap();
        let kern = RadialKernel::bessel_riesz(0.7, r0).unwrap();
        let mu = WeightedMeasure::uniform(c.clone());
        assert!((energy_of_measure(&mu, &kern).unwrap() - r0.powf(-0.7)).abs() < 1e-9);
        let cap = capacity(&c, &kern, 1e-9, 10).unwrap().capacity;
        pts.push((r0.ln(), cap.ln()));
    }
    let (slope, _) = hitlab_core::metric::least_squares(&pts);
    assert!((slope - 0.7).abs() < 0.05);
}

#[test]
fn subset_and_order_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let coords: Vec<f64> = (0..60).map(|_| rng.gen::<f64>() * 0.7).collect();
    let full = PointCloud::new(2, coords.clone(), 1e-3, MetricDescriptor::Euclidean).unwrap();
    let r0 = full.min_separation().min(0.01);
    let full = full.with_metric(MetricDescriptor::Euclidean, r0).unwrap();
    let sub = PointCloud::new(2, coords[..30].to_vec(), r0, MetricDescriptor::Euclidean).unwrap();
    let tol = 1e-8;
    for alpha in [0.3, 1.0, 1.7] {
        let k = RadialKernel::bessel_riesz(alpha, r0).unwrap();
        let cs = capacity(&sub, &k, tol, 100_000).unwrap().capacity;
        let cf = capacity(&full, &k, tol, 100_000).unwrap().capacity;
        assert!(cs <= cf * (1.0 + tol), "{cs} {cf}");
    }
    // Diameter ≤ 1: larger index, larger kernel, smaller capacity.
    let c1 = capacity(&full, &RadialKernel::bessel_riesz(0.5, r0).unwrap(), tol, 100_000).unwrap().capacity;
    let c2 = capacity(&full, &RadialKernel::bessel_riesz(1.2, r0).unwrap(), tol, 100_000).unwrap().capacity;
    assert!(c2 <= c1 * (1.0 + tol));
}

#[test]
fn energy_invariant_under_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 40;
    let coords: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let c = PointCloud::new(1, coords.clone(), 1e-9, MetricDescriptor::Euclidean).unwrap();
    let k = RadialKernel::bessel_riesz(0.6, c.min_separation()).unwrap();
    let e1 = energy_of_measure(&WeightedMeasure::new(c.clone(), w.clone()).unwrap(), &k).unwrap();
    let perm: Vec<usize> = (0..n).rev().collect();
    let c2 = PointCloud::new(1, perm.iter().map(|&i| coords[i]).collect(), 1e-9, MetricDescriptor::Euclidean).unwrap();
    let w2: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
    let s2: f64 = w2.iter().sum();
    let w2: Vec<f64> = w2.iter().map(|x| x / s2).collect();
    let e2 = energy_of_measure(&WeightedMeasure::new(c2, w2).unwrap(), &k).unwrap();
    assert!((e1 - e2).abs() < 1e-12 * e1);
}

#[test]
fn hausdorff_examples() {
    let grid = PointCloud::interval_grid(0.0, 1.0, 2000, MetricDescriptor::Euclidean).unwrap();
    let ladder = hausdorff_ladder(&grid, 1.0, &[0.1, 0.03, 0.01, 0.003]).unwrap();
    for (_, v) in &ladder.rungs {
        assert!((v - 1.0).abs() < 0.15, "{ladder:?}");
    }

    let t = build_cantor_lambda(1.0 / 3.0, 12).unwrap();
    let c = t.leaf_cloud(MetricDescriptor::Euclidean).unwrap();
    let beta = 2f64.ln() / 3f64.ln();
    let deltas: Vec<f64> = (3..10).map(|k| 3f64.powi(-k)).collect();
    let ladder = hausdorff_ladder(&c, beta, &deltas).unwrap();
    let vals: Vec<f64> = ladder.rungs.iter().map(|r| r.1).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!(lo > 0.3 && hi / lo < 1.5, "{vals:?}");
}

#[test]
fn hausdorff_of_null_set_shrinks_with_depth() {
    // Level-K construction intervals give Σ(2 l_K)^α = 2^K (2 l_K)^α, which
    // decreases to zero; the greedy cover at δ = l_K tracks it.
    let mut prev: Option<f64> = None;
    for k in [6, 8, 10] {
        let (e1, _) = build_nu_pair(0.5, 2.0, 0.05, k).unwrap();
        let level_sum = (1u64 << k) as f64 * (2.0 * e1.leaf_length()).powf(0.5);
        let c = e1.leaf_cloud(MetricDescriptor::Euclidean).unwrap();
        let h = hausdorff_upper(&c, 0.5, e1.leaf_length()).unwrap();
        assert!(h <= level_sum * 1.0001, "{h} vs {level_sum}");
        if let Some(p) = prev {
            assert!(h < 0.8 * p, "K={k}: {h} vs {p}");
        }
        prev = Some(h);
    }
}

#[test]
fn frostman_regimes_on_interval() {
    let grid = PointCloud::interval_grid(0.0, 1.0, 10_000, MetricDescriptor::Euclidean).unwrap();
    let mu = WeightedMeasure::uniform(grid);
    let radii = log_radii(0.1, 1e-3, 8);
    let band = |f: &dyn Fn(f64) -> f64| {
        let v: Vec<f64> = radii.iter().map(|&r| f(r)).collect();
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let i = |theta: f64, r: f64| frostman_integral(&mu, theta, r).unwrap();
    assert!(band(&|r| i(0.25, r)) < 3.0);
    assert!(band(&|r| i(1.0, r) / (1.0 - r.ln())) < 3.0);
    assert!(band(&|r| i(1.5, r) * r.powf(0.5)) < 3.0);
    // The power regime does blow up without the rescaling.
    assert!(band(&|r| i(1.5, r)) > 5.0);
}

#[test]
fn product_capacity_bounds() {
    // Interval (γ = 1) times a planar grid, α = 2.
    let g1 = WeightedMeasure::uniform(PointCloud::interval_grid(0.0, 1.0, 8, MetricDescriptor::Euclidean).unwrap());
    let mut pts = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            let (x, y) = (i as f64 * 0.125 - 0.25, j as f64 * 0.125 - 0.25);
            if x * x + y * y <= 0.0625 + 1e-12 {
                pts.extend([x, y]);
            }
        }
    }
    let g2 = PointCloud::new(2, pts, 0.125, MetricDescriptor::Euclidean).unwrap();
    let rep = verify_product_capacity(&g1, 1.0, &g2, 2.0, 1e-8).unwrap();
    assert!(rep.bounded, "{rep:?}");
    assert!(rep.feasible_energy <= rep.bound_energy);

    // Single point factor: the product is an isometric copy of G2.
    let p = WeightedMeasure::uniform(PointCloud::new(1, vec![0.5], 0.125, MetricDescriptor::Euclidean).unwrap());
    let rep = verify_product_capacity(&p, 0.0, &g2, 2.0, 1e-10).unwrap();
    assert!((rep.capacity_product / rep.capacity_g2 - 1.0).abs() < 1e-6, "{rep:?}");

    // Cantor factor against a two-point set, across depths.
    let two = PointCloud::new(2, vec![0.0, 0.0, 0.6, 0.0], 0.01, MetricDescriptor::Euclidean).unwrap();
    let gamma = 2f64.ln() / 3f64.ln();
    let mut ratios = Vec::new();
    for k in 6..=10 {
        let t = build_cantor_lambda(1.0 / 3.0, k).unwrap();
        let c = t.leaf_cloud(MetricDescriptor::Euclidean).unwrap();
        let rep = verify_product_capacity(&WeightedMeasure::uniform(c), gamma, &two, 1.0, 1e-8).unwrap();
        assert!(rep.bounded);
        ratios.push(rep.ratio);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!(hi / lo < 5.0, "{ratios:?}");
}

#[test]
fn packing_bound_for_ahlfors_tree() {
    let t = build_cantor_lambda(1.0 / 3.0, 10).unwrap();
    let gamma = 2f64.ln() / 3f64.ln();
    let radii = log_radii(t.lengths[1], t.leaf_length(), 12);
    let rep = certify_ahlfors(&t, gamma, &radii, 10.0, 1024).unwrap();
    assert!(rep.pass);
    let c_gamma = rep.ratio_band.1.max(1.0 / rep.ratio_band.0);
    let cloud = t.leaf_cloud(MetricDescriptor::Euclidean).unwrap();
    for &r in &radii {
        let p = packing_number(&cloud, r).unwrap() as f64;
        assert!(p * r.powf(gamma) <= c_gamma, "r={r}: {}", p * r.powf(gamma));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frank_wolfe_never_worse_than_uniform(seed in 0u64..10_000, alpha in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..80).map(|_| rng.gen::<f64>()).collect();
        let c = PointCloud::new(2, coords, 1e-9, MetricDescriptor::Euclidean).unwrap();
        let r0 = c.min_separation();
        let c = c.with_metric(MetricDescriptor::Euclidean, r0).unwrap();
        let k = RadialKernel::bessel_riesz(alpha, r0).unwrap();
        let res = capacity(&c, &k, 1e-6, 50_000).unwrap();
        let uniform = energy_of_measure(&WeightedMeasure::uniform(c.clone()), &k).unwrap();
        prop_assert!(res.energy <= uniform * (1.0 + 1e-12));
        prop_assert!(res.duality_gap >= 0.0);
        prop_assert!(res.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((res.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
