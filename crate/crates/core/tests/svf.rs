use std::f64::consts::{E, PI};

use hitlab_core::svf::*;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn c_half_against_closed_form() {
    // (4/π) ∫ sin²(s/2)/s² ds with the integral equal to π/4.
    let c = compute_c_alpha(0.5, 1e-10).unwrap();
    assert!((c - (4.0 / PI) * (PI / 4.0)).abs() < 1e-8, "{c}");
}

#[test]
fn brownian_increment_variance_is_linear() {
    let one = SlowVarySpec::constant(1.0);
    for h in [0.1, 0.5, 1.0] {
        let v = delta_sq_quadrature(0.5, &one, h, 1e-9).unwrap();
        assert!(rel(v, h) < 1e-6, "h={h}: {v}");
    }
}

#[test]
fn c_alpha_equals_unit_lag_variance() {
    for alpha in [0.25, 0.75] {
        let c = compute_c_alpha(alpha, 1e-8).unwrap();
        let d = delta_sq_quadrature(alpha, &SlowVarySpec::constant(1.0), 1.0, 1e-8).unwrap();
        assert!(rel(c, d) < 1e-7, "alpha={alpha}: {c} vs {d}");
    }
}

#[test]
fn c_alpha_matches_gamma_function_form() {
    // ∫(1 - cos s) s^{-1-a} ds = -Γ(-a) cos(πa/2); at a = 1/2 this is sqrt(2π).
    let c = compute_c_alpha(0.25, 1e-10).unwrap();
    let oracle = 2.0 / PI * (2.0 * PI).sqrt();
    assert!(rel(c, oracle) < 1e-8, "{c} vs {oracle}");
}

#[test]
fn scaling_theta_scales_variance() {
    let one = SlowVarySpec::constant(1.0);
    let two = SlowVarySpec::constant(2.0);
    let a = delta_sq_quadrature(0.75, &one, 0.5, 1e-8).unwrap();
    let b = delta_sq_quadrature(0.75, &two, 0.5, 1e-8).unwrap();
    assert!(rel(b, a / 2.0) < 2e-8);
    let c5 = compute_c_alpha(0.5, 1e-6).unwrap();
    let d = delta_sq_quadrature(0.5, &SlowVarySpec::constant(5.0), 1e-6, 1e-6).unwrap();
    assert!(rel(d / 1e-6, c5 / 5.0) < 2e-6);
}

#[test]
fn small_lag_ratio_tends_to_one() {
    let one = SlowVarySpec::constant(1.0);
    for h in [1e-2, 1e-4, 1e-6] {
        let v = delta_sq_quadrature(0.5, &one, h, 1e-8).unwrap();
        assert!(rel(v / h, 1.0) < 1e-6);
    }
}

#[test]
fn increment_table_invariants() {
    for theta in [SlowVarySpec::constant(1.0), SlowVarySpec::log_power(1.0)] {
        let t = IncrementVariance::build(0.5, theta, 1e-8).unwrap();
        assert_eq!(t.delta_sq(0.0), 0.0);
        let nodes: Vec<_> = t.table().collect();
        assert_eq!(nodes.len(), TABLE_POINTS);
        assert!(nodes.windows(2).all(|w| w[1].1 > w[0].1));
        for (h, r) in t.asymptotic_ratios(3) {
            assert!((r - 1.0).abs() < 1e-8 + 0.05, "h={h}: ratio {r}");
        }
        // Interpolation between nodes against direct quadrature.
        for h in [3.3e-5, 0.0123, 0.77] {
            let direct = delta_sq_quadrature(0.5, &theta, h, 1e-10).unwrap();
            assert!(rel(t.delta_sq(h), direct) < 1e-6, "h={h}");
        }
        // Monotone on a fine off-grid sweep, including below the table.
        let mut prev = 0.0;
        for k in 1..4000 {
            let h = 10f64.powf(-8.0 + 8.0 * k as f64 / 4000.0);
            let v = t.delta_sq(h);
            assert!(v > prev);
            prev = v;
        }
    }
}

#[test]
fn epsilon_vanishes_at_infinity() {
    let far = f64::MAX / 10.0;
    for spec in [SlowVarySpec::log_power(1.0), SlowVarySpec::log_power(3.0), SlowVarySpec::exp_log_power(0.3)] {
        let mut last = f64::INFINITY;
        let mut x = spec.x0;
        while x < far / 2.0 {
            let e = spec.epsilon(x).abs();
            assert!(e <= last + 1e-15);
            last = e;
            x *= 2.0;
        }
        assert!(spec.epsilon(x).abs() < 0.01, "{spec:?}: {}", spec.epsilon(x));
        assert!(spec.eval(x).unwrap() > 0.0);
    }
    // Slower family: still decreasing, bound not reached in double range.
    let slow = SlowVarySpec::exp_log_power(0.5);
    assert!(slow.epsilon(1e300).abs() < slow.epsilon(1e10).abs());
}

#[test]
fn slow_part_at_zero_is_dominated_by_powers() {
    let v = RegVarSpec::at_zero(0.5, SlowVarySpec::log_power(2.0));
    let tau = 0.1;
    let xs: [f64; 3] = [1e-20, 1e-60, 1e-200];
    let up: Vec<f64> = xs.iter().map(|&x| x.powf(tau) * v.slow_part(x)).collect();
    let down: Vec<f64> = xs.iter().map(|&x| x.powf(-tau) * v.slow_part(x)).collect();
    assert!(up.windows(2).all(|w| w[1] < w[0]) && up[2] < 1e-15);
    assert!(down.windows(2).all(|w| w[1] > w[0]) && down[2] > 1e15);
}

#[test]
fn drift_modulus_trends() {
    let one = ThetaModel::new(0.5, SlowVarySpec::constant(1.0)).unwrap();
    let log = ThetaModel::new(0.5, SlowVarySpec::log_power(1.0)).unwrap();
    let rs: Vec<f64> = (1..12).map(|k| 10f64.powi(-k)).collect();
    // r^{0.1} log^{1/2}(1/r) peaks at r = e^{-5}; sample beyond it.
    let small: Vec<f64> = (1..12).map(|k| 10f64.powi(-4 * k)).collect();
    let ratio: Vec<f64> = small.iter().map(|&r| one.drift_modulus(r).unwrap() / r.powf(0.4)).collect();
    assert!(ratio.windows(2).all(|w| w[1] < w[0]));
    assert!(ratio.last().unwrap() < &0.02);
    let growth: Vec<f64> = rs.iter().map(|&r| log.drift_modulus(r).unwrap() / r.sqrt()).collect();
    assert!(growth.windows(2).all(|w| w[1] > w[0]));
    let e1 = (-1.0f64).exp();
    assert!((one.drift_modulus(e1).unwrap() - E.powf(-0.5)).abs() < 1e-9);
}

#[test]
fn subadditivity_on_window() {
    let v = RegVarSpec::at_zero(0.5, SlowVarySpec::log_power(1.0));
    let report = check_concavity_window(&v).unwrap();
    let x2 = report.x2.unwrap();
    let c = 0.5;
    let x3 = x2 / 100.0;
    let r0 = subadditivity_radius(&v, x3, c).expect("radius");
    assert!(r0 > 0.0 && r0 < x3);
    let n = 300;
    let grid: Vec<f64> = (0..n).map(|i| x3 + (x2 - x3) * i as f64 / (n - 1) as f64).collect();
    let mut checked = 0;
    for (i, &s) in grid.iter().enumerate() {
        for &t in &grid[i + 1..] {
            if t - s >= r0 {
                break;
            }
            assert!(v.eval(t) - v.eval(s) <= c * v.eval(t - s), "s={s} t={t}");
            checked += 1;
        }
        // Pairs closer than the grid spacing.
        for k in 1..20 {
            let t = s + r0 * k as f64 / 20.0;
            if t <= x2 {
                assert!(v.eval(t) - v.eval(s) <= c * v.eval(t - s) * (1.0 + 1e-12));
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn both_epsilon_conditions_are_reported() {
    let v = RegVarSpec::at_zero(0.5, SlowVarySpec::log_power(1.0));
    let r = check_concavity_window(&v).unwrap();
    assert!(r.x_epsilon_prime_near_zero > 0.0 && r.x_epsilon_prime_near_zero < 1e-3);
    assert!(r.x_epsilon_prime_near_infinity < 1e-5);
    assert!(!r.epsilon.is_empty() && !r.x_epsilon_prime.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn variance_linear_in_inverse_theta(c in 0.1f64..10.0, h in 1e-4f64..1.0, alpha in 0.2f64..0.8) {
        let base = SlowVarySpec::log_power(1.0);
        let tol = 1e-8;
        let a = delta_sq_quadrature(alpha, &base, h, tol).unwrap();
        let b = delta_sq_quadrature(alpha, &base.scaled(c), h, tol).unwrap();
        prop_assert!(rel(b, a / c) <= 2.0 * tol);
    }

    #[test]
    fn variance_increasing_in_lag(h in 1e-5f64..0.5, f in 1.01f64..2.0) {
        let th = SlowVarySpec::exp_log_power(0.5);
        let a = delta_sq_quadrature(0.6, &th, h, 1e-8).unwrap();
        let b = delta_sq_quadrature(0.6, &th, h * f, 1e-8).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn slowly_varying_ratio(lambda in 0.5f64..2.0, k in 20i32..200) {
        for spec in [SlowVarySpec::log_power(2.0), SlowVarySpec::exp_log_power(0.3)] {
            let x = 10f64.powi(k);
            let r = spec.eval(lambda * x).unwrap() / spec.eval(x).unwrap();
            prop_assert!((r - 1.0).abs() < 0.05);
        }
    }
}
