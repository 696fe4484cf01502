use std::f64::consts::E;

use lbo_core::design::bounds::{best_central_step, best_forward_step, rbf_relaxed_axis_trace};
use lbo_core::design::{
    alpha_trace, bound_matern, bound_matern_batch, bound_noiseless, bound_rbf_lambert, bound_rbf_taylor,
    central_trace_bound, error_bound_upper, error_function_empirical, forward_trace_bound, lambert_w0, MinimizerConfig,
};
use lbo_core::{Dataset, Design, GpModel, KernelFamily, StationaryKernel};
use proptest::prelude::*;

fn unit(f: KernelFamily) -> StationaryKernel {
    StationaryKernel::unit(f)
}

fn trace_of(k: &StationaryKernel, sigma: f64, z: &Design) -> f64 {
    let d = z.dim();
    let model = GpModel::new(k.clone(), sigma).unwrap();
    alpha_trace(&model, &Dataset::new(d), &vec![0.0; d], z).unwrap()
}

fn fast() -> MinimizerConfig {
    MinimizerConfig {
        n_random: 0,
        max_iters: 30,
        ..MinimizerConfig::default()
    }
}

#[test]
fn central_pair_closed_form_in_one_dimension() {
    let (h, sigma): (f64, f64) = (0.5, 0.1);
    let a = (-2.0 * h * h).exp();
    let b = h * (-h * h / 2.0).exp();
    let want = 1.0 - 2.0 * b * b / ((1.0 - a) + sigma * sigma);
    let got = trace_of(&unit(KernelFamily::Rbf), sigma, &Design::central(&[0.0], 1, h));
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn central_closed_form_with_repeats_in_one_dimension() {
    for m in [1, 2, 5] {
        for sigma in [0.05f64, 0.3] {
            let h: f64 = 0.4;
            let (a, b, g) = ((-2.0 * h * h).exp(), h * (-h * h / 2.0_f64).exp(), sigma * sigma);
            let mf = m as f64;
            let want = 1.0 - 2.0 * mf * b * b / (mf * (1.0 - a) + g);
            let got = trace_of(&unit(KernelFamily::Rbf), sigma, &Design::central(&[0.0], m, h));
            assert!((got - want).abs() < 1e-8, "m={m} sigma={sigma}: {got} vs {want}");
        }
    }
}

#[test]
fn closed_forms_equal_direct_trace_in_one_dimension() {
    for f in [KernelFamily::Rbf, KernelFamily::Matern25] {
        let k = unit(f);
        for m in [1, 3, 8] {
            for sigma in [0.01, 0.2, 1.0] {
                for h in [0.05, 0.3, 1.2] {
                    let c = central_trace_bound(&k, 1, m, h, sigma);
                    let fw = forward_trace_bound(&k, 1, m, h, sigma);
                    assert!((c - trace_of(&k, sigma, &Design::central(&[0.0], m, h))).abs() < 1e-8);
                    assert!((fw - trace_of(&k, sigma, &Design::forward(&[0.0], m, h))).abs() < 1e-8);
                }
            }
        }
    }
}

#[test]
fn closed_forms_bound_direct_trace_in_higher_dimensions() {
    for f in [KernelFamily::Rbf, KernelFamily::Matern25] {
        let k = unit(f);
        for d in [2, 3] {
            for (m, sigma, h) in [(1, 0.05, 0.3), (2, 0.2, 0.7), (3, 1.0, 0.1)] {
                let z = Design::central(&vec![0.0; d], m, h);
                assert!(trace_of(&k, sigma, &z) <= central_trace_bound(&k, d, m, h, sigma) + 1e-8);
                let z = Design::forward(&vec![0.0; d], m, h);
                assert!(trace_of(&k, sigma, &z) <= forward_trace_bound(&k, d, m, h, sigma) + 1e-8);
            }
        }
    }
}

#[test]
fn forward_within_constant_factor_of_central() {
    let k = unit(KernelFamily::Rbf);
    let (m, sigma) = (25, 0.2);
    let c = central_trace_bound(&k, 1, m, best_central_step(&k, 1, 0, m, sigma), sigma);
    let f = forward_trace_bound(&k, 1, m, best_forward_step(&k, 1, 0, m, sigma), sigma);
    // Minima over a dense log grid of h of the directly conditioned GP
    // (numpy dense solve): the forward design loses about a factor of 8.
    assert!((c - 0.009_725_863).abs() < 1e-8, "central {c}");
    assert!((f - 0.076_375_372).abs() < 1e-7, "forward {f}");
    assert!(c < f && f < 8.0 * c);
}

#[test]
fn noiseless_bound_spot_values() {
    assert_eq!(bound_noiseless(&unit(KernelFamily::Rbf), 5, 6), 0.0);
    assert!((bound_noiseless(&unit(KernelFamily::Matern25), 3, 2) - 10.0 / 3.0).abs() < 1e-14);
}

#[test]
fn lambert_bound_spot_value() {
    // 1 + W(-1/(2e)), by bisection on w·eʷ.
    let x = -1.0 / (2.0 * E);
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let want = 1.0 + 0.5 * (lo + hi);
    let got = bound_rbf_lambert(1, 1, 1.0);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!((got - 0.768).abs() < 1e-3);
    assert!(got <= 1.0);
}

#[test]
fn lambert_w_at_one() {
    let w = lambert_w0(1.0).unwrap();
    assert!((w - 0.567_143_290_4).abs() < 1e-10);
    assert!((w * w.exp() - 1.0).abs() < 1e-14);
}

#[test]
fn matern_bound_spot_value_and_batch_form() {
    let want = 7.5 * 0.1 + 70.0 / 9.0 * 100f64.powf(-0.75);
    assert!((bound_matern(1, 100, 1.0) - want).abs() < 1e-12);
    assert!((bound_matern(1, 100, 1.0) - 0.995_955).abs() < 1e-6);
    for (d, m, sigma) in [(1, 100, 1.0), (10, 5, 0.2), (3, 7, 0.05)] {
        let b = 2 * m * d;
        assert!((bound_matern_batch(d, b, sigma) - bound_matern(d, m, sigma)).abs() < 1e-12);
    }
}

#[test]
fn relaxed_rbf_minimum_equals_lambert_bound() {
    for (m, sigma) in [(1, 1.0), (10, 0.2), (100, 0.05)] {
        let mut best = f64::INFINITY;
        for i in 1..200_000 {
            best = best.min(rbf_relaxed_axis_trace(m, sigma, i as f64 * 1e-5));
        }
        assert!((best - bound_rbf_lambert(1, m, sigma)).abs() < 1e-6, "m={m} sigma={sigma}");
    }
}

/// At σ = 0 the 1e-10 jitter keeps the optimized trace near √jitter instead
/// of reaching the zero bound; this covers that floor.
const NOISELESS_FLOOR: f64 = 1e-4;

#[test]
fn empirical_error_function_respects_bounds_and_is_monotone() {
    let cfg = fast();
    for f in [KernelFamily::Rbf, KernelFamily::Matern25] {
        let k = unit(f);
        let d = 2;
        for sigma in [0.0, 0.1] {
            let mut prev = f64::INFINITY;
            for b in [1, 2, 3, 4, 8, 12] {
                let e = error_function_empirical(&k, d, sigma, b, &cfg).unwrap();
                let slack = if sigma == 0.0 { NOISELESS_FLOOR } else { 1e-6 };
                assert!(e <= error_bound_upper(&k, d, sigma, b) + slack, "{f:?} sigma={sigma} b={b}: {e}");
                assert!(e <= prev + 1e-6, "{f:?} sigma={sigma} b={b}: {e} after {prev}");
                prev = e;
            }
        }
    }
}

#[test]
fn adding_rows_never_increases_the_trace() {
    let k = unit(KernelFamily::Rbf);
    let mut rows = Design::central(&[0.0, 0.0], 1, 0.3).into_rows();
    let mut prev = trace_of(&k, 0.1, &Design::new(2, rows.clone(), lbo_core::Provenance::Optimized).unwrap());
    for extra in [[0.5, 0.1], [-0.2, 0.4], [0.0, 0.0], [1.5, -1.0]] {
        rows.extend_from_slice(&extra);
        let t = trace_of(&k, 0.1, &Design::new(2, rows.clone(), lbo_core::Provenance::Optimized).unwrap());
        assert!(t <= prev + 1e-12, "{t} > {prev}");
        prev = t;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lambert_defining_equation(x in -1.0 / E..50.0) {
        let w = lambert_w0(x).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn lambert_is_monotone(a in -1.0 / E..20.0, b in -1.0 / E..20.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(lambert_w0(lo).unwrap() <= lambert_w0(hi).unwrap());
    }

    #[test]
    fn lambert_below_taylor(d in 1usize..20, m in 1usize..2000, sigma in 0.001..3.0f64) {
        let l = bound_rbf_lambert(d, m, sigma);
        prop_assert!(l >= 0.0);
        prop_assert!(l <= bound_rbf_taylor(d, m, sigma) + 1e-12);
    }

    #[test]
    fn optimized_central_matches_lambert_fixed_point(m in 1usize..500, sigma in 0.01..2.0f64) {
        let k = unit(KernelFamily::Rbf);
        let h = best_central_step(&k, 1, 0, m, sigma);
        let c = central_trace_bound(&k, 1, m, h, sigma);
        // The optimized central trace can only beat the relaxed bound.
        prop_assert!(c <= bound_rbf_lambert(1, m, sigma) + 1e-6, "{c} vs {}", bound_rbf_lambert(1, m, sigma));
    }

    #[test]
    fn upper_bound_nonincreasing_in_batch(d in 1usize..12, sigma in 0.0..1.0f64, b in 1usize..200) {
        for f in [KernelFamily::Rbf, KernelFamily::Matern25] {
            let k = unit(f);
            prop_assert!(error_bound_upper(&k, d, sigma, b + 1) <= error_bound_upper(&k, d, sigma, b) + 1e-12);
        }
    }
}
