use lbo_core::baselines::{equivalent_grid_size, expected_extreme_bound, run_random_search};
use lbo_core::design::error_bound_upper;
use lbo_core::optimizer::{confidence_multiplier, gradient_mapping, rate_reference, run_local_bo, RateKind, RateParams};
use lbo_core::{
    draw_path, BatchSchedule, BoxDomain, FunctionKind, GpModel, KernelFamily, RunConfig, StationaryKernel, TestFunction,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rbf() -> StationaryKernel {
    StationaryKernel::unit(KernelFamily::Rbf)
}

#[test]
fn feature_covariance_approximates_kernel() {
    for f in [KernelFamily::Rbf, KernelFamily::Matern25] {
        let k = StationaryKernel::unit(f);
        let path = draw_path(&k, 2, 4096, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dir: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.random_range(0.0..3.0);
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + r * u / n).collect();
            worst = worst.max((path.feature_covariance(&x, &y) - k.k(&x, &y)).abs());
        }
        assert!(worst <= 0.05, "{f:?}: {worst}");
    }
}

#[test]
fn feature_error_shrinks_with_more_features() {
    let k = rbf();
    let x = [0.2, -0.3];
    let y = [0.9, 0.4];
    let err = |m: usize| {
        (0..10)
            .map(|s| (draw_path(&k, 2, m, s).unwrap().feature_covariance(&x, &y) - k.k(&x, &y)).abs())
            .sum::<f64>()
            / 10.0
    };
    let (coarse, fine) = (err(256), err(4096));
    // Sixteen times the features: the error should drop by about four.
    assert!(fine < coarse / 2.0, "{coarse} -> {fine}");
}

#[test]
fn noisy_queries_are_centered_with_the_right_spread() {
    let func = TestFunction::new(FunctionKind::Quadratic, 0.3).unwrap();
    let x = [0.5, -1.0];
    let f = func.value(&x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let ys: Vec<f64> = (0..n).map(|_| func.query(&x, &mut rng).unwrap()).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    assert!((mean - f).abs() <= 4.0 * 0.3 / (n as f64).sqrt());
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var.sqrt() - 0.3).abs() < 0.01);

    let mut a = ChaCha8Rng::seed_from_u64(10);
    let mut b = ChaCha8Rng::seed_from_u64(11);
    let m = 10_000;
    let pairs: Vec<(f64, f64)> = (0..m)
        .map(|_| (func.query(&x, &mut a).unwrap() - f, func.query(&x, &mut b).unwrap() - f))
        .collect();
    let cov = pairs.iter().map(|(u, v)| u * v).sum::<f64>() / m as f64;
    let rho = cov / (0.3 * 0.3);
    assert!(rho.abs() < 0.02, "correlation {rho}");
}

#[test]
fn quadratic_descent_shrinks_iterates() {
    let func = TestFunction::new(FunctionKind::Quadratic, 0.0).unwrap();
    let model = GpModel::new(rbf(), 0.0).unwrap();
    let mut rc = RunConfig::new(vec![1.0, 1.0, 1.0], 1.0, 10_000);
    rc.max_iters = 30;
    let tr = run_local_bo(&func, &model, &rc).unwrap();
    // x_{t+1} = x_t·ε_t with small ε_t until the estimate error takes over.
    let reached = tr
        .records
        .iter()
        .position(|r| r.true_grad_norm.unwrap() <= 1e-3)
        .expect("gradient norm 1e-3 within 30 iterations");
    let norms: Vec<f64> = tr.records[..=reached]
        .iter()
        .map(|r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] < w[0], "{norms:?}");
    }
}

#[test]
fn noiseless_path_runs_meet_the_rate_curve() {
    let k = rbf();
    let d = 5;
    let t_max = 100;
    let mut ok = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let func = TestFunction::path(draw_path(&k, d, 1024, seed).unwrap(), 0.0).unwrap();
        let region = lbo_core::optimizer::smoothness_region(&k, &vec![0.0; d], None);
        let lip = lbo_core::optimizer::estimate_smoothness(&func, &region, 2000, 1.5, seed).unwrap();
        let model = GpModel::new(k.clone(), 0.0).unwrap();
        let mut rc = RunConfig::new(vec![0.0; d], lip, t_max * (d + 1));
        rc.max_iters = t_max;
        rc.minimizer.n_random = 0;
        rc.minimizer.max_iters = 30;
        let tr = run_local_bo(&func, &model, &rc).unwrap();
        let f1 = func.value(&vec![0.0; d]).unwrap();
        let low = tr.records.iter().map(|r| r.f_true).fold(tr.f_final, f64::min);
        let p = RateParams {
            kernel: k.clone(),
            d,
            sigma: 0.0,
            lipschitz: lip,
            gap: f1 - low,
            rkhs_norm: 1.0,
            delta: 0.1,
            schedule: BatchSchedule::DPlusOne,
        };
        let reference = rate_reference(RateKind::NoiselessRkhs, &p, tr.records.len());
        let mins = tr.running_min_grad_sq();
        if mins.last().unwrap() <= reference.last().unwrap() {
            ok += 1;
        }
    }
    assert!(ok * 10 >= seeds * 9, "{ok}/{seeds}");
}

#[test]
fn noisy_traces_stay_below_the_error_bound_and_budget_adds_up() {
    let k = rbf();
    for (seed, schedule) in [(0, BatchSchedule::LinearDT), (1, BatchSchedule::DLogSqT), (2, BatchSchedule::DPlusOne)] {
        let d = 3;
        let sigma = 0.05;
        let func = TestFunction::path(draw_path(&k, d, 1024, seed).unwrap(), sigma).unwrap();
        let model = GpModel::new(k.clone(), sigma).unwrap();
        let mut rc = RunConfig::new(vec![0.0; d], 4.0, 150);
        rc.schedule = schedule;
        rc.seed = seed;
        rc.minimizer.n_random = 0;
        let tr = run_local_bo(&func, &model, &rc).unwrap();
        let mut total = 0;
        for r in &tr.records {
            assert!(r.trace >= 0.0);
            assert!(r.trace <= error_bound_upper(&k, d, sigma, r.b) + 1e-6, "t={} b={}", r.t, r.b);
            total += r.b + r.line_search;
            assert_eq!(total, r.n_cum);
        }
        assert!(tr.n_total <= 150);
    }
}

#[test]
fn linear_schedule_totals() {
    for d in [1, 3, 7] {
        for t_max in [1, 5, 20] {
            let s: usize = (1..=t_max).map(|t| BatchSchedule::LinearDT.batch(d, t)).sum();
            assert_eq!(s, d * t_max * (t_max + 1) / 2);
        }
    }
}

#[test]
fn confidence_multiplier_at_one() {
    let c = confidence_multiplier(1, 0.1);
    assert!((c - 2.0 * (std::f64::consts::PI.powi(2) / 0.6).ln()).abs() < 1e-12);
    assert!((c - 5.599).abs() < 2e-3);
}

#[test]
fn noisy_reference_collapses_to_one_over_t_without_noise() {
    let p = RateParams {
        kernel: rbf(),
        d: 3,
        sigma: 1e-300,
        lipschitz: 2.0,
        gap: 1.5,
        rkhs_norm: 1.0,
        delta: 0.1,
        // The noisy bound needs a pair on every axis.
        schedule: BatchSchedule::Constant(6),
    };
    let noisy = rate_reference(RateKind::NoisyGeneral, &p, 50);
    for (t, v) in noisy.iter().enumerate() {
        let want = 2.0 * 2.0 * 1.5 / (t + 1) as f64;
        assert!((v - want).abs() < 1e-9 * want, "t={}: {v} vs {want}", t + 1);
    }
    let noiseless = rate_reference(RateKind::NoiselessRkhs, &RateParams { sigma: 0.0, ..p }, 50);
    assert_eq!(noiseless, noisy);
}

#[test]
fn reference_grid_size() {
    let (n, log10) = equivalent_grid_size(-12.9, 1.0);
    assert!((1e36..1e37).contains(&n));
    assert!((n / 1.4e36 - 1.0).abs() < 0.05);
    assert!(log10 >= 36.0);
    let (n, _) = equivalent_grid_size(-1.0, 1.0);
    assert!((n - 0.5f64.exp()).abs() < 1e-12);
}

#[test]
fn extreme_bound_dominates_monte_carlo_maxima() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = rbf();
    for n in [10usize, 100, 1000] {
        let reps = 2000;
        let iid: f64 = (0..reps)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / reps as f64;
        assert!(iid <= expected_extreme_bound(1.0, n as f64), "iid n={n}: {iid}");
    }
    // Correlated: values of GP paths on a grid of 100 points.
    let grid: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
    let reps = 300;
    let mean: f64 = (0..reps)
        .map(|s| {
            let p = draw_path(&k, 1, 1024, s).unwrap();
            grid.iter().map(|x| p.value(&[*x])).fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / reps as f64;
    assert!(mean <= expected_extreme_bound(1.0, 100.0), "correlated: {mean}");
}

#[test]
fn random_search_is_deterministic() {
    let func = TestFunction::path(draw_path(&rbf(), 2, 512, 4).unwrap(), 0.05).unwrap();
    let dom = BoxDomain::cube(2, 3.0);
    let a = run_random_search(&func, 100, &dom, 9).unwrap();
    let b = run_random_search(&func, 100, &dom, 9).unwrap();
    assert_eq!(a, b);
    for w in a.best_so_far.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn inactive_box_leaves_runs_bit_identical() {
    let k = rbf();
    for seed in 0..4u64 {
        let d = 2;
        let sigma = if seed % 2 == 0 { 0.0 } else { 0.1 };
        let func = TestFunction::path(draw_path(&k, d, 512, seed).unwrap(), sigma).unwrap();
        let model = GpModel::new(k.clone(), sigma).unwrap();
        let mut rc = RunConfig::new(vec![0.0; d], 2.0, 90);
        rc.seed = seed;
        let free = run_local_bo(&func, &model, &rc).unwrap();
        rc.domain = Some(BoxDomain::cube(d, 1e6));
        let boxed = run_local_bo(&func, &model, &rc).unwrap();
        assert_eq!(free.records, boxed.records);
    }
}

fn boxed_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..8).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0..-0.1f64, d),
            prop::collection::vec(0.1..3.0f64, d),
            prop::collection::vec(0.0..1.0f64, d),
            prop::collection::vec(-5.0..5.0f64, d),
            0.01..2.0f64,
        )
            .prop_map(|(lo, hi, u, g, eta)| {
                let x = lo.iter().zip(&hi).zip(&u).map(|((a, b), t)| a + t * (b - a)).collect();
                (lo, hi, x, g, eta)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn gradient_mapping_properties((lo, hi, x, g, eta) in boxed_case()) {
        let gm = gradient_mapping(&x, &g, eta, &lo, &hi);
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!(norm(&gm) <= norm(&g) + 1e-12);
        let interior = (0..x.len()).all(|i| (lo[i]..=hi[i]).contains(&(x[i] - eta * g[i])));
        if interior {
            for i in 0..x.len() {
                prop_assert!((gm[i] - g[i]).abs() <= 1e-12 * g[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn grid_size_inverts_extreme_bound(v in -40.0..-0.01f64, s in 0.1..5.0f64) {
        let (_, log10n) = equivalent_grid_size(v, s);
        let ln_n = log10n * std::f64::consts::LN_10;
        let back = s * (2.0 * ln_n).sqrt();
        prop_assert!((back.ln() - v.abs().ln()).abs() < 1e-9);
    }

    #[test]
    fn path_gradient_matches_differences(seed in 0u64..1000, x in prop::collection::vec(-2.0..2.0f64, 3)) {
        let p = draw_path(&rbf(), 3, 256, seed).unwrap();
        let g = p.grad(&x);
        for i in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += 1e-4;
            b[i] -= 1e-4;
            let fd = (p.value(&a) - p.value(&b)) / 2e-4;
            prop_assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0));
        }
    }
}
