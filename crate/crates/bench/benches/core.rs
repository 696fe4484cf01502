use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lbo_core::design::{minimize_acquisition, GradientLookahead, MinimizerConfig};
use lbo_core::{draw_path, Dataset, Design, GpModel, GpPosterior, KernelFamily, StationaryKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(d: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::from_rows(d, x, y).unwrap()
}

fn gp_fit(c: &mut Criterion) {
    let model = GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.05).unwrap();
    let mut group = c.benchmark_group("gp_fit");
    for n in [50, 200, 500] {
        let data = random_data(10, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| GpPosterior::fit(model.clone(), black_box(data.clone())).unwrap())
        });
    }
    group.finish();
}

fn acquisition(c: &mut Criterion) {
    let d = 10;
    let model = GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.05).unwrap();
    let post = GpPosterior::fit(model.clone(), random_data(d, 100, 2)).unwrap();
    let x = vec![0.0; d];
    let acq = GradientLookahead::new(&post, &x).unwrap();
    let z = Design::central(&x, 1, 0.3);
    let mut grad = vec![0.0; z.rows().len()];
    c.bench_function("acquisition_value_and_grad_d10_b20", |b| {
        b.iter(|| acq.value_and_grad(black_box(z.rows()), &mut grad).unwrap())
    });
    let cfg = MinimizerConfig {
        n_random: 0,
        max_iters: 30,
        ..MinimizerConfig::default()
    };
    c.bench_function("minimize_acquisition_d10_b11", |b| {
        b.iter(|| minimize_acquisition(&model, &Dataset::new(d), &x, d + 1, &cfg).unwrap())
    });
}

fn sample_path(c: &mut Criterion) {
    let kernel = StationaryKernel::unit(KernelFamily::Rbf);
    let path = draw_path(&kernel, 10, 4096, 3).unwrap();
    let x = vec![0.1; 10];
    c.bench_function("path_draw_d10_m4096", |b| b.iter(|| draw_path(&kernel, 10, 4096, black_box(3)).unwrap()));
    c.bench_function("path_value_d10", |b| b.iter(|| path.value(black_box(&x))));
    c.bench_function("path_grad_d10", |b| b.iter(|| path.grad(black_box(&x))));
}

criterion_group!(benches, gp_fit, acquisition, sample_path);
criterion_main!(benches);
