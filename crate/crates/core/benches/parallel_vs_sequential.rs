use std::hint::black_box;

use causal_core::cause_effect::{batch_discover, synthetic, BatchConfig, Method};
use causal_core::exec::{self, Execution};
use causal_core::scm::{Mechanism, NodeSpec, NoiseSpec, Scm, UnaryFn};
use causal_core::ssl_bench::{ssl_gap_experiment, SslConfig};
use causal_core::stats::{hsic_test_with, KernelSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn hsic(c: &mut Criterion) {
    let mut rng = exec::substream(1, 0, 0);
    let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| v.sin() + 0.1 * rng.random::<f64>()).collect();
    let kernel = KernelSpec::median_heuristic();
    let mut g = c.benchmark_group("hsic_300x500");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| hsic_test_with(black_box(&x), black_box(&y), &kernel, 500, 7, mode).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let gauss = NoiseSpec::Gaussian { mean: 0.0, std_dev: 1.0 };
    let scm = Scm::new(vec![
        NodeSpec::new("A", &[], gauss.clone(), Mechanism::Passthrough),
        NodeSpec::new("B", &["A"], gauss.clone(), Mechanism::Additive { intercept: 0.0, terms: vec![UnaryFn::Tanh] }),
        NodeSpec::new("C", &["A", "B"], gauss, Mechanism::Linear { coefficients: vec![0.5, -1.0], intercept: 0.0 }),
    ])
    .unwrap();
    let mut g = c.benchmark_group("sample_200k");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| scm.sample_with(200_000, 3, mode)));
    }
    g.finish();
}

fn discovery(c: &mut Criterion) {
    let pairs: Vec<_> = (0..8).map(|s| synthetic::cubic_anm_pair(300, s)).collect();
    let mut g = c.benchmark_group("anm_batch_8x300");
    g.sample_size(10);
    for (name, mode) in MODES {
        let cfg = BatchConfig { execution: mode, ..BatchConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| batch_discover(black_box(&pairs), Method::Anm, &cfg).unwrap())
        });
    }
    g.finish();
}

fn ssl(c: &mut Criterion) {
    let cfg = SslConfig::default();
    let mut g = c.benchmark_group("ssl_20_seeds");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| ssl_gap_experiment(&cfg, 20, 0, mode).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, hsic, sampling, discovery, ssl);
criterion_main!(benches);
