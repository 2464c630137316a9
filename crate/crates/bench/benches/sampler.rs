use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mcpd_bench::scenario_series;
use mcpd_core::rng::chain_rng;
use mcpd_core::{
    initial_state, log_marginal_mean_cluster, log_marginal_nig_cluster, log_marginal_var_cluster,
    run_bh93, run_chain, run_lcia05, Bh93Hyper, GibbsSampler, InitMode, McmcConfig, NigHyper,
    NormalHyper, YaoPrior,
};

fn sweeps(c: &mut Criterion) {
    let hyper = NormalHyper::default();
    let yao = YaoPrior::default();
    let mut group = c.benchmark_group("sweep");
    for (name, n) in [("scenario1", 100), ("scenario3", 300)] {
        let x = scenario_series(name, 1);
        let mut sampler = GibbsSampler::new(n, &hyper, &yao, &yao).unwrap();
        let mut rng = chain_rng(2);
        let mut state = initial_state(n, &hyper, &yao, &yao, InitMode::NoneChanged, &mut rng);
        for _ in 0..500 {
            sampler.step(&x, &mut state, &mut rng);
        }
        group.bench_function(format!("n={n}"), |b| {
            b.iter(|| sampler.step(black_box(&x), &mut state, &mut rng))
        });
    }
    group.finish();
}

fn marginals(c: &mut Criterion) {
    let x = scenario_series("scenario1", 3);
    let h = NormalHyper::default();
    let s2 = vec![1.0; x.len()];
    let mu = vec![0.0; x.len()];
    let nig = NigHyper::default();
    let mut group = c.benchmark_group("marginal");
    group.bench_function("mean, 25 points", |b| {
        b.iter(|| log_marginal_mean_cluster(black_box(&x), 25..50, &s2, &h).unwrap())
    });
    group.bench_function("variance, 25 points", |b| {
        b.iter(|| log_marginal_var_cluster(black_box(&x), 25..50, &mu, &h).unwrap())
    });
    group.bench_function("shared, 25 points", |b| {
        b.iter(|| log_marginal_nig_cluster(black_box(&x), 25..50, &nig).unwrap())
    });
    group.finish();
}

fn chains(c: &mut Criterion) {
    let x = scenario_series("scenario1", 4);
    let cfg = McmcConfig::new(1_000, 1_000, 1, 5).unwrap();
    let yao = YaoPrior::default();
    let mut group = c.benchmark_group("chain, n=100, 2000 sweeps");
    group.sample_size(10);
    let h = NormalHyper::default();
    group.bench_function("bmcp", |b| {
        b.iter(|| run_chain(&x, &h, &yao, &yao, &cfg).unwrap())
    });
    group.bench_function("lcia05", |b| {
        b.iter(|| run_lcia05(&x, &NigHyper::default(), &yao, &cfg).unwrap())
    });
    let bh = Bh93Hyper::from_data(&x).unwrap();
    group.bench_function("bh93", |b| b.iter(|| run_bh93(&x, &bh, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, sweeps, marginals, chains);
criterion_main!(benches);
