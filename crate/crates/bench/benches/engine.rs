use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use erw_bench::{pointwise_kernel, reference_env, swap_kernel};
use erw_core::oracle::{exact_coupled_distribution, exact_path_distribution};
use erw_core::regen::find_regenerations;
use erw_core::walk::simulate_erw_endpoint;
use erw_core::{simulate_coupled, simulate_erw, SeedKey};

fn single_walk(c: &mut Criterion) {
    let env = reference_env();
    let mut g = c.benchmark_group("single_walk");
    for n in [1_000usize, 100_000] {
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("path", n), &n, |b, &n| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                black_box(simulate_erw(&env, SeedKey::new(1, r), n).unwrap())
            })
        });
        g.bench_with_input(BenchmarkId::new("endpoint", n), &n, |b, &n| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                black_box(simulate_erw_endpoint(&env, SeedKey::new(1, r), n).unwrap())
            })
        });
    }
    g.finish();
}

fn coupled_walk(c: &mut Criterion) {
    let mut g = c.benchmark_group("coupled_walk");
    let n = 10_000;
    g.throughput(Throughput::Elements(n as u64));
    for (name, k) in [("swap", swap_kernel()), ("pointwise", pointwise_kernel())] {
        g.bench_function(name, |b| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                black_box(simulate_coupled(&k, SeedKey::new(2, r), n).unwrap())
            })
        });
    }
    g.finish();
}

fn regeneration(c: &mut Criterion) {
    let path = simulate_erw(&reference_env(), SeedKey::new(3, 0), 100_000).unwrap();
    c.bench_function("find_regenerations_1e5", |b| {
        b.iter(|| black_box(find_regenerations(&path, 50)))
    });
}

fn oracle(c: &mut Criterion) {
    let env = reference_env();
    c.bench_function("exact_path_distribution_16", |b| {
        b.iter(|| black_box(exact_path_distribution(&env, 16).unwrap()))
    });
    let k = swap_kernel();
    c.bench_function("exact_coupled_distribution_8", |b| {
        b.iter(|| black_box(exact_coupled_distribution(&k, 8).unwrap()))
    });
}

criterion_group!(benches, single_walk, coupled_walk, regeneration, oracle);
criterion_main!(benches);
