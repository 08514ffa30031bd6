use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use specluster::linalg::{self, SvdMethod, SvdOptions};
use specluster::{kmeans, pipeline};
use specluster_bench::bsbm_instance;

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("truncated_svd");
    for &size in &[100usize, 200, 400] {
        let data = bsbm_instance(size, size, 2, 0.45, 0.05, 1);
        for (name, method) in [("subspace", SvdMethod::Subspace), ("gram", SvdMethod::Gram)] {
            let opts = SvdOptions { method, ..SvdOptions::default() };
            group.bench_with_input(BenchmarkId::new(name, size), &data, |b, d| {
                b.iter(|| linalg::truncated_svd_with(black_box(d.matrix()), 2, &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn kmeans_rows(c: &mut Criterion) {
    let data = bsbm_instance(400, 400, 4, 0.45, 0.05, 2);
    let approx = linalg::truncated_svd(data.matrix(), 4, 1e-8, 10_000).unwrap();
    c.bench_function("kmeans/400x4", |b| {
        b.iter(|| kmeans::kmeans(black_box(&approx.left_vectors), 4, 10, 300, 0).unwrap())
    });
}

fn cluster(c: &mut Criterion) {
    let mut group = c.benchmark_group("cluster");
    group.sample_size(20);
    for &size in &[200usize, 400] {
        let data = bsbm_instance(size, size, 2, 0.45, 0.05, 3);
        group.bench_with_input(BenchmarkId::from_parameter(size), &data, |b, d| {
            b.iter(|| pipeline::cluster(black_box(d.matrix()), 2, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, svd, kmeans_rows, cluster);
criterion_main!(benches);
