//! Data-parallel core vs sequential fallback on the two hot batch loops:
//! Monte Carlo path fan-out and generic index mapping. The parallel and
//! serial mappers run the same per-index kernels, so the comparison
//! isolates the rayon dispatch (and documents the break-even batch size).

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hjb_lab::control::{Domain, ProblemSpec};
use hjb_lab::elliptic::{discretize_generator, Closure};
use hjb_lab::grid::Grid;
use hjb_lab::parallel::{map_indexed, map_indexed_serial};
use hjb_lab::presets::coefficient_preset;
use hjb_lab::sde::{FeedbackPolicy, StopRule};

fn spec() -> ProblemSpec {
    let field = coefficient_preset("identity", 2).unwrap();
    ProblemSpec::elliptic("bench", field, Domain::ball(vec![0.0, 0.0], 1.0).unwrap()).unwrap()
}

fn bench_path_batches(c: &mut Criterion) {
    let spec = spec();
    let policy = FeedbackPolicy::Constant(0);
    let mut group = c.benchmark_group("mc_path_batch");
    group.sample_size(20);
    for &n in &[64usize, 512] {
        // the batch API fans out across workers when the `parallel` feature
        // is on
        group.bench_with_input(BenchmarkId::new("batch_api", n), &n, |b, &n| {
            b.iter(|| {
                let outs = hjb_lab::sde::run_batch(
                    &spec,
                    &policy,
                    &[0.0, 0.0],
                    1e-3,
                    n,
                    7,
                    1_000_000,
                    StopRule::Exit,
                    false,
                )
                .unwrap();
                outs.iter().map(|o| o.exit_time).sum::<f64>()
            })
        });
        group.bench_with_input(BenchmarkId::new("serial_paths", n), &n, |b, &n| {
            b.iter(|| {
                let outs: Vec<f64> = map_indexed_serial(n, |i| {
                    hjb_lab::sde::simulate_path(
                        &spec,
                        &policy,
                        &[0.0, 0.0],
                        1e-3,
                        7 + i as u64,
                        1_000_000,
                    )
                    .unwrap()
                    .exit_time
                });
                outs.iter().sum::<f64>()
            })
        });
    }
    group.finish();
}

fn bench_assembly(c: &mut Criterion) {
    let spec = spec();
    let grid = Arc::new(Grid::covering(spec.domain().unwrap(), 1.0 / 64.0, 2).unwrap());
    c.bench_function("stencil_assembly_h64", |b| {
        b.iter(|| discretize_generator(&spec, 0, &grid, Closure::Dirichlet).unwrap().len())
    });
}

fn bench_map_indexed(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_indexed");
    let work = |i: usize| {
        let mut acc = i as f64;
        for _ in 0..400 {
            acc = (acc * 1.000001).sin() + 1.0;
        }
        acc
    };
    group.bench_function("parallel", |b| b.iter(|| map_indexed(4096, work).len()));
    group.bench_function("serial", |b| b.iter(|| map_indexed_serial(4096, work).len()));
    group.finish();
}

criterion_group!(benches, bench_path_batches, bench_assembly, bench_map_indexed);
criterion_main!(benches);
