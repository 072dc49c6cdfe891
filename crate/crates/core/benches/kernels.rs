//! Sequential versus data-parallel kernels on a 15-spin ladder.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ethdyn::engine::{random_haar_state, spectral_bounds};
use ethdyn::exec::{self, ExecMode};
use ethdyn::funcfilter::{EnergyWindow, ShellFilter};
use ethdyn::model::{build_model, Geometry, ModelSpec, Operator};
use num_complex::Complex64;
use std::hint::black_box;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn kernels(c: &mut Criterion) {
    let spec = ModelSpec::new(Geometry::Ladder, 5).with_couplings(0.3, 0.3);
    let (_, _, ops) = build_model(&spec).expect("model");
    let dim = ops.dim();
    let psi = random_haar_state(dim, 1);
    let other = random_haar_state(dim, 2);
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    let filter = ShellFilter::new(spectral_bounds(&ops.h), EnergyWindow::new(0.0, 0.6), 1e-10).expect("filter");

    let mut group = c.benchmark_group("ladder15");
    group.sample_size(10);
    for (name, mode) in MODES {
        exec::set_mode(mode);
        group.bench_function(BenchmarkId::new("apply_h", name), |b| {
            b.iter(|| ops.h.apply_into(black_box(psi.amplitudes()), &mut out))
        });
        group.bench_function(BenchmarkId::new("dot", name), |b| b.iter(|| black_box(&psi).dot(black_box(&other))));
        group.bench_function(BenchmarkId::new("gaussian_filter", name), |b| {
            b.iter(|| filter.apply(&ops.h, black_box(&psi)).expect("apply"))
        });
    }
    group.finish();
    exec::set_mode(ExecMode::Parallel);
}

criterion_group!(benches, kernels);
criterion_main!(benches);
