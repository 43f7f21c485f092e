use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fehlab_bench::{perturbed_geometry, perturbed_torus};
use fehlab_core::einstein::{self, EinsteinForm};
use fehlab_core::{FScalarFunction, Geometry};

fn geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("geometry");
    for (dim, n) in [(2, 64), (3, 32)] {
        let (chart, metric) = perturbed_torus(dim, n);
        let g = metric.build(&chart).unwrap();
        group.bench_function(format!("T{dim} N={n}"), |b| b.iter(|| Geometry::new(black_box(g.clone())).unwrap()));
    }
    group.finish();
}

fn einstein_tensor(c: &mut Criterion) {
    let geo = perturbed_geometry(3, 32);
    let f = FScalarFunction::power(2);
    let mut group = c.benchmark_group("einstein_tensor");
    for form in [EinsteinForm::Compact, EinsteinForm::Expanded] {
        group.bench_function(format!("{form:?} T3 N=32"), |b| {
            b.iter(|| einstein::f_einstein_tensor(black_box(&geo), &f, form).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, geometry, einstein_tensor);
criterion_main!(benches);
