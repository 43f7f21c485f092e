//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use fehlab_core::{ChartSpec, Geometry, MetricSpec};

pub fn perturbed_torus(dim: usize, resolution: usize) -> (Arc<ChartSpec>, MetricSpec) {
    let chart = ChartSpec::periodic(dim, 1.0, resolution).expect("valid torus");
    let metric = MetricSpec::ConformalPerturbed {
        amplitude: 0.1,
        wavenumbers: 1,
        seed: 1,
    };
    (chart, metric)
}

pub fn perturbed_geometry(dim: usize, resolution: usize) -> Geometry {
    let (chart, metric) = perturbed_torus(dim, resolution);
    Geometry::new(metric.build(&chart).expect("metric")).expect("geometry")
}
