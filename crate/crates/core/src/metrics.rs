//! Base metrics and seeded, band-limited random fields.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Field, Kind, SymTensor2Field};
use crate::grid::ChartSpec;
use crate::linalg;
use crate::warped::WarpedParams;

/// The catalogue of base metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// The Euclidean metric `δ`.
    Flat,
    /// `(1 + a·ψ) δ` with `ψ` a random trigonometric polynomial, `|ψ| ≤ 1`,
    /// built from every wave vector with entries in `−wavenumbers..=wavenumbers`.
    ConformalPerturbed { amplitude: f64, wavenumbers: u32, seed: u64 },
    /// `dr² + r^{2α}(dx² + dy²)` with `r` the first coordinate.
    Warped { alpha: f64 },
}

impl MetricSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricSpec::Flat => Ok(()),
            MetricSpec::ConformalPerturbed { amplitude, wavenumbers, .. } => {
                if !(amplitude.is_finite() && amplitude.abs() < 1.0) {
                    return Err(GeomError::InvalidParameter(format!(
                        "conformal amplitude must satisfy |a| < 1, got {amplitude}"
                    )));
                }
                if *wavenumbers == 0 {
                    return Err(GeomError::InvalidParameter("wavenumbers must be at least 1".into()));
                }
                Ok(())
            }
            MetricSpec::Warped { alpha } => WarpedParams::check_alpha(*alpha),
        }
    }

    /// Samples the metric on `chart`.
    pub fn build(&self, chart: &Arc<ChartSpec>) -> Result<SymTensor2Field> {
        self.validate()?;
        let n = chart.dim();
        match self {
            MetricSpec::Flat => Ok(SymTensor2Field::identity(chart)),
            MetricSpec::ConformalPerturbed {
                amplitude,
                wavenumbers,
                seed,
            } => {
                let psi = TrigPolynomial::normalized(chart, *wavenumbers as i64, *seed, 0);
                Ok(SymTensor2Field::from_coords_mat(chart, |x| {
                    let c = 1.0 + amplitude * psi.eval(x);
                    let mut m = linalg::identity(n);
                    for (i, row) in m.iter_mut().enumerate().take(n) {
                        row[i] = c;
                    }
                    m
                }))
            }
            MetricSpec::Warped { alpha } => {
                if n != 3 {
                    return Err(GeomError::InvalidChart("the warped metric needs a 3-dimensional chart".into()));
                }
                let a = chart.axis(0);
                if a.origin <= 0.0 {
                    return Err(GeomError::InvalidChart("the warped metric needs r > 0 on the first axis".into()));
                }
                Ok(crate::warped::warped_metric(*alpha, chart))
            }
        }
    }
}

/// `Σ cₘ cos(2π kₘ·x / L + φₘ)` over a set of integer wave vectors.
#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    modes: Vec<([f64; 4], f64, f64)>,
}

impl TrigPolynomial {
    /// All wave vectors with entries in `−kmax..=kmax` (the zero vector
    /// excluded), random coefficients scaled so that `|ψ| ≤ 1`.
    pub fn normalized(chart: &ChartSpec, kmax: i64, seed: u64, stream: u64) -> Self {
        let n = chart.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let side = (2 * kmax + 1) as usize;
        let total = side.pow(n as u32);
        let mut modes = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let mut k = [0i64; 4];
            for slot in k.iter_mut().take(n) {
                *slot = (rem % side) as i64 - kmax;
                rem /= side;
            }
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            let c: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            modes.push((Self::wave(chart, &k), c, phase));
        }
        let norm: f64 = modes.iter().map(|m| m.1.abs()).sum();
        for m in &mut modes {
            m.1 /= norm;
        }
        TrigPolynomial { modes }
    }

    /// `count` modes with wave vectors drawn uniformly from `−kmax..=kmax`
    /// (zero excluded) and coefficients in `(−1, 1) / count`.
    pub fn random(chart: &ChartSpec, kmax: i64, count: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = chart.dim();
        let mut modes = Vec::with_capacity(count);
        while modes.len() < count {
            let mut k = [0i64; 4];
            for slot in k.iter_mut().take(n) {
                *slot = rng.gen_range(-kmax..=kmax);
            }
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            let c: f64 = rng.gen_range(-1.0..1.0) / count as f64;
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            modes.push((Self::wave(chart, &k), c, phase));
        }
        TrigPolynomial { modes }
    }

    fn wave(chart: &ChartSpec, k: &[i64; 4]) -> [f64; 4] {
        let mut w = [0.0; 4];
        for (d, slot) in w.iter_mut().enumerate().take(chart.dim()) {
            *slot = 2.0 * PI * k[d] as f64 / chart.axis(d).extent;
        }
        w
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|(w, c, p)| {
                let arg: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                c * (arg + p).cos()
            })
            .sum()
    }
}

/// Largest admissible wavenumber for band-limited random data on `chart`:
/// a quarter of the coarsest periodic resolution.
pub fn band_limit(chart: &ChartSpec) -> i64 {
    let coarsest = chart.axes().iter().map(|a| a.resolution).min().unwrap_or(8);
    (coarsest / 4).max(1) as i64
}

/// A random smooth field of any kind: every component is an independent
/// trigonometric polynomial with `modes` terms and wavenumbers `≤ kmax`.
/// Deterministic in `(seed, stream)`.
pub fn random_field<K: Kind>(chart: &Arc<ChartSpec>, seed: u64, stream: u64, kmax: i64, modes: usize) -> Field<K> {
    let kmax = kmax.min(band_limit(chart)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let ncomp = K::components(chart.dim());
    let polys: Vec<TrigPolynomial> = (0..ncomp)
        .map(|_| TrigPolynomial::random(chart, kmax, modes, &mut rng))
        .collect();
    Field::from_fn(chart, |x, o| {
        for (slot, p) in o.iter_mut().zip(&polys) {
            *slot = p.eval(x);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::Geometry;
    use crate::field::ScalarField;

    #[test]
    fn conformal_perturbation_is_bounded_and_deterministic() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let spec = MetricSpec::ConformalPerturbed {
            amplitude: 0.1,
            wavenumbers: 1,
            seed: 7,
        };
        let g = spec.build(&chart).unwrap();
        let g2 = spec.build(&chart).unwrap();
        assert_eq!(g.values(), g2.values());
        for node in 0..chart.len() {
            let v = g.get(node, 0, 0);
            assert!((0.9..=1.1).contains(&v));
            assert_eq!(g.get(node, 0, 1), 0.0);
            assert_eq!(v, g.get(node, 1, 1));
        }
        let other = MetricSpec::ConformalPerturbed {
            amplitude: 0.1,
            wavenumbers: 1,
            seed: 8,
        };
        assert_ne!(other.build(&chart).unwrap().values(), g.values());
        assert!(Geometry::new(g).unwrap().scalar().max_abs() > 0.1);
    }

    #[test]
    fn rejects_large_amplitude() {
        let chart = ChartSpec::periodic(2, 1.0, 8).unwrap();
        let spec = MetricSpec::ConformalPerturbed {
            amplitude: 1.0,
            wavenumbers: 1,
            seed: 0,
        };
        assert!(spec.build(&chart).is_err());
    }

    #[test]
    fn random_fields_depend_on_stream_and_are_periodic_trig() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let a: ScalarField = random_field(&chart, 3, 0, 2, 4);
        let b: ScalarField = random_field(&chart, 3, 0, 2, 4);
        let c: ScalarField = random_field(&chart, 3, 1, 2, 4);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(a.max_abs() <= 1.0);
        // a band-limited trig polynomial has zero mean on the torus
        let mean: f64 = a.values().iter().sum::<f64>() / chart.len() as f64;
        assert!(mean.abs() < 1e-14);
    }
}
