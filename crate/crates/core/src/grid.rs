//! Coordinate charts discretized on uniform node grids.
//!
//! A chart is a box in ℝⁿ (2 ≤ n ≤ 4). Every axis is either periodic (the
//! nodes `origin + i·L/N` tile a circle of length `L`) or an open patch (the
//! nodes `origin + i·L/(N−1)` include both endpoints). All spatial
//! derivatives in the crate go through [`partial_derivative`] and all
//! integrals through [`integrate_scalar`].
//!
//! Derivatives use fourth-order stencils. Periodic axes use the 5-point
//! central stencil everywhere. Open axes switch to one-sided stencils of the
//! same order on the two nodes nearest each edge; those nodes are outside the
//! trusted interior (see [`ChartSpec::is_trusted`]).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Field, Kind, ScalarField, SymTensor2Field};
use crate::linalg;
use crate::numeric::NeumaierSum;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 4;
pub const MIN_RESOLUTION: usize = 8;
/// Nodes at each open edge excluded from comparisons against closed forms.
pub const TRUST_MARGIN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    OpenPatch,
}

/// One coordinate axis of a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub extent: f64,
    pub resolution: usize,
    pub boundary: Boundary,
    #[serde(default)]
    pub origin: f64,
}

impl Axis {
    pub fn periodic(extent: f64, resolution: usize) -> Self {
        Axis {
            extent,
            resolution,
            boundary: Boundary::Periodic,
            origin: 0.0,
        }
    }

    pub fn open(origin: f64, extent: f64, resolution: usize) -> Self {
        Axis {
            extent,
            resolution,
            boundary: Boundary::OpenPatch,
            origin,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.extent / self.resolution as f64,
            Boundary::OpenPatch => self.extent / (self.resolution - 1) as f64,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }
}

/// A single coordinate chart with per-axis extent, resolution and boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartSpec {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl ChartSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Arc<Self>> {
        let dim = axes.len();
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(GeomError::InvalidChart(format!(
                "dimension {dim} outside {MIN_DIM}..={MAX_DIM}"
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.resolution < MIN_RESOLUTION {
                return Err(GeomError::InvalidChart(format!(
                    "axis {k} has {} nodes, minimum is {MIN_RESOLUTION}",
                    a.resolution
                )));
            }
            if !(a.extent > 0.0 && a.extent.is_finite()) {
                return Err(GeomError::InvalidChart(format!(
                    "axis {k} extent must be positive and finite, got {}",
                    a.extent
                )));
            }
            if !a.origin.is_finite() {
                return Err(GeomError::InvalidChart(format!("axis {k} origin is not finite")));
            }
        }
        let mut strides = vec![1; dim];
        for k in (0..dim - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].resolution;
        }
        let len = strides[0] * axes[0].resolution;
        Ok(Arc::new(ChartSpec { axes, strides, len }))
    }

    /// Fully periodic cube `[0, extent)ⁿ` with `resolution` nodes per axis.
    pub fn periodic(dim: usize, extent: f64, resolution: usize) -> Result<Arc<Self>> {
        Self::new(vec![Axis::periodic(extent, resolution); dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    /// Coordinate volume of one grid cell, `Δx₁···Δxₙ`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn is_periodic(&self) -> bool {
        self.axes.iter().all(|a| a.boundary == Boundary::Periodic)
    }

    /// Multi-index of a flat node index (row-major, axis 0 slowest).
    pub fn multi_index(&self, node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (k, a) in self.axes.iter().enumerate() {
            idx[k] = (node / self.strides[k]) % a.resolution;
        }
        idx
    }

    pub fn coords(&self, node: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(node);
        let mut x = [0.0; MAX_DIM];
        for (k, a) in self.axes.iter().enumerate() {
            x[k] = a.coord(idx[k]);
        }
        x
    }

    /// True when the node is at least `margin` nodes away from every open edge.
    pub fn is_trusted(&self, node: usize, margin: usize) -> bool {
        let idx = self.multi_index(node);
        self.axes.iter().enumerate().all(|(k, a)| match a.boundary {
            Boundary::Periodic => true,
            Boundary::OpenPatch => idx[k] >= margin && idx[k] + margin < a.resolution,
        })
    }

    pub fn trusted_nodes(&self, margin: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&n| self.is_trusted(n, margin))
    }

    /// Same chart with new per-axis resolutions.
    pub fn with_resolutions(&self, resolutions: &[usize]) -> Result<Arc<Self>> {
        if resolutions.len() != self.dim() {
            return Err(GeomError::InvalidChart(format!(
                "expected {} resolutions, got {}",
                self.dim(),
                resolutions.len()
            )));
        }
        let axes = self
            .axes
            .iter()
            .zip(resolutions)
            .map(|(a, &n)| Axis {
                resolution: n,
                ..a.clone()
            })
            .collect();
        Self::new(axes)
    }
}

/// Finite-difference weights for derivatives up to `max_order` at `z`, given
/// node positions `x` (Fornberg's recursion). Returns `w[order][node]`.
pub fn fd_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil for one node position: neighbour offsets (in nodes) and weights
/// already divided by `hᵒʳᵈᵉʳ`.
#[derive(Clone, Debug)]
struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

fn stencil_at(offsets: Vec<isize>, order: usize, h: f64) -> Stencil {
    let x: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let w = fd_weights(0.0, &x, order);
    let scale = h.powi(order as i32);
    let weights = w[order].iter().map(|v| v / scale).collect();
    Stencil { offsets, weights }
}

/// Stencils per node position along one axis. For periodic axes a single
/// central stencil is reused.
struct AxisStencils {
    central: Stencil,
    // Edge stencils for nodes 0, 1 and N-2, N-1 on open axes.
    left: Vec<Stencil>,
    right: Vec<Stencil>,
}

impl AxisStencils {
    fn new(axis: &Axis, order: usize) -> Self {
        let h = axis.spacing();
        let central = stencil_at(vec![-2, -1, 0, 1, 2], order, h);
        let (mut left, mut right) = (Vec::new(), Vec::new());
        if axis.boundary == Boundary::OpenPatch {
            // First derivatives: 5 points; second derivatives: 6 points keep order 4.
            let width: isize = if order == 1 { 5 } else { 6 };
            for i in 0..TRUST_MARGIN as isize {
                left.push(stencil_at((-i..width - i).collect(), order, h));
                right.push(stencil_at((-(width - 1 - i)..=i).collect(), order, h));
            }
        }
        AxisStencils {
            central,
            left,
            right,
        }
    }

    fn for_index(&self, i: usize, n: usize) -> &Stencil {
        if self.left.is_empty() {
            return &self.central;
        }
        if i < self.left.len() {
            &self.left[i]
        } else if i + self.right.len() >= n {
            &self.right[n - 1 - i]
        } else {
            &self.central
        }
    }
}

/// `∂/∂x_axis` (order 1) or `∂²/∂x_axis²` (order 2) of every component.
pub fn partial_derivative<K: Kind>(field: &Field<K>, axis: usize, order: usize) -> Result<Field<K>> {
    let chart = field.chart();
    let dim = chart.dim();
    if axis >= dim {
        return Err(GeomError::AxisOutOfRange { axis, dim });
    }
    if !(1..=2).contains(&order) {
        return Err(GeomError::InvalidParameter(format!(
            "derivative order {order} not supported (1 or 2)"
        )));
    }
    let ax = chart.axis(axis);
    let n = ax.resolution;
    let needed = match (ax.boundary, order) {
        (Boundary::Periodic, _) => 5,
        (Boundary::OpenPatch, 1) => 5,
        (Boundary::OpenPatch, _) => 6,
    };
    if n < needed {
        return Err(GeomError::ResolutionTooSmall {
            axis,
            resolution: n,
            needed,
        });
    }
    let stencils = AxisStencils::new(ax, order);
    let stride = chart.stride(axis);
    let periodic = ax.boundary == Boundary::Periodic;
    let nc = field.ncomp();
    let src = field.values();
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(nc).enumerate().for_each(|(node, o)| {
        let i = (node / stride) % n;
        let base = node - i * stride;
        let st = stencils.for_index(i, n);
        for (&off, &w) in st.offsets.iter().zip(&st.weights) {
            let j = i as isize + off;
            let j = if periodic {
                j.rem_euclid(n as isize) as usize
            } else {
                j as usize
            };
            let nb = (base + j * stride) * nc;
            for c in 0..nc {
                o[c] += w * src[nb + c];
            }
        }
    });
    Ok(Field::from_vec(chart.clone(), out))
}

/// Mixed second partial `∂ᵢ∂ⱼ`; the diagonal uses the direct second-order stencil.
pub fn second_partial<K: Kind>(field: &Field<K>, i: usize, j: usize) -> Result<Field<K>> {
    if i == j {
        partial_derivative(field, i, 2)
    } else {
        partial_derivative(&partial_derivative(field, i, 1)?, j, 1)
    }
}

/// `∫ f v^g` with `v^g = √det g dx`, rectangle rule on a periodic chart.
pub fn integrate_scalar(f: &ScalarField, g: &SymTensor2Field) -> Result<f64> {
    let chart = f.chart();
    if !f.same_chart(g) {
        return Err(GeomError::ChartMismatch);
    }
    if !chart.is_periodic() {
        return Err(GeomError::NotPeriodic);
    }
    let dim = chart.dim();
    let mut sum = NeumaierSum::default();
    for node in 0..chart.len() {
        let m = g.mat(node);
        let det = linalg::cholesky_det(&m, dim).ok_or_else(|| GeomError::NotPositiveDefinite {
            node,
            coords: chart.coords(node)[..dim].to_vec(),
        })?;
        sum.add(f.values()[node] * det.sqrt());
    }
    Ok(sum.value() * chart.cell_volume())
}

/// `∫ f dx` (flat coordinate measure) on a periodic chart.
pub fn integrate_flat(f: &ScalarField) -> Result<f64> {
    let chart = f.chart();
    if !chart.is_periodic() {
        return Err(GeomError::NotPeriodic);
    }
    let mut sum = NeumaierSum::default();
    for &v in f.values() {
        sum.add(v);
    }
    Ok(sum.value() * chart.cell_volume())
}
