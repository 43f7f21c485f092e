//! Component arrays over chart nodes.
//!
//! A [`Field`] stores `ncomp` reals per node, node-major (components are
//! contiguous for each node, nodes in row-major order). The [`Kind`] marker
//! fixes how many components a field carries and how they are indexed:
//!
//! | kind       | components | index of `(a, b, …)`             |
//! |------------|------------|----------------------------------|
//! | `Scalar`   | 1          | —                                |
//! | `Covector` | n          | `i`                              |
//! | `Vector`   | n          | `i`                              |
//! | `Sym2`     | n(n+1)/2   | packed upper triangle, [`sym_index`] |
//! | `Mixed2`   | n²         | `i·n + j`                        |
//! | `Tensor3`  | n³         | `(a·n + b)·n + c`                |
//! | `Tensor4`  | n⁴         | `((a·n + b)·n + c)·n + d`        |

use std::fmt;
use std::io::{Read, Write};
use std::marker::PhantomData;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GeomError, Result};
use crate::grid::{Axis, Boundary, ChartSpec, MAX_DIM};
use crate::linalg::{Mat, ZERO};

pub trait Kind: Copy + Send + Sync + fmt::Debug + 'static {
    const NAME: &'static str;
    fn components(dim: usize) -> usize;
}

macro_rules! kind {
    ($name:ident, $label:literal, |$n:ident| $count:expr) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        pub struct $name;
        impl Kind for $name {
            const NAME: &'static str = $label;
            fn components($n: usize) -> usize {
                $count
            }
        }
    };
}

kind!(Scalar, "scalar", |_n| 1);
kind!(Covector, "covector", |n| n);
kind!(Vector, "vector", |n| n);
kind!(Sym2, "sym2", |n| n * (n + 1) / 2);
kind!(Mixed2, "mixed2", |n| n * n);
kind!(Tensor3, "tensor3", |n| n * n * n);
kind!(Tensor4, "tensor4", |n| n * n * n * n);

pub type ScalarField = Field<Scalar>;
pub type CovectorField = Field<Covector>;
pub type VectorField = Field<Vector>;
pub type SymTensor2Field = Field<Sym2>;
/// Two-index covariant field without symmetry (e.g. `∇α`).
pub type Tensor2Field = Field<Mixed2>;
pub type Tensor3Field = Field<Tensor3>;
pub type Tensor4Field = Field<Tensor4>;

/// Packed position of the symmetric pair `(i, j)` in an `n`-dimensional chart.
#[inline]
pub fn sym_index(i: usize, j: usize, n: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

#[derive(Clone)]
pub struct Field<K: Kind> {
    chart: Arc<ChartSpec>,
    data: Vec<f64>,
    _kind: PhantomData<K>,
}

impl<K: Kind> fmt::Debug for Field<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("kind", &K::NAME)
            .field("nodes", &self.chart.len())
            .field("ncomp", &self.ncomp())
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl<K: Kind> Field<K> {
    pub fn zeros(chart: &Arc<ChartSpec>) -> Self {
        let nc = K::components(chart.dim());
        Field {
            chart: chart.clone(),
            data: vec![0.0; nc * chart.len()],
            _kind: PhantomData,
        }
    }

    /// Wraps raw node-major data. Panics if the length does not match the chart.
    pub fn from_vec(chart: Arc<ChartSpec>, data: Vec<f64>) -> Self {
        let nc = K::components(chart.dim());
        assert_eq!(data.len(), nc * chart.len(), "{} field size mismatch", K::NAME);
        Field {
            chart,
            data,
            _kind: PhantomData,
        }
    }

    /// Fills each node from its coordinates.
    pub fn from_fn(chart: &Arc<ChartSpec>, f: impl Fn(&[f64], &mut [f64]) + Sync) -> Self {
        let dim = chart.dim();
        Self::from_nodes(chart, |node, out| {
            let x = chart.coords(node);
            f(&x[..dim], out)
        })
    }

    /// Fills each node from its flat index; the workhorse for pointwise algebra.
    pub fn from_nodes(chart: &Arc<ChartSpec>, f: impl Fn(usize, &mut [f64]) + Sync) -> Self {
        let mut out = Self::zeros(chart);
        let nc = out.ncomp();
        out.data
            .par_chunks_mut(nc)
            .enumerate()
            .for_each(|(node, o)| f(node, o));
        out
    }

    pub fn chart(&self) -> &Arc<ChartSpec> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn ncomp(&self) -> usize {
        K::components(self.chart.dim())
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[node * nc..(node + 1) * nc]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let nc = self.ncomp();
        &mut self.data[node * nc..(node + 1) * nc]
    }

    pub fn same_chart<L: Kind>(&self, other: &Field<L>) -> bool {
        Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart
    }

    pub fn check_chart<L: Kind>(&self, other: &Field<L>) -> Result<()> {
        if self.same_chart(other) {
            Ok(())
        } else {
            Err(GeomError::ChartMismatch)
        }
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> ScalarField {
        let nc = self.ncomp();
        ScalarField::from_vec(self.chart.clone(), self.data.iter().skip(c).step_by(nc).copied().collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max absolute value over nodes satisfying `keep`.
    pub fn max_abs_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let nc = self.ncomp();
        self.data
            .chunks_exact(nc)
            .enumerate()
            .filter(|(n, _)| keep(*n))
            .flat_map(|(_, c)| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(GeomError::NonFinite(what.to_string()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Field::from_vec(self.chart.clone(), self.data.par_iter().map(|&v| f(v)).collect())
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert!(self.same_chart(other), "lincomb across charts");
        Field::from_vec(
            self.chart.clone(),
            self.data
                .par_iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    /// Multiplies every node by the scalar field `f`.
    pub fn scale_by(&self, f: &ScalarField) -> Self {
        assert!(self.same_chart(f), "scale_by across charts");
        let nc = self.ncomp();
        Self::from_nodes(&self.chart, |node, o| {
            let s = f.data[node];
            for (c, v) in o.iter_mut().enumerate() {
                *v = s * self.data[node * nc + c];
            }
        })
    }

    /// Writes the flat binary layout: `u32 dim`, `u32` resolution per axis,
    /// `u32` component count, then node-major little-endian `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for a in self.chart.axes() {
            w.write_all(&(a.resolution as u32).to_le_bytes())?;
        }
        w.write_all(&(self.ncomp() as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary layout back onto `chart`, which must match the header.
    pub fn read_binary<R: Read>(chart: &Arc<ChartSpec>, mut r: R) -> Result<Self> {
        let mut word = [0u8; 4];
        let mut next = |r: &mut R| -> Result<usize> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let dim = next(&mut r)?;
        if dim != chart.dim() {
            return Err(GeomError::ChartMismatch);
        }
        for a in chart.axes() {
            if next(&mut r)? != a.resolution {
                return Err(GeomError::ChartMismatch);
            }
        }
        let nc = next(&mut r)?;
        if nc != K::components(dim) {
            return Err(GeomError::InvalidParameter(format!(
                "header has {nc} components, {} field needs {}",
                K::NAME,
                K::components(dim)
            )));
        }
        let mut data = vec![0.0; nc * chart.len()];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Field::from_vec(chart.clone(), data))
    }

    /// CSV with one row per node: coordinates then components.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.dim();
        let header: Vec<String> = (0..dim)
            .map(|k| format!("x{k}"))
            .chain((0..self.ncomp()).map(|c| format!("c{c}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for node in 0..self.chart.len() {
            let x = self.chart.coords(node);
            let row: Vec<String> = x[..dim]
                .iter()
                .chain(self.node(node))
                .map(|v| format!("{v:.17e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl ScalarField {
    pub fn constant(chart: &Arc<ChartSpec>, value: f64) -> Self {
        Field::from_vec(chart.clone(), vec![value; chart.len()])
    }

    pub fn at(&self, node: usize) -> f64 {
        self.data[node]
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.scale_by(other)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

impl SymTensor2Field {
    pub fn identity(chart: &Arc<ChartSpec>) -> Self {
        let n = chart.dim();
        Self::from_nodes(chart, |_, o| {
            for i in 0..n {
                o[sym_index(i, i, n)] = 1.0;
            }
        })
    }

    /// Builds a symmetric field from a per-node dense matrix; only the upper
    /// triangle of the returned matrix is read.
    pub fn from_mat_fn(chart: &Arc<ChartSpec>, f: impl Fn(usize) -> Mat + Sync) -> Self {
        let n = chart.dim();
        Self::from_nodes(chart, |node, o| {
            let m = f(node);
            for i in 0..n {
                for j in i..n {
                    o[sym_index(i, j, n)] = m[i][j];
                }
            }
        })
    }

    /// Builds from a per-node closure over coordinates returning a dense matrix.
    pub fn from_coords_mat(chart: &Arc<ChartSpec>, f: impl Fn(&[f64]) -> Mat + Sync) -> Self {
        let dim = chart.dim();
        Self::from_mat_fn(chart, |node| {
            let x = chart.coords(node);
            f(&x[..dim])
        })
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.data[node * self.ncomp() + sym_index(i, j, n)]
    }

    /// Dense symmetric matrix at a node.
    pub fn mat(&self, node: usize) -> Mat {
        let n = self.dim();
        let v = self.node(node);
        let mut m = ZERO;
        for i in 0..n {
            for j in i..n {
                let x = v[sym_index(i, j, n)];
                m[i][j] = x;
                m[j][i] = x;
            }
        }
        m
    }
}

impl Tensor2Field {
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.data[node * n * n + i * n + j]
    }

    pub fn mat(&self, node: usize) -> Mat {
        let n = self.dim();
        let v = self.node(node);
        let mut m = ZERO;
        for i in 0..n {
            for j in 0..n {
                m[i][j] = v[i * n + j];
            }
        }
        m
    }
}

impl Tensor3Field {
    #[inline]
    pub fn get(&self, node: usize, a: usize, b: usize, c: usize) -> f64 {
        let n = self.dim();
        self.data[node * n * n * n + (a * n + b) * n + c]
    }

    /// Largest violation of symmetry in the last two indices.
    pub fn asymmetry_last_pair(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for node in 0..self.chart.len() {
            for a in 0..n {
                for b in 0..n {
                    for c in b + 1..n {
                        worst = worst.max((self.get(node, a, b, c) - self.get(node, a, c, b)).abs());
                    }
                }
            }
        }
        worst
    }
}

impl Tensor4Field {
    #[inline]
    pub fn get(&self, node: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim();
        self.data[node * n * n * n * n + ((a * n + b) * n + c) * n + d]
    }
}

impl<K: Kind> Add for &Field<K> {
    type Output = Field<K>;
    fn add(self, rhs: Self) -> Field<K> {
        self.lincomb(1.0, rhs, 1.0)
    }
}

impl<K: Kind> Sub for &Field<K> {
    type Output = Field<K>;
    fn sub(self, rhs: Self) -> Field<K> {
        self.lincomb(1.0, rhs, -1.0)
    }
}

impl<K: Kind> Mul<f64> for &Field<K> {
    type Output = Field<K>;
    fn mul(self, rhs: f64) -> Field<K> {
        self.map(|v| v * rhs)
    }
}

impl<K: Kind> Neg for &Field<K> {
    type Output = Field<K>;
    fn neg(self) -> Field<K> {
        self.map(|v| -v)
    }
}

/// Restricts `field` from `fine` to the coarse chart whose nodes it contains
/// (every `ratio`-th node on each axis).
pub fn restrict<K: Kind>(field: &Field<K>, coarse: &Arc<ChartSpec>) -> Result<Field<K>> {
    let fine = field.chart();
    let dim = fine.dim();
    if coarse.dim() != dim {
        return Err(GeomError::ChartMismatch);
    }
    let mut ratios = [1usize; MAX_DIM];
    for k in 0..dim {
        let (fa, ca): (&Axis, &Axis) = (fine.axis(k), coarse.axis(k));
        if fa.boundary != ca.boundary || fa.extent != ca.extent || fa.origin != ca.origin {
            return Err(GeomError::ChartMismatch);
        }
        let (fc, cc) = match fa.boundary {
            Boundary::Periodic => (fa.resolution, ca.resolution),
            Boundary::OpenPatch => (fa.resolution - 1, ca.resolution - 1),
        };
        if fc % cc != 0 {
            return Err(GeomError::ChartMismatch);
        }
        ratios[k] = fc / cc;
    }
    let nc = field.ncomp();
    Ok(Field::from_nodes(coarse, |node, o| {
        let idx = coarse.multi_index(node);
        let mut fnode = 0;
        for k in 0..dim {
            fnode += idx[k] * ratios[k] * fine.stride(k);
        }
        o.copy_from_slice(&field.values()[fnode * nc..(fnode + 1) * nc]);
    }))
}
