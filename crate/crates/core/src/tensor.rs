//! Pointwise metric algebra.
//!
//! Frame expressions such as `T(X, eᵢ) Q(Y, eᵢ)` over an orthonormal frame
//! are written in coordinates with explicit inverse-metric contractions; no
//! orthonormal frame is ever built.

use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::field::{
    sym_index, CovectorField, Field, ScalarField, SymTensor2Field, Tensor2Field, VectorField,
};
use crate::grid::ChartSpec;
use crate::linalg;

/// A metric with its cached inverse and volume density.
#[derive(Clone, Debug)]
pub struct MetricField {
    g: SymTensor2Field,
    g_inv: SymTensor2Field,
    sqrt_det: ScalarField,
}

/// Inverts `g` node by node. Fails at the first node where `g` is not
/// positive definite, reporting its coordinates.
pub fn invert_metric(g: &SymTensor2Field) -> Result<MetricField> {
    let chart = g.chart().clone();
    let n = chart.dim();
    g.ensure_finite("metric")?;
    let mut inv = vec![0.0; g.values().len()];
    let mut sqrt_det = vec![0.0; chart.len()];
    let nc = g.ncomp();
    for node in 0..chart.len() {
        let (m_inv, sd) =
            linalg::spd_inverse(&g.mat(node), n).ok_or_else(|| GeomError::NotPositiveDefinite {
                node,
                coords: chart.coords(node)[..n].to_vec(),
            })?;
        for i in 0..n {
            for j in i..n {
                inv[node * nc + sym_index(i, j, n)] = m_inv[i][j];
            }
        }
        sqrt_det[node] = sd;
    }
    Ok(MetricField {
        g: g.clone(),
        g_inv: SymTensor2Field::from_vec(chart.clone(), inv),
        sqrt_det: ScalarField::from_vec(chart, sqrt_det),
    })
}

impl MetricField {
    pub fn new(g: SymTensor2Field) -> Result<Self> {
        invert_metric(&g)
    }

    pub fn flat(chart: &Arc<ChartSpec>) -> Self {
        invert_metric(&SymTensor2Field::identity(chart)).expect("identity is positive definite")
    }

    pub fn g(&self) -> &SymTensor2Field {
        &self.g
    }

    pub fn g_inv(&self) -> &SymTensor2Field {
        &self.g_inv
    }

    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    pub fn chart(&self) -> &Arc<ChartSpec> {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `∫ f v^g`; see [`crate::grid::integrate_scalar`].
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        crate::grid::integrate_scalar(f, &self.g)
    }

    pub fn volume(&self) -> Result<f64> {
        self.integrate(&ScalarField::constant(self.chart(), 1.0))
    }
}

fn check<K: crate::field::Kind>(f: &Field<K>, m: &MetricField) -> Result<()> {
    f.check_chart(m.g())
}

/// `<T, Q> = Tᵢⱼ Q_ab g^{ia} g^{jb}`.
pub fn inner_product(t: &SymTensor2Field, q: &SymTensor2Field, m: &MetricField) -> Result<ScalarField> {
    check(t, m)?;
    check(q, m)?;
    let n = m.dim();
    Ok(ScalarField::from_nodes(m.chart(), |node, o| {
        let gi = m.g_inv.mat(node);
        let tm = t.mat(node);
        let qm = q.mat(node);
        // raise both indices of T: T^{ab} = g^{ai} T_ij g^{jb}
        let tu = linalg::mat_mul(&linalg::mat_mul(&gi, &tm, n), &gi, n);
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += tu[a][b] * qm[a][b];
            }
        }
        o[0] = s;
    }))
}

/// `|T|² = <T, T>`.
pub fn norm_sq(t: &SymTensor2Field, m: &MetricField) -> Result<ScalarField> {
    inner_product(t, t, m)
}

/// `Tr T = g^{ij} Tᵢⱼ`.
pub fn trace(t: &SymTensor2Field, m: &MetricField) -> Result<ScalarField> {
    check(t, m)?;
    let n = m.dim();
    Ok(ScalarField::from_nodes(m.chart(), |node, o| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += m.g_inv.get(node, i, j) * t.get(node, i, j);
            }
        }
        o[0] = s;
    }))
}

/// `(T∘Q)ᵢⱼ = Tᵢₐ g^{ab} Q_bⱼ`, symmetrized.
pub fn compose(t: &SymTensor2Field, q: &SymTensor2Field, m: &MetricField) -> Result<SymTensor2Field> {
    check(t, m)?;
    check(q, m)?;
    let n = m.dim();
    Ok(SymTensor2Field::from_mat_fn(m.chart(), |node| {
        let gi = m.g_inv.mat(node);
        let p = linalg::mat_mul(&linalg::mat_mul(&t.mat(node), &gi, n), &q.mat(node), n);
        let mut s = linalg::ZERO;
        for i in 0..n {
            for j in 0..n {
                s[i][j] = 0.5 * (p[i][j] + p[j][i]);
            }
        }
        s
    }))
}

/// `T^σ(X, Y) = ½(T(X, Y) + T(Y, X))`.
pub fn symmetrize(t: &Tensor2Field) -> SymTensor2Field {
    let n = t.dim();
    SymTensor2Field::from_nodes(t.chart(), |node, o| {
        for i in 0..n {
            for j in i..n {
                o[sym_index(i, j, n)] = 0.5 * (t.get(node, i, j) + t.get(node, j, i));
            }
        }
    })
}

/// Embeds a symmetric field into general two-index storage.
pub fn unpack(t: &SymTensor2Field) -> Tensor2Field {
    let n = t.dim();
    Tensor2Field::from_nodes(t.chart(), |node, o| {
        for i in 0..n {
            for j in 0..n {
                o[i * n + j] = t.get(node, i, j);
            }
        }
    })
}

/// `Zᵢ = gᵢⱼ Zʲ`.
pub fn lower(z: &VectorField, m: &MetricField) -> Result<CovectorField> {
    check(z, m)?;
    let n = m.dim();
    Ok(CovectorField::from_nodes(m.chart(), |node, o| {
        let zv = z.node(node);
        for (i, oi) in o.iter_mut().enumerate() {
            *oi = (0..n).map(|j| m.g.get(node, i, j) * zv[j]).sum();
        }
    }))
}

/// `αⁱ = g^{ij} αⱼ`.
pub fn raise(alpha: &CovectorField, m: &MetricField) -> Result<VectorField> {
    check(alpha, m)?;
    let n = m.dim();
    Ok(VectorField::from_nodes(m.chart(), |node, o| {
        let a = alpha.node(node);
        for (i, oi) in o.iter_mut().enumerate() {
            *oi = (0..n).map(|j| m.g_inv.get(node, i, j) * a[j]).sum();
        }
    }))
}

/// `<α, β> = g^{ij} αᵢ βⱼ` for covectors.
pub fn covector_inner(a: &CovectorField, b: &CovectorField, m: &MetricField) -> Result<ScalarField> {
    check(a, m)?;
    check(b, m)?;
    let n = m.dim();
    Ok(ScalarField::from_nodes(m.chart(), |node, o| {
        let (x, y) = (a.node(node), b.node(node));
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += m.g_inv.get(node, i, j) * x[i] * y[j];
            }
        }
        o[0] = s;
    }))
}

/// `α(Z) = αᵢ Zⁱ`.
pub fn pair(alpha: &CovectorField, z: &VectorField) -> Result<ScalarField> {
    alpha.check_chart(z)?;
    Ok(ScalarField::from_nodes(alpha.chart(), |node, o| {
        o[0] = alpha.node(node).iter().zip(z.node(node)).map(|(a, b)| a * b).sum();
    }))
}

/// `T(·, Z)ⱼ = Tⱼₖ Zᵏ`.
pub fn contract_vector(t: &SymTensor2Field, z: &VectorField) -> Result<CovectorField> {
    t.check_chart(z)?;
    let n = t.dim();
    Ok(CovectorField::from_nodes(t.chart(), |node, o| {
        let zv = z.node(node);
        for (j, oj) in o.iter_mut().enumerate() {
            *oj = (0..n).map(|k| t.get(node, j, k) * zv[k]).sum();
        }
    }))
}

/// `(α ⊗ β)ᵢⱼ` symmetrized: `½(αᵢβⱼ + αⱼβᵢ)`.
pub fn sym_outer(a: &CovectorField, b: &CovectorField) -> SymTensor2Field {
    let n = a.dim();
    SymTensor2Field::from_nodes(a.chart(), |node, o| {
        let (x, y) = (a.node(node), b.node(node));
        for i in 0..n {
            for j in i..n {
                o[sym_index(i, j, n)] = 0.5 * (x[i] * y[j] + x[j] * y[i]);
            }
        }
    })
}

/// `f·g`.
pub fn scalar_times_metric(f: &ScalarField, m: &MetricField) -> SymTensor2Field {
    m.g().scale_by(f)
}

/// Largest `|g·g⁻¹ − I|` entry over all nodes.
pub fn inverse_defect(m: &MetricField) -> f64 {
    let n = m.dim();
    let mut worst: f64 = 0.0;
    for node in 0..m.chart().len() {
        let p = linalg::mat_mul(&m.g.mat(node), &m.g_inv.mat(node), n);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[i][j] - e).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use proptest::prelude::*;

    fn torus(n: usize) -> Arc<ChartSpec> {
        ChartSpec::periodic(n, 1.0, 8).unwrap()
    }

    fn diag(chart: &Arc<ChartSpec>, d: &[f64]) -> SymTensor2Field {
        let d = d.to_vec();
        SymTensor2Field::from_mat_fn(chart, move |_| {
            let mut m = linalg::ZERO;
            for (i, v) in d.iter().enumerate() {
                m[i][i] = *v;
            }
            m
        })
    }

    #[test]
    fn identity_inverts_to_identity() {
        let chart = torus(3);
        let m = MetricField::flat(&chart);
        assert!((m.g_inv() - m.g()).max_abs() < 1e-15);
        assert!(m.sqrt_det().values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_metric_inverse() {
        let chart = torus(2);
        let m = invert_metric(&diag(&chart, &[4.0, 9.0])).unwrap();
        assert!((m.g_inv().get(0, 0, 0) - 0.25).abs() < 1e-15);
        assert!((m.g_inv().get(0, 1, 1) - 1.0 / 9.0).abs() < 1e-15);
        assert!((m.sqrt_det().at(0) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn warped_metric_inverse() {
        let alpha = -1.5;
        let chart = ChartSpec::new(vec![
            Axis::open(1.0, 1.0, 9),
            Axis::periodic(1.0, 8),
            Axis::periodic(1.0, 8),
        ])
        .unwrap();
        let g = SymTensor2Field::from_coords_mat(&chart, |x| {
            let mut m = linalg::identity(3);
            let w = x[0].powf(2.0 * alpha);
            m[1][1] = w;
            m[2][2] = w;
            m
        });
        let m = invert_metric(&g).unwrap();
        for node in 0..chart.len() {
            let r = chart.coords(node)[0];
            let w = r.powf(-2.0 * alpha);
            assert!((m.g_inv().get(node, 1, 1) - w).abs() < 1e-13 * w);
            assert!((m.sqrt_det().at(node) - r.powf(2.0 * alpha)).abs() < 1e-13);
        }
        assert!(inverse_defect(&m) < 1e-12);
    }

    #[test]
    fn singular_metric_reports_node() {
        let chart = torus(2);
        let err = invert_metric(&diag(&chart, &[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, GeomError::NotPositiveDefinite { node: 0, .. }));
    }

    #[test]
    fn inner_products_with_metric() {
        let chart = torus(3);
        let m = invert_metric(&diag(&chart, &[2.0, 3.0, 0.5])).unwrap();
        let gg = inner_product(m.g(), m.g(), &m).unwrap();
        assert!(gg.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
        let h = SymTensor2Field::from_fn(&chart, |x, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = (k as f64 + 1.0) * (1.0 + x[0]);
            }
        });
        let gh = inner_product(m.g(), &h, &m).unwrap();
        let tr = trace(&h, &m).unwrap();
        assert!((&gh - &tr).max_abs() < 1e-14);
    }

    #[test]
    fn flat_diagonal_products() {
        let chart = torus(2);
        let m = MetricField::flat(&chart);
        let t = diag(&chart, &[2.0, 3.0]);
        let q = diag(&chart, &[5.0, 7.0]);
        assert!((inner_product(&t, &q, &m).unwrap().at(0) - 31.0).abs() < 1e-14);
        let tt = compose(&t, &t, &m).unwrap();
        assert!((tt.get(0, 0, 0) - 4.0).abs() < 1e-14 && (tt.get(0, 1, 1) - 9.0).abs() < 1e-14);
        let tr = trace(&(m.g() * 2.5), &m).unwrap();
        assert!((tr.at(0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn symmetrize_basics() {
        let chart = torus(2);
        let e12 = Tensor2Field::from_nodes(&chart, |_, o| o[1] = 1.0);
        let s = symmetrize(&e12);
        assert_eq!(s.get(0, 0, 1), 0.5);
        assert_eq!(s.get(0, 0, 0), 0.0);
        let anti = Tensor2Field::from_nodes(&chart, |_, o| {
            o[1] = 1.0;
            o[2] = -1.0;
        });
        assert_eq!(symmetrize(&anti).max_abs(), 0.0);
        let sym = SymTensor2Field::from_nodes(&chart, |_, o| o.copy_from_slice(&[1.0, 2.0, 3.0]));
        assert_eq!(symmetrize(&unpack(&sym)).values(), sym.values());
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let m = MetricField::flat(&torus(2));
        let other = SymTensor2Field::identity(&ChartSpec::periodic(2, 2.0, 8).unwrap());
        assert_eq!(trace(&other, &m).unwrap_err(), GeomError::ChartMismatch);
    }

    fn spd_from(seed: &[f64], n: usize) -> linalg::Mat {
        // A = B Bᵀ + n·I is positive definite for any B.
        let mut b = linalg::ZERO;
        for i in 0..n {
            for j in 0..n {
                b[i][j] = seed[i * n + j];
            }
        }
        let mut a = linalg::ZERO;
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { n as f64 } else { 0.0 };
            }
        }
        a
    }

    proptest! {
        #[test]
        fn metric_algebra_identities(
            n in 2usize..=4,
            gs in prop::collection::vec(-1.0f64..1.0, 16),
            ts in prop::collection::vec(-2.0f64..2.0, 10),
            qs in prop::collection::vec(-2.0f64..2.0, 10),
            zs in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let chart = ChartSpec::periodic(n, 1.0, 8).unwrap();
            let gm = spd_from(&gs, n);
            let m = invert_metric(&SymTensor2Field::from_mat_fn(&chart, |_| gm)).unwrap();
            let t = SymTensor2Field::from_nodes(&chart, |_, o| o.copy_from_slice(&ts[..o.len()]));
            let q = SymTensor2Field::from_nodes(&chart, |_, o| o.copy_from_slice(&qs[..o.len()]));
            let tq = inner_product(&t, &q, &m).unwrap().at(0);
            let qt = inner_product(&q, &t, &m).unwrap().at(0);
            let scale = 1.0 + tq.abs();
            prop_assert!((tq - qt).abs() < 1e-12 * scale);
            let comp = compose(&t, &q, &m).unwrap();
            let cg = inner_product(&comp, m.g(), &m).unwrap().at(0);
            prop_assert!((cg - tq).abs() < 1e-11 * scale);
            let tg = compose(&t, m.g(), &m).unwrap();
            prop_assert!((&tg - &t).max_abs() < 1e-12 * (1.0 + t.max_abs()));
            prop_assert!(inverse_defect(&m) < 1e-12);
            let z = VectorField::from_nodes(&chart, |_, o| o.copy_from_slice(&zs[..o.len()]));
            let back = raise(&lower(&z, &m).unwrap(), &m).unwrap();
            prop_assert!((&back - &z).max_abs() < 1e-12 * (1.0 + z.max_abs()) * 10.0);
        }
    }
}
