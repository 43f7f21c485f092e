//! Levi-Civita connection, curvature and the differential operators built on it.
//!
//! Index conventions (all coordinate components):
//!
//! - `Γᵏᵢⱼ` is stored at `[k][i][j]`, `Γᵏᵢⱼ = ½ g^{kl}(∂ᵢg_{jl} + ∂ⱼg_{il} − ∂_l g_{ij})`.
//! - `Rˡₖᵢⱼ` is stored at `[l][k][i][j]` and is the component of
//!   `R(∂ᵢ, ∂ⱼ)∂ₖ = ∇ᵢ∇ⱼ∂ₖ − ∇ⱼ∇ᵢ∂ₖ`:
//!   `Rˡₖᵢⱼ = ∂ᵢΓˡⱼₖ − ∂ⱼΓˡᵢₖ + ΓˡᵢₘΓᵐⱼₖ − ΓˡⱼₘΓᵐᵢₖ`.
//! - `Ricₖⱼ = Rⁱₖᵢⱼ`, so round spheres have positive Ricci curvature.
//! - `(R̊T)ᵢⱼ = g^{ab} Rᵏⱼₐᵢ T_kb`, i.e. `T(R(e_a, ∂ᵢ)∂ⱼ, e_a)` with the
//!   frame index on the first slot of `R` and the first slot of `T`. With
//!   this layout `R̊g = Ric`.
//! - Covariant derivatives put the differentiation index first:
//!   `(∇T)[i][j][k] = (∇ᵢT)ⱼₖ`.
//!
//! The Laplacian has the positive-spectrum sign, `Δf = −Tr Hess f`, and the
//! divergence is `(δT)ⱼ = −g^{ik}(∇ᵢT)ₖⱼ`.

use crate::error::{GeomError, Result};
use crate::field::{
    sym_index, CovectorField, Field, Kind, ScalarField, SymTensor2Field, Tensor2Field, Tensor3Field,
    Tensor4Field, VectorField,
};
use crate::grid::{partial_derivative, second_partial};
use crate::tensor::{self, MetricField};

/// Curvature data of one metric.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub christoffel: Tensor3Field,
    pub riemann: Tensor4Field,
    pub ricci: SymTensor2Field,
    pub scalar: ScalarField,
}

/// A metric together with its curvature; the cache every operator reads.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub metric: MetricField,
    pub bundle: CurvatureBundle,
}

impl Geometry {
    pub fn new(g: SymTensor2Field) -> Result<Self> {
        Self::from_metric(MetricField::new(g)?)
    }

    pub fn from_metric(metric: MetricField) -> Result<Self> {
        let bundle = curvature_bundle(&metric)?;
        Ok(Geometry { metric, bundle })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn christoffel(&self) -> &Tensor3Field {
        &self.bundle.christoffel
    }

    pub fn ricci(&self) -> &SymTensor2Field {
        &self.bundle.ricci
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.bundle.scalar
    }
}

/// Partial derivatives of every component along every axis.
fn gradients<K: Kind>(f: &Field<K>) -> Result<Vec<Field<K>>> {
    (0..f.dim()).map(|a| partial_derivative(f, a, 1)).collect()
}

/// `Γᵏᵢⱼ` from the Koszul formula.
pub fn christoffel(m: &MetricField) -> Result<Tensor3Field> {
    let n = m.dim();
    let dg = gradients(m.g())?;
    let g_inv = m.g_inv();
    let gamma = Tensor3Field::from_nodes(m.chart(), |node, o| {
        // lowered Γ_{l,ij} = ½(∂ᵢg_jl + ∂ⱼg_il − ∂_l g_ij)
        let mut low = [[[0.0; 4]; 4]; 4];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5
                        * (dg[i].get(node, j, l) + dg[j].get(node, i, l) - dg[l].get(node, i, j));
                    low[l][i][j] = v;
                    low[l][j][i] = v;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    o[(k * n + i) * n + j] = (0..n).map(|l| g_inv.get(node, k, l) * low[l][i][j]).sum();
                }
            }
        }
    });
    gamma.ensure_finite("christoffel symbols")?;
    Ok(gamma)
}

/// Riemann, Ricci and scalar curvature.
pub fn curvature_bundle(m: &MetricField) -> Result<CurvatureBundle> {
    let n = m.dim();
    let gamma = christoffel(m)?;
    let dgamma = gradients(&gamma)?;
    let riemann = Tensor4Field::from_nodes(m.chart(), |node, o| {
        let gm = |a: usize, b: usize, c: usize| gamma.get(node, a, b, c);
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = dgamma[i].get(node, l, j, k) - dgamma[j].get(node, l, i, k);
                        for p in 0..n {
                            v += gm(l, i, p) * gm(p, j, k) - gm(l, j, p) * gm(p, i, k);
                        }
                        o[((l * n + k) * n + i) * n + j] = v;
                    }
                }
            }
        }
    });
    let ricci = SymTensor2Field::from_nodes(m.chart(), |node, o| {
        for k in 0..n {
            for j in k..n {
                let a: f64 = (0..n).map(|i| riemann.get(node, i, k, i, j)).sum();
                let b: f64 = (0..n).map(|i| riemann.get(node, i, j, i, k)).sum();
                o[sym_index(k, j, n)] = 0.5 * (a + b);
            }
        }
    });
    let scalar = tensor::trace(&ricci, m)?;
    scalar.ensure_finite("scalar curvature")?;
    Ok(CurvatureBundle {
        christoffel: gamma,
        riemann,
        ricci,
        scalar,
    })
}

/// `df`.
pub fn differential(f: &ScalarField) -> Result<CovectorField> {
    let n = f.dim();
    let parts = gradients(f)?;
    Ok(CovectorField::from_nodes(f.chart(), |node, o| {
        for i in 0..n {
            o[i] = parts[i].at(node);
        }
    }))
}

/// `(grad f)ⁱ = g^{ij} ∂ⱼf`.
pub fn gradient(f: &ScalarField, geo: &Geometry) -> Result<VectorField> {
    tensor::raise(&differential(f)?, &geo.metric)
}

/// `(Hess f)ᵢⱼ = ∂ᵢ∂ⱼf − Γᵏᵢⱼ∂ₖf`.
pub fn hessian(f: &ScalarField, geo: &Geometry) -> Result<SymTensor2Field> {
    f.check_chart(geo.metric.g())?;
    let n = f.dim();
    let df = gradients(f)?;
    let mut second = Vec::new();
    for i in 0..n {
        for j in i..n {
            second.push(((i, j), second_partial(f, i, j)?));
        }
    }
    let gamma = geo.christoffel();
    Ok(SymTensor2Field::from_nodes(f.chart(), |node, o| {
        for ((i, j), d2) in &second {
            let mut v = d2.at(node);
            for k in 0..n {
                v -= gamma.get(node, k, *i, *j) * df[k].at(node);
            }
            o[sym_index(*i, *j, n)] = v;
        }
    }))
}

/// `Δf = −Tr Hess f`.
pub fn laplacian(f: &ScalarField, geo: &Geometry) -> Result<ScalarField> {
    Ok(-&tensor::trace(&hessian(f, geo)?, &geo.metric)?)
}

/// `(∇ᵢα)ⱼ = ∂ᵢαⱼ − Γᵏᵢⱼαₖ`.
pub fn covariant_covector(alpha: &CovectorField, geo: &Geometry) -> Result<Tensor2Field> {
    alpha.check_chart(geo.metric.g())?;
    let n = alpha.dim();
    let d = gradients(alpha)?;
    let gamma = geo.christoffel();
    Ok(Tensor2Field::from_nodes(alpha.chart(), |node, o| {
        let a = alpha.node(node);
        for i in 0..n {
            for j in 0..n {
                let mut v = d[i].node(node)[j];
                for k in 0..n {
                    v -= gamma.get(node, k, i, j) * a[k];
                }
                o[i * n + j] = v;
            }
        }
    }))
}

/// `(∇ᵢZ)ʲ = ∂ᵢZʲ + ΓʲᵢₖZᵏ`, stored at `[i][j]`.
pub fn covariant_vector(z: &VectorField, geo: &Geometry) -> Result<Tensor2Field> {
    z.check_chart(geo.metric.g())?;
    let n = z.dim();
    let d = gradients(z)?;
    let gamma = geo.christoffel();
    Ok(Tensor2Field::from_nodes(z.chart(), |node, o| {
        let zv = z.node(node);
        for i in 0..n {
            for j in 0..n {
                let mut v = d[i].node(node)[j];
                for k in 0..n {
                    v += gamma.get(node, j, i, k) * zv[k];
                }
                o[i * n + j] = v;
            }
        }
    }))
}

/// `(∇ᵢT)ⱼₖ = ∂ᵢTⱼₖ − ΓᵐᵢⱼT_mk − ΓᵐᵢₖTⱼₘ`.
pub fn covariant_sym2(t: &SymTensor2Field, geo: &Geometry) -> Result<Tensor3Field> {
    t.check_chart(geo.metric.g())?;
    let n = t.dim();
    let d = gradients(t)?;
    let gamma = geo.christoffel();
    Ok(Tensor3Field::from_nodes(t.chart(), |node, o| {
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut v = d[i].get(node, j, k);
                    for m in 0..n {
                        v -= gamma.get(node, m, i, j) * t.get(node, m, k)
                            + gamma.get(node, m, i, k) * t.get(node, j, m);
                    }
                    o[(i * n + j) * n + k] = v;
                    o[(i * n + k) * n + j] = v;
                }
            }
        }
    }))
}

/// Divergence `δ`, lowering the rank by one.
pub trait Divergence {
    type Output;
    fn divergence(&self, geo: &Geometry) -> Result<Self::Output>;
}

impl Divergence for SymTensor2Field {
    type Output = CovectorField;

    /// `(δT)ⱼ = −g^{ik}(∇ᵢT)ₖⱼ`.
    fn divergence(&self, geo: &Geometry) -> Result<CovectorField> {
        let n = self.dim();
        let nabla = covariant_sym2(self, geo)?;
        let g_inv = geo.metric.g_inv();
        Ok(CovectorField::from_nodes(self.chart(), |node, o| {
            for j in 0..n {
                let mut v = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        v -= g_inv.get(node, i, k) * nabla.get(node, i, k, j);
                    }
                }
                o[j] = v;
            }
        }))
    }
}

impl Divergence for CovectorField {
    type Output = ScalarField;

    /// `δα = −g^{ij}(∇ᵢα)ⱼ`.
    fn divergence(&self, geo: &Geometry) -> Result<ScalarField> {
        let n = self.dim();
        let nabla = covariant_covector(self, geo)?;
        let g_inv = geo.metric.g_inv();
        Ok(ScalarField::from_nodes(self.chart(), |node, o| {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v -= g_inv.get(node, i, j) * nabla.get(node, i, j);
                }
            }
            o[0] = v;
        }))
    }
}

pub fn divergence<T: Divergence>(t: &T, geo: &Geometry) -> Result<T::Output> {
    t.divergence(geo)
}

/// `(δ*α)ᵢⱼ = ½((∇ᵢα)ⱼ + (∇ⱼα)ᵢ)`.
pub fn delta_star(alpha: &CovectorField, geo: &Geometry) -> Result<SymTensor2Field> {
    Ok(tensor::symmetrize(&covariant_covector(alpha, geo)?))
}

/// `(∇*∇T)ᵢⱼ = −g^{ab}(∇ₐ∇_bT)ᵢⱼ`.
pub fn rough_laplacian(t: &SymTensor2Field, geo: &Geometry) -> Result<SymTensor2Field> {
    let n = t.dim();
    let nabla = covariant_sym2(t, geo)?;
    let d = gradients(&nabla)?;
    let gamma = geo.christoffel();
    let g_inv = geo.metric.g_inv();
    Ok(SymTensor2Field::from_nodes(t.chart(), |node, o| {
        let nb = |b: usize, i: usize, j: usize| nabla.get(node, b, i, j);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let gab = g_inv.get(node, a, b);
                        if gab == 0.0 {
                            continue;
                        }
                        // (∇ₐ∇T)_{bij}
                        let mut w = d[a].get(node, b, i, j);
                        for m in 0..n {
                            w -= gamma.get(node, m, a, b) * nb(m, i, j)
                                + gamma.get(node, m, a, i) * nb(b, m, j)
                                + gamma.get(node, m, a, j) * nb(b, i, m);
                        }
                        v -= gab * w;
                    }
                }
                o[sym_index(i, j, n)] = v;
            }
        }
    }))
}

/// `(R̊T)ᵢⱼ = g^{ab} Rᵏⱼₐᵢ T_kb`, symmetrized in `(i, j)`.
pub fn ring_r(t: &SymTensor2Field, geo: &Geometry) -> Result<SymTensor2Field> {
    t.check_chart(geo.metric.g())?;
    let n = t.dim();
    let riem = &geo.bundle.riemann;
    let g_inv = geo.metric.g_inv();
    Ok(SymTensor2Field::from_nodes(t.chart(), |node, o| {
        // T_k^a = T_kb g^{ba}
        let mut tu = [[0.0; 4]; 4];
        for k in 0..n {
            for a in 0..n {
                tu[k][a] = (0..n).map(|b| t.get(node, k, b) * g_inv.get(node, b, a)).sum();
            }
        }
        let entry = |i: usize, j: usize| -> f64 {
            let mut v = 0.0;
            for a in 0..n {
                for k in 0..n {
                    v += riem.get(node, k, j, a, i) * tu[k][a];
                }
            }
            v
        };
        for i in 0..n {
            for j in i..n {
                o[sym_index(i, j, n)] = 0.5 * (entry(i, j) + entry(j, i));
            }
        }
    }))
}

/// `Δ_L T = ∇*∇T + Ric∘T + T∘Ric − 2R̊T`.
pub fn lichnerowicz(t: &SymTensor2Field, geo: &Geometry) -> Result<SymTensor2Field> {
    let rough = rough_laplacian(t, geo)?;
    let ric_t = tensor::compose(geo.ricci(), t, &geo.metric)?;
    let ring = ring_r(t, geo)?;
    // Ric∘T + T∘Ric is twice the symmetrized composition.
    Ok(&(&rough + &(&ric_t * 2.0)) - &(&ring * 2.0))
}

/// `(L_Z g)ᵢⱼ = ∇ᵢZⱼ + ∇ⱼZᵢ`.
pub fn lie_derivative_metric(z: &VectorField, geo: &Geometry) -> Result<SymTensor2Field> {
    let flat = tensor::lower(z, &geo.metric)?;
    Ok(&delta_star(&flat, geo)? * 2.0)
}

/// `(∇_Z T)ᵢⱼ = Zᵏ(∇ₖT)ᵢⱼ`.
pub fn directional_sym2(nabla_t: &Tensor3Field, z: &VectorField) -> Result<SymTensor2Field> {
    nabla_t.check_chart(z)?;
    let n = z.dim();
    Ok(SymTensor2Field::from_nodes(z.chart(), |node, o| {
        let zv = z.node(node);
        for i in 0..n {
            for j in i..n {
                o[sym_index(i, j, n)] = (0..n).map(|k| zv[k] * nabla_t.get(node, k, i, j)).sum();
            }
        }
    }))
}

/// `((∇.T)(·, Z))^σ`: `½((∇ᵢT)ⱼₖ + (∇ⱼT)ᵢₖ)Zᵏ`.
pub fn nabla_contract_sym(nabla_t: &Tensor3Field, z: &VectorField) -> Result<SymTensor2Field> {
    nabla_t.check_chart(z)?;
    let n = z.dim();
    Ok(SymTensor2Field::from_nodes(z.chart(), |node, o| {
        let zv = z.node(node);
        for i in 0..n {
            for j in i..n {
                let a: f64 = (0..n).map(|k| nabla_t.get(node, i, j, k) * zv[k]).sum();
                let b: f64 = (0..n).map(|k| nabla_t.get(node, j, i, k) * zv[k]).sum();
                o[sym_index(i, j, n)] = 0.5 * (a + b);
            }
        }
    }))
}

/// Largest first-Bianchi defect `|Rˡₖᵢⱼ + Rˡᵢⱼₖ + Rˡⱼₖᵢ|` over trusted nodes.
pub fn first_bianchi_defect(bundle: &CurvatureBundle, margin: usize) -> f64 {
    let r = &bundle.riemann;
    let n = r.dim();
    let chart = r.chart();
    let mut worst: f64 = 0.0;
    for node in chart.trusted_nodes(margin) {
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let v = r.get(node, l, k, i, j) + r.get(node, l, i, j, k) + r.get(node, l, j, k, i);
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Largest `|Rˡₖᵢⱼ + Rˡₖⱼᵢ|`; zero by construction.
pub fn riemann_antisymmetry_defect(bundle: &CurvatureBundle) -> f64 {
    let r = &bundle.riemann;
    let n = r.dim();
    let mut worst: f64 = 0.0;
    for node in 0..r.chart().len() {
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((r.get(node, l, k, i, j) + r.get(node, l, k, j, i)).abs());
                    }
                }
            }
        }
    }
    worst
}

/// Checks that a vector field lives on the geometry's chart.
pub fn check_vector(z: &VectorField, geo: &Geometry) -> Result<()> {
    if z.same_chart(geo.metric.g()) {
        Ok(())
    } else {
        Err(GeomError::ChartMismatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, ChartSpec};
    use crate::linalg;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(n: usize, res: usize) -> Arc<ChartSpec> {
        ChartSpec::periodic(n, 1.0, res).unwrap()
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let chart = torus(3, 8);
        let geo = Geometry::new(SymTensor2Field::identity(&chart)).unwrap();
        assert!(geo.christoffel().max_abs() < 1e-12);
        assert!(geo.bundle.riemann.max_abs() < 1e-12);
        assert!(geo.ricci().max_abs() < 1e-12);
        assert!(geo.scalar().max_abs() < 1e-12);
    }

    #[test]
    fn conformal_2d_christoffel_matches_koszul() {
        // g = e^{2φ}δ: Γ¹₁₁ = ∂₁φ, Γ¹₂₂ = −∂₁φ, Γ²₁₂ = ∂₁φ.
        let chart = torus(2, 64);
        let phi = |x: &[f64]| 0.1 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
        let dphi0 = |x: &[f64]| 0.2 * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos();
        let g = SymTensor2Field::from_coords_mat(&chart, |x| {
            let mut m = linalg::identity(2);
            let e = (2.0 * phi(x)).exp();
            m[0][0] = e;
            m[1][1] = e;
            m
        });
        let m = MetricField::new(g).unwrap();
        let gamma = christoffel(&m).unwrap();
        let mut worst: f64 = 0.0;
        for node in 0..chart.len() {
            let x = chart.coords(node);
            let d = dphi0(&x[..2]);
            worst = worst
                .max((gamma.get(node, 0, 0, 0) - d).abs())
                .max((gamma.get(node, 0, 1, 1) + d).abs())
                .max((gamma.get(node, 1, 0, 1) - d).abs());
        }
        assert!(worst < 1e-5, "{worst}");
        assert!(gamma.asymmetry_last_pair() < 1e-15);
    }

    #[test]
    fn round_sphere_patch_has_positive_curvature() {
        // g = dθ² + sin²θ dφ² on θ ∈ [0.5, 2.5]: Ric = g, S = 2.
        let chart = ChartSpec::new(vec![Axis::open(0.5, 2.0, 121), Axis::periodic(2.0 * PI, 8)]).unwrap();
        let g = SymTensor2Field::from_coords_mat(&chart, |x| {
            let mut m = linalg::identity(2);
            m[1][1] = x[0].sin().powi(2);
            m
        });
        let geo = Geometry::new(g).unwrap();
        let worst = geo.scalar().max_abs_where(|n| chart.is_trusted(n, 2)) - 2.0;
        assert!(worst.abs() < 1e-5);
        for node in chart.trusted_nodes(2) {
            assert!((geo.scalar().at(node) - 2.0).abs() < 5e-5);
        }
        assert!(riemann_antisymmetry_defect(&geo.bundle) == 0.0);
    }

    #[test]
    fn gradient_and_hessian_on_simple_fields() {
        let chart = ChartSpec::new(vec![Axis::open(0.0, 1.0, 17), Axis::open(0.0, 1.0, 17)]).unwrap();
        let g = SymTensor2Field::from_coords_mat(&chart, |_| {
            let mut m = linalg::identity(2);
            m[0][0] = 4.0;
            m
        });
        let geo = Geometry::new(g).unwrap();
        let x = ScalarField::from_fn(&chart, |p, o| o[0] = p[0]);
        let gr = gradient(&x, &geo).unwrap();
        for node in 0..chart.len() {
            assert!((gr.node(node)[0] - 0.25).abs() < 1e-12);
            assert!(gr.node(node)[1].abs() < 1e-12);
        }
        assert!(hessian(&x, &geo).unwrap().max_abs() < 1e-11);

        let flat = Geometry::new(SymTensor2Field::identity(&chart)).unwrap();
        let xx = ScalarField::from_fn(&chart, |p, o| o[0] = p[0] * p[0]);
        let h = hessian(&xx, &flat).unwrap();
        for node in 0..chart.len() {
            assert!((h.get(node, 0, 0) - 2.0).abs() < 1e-9);
            assert!(h.get(node, 0, 1).abs() < 1e-9 && h.get(node, 1, 1).abs() < 1e-9);
        }
        let lap = laplacian(&xx, &flat).unwrap();
        assert!(lap.values().iter().all(|v| (v + 2.0).abs() < 1e-9));
    }

    #[test]
    fn laplacian_has_positive_spectrum_sign() {
        let chart = torus(2, 64);
        let geo = Geometry::new(SymTensor2Field::identity(&chart)).unwrap();
        let f = ScalarField::from_fn(&chart, |x, o| o[0] = (2.0 * PI * x[0]).sin());
        let lap = laplacian(&f, &geo).unwrap();
        let expect = &f * (4.0 * PI * PI);
        assert!((&lap - &expect).max_abs() < 1e-3);
        assert!(laplacian(&ScalarField::constant(&chart, 2.0), &geo).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn delta_star_and_lie_derivative_on_flat_chart() {
        let chart = ChartSpec::new(vec![Axis::open(0.0, 1.0, 17), Axis::open(0.0, 1.0, 17)]).unwrap();
        let geo = Geometry::new(SymTensor2Field::identity(&chart)).unwrap();
        // α = x dy
        let alpha = CovectorField::from_fn(&chart, |x, o| {
            o[0] = 0.0;
            o[1] = x[0];
        });
        let ds = delta_star(&alpha, &geo).unwrap();
        for node in 0..chart.len() {
            assert!((ds.get(node, 0, 1) - 0.5).abs() < 1e-10);
            assert!(ds.get(node, 0, 0).abs() < 1e-10 && ds.get(node, 1, 1).abs() < 1e-10);
        }
        // Z = x ∂ₓ
        let z = VectorField::from_fn(&chart, |x, o| {
            o[0] = x[0];
            o[1] = 0.0;
        });
        let lz = lie_derivative_metric(&z, &geo).unwrap();
        for node in 0..chart.len() {
            assert!((lz.get(node, 0, 0) - 2.0).abs() < 1e-10);
            assert!(lz.get(node, 0, 1).abs() < 1e-10);
        }
        let konst = VectorField::from_fn(&chart, |_, o| {
            o[0] = 0.3;
            o[1] = -1.0;
        });
        assert!(lie_derivative_metric(&konst, &geo).unwrap().max_abs() < 1e-10);
        let par = CovectorField::from_fn(&chart, |_, o| o.copy_from_slice(&[1.0, 2.0]));
        assert!(delta_star(&par, &geo).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn metric_is_parallel() {
        let chart = torus(2, 32);
        let g = SymTensor2Field::from_coords_mat(&chart, |x| {
            let mut m = linalg::identity(2);
            let c = 1.0 + 0.2 * (2.0 * PI * x[0]).sin();
            m[0][0] = c;
            m[1][1] = c * (1.0 + 0.1 * (2.0 * PI * x[1]).cos());
            m[0][1] = 0.05 * (2.0 * PI * (x[0] + x[1])).sin();
            m
        });
        let geo = Geometry::new(g.clone()).unwrap();
        assert!(divergence(&g, &geo).unwrap().max_abs() < 1e-4);
        assert!(rough_laplacian(&g, &geo).unwrap().max_abs() < 1e-3);
    }

    #[test]
    fn rough_laplacian_flat_reduction() {
        let chart = torus(2, 64);
        let geo = Geometry::new(SymTensor2Field::identity(&chart)).unwrap();
        let t = SymTensor2Field::from_fn(&chart, |x, o| o[0] = (2.0 * PI * x[0]).sin());
        let r = rough_laplacian(&t, &geo).unwrap();
        let expect = &t * (4.0 * PI * PI);
        assert!((&r - &expect).max_abs() < 1e-3);
        // Lichnerowicz equals the rough Laplacian when the metric is flat.
        assert!((&lichnerowicz(&t, &geo).unwrap() - &r).max_abs() < 1e-9);
        assert!(ring_r(&t, &geo).unwrap().max_abs() < 1e-9);
    }
}
