//! Analytic first variations along a metric direction `h = ∂g_t/∂t|₀`, and
//! the operators `T₀`, `T₁` whose pairing with `h` gives the second variation
//! of `E_F` on fixed-volume metrics at a critical point `E_F(g) = λ g`.

use crate::curvature::{self, Divergence, Geometry};
use crate::einstein::{self, EinsteinForm};
use crate::error::{GeomError, Result};
use crate::ffunc::FScalarFunction;
use crate::field::{ScalarField, SymTensor2Field, Tensor3Field};
use crate::tensor::{self, MetricField};

/// First and (optionally) second `t`-derivative of a metric family.
#[derive(Clone, Debug)]
pub struct VariationDirection {
    pub h: SymTensor2Field,
    pub k: Option<SymTensor2Field>,
}

impl VariationDirection {
    pub fn new(h: SymTensor2Field) -> Self {
        VariationDirection { h, k: None }
    }
}

/// `∂v^{g_t}/∂t|₀ = ½ (Tr h) v^g`; returns the density factor `½ Tr h`.
pub fn volume_element_variation(h: &SymTensor2Field, m: &MetricField) -> Result<ScalarField> {
    Ok(&tensor::trace(h, m)? * 0.5)
}

/// The three terms of `∂S = Δ(Tr h) + δ(δh) − <Ric, h>`.
pub fn scalar_curvature_variation_terms(
    h: &SymTensor2Field,
    geo: &Geometry,
) -> Result<[ScalarField; 3]> {
    let tr = tensor::trace(h, &geo.metric)?;
    let lap_tr = curvature::laplacian(&tr, geo)?;
    let dd = h.divergence(geo)?.divergence(geo)?;
    let ric_h = tensor::inner_product(geo.ricci(), h, &geo.metric)?;
    Ok([lap_tr, dd, ric_h])
}

/// `∂S_t/∂t|₀ = Δ(Tr h) + δ(δh) − <Ric, h>`.
pub fn scalar_curvature_variation(h: &SymTensor2Field, geo: &Geometry) -> Result<ScalarField> {
    let [a, b, c] = scalar_curvature_variation_terms(h, geo)?;
    Ok(&(&a + &b) - &c)
}

/// `∂/∂t <T_t, Q_t>_t = <Ṫ, Q> + <T, Q̇> − 2<T, h∘Q>`. Pass `None` for
/// tensors that do not depend on `t`.
pub fn inner_product_variation(
    t: &SymTensor2Field,
    q: &SymTensor2Field,
    t_dot: Option<&SymTensor2Field>,
    q_dot: Option<&SymTensor2Field>,
    h: &SymTensor2Field,
    m: &MetricField,
) -> Result<ScalarField> {
    let hq = tensor::compose(h, q, m)?;
    let mut out = &tensor::inner_product(t, &hq, m)? * -2.0;
    if let Some(td) = t_dot {
        out = &out + &tensor::inner_product(td, q, m)?;
    }
    if let Some(qd) = q_dot {
        out = &out + &tensor::inner_product(t, qd, m)?;
    }
    Ok(out)
}

/// Variation of the Levi-Civita connection as `Cᵏᵢⱼ` (layout of `Γᵏᵢⱼ`):
/// `g(C(X, Y), Z) = ½[(∇_X h)(Y, Z) + (∇_Y h)(X, Z) − (∇_Z h)(X, Y)]`.
pub fn connection_variation(h: &SymTensor2Field, geo: &Geometry) -> Result<Tensor3Field> {
    let n = h.dim();
    let nh = curvature::covariant_sym2(h, geo)?;
    let g_inv = geo.metric.g_inv();
    Ok(Tensor3Field::from_nodes(h.chart(), |node, o| {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        let low = nh.get(node, i, j, l) + nh.get(node, j, i, l) - nh.get(node, l, i, j);
                        v += g_inv.get(node, k, l) * low;
                    }
                    o[(k * n + i) * n + j] = 0.5 * v;
                }
            }
        }
    }))
}

/// `∂(Hess_t f_t)/∂t|₀ = Hess ḟ − ((∇.h)(·, grad f))^σ + ½ ∇_{grad f} h`.
pub fn hessian_variation(
    f: &ScalarField,
    f_dot: &ScalarField,
    h: &SymTensor2Field,
    geo: &Geometry,
) -> Result<SymTensor2Field> {
    let grad_f = curvature::gradient(f, geo)?;
    let nh = curvature::covariant_sym2(h, geo)?;
    let hess_dot = curvature::hessian(f_dot, geo)?;
    let sym_term = curvature::nabla_contract_sym(&nh, &grad_f)?;
    let dir = curvature::directional_sym2(&nh, &grad_f)?;
    Ok(&(&hess_dot - &sym_term) + &(&dir * 0.5))
}

/// `∂(Δ_t f_t)/∂t|₀ = Δḟ − <δh + ½ d(Tr h), df> + <Hess f, h>`.
pub fn laplacian_variation(
    f: &ScalarField,
    f_dot: &ScalarField,
    h: &SymTensor2Field,
    geo: &Geometry,
) -> Result<ScalarField> {
    let m = &geo.metric;
    let df = curvature::differential(f)?;
    let dtr = curvature::differential(&tensor::trace(h, m)?)?;
    let w = h.divergence(geo)?.lincomb(1.0, &dtr, 0.5);
    let pair = tensor::covector_inner(&w, &df, m)?;
    let hess_h = tensor::inner_product(&curvature::hessian(f, geo)?, h, m)?;
    Ok(&(&curvature::laplacian(f_dot, geo)? - &pair) + &hess_h)
}

/// `∂Ric/∂t|₀ = ½∇*∇h − R̊h + ½(Ric∘h + h∘Ric) − δ*(δh) − ½ Hess(Tr h)`,
/// i.e. `½Δ_L h − δ*(δh) − ½ Hess(Tr h)`.
pub fn ricci_variation(h: &SymTensor2Field, geo: &Geometry) -> Result<SymTensor2Field> {
    let lich = curvature::lichnerowicz(h, geo)?;
    let dsd = curvature::delta_star(&h.divergence(geo)?, geo)?;
    let hess_tr = curvature::hessian(&tensor::trace(h, &geo.metric)?, geo)?;
    Ok(&(&(&lich * 0.5) - &dsd) - &(&hess_tr * 0.5))
}

/// `dE_F/dt|₀ = −∫ <E_F(g), h> v^g`.
pub fn first_variation_functional(geo: &Geometry, f: &FScalarFunction, h: &SymTensor2Field) -> Result<f64> {
    let pkg = einstein::f_einstein_tensor(geo, f, EinsteinForm::Compact)?;
    let integrand = tensor::inner_product(&pkg.e_f, h, &geo.metric)?;
    Ok(-geo.metric.integrate(&integrand)?)
}

/// `f = F″(S)[Δ(Tr h) + δ(δh) − <Ric, h>]`, the variation of `F′(S_t)`.
pub fn f_aux(h: &SymTensor2Field, geo: &Geometry, f: &FScalarFunction) -> Result<ScalarField> {
    let f2 = f.apply(2, geo.scalar());
    if f2.max_abs() == 0.0 {
        return Ok(ScalarField::zeros(h.chart()));
    }
    Ok(scalar_curvature_variation(h, geo)?.mul(&f2))
}

/// Ingredients of the second variation for one direction.
#[derive(Clone, Debug)]
pub struct SecondVariationTerms {
    pub t0: SymTensor2Field,
    pub t1: SymTensor2Field,
    pub f_aux: ScalarField,
    pub lambda: f64,
}

/// `T₀(h) = −½F′∇*∇h + F′R̊h + F′δ*(δh) + ½F′Hess(Tr h)
///          + ½F′[Δ(Tr h) + δ(δh)] g − ½[λ + ½F(S)](Tr h) g`, with `F′ = F′(S)`.
pub fn t0_operator(h: &SymTensor2Field, geo: &Geometry, f: &FScalarFunction, lambda: f64) -> Result<SymTensor2Field> {
    let m = &geo.metric;
    let s = geo.scalar();
    let fp = f.apply(1, s);
    let fs = f.apply(0, s);
    let tr = tensor::trace(h, m)?;
    let delta_h = h.divergence(geo)?;

    let rough = curvature::rough_laplacian(h, geo)?;
    let ring = curvature::ring_r(h, geo)?;
    let dsd = curvature::delta_star(&delta_h, geo)?;
    let hess_tr = curvature::hessian(&tr, geo)?;
    let lap_tr = curvature::laplacian(&tr, geo)?;
    let dd = delta_h.divergence(geo)?;

    let tensor_part = &(&(&(&rough * -0.5) + &ring) + &dsd) + &(&hess_tr * 0.5);
    let first = tensor_part.scale_by(&fp);
    let bracket = (&lap_tr + &dd).mul(&fp).map(|v| 0.5 * v);
    let trace_coeff = fs.map(|v| -0.5 * (lambda + 0.5 * v)).mul(&tr);
    Ok(&first + &tensor::scalar_times_metric(&(&bracket + &trace_coeff), m))
}

/// `T₀` for `F(s) = s` with `μ = λ + S/2`:
/// `−½∇*∇h + R̊h + δ*(δh) + ½Hess(Tr h) + ½[Δ(Tr h) + δ(δh)] g − (μ/2)(Tr h) g`.
pub fn t0_einstein_reduced(h: &SymTensor2Field, geo: &Geometry, mu: &ScalarField) -> Result<SymTensor2Field> {
    let m = &geo.metric;
    let tr = tensor::trace(h, m)?;
    let delta_h = h.divergence(geo)?;
    let tensor_part = &(&(&(&curvature::rough_laplacian(h, geo)? * -0.5) + &curvature::ring_r(h, geo)?)
        + &curvature::delta_star(&delta_h, geo)?)
        + &(&curvature::hessian(&tr, geo)? * 0.5);
    let bracket = &(&curvature::laplacian(&tr, geo)? + &delta_h.divergence(geo)?) * 0.5;
    let mu_term = mu.mul(&tr).map(|v| -0.5 * v);
    Ok(&tensor_part + &tensor::scalar_times_metric(&(&bracket + &mu_term), m))
}

/// `T₁(h) = −f Ric + Hess f + (Δf) g − h(∇.grad F′(S), ·)^σ − ((∇.h)(·, grad F′(S)))^σ
///          + ½∇_{grad F′(S)}h − <δh + ½d(Tr h), dF′(S)> g − ½ΔF′(S)(Tr h) g
///          + ½<Hess F′(S), h> g`.
///
/// The derivatives of `F′(S)` go through the chain rule, so every term
/// vanishes exactly when `F″ ≡ F‴ ≡ 0`.
pub fn t1_operator(h: &SymTensor2Field, geo: &Geometry, f: &FScalarFunction) -> Result<SymTensor2Field> {
    let m = &geo.metric;
    let faux = f_aux(h, geo, f)?;
    let (d_fp, hess_fp, lap_fp) = einstein::fprime_chain(geo, f)?;
    let grad_fp = tensor::raise(&d_fp, m)?;
    let tr = tensor::trace(h, m)?;
    let nh = curvature::covariant_sym2(h, geo)?;

    let mut out = &geo.ricci().scale_by(&faux) * -1.0;
    out = &out + &curvature::hessian(&faux, geo)?;
    out = &out + &tensor::scalar_times_metric(&curvature::laplacian(&faux, geo)?, m);
    out = &out - &tensor::compose(h, &hess_fp, m)?;
    out = &out - &curvature::nabla_contract_sym(&nh, &grad_fp)?;
    out = &out + &(&curvature::directional_sym2(&nh, &grad_fp)? * 0.5);

    let dtr = curvature::differential(&tr)?;
    let w = h.divergence(geo)?.lincomb(1.0, &dtr, 0.5);
    let coeff = &(&(&tensor::covector_inner(&w, &d_fp, m)? * -1.0) - &lap_fp.mul(&tr).map(|v| 0.5 * v))
        + &(&tensor::inner_product(&hess_fp, h, m)? * 0.5);
    Ok(&out + &tensor::scalar_times_metric(&coeff, m))
}

/// `T₀`, `T₁` and `f` for direction `h` at a metric with `E_F = λ g`.
pub fn second_variation_terms(
    h: &SymTensor2Field,
    geo: &Geometry,
    f: &FScalarFunction,
    lambda: f64,
) -> Result<SecondVariationTerms> {
    Ok(SecondVariationTerms {
        t0: t0_operator(h, geo, f, lambda)?,
        t1: t1_operator(h, geo, f)?,
        f_aux: f_aux(h, geo, f)?,
        lambda,
    })
}

/// `∫ <T₀(h) + T₁(h), h> v^g`.
///
/// Refuses (hypothesis error) unless `E_F(g) = λ g` holds with the supplied
/// constant `λ` to relative tolerance `rel_tol`.
pub fn second_variation_value(
    h: &SymTensor2Field,
    geo: &Geometry,
    f: &FScalarFunction,
    lambda: f64,
    rel_tol: f64,
) -> Result<(f64, SecondVariationTerms)> {
    let pkg = einstein::f_einstein_tensor(geo, f, EinsteinForm::Compact)?;
    let lam = pkg.constant_lambda(rel_tol)?;
    let floor = pkg.scale.max(lambda.abs()).max(1e-300);
    if (lam - lambda).abs() > rel_tol * floor.max(1.0) {
        return Err(GeomError::Hypothesis(format!(
            "supplied lambda {lambda} differs from the metric's lambda {lam}"
        )));
    }
    let terms = second_variation_terms(h, geo, f, lambda)?;
    let sum = &terms.t0 + &terms.t1;
    let integrand = tensor::inner_product(&sum, h, &geo.metric)?;
    Ok((geo.metric.integrate(&integrand)?, terms))
}
