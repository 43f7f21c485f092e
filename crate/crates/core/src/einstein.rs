//! The functional `E_F(g) = ∫ F(S) v^g` and its gradient, the F-Einstein tensor
//!
//! ```text
//! E_F = F′(S) Ric − Hess F′(S) − (ΔF′(S) + ½F(S)) g.
//! ```
//!
//! The expanded form substitutes `Hess F′(S) = F″ Hess S + F‴ dS⊗dS` and
//! `ΔF′(S) = F″ ΔS − F‴ |grad S|²` (the sign of the gradient term follows from
//! `Δ = −Tr Hess`).

use serde::{Deserialize, Serialize};

use crate::curvature::{self, Divergence, Geometry};
use crate::error::{GeomError, Result};
use crate::ffunc::FScalarFunction;
use crate::field::{CovectorField, ScalarField, SymTensor2Field};
use crate::tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EinsteinForm {
    /// `Hess F′(S)` and `ΔF′(S)` differentiated directly.
    Compact,
    /// Chain-rule expansion through `S`.
    Expanded,
}

#[derive(Clone, Debug)]
pub struct EinsteinPackage {
    pub form: EinsteinForm,
    pub e_f: SymTensor2Field,
    /// `Tr E_F / n`.
    pub lambda_field: ScalarField,
    /// `|E_F − λ g|` pointwise.
    pub residual_proportionality: ScalarField,
    /// `F′(S) Ric − Hess F′(S) = μ g` candidate: `λ + ΔF′(S) + ½F(S)`.
    pub mu_field: ScalarField,
    /// The `ΔF′(S)` field used to assemble `e_f`.
    pub lap_fprime: ScalarField,
    /// Largest absolute component among the assembled terms; the natural
    /// scale for relative residuals.
    pub scale: f64,
}

impl EinsteinPackage {
    /// `max λ − min λ` over nodes accepted by `keep`.
    pub fn lambda_spread(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let (lo, hi) = (0..self.lambda_field.chart().len())
            .filter(|&n| keep(n))
            .map(|n| self.lambda_field.at(n))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    pub fn lambda_mean(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let vals: Vec<f64> = (0..self.lambda_field.chart().len())
            .filter(|&n| keep(n))
            .map(|n| self.lambda_field.at(n))
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    pub fn max_proportionality_residual(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.residual_proportionality.max_abs_where(keep)
    }

    /// The constant `λ` with `E_F = λ g`, or a hypothesis error when either the
    /// proportionality residual or the spread of `λ` exceeds
    /// `rel_tol·max(scale, 1)`.
    pub fn constant_lambda(&self, rel_tol: f64) -> Result<f64> {
        let all = |_| true;
        let floor = self.scale.max(1.0);
        let res = self.max_proportionality_residual(all) / floor;
        if res > rel_tol {
            return Err(GeomError::Hypothesis(format!(
                "E_F is not proportional to g (relative residual {res:.3e} > {rel_tol:.1e})"
            )));
        }
        let spread = self.lambda_spread(all) / floor;
        if spread > rel_tol {
            return Err(GeomError::Hypothesis(format!(
                "lambda is not constant (relative spread {spread:.3e} > {rel_tol:.1e})"
            )));
        }
        Ok(self.lambda_mean(all))
    }
}

/// `E_F(g) = ∫ F(S) v^g` on a periodic chart.
pub fn functional_value(geo: &Geometry, f: &FScalarFunction) -> Result<f64> {
    geo.metric.integrate(&f.apply(0, geo.scalar()))
}

/// Derivative data of `F′(S)` by the chain rule: `(dF′(S), Hess F′(S), ΔF′(S))`.
pub fn fprime_chain(geo: &Geometry, f: &FScalarFunction) -> Result<(CovectorField, SymTensor2Field, ScalarField)> {
    let s = geo.scalar();
    let f2 = f.apply(2, s);
    let f3 = f.apply(3, s);
    let ds = curvature::differential(s)?;
    let hess_s = curvature::hessian(s, geo)?;
    let lap_s = -&tensor::trace(&hess_s, &geo.metric)?;
    let grad_sq = tensor::covector_inner(&ds, &ds, &geo.metric)?;
    let d_fp = ds.scale_by(&f2);
    let hess_fp = &hess_s.scale_by(&f2) + &tensor::sym_outer(&ds, &ds).scale_by(&f3);
    let lap_fp = &lap_s.mul(&f2) - &grad_sq.mul(&f3);
    Ok((d_fp, hess_fp, lap_fp))
}

pub fn f_einstein_tensor(geo: &Geometry, f: &FScalarFunction, form: EinsteinForm) -> Result<EinsteinPackage> {
    f.validate()?;
    let m = &geo.metric;
    let s = geo.scalar();
    let fp = f.apply(1, s);
    let fs = f.apply(0, s);
    let (hess_fp, lap_fp) = match form {
        EinsteinForm::Compact => {
            let h = curvature::hessian(&fp, geo)?;
            let lap = -&tensor::trace(&h, m)?;
            (h, lap)
        }
        EinsteinForm::Expanded => {
            let (_, h, lap) = fprime_chain(geo, f)?;
            (h, lap)
        }
    };
    let ric_term = geo.ricci().scale_by(&fp);
    let coeff = &lap_fp + &(&fs * 0.5);
    let g_term = tensor::scalar_times_metric(&coeff, m);
    let e_f = &(&ric_term - &hess_fp) - &g_term;
    e_f.ensure_finite("F-Einstein tensor")?;

    let n = geo.dim() as f64;
    let lambda_field = &tensor::trace(&e_f, m)? * (1.0 / n);
    let diff = &e_f - &tensor::scalar_times_metric(&lambda_field, m);
    let residual_proportionality = tensor::norm_sq(&diff, m)?.map(|v| v.max(0.0).sqrt());
    let mu_field = &(&lambda_field + &lap_fp) + &(&fs * 0.5);
    let scale = [
        ric_term.max_abs(),
        hess_fp.max_abs(),
        g_term.max_abs(),
        e_f.max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(EinsteinPackage {
        form,
        e_f,
        lambda_field,
        residual_proportionality,
        mu_field,
        lap_fprime: lap_fp,
        scale,
    })
}

/// `S F′(S) + (1 − n) ΔF′(S) − (n/2) F(S)`, using the package's `ΔF′(S)`.
pub fn criticality_bracket(pkg: &EinsteinPackage, geo: &Geometry, f: &FScalarFunction) -> ScalarField {
    let n = geo.dim() as f64;
    let s = geo.scalar();
    let fp = f.apply(1, s);
    let fs = f.apply(0, s);
    let a = s.mul(&fp);
    let b = &pkg.lap_fprime * (1.0 - n);
    let c = &fs * (-0.5 * n);
    &(&a + &b) + &c
}

/// `Tr E_F − [S F′(S) + (1 − n) ΔF′(S) − (n/2) F(S)]`.
pub fn trace_identity_residual(pkg: &EinsteinPackage, geo: &Geometry, f: &FScalarFunction) -> Result<ScalarField> {
    let tr = tensor::trace(&pkg.e_f, &geo.metric)?;
    Ok(&tr - &criticality_bracket(pkg, geo, f))
}

/// `δE_F`.
pub fn divergence_of_ef(pkg: &EinsteinPackage, geo: &Geometry) -> Result<CovectorField> {
    pkg.e_f.divergence(geo)
}
