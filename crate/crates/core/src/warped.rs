//! The warped metric `g = dr² + r^{2α}(dx² + dy²)` on `(0, ∞) × ℝ²` with
//! `F(s) = s^β`: closed-form curvature, the criticality condition `α(β)`,
//! the function `μ(r)`, and a cross-check against the numeric pipeline.
//!
//! Numerically the `x`, `y` axes are periodic; nothing depends on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvature::Geometry;
use crate::einstein::{self, EinsteinForm};
use crate::error::{GeomError, Result};
use crate::ffunc::FScalarFunction;
use crate::field::{SymTensor2Field, Tensor3Field};
use crate::grid::{Axis, ChartSpec, TRUST_MARGIN};
use crate::linalg;
use crate::numeric::fit_order;
use crate::report::{ReportEntry, Status, VerificationReport};

pub const SUITE: &str = "warped_example";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedParams {
    pub alpha: f64,
    pub beta: u32,
    pub r_min: f64,
    pub r_max: f64,
}

impl WarpedParams {
    pub fn new(alpha: f64, beta: u32, r_min: f64, r_max: f64) -> Result<Self> {
        let p = WarpedParams { alpha, beta, r_min, r_max };
        p.validate()?;
        Ok(p)
    }

    /// Parameters on the default range `r ∈ [1, 2]`.
    pub fn on_unit_range(alpha: f64, beta: u32) -> Result<Self> {
        Self::new(alpha, beta, 1.0, 2.0)
    }

    /// The critical pair `(α(β), β)` on `r ∈ [1, 2]`.
    pub fn critical(beta: u32) -> Result<Self> {
        Self::on_unit_range(alpha_of_beta(beta)?, beta)
    }

    pub fn check_alpha(alpha: f64) -> Result<()> {
        if !alpha.is_finite() {
            return Err(GeomError::InvalidParameter("alpha must be finite".into()));
        }
        if alpha == 0.0 || (alpha - 2.0 / 3.0).abs() < 1e-14 {
            return Err(GeomError::InvalidParameter(format!("alpha = {alpha} is excluded (0 and 2/3)")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::check_alpha(self.alpha)?;
        if self.beta == 0 {
            return Err(GeomError::InvalidParameter("beta must be at least 1".into()));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(GeomError::InvalidParameter(format!(
                "r range must satisfy 0 < r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    fn check_r(&self, r: f64) -> Result<()> {
        let slack = 1e-12 * self.r_max;
        if r < self.r_min - slack || r > self.r_max + slack {
            return Err(GeomError::InvalidParameter(format!(
                "r = {r} outside [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn f(&self) -> FScalarFunction {
        FScalarFunction::power(self.beta)
    }

    /// Open `r` axis with `n_r` nodes times two periodic unit axes.
    pub fn chart(&self, n_r: usize, n_xy: usize) -> Result<Arc<ChartSpec>> {
        ChartSpec::new(vec![
            Axis::open(self.r_min, self.r_max - self.r_min, n_r),
            Axis::periodic(1.0, n_xy),
            Axis::periodic(1.0, n_xy),
        ])
    }
}

/// `dr² + r^{2α}(dx² + dy²)` sampled on a chart whose first coordinate is `r`.
pub fn warped_metric(alpha: f64, chart: &Arc<ChartSpec>) -> SymTensor2Field {
    SymTensor2Field::from_coords_mat(chart, |x| {
        let mut m = linalg::identity(3);
        let w = x[0].powf(2.0 * alpha);
        m[1][1] = w;
        m[2][2] = w;
        m
    })
}

/// Closed-form curvature at radius `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WarpedCurvature {
    /// `Γʳₓₓ = Γʳ_yy = −α r^{2α−1}`.
    pub gamma_r_xx: f64,
    /// `Γˣᵣₓ = Γʸᵣᵧ = α / r`.
    pub gamma_x_rx: f64,
    /// `Ric_rr = 2α(1−α)/r²`.
    pub ric_rr: f64,
    /// `Ric_xx = Ric_yy = α(1−2α) r^{2α−2}`.
    pub ric_xx: f64,
    /// `S = 2α(2−3α)/r²`.
    pub scalar: f64,
}

pub fn closed_form_curvature(p: &WarpedParams, r: f64) -> Result<WarpedCurvature> {
    p.check_r(r)?;
    let a = p.alpha;
    Ok(WarpedCurvature {
        gamma_r_xx: -a * r.powf(2.0 * a - 1.0),
        gamma_x_rx: a / r,
        ric_rr: 2.0 * a * (1.0 - a) / (r * r),
        ric_xx: a * (1.0 - 2.0 * a) * r.powf(2.0 * a - 2.0),
        scalar: 2.0 * a * (2.0 - 3.0 * a) / (r * r),
    })
}

/// `F′(S)` and `Hess F′(S)` for `F(s) = s^β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WarpedHessian {
    pub fprime: f64,
    /// `β(2β²−3β+1) / (α(2−3α)) · S^β`.
    pub hess_rr: f64,
    /// `β(1−β) r^{2α} / (2−3α) · S^β`.
    pub hess_xx: f64,
}

pub fn closed_form_hess_fprime(p: &WarpedParams, r: f64) -> Result<WarpedHessian> {
    let c = closed_form_curvature(p, r)?;
    let a = p.alpha;
    let b = p.beta as f64;
    let s_beta = c.scalar.powi(p.beta as i32);
    Ok(WarpedHessian {
        fprime: b * c.scalar.powi(p.beta as i32 - 1),
        hess_rr: b * (2.0 * b * b - 3.0 * b + 1.0) / (a * (2.0 - 3.0 * a)) * s_beta,
        hess_xx: b * (1.0 - b) * r.powf(2.0 * a) / (2.0 - 3.0 * a) * s_beta,
    })
}

/// `α = −2(2β² − 3β + 1)/(2β − 3)`; rejects `β` whose `α` is excluded.
pub fn alpha_of_beta(beta: u32) -> Result<f64> {
    if beta == 0 {
        return Err(GeomError::InvalidParameter("beta must be at least 1".into()));
    }
    let b = beta as f64;
    let alpha = -2.0 * (2.0 * b * b - 3.0 * b + 1.0) / (2.0 * b - 3.0);
    WarpedParams::check_alpha(alpha).map_err(|_| {
        GeomError::InvalidParameter(format!("beta = {beta} gives alpha = {alpha}, which is excluded"))
    })?;
    Ok(alpha)
}

/// `−3α + 4β² − 6β + 2αβ + 2`; zero exactly on the critical curve and
/// independent of `r`.
pub fn criticality_residual(p: &WarpedParams) -> f64 {
    let a = p.alpha;
    let b = p.beta as f64;
    -3.0 * a + 4.0 * b * b - 6.0 * b + 2.0 * a * b + 2.0
}

/// The two ratios `(F′(S)Ric_rr − Hess_rr)/g_rr` and
/// `(F′(S)Ric_xx − Hess_xx)/g_xx` from the closed forms; equal iff critical.
pub fn criticality_ratios(p: &WarpedParams, r: f64) -> Result<(f64, f64)> {
    let c = closed_form_curvature(p, r)?;
    let h = closed_form_hess_fprime(p, r)?;
    let gxx = r.powf(2.0 * p.alpha);
    Ok((h.fprime * c.ric_rr - h.hess_rr, (h.fprime * c.ric_xx - h.hess_xx) / gxx))
}

/// `μ(r) = ((2β−1)/4) · (−8β(2β²−3β+1)(6β−7) / ((2β−3)² r²))^β`.
pub fn mu_of_r(beta: u32, r: f64) -> f64 {
    let b = beta as f64;
    let inner = -8.0 * b * (2.0 * b * b - 3.0 * b + 1.0) * (6.0 * b - 7.0) / ((2.0 * b - 3.0).powi(2) * r * r);
    (2.0 * b - 1.0) / 4.0 * inner.powi(beta as i32)
}

/// Trust margin for a quantity obtained through `passes` nested derivative
/// passes: each pass spreads the one-sided edge error two nodes inward.
pub fn nested_margin(passes: usize) -> usize {
    TRUST_MARGIN * passes
}

/// Max error of a numeric quantity against its closed form over the nodes at
/// least `margin` from an open edge, relative to `scale` (or to the closed
/// form's own max there when `scale` is `None`).
fn rel_max_error(
    chart: &ChartSpec,
    margin: usize,
    scale: Option<f64>,
    numeric: impl Fn(usize) -> f64,
    exact: impl Fn(f64) -> f64,
) -> f64 {
    let mut err: f64 = 0.0;
    let mut own: f64 = 0.0;
    for node in chart.trusted_nodes(margin) {
        let r = chart.coords(node)[0];
        let e = exact(r);
        err = err.max((numeric(node) - e).abs());
        own = own.max(e.abs());
    }
    err / scale.unwrap_or(own).max(f64::MIN_POSITIVE)
}

/// Relative errors of the numeric curvature against the closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureErrors {
    pub christoffel: f64,
    pub ric_rr: f64,
    pub ric_xx: f64,
    pub scalar: f64,
    /// Numeric values of components that vanish in closed form, relative to
    /// the largest closed-form component of the same tensor.
    pub off_pattern: f64,
}

impl CurvatureErrors {
    pub fn worst(&self) -> f64 {
        [self.christoffel, self.ric_rr, self.ric_xx, self.scalar, self.off_pattern]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("christoffel symbols", self.christoffel),
            ("ricci rr", self.ric_rr),
            ("ricci xx and yy", self.ric_xx),
            ("scalar curvature", self.scalar),
            ("vanishing components", self.off_pattern),
        ]
    }
}

fn christoffel_errors(p: &WarpedParams, chart: &ChartSpec, gamma: &Tensor3Field) -> Result<(f64, f64)> {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut off: f64 = 0.0;
    for node in chart.trusted_nodes(nested_margin(1)) {
        let c = closed_form_curvature(p, chart.coords(node)[0])?;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let exact = match (k, i, j) {
                        (0, 1, 1) | (0, 2, 2) => c.gamma_r_xx,
                        (1, 0, 1) | (1, 1, 0) | (2, 0, 2) | (2, 2, 0) => c.gamma_x_rx,
                        _ => 0.0,
                    };
                    let d = (gamma.get(node, k, i, j) - exact).abs();
                    if exact == 0.0 {
                        off = off.max(d);
                    } else {
                        err = err.max(d);
                    }
                    scale = scale.max(exact.abs());
                }
            }
        }
    }
    Ok((err / scale, off / scale))
}

/// Numeric Γ, Ric, S against the closed forms on the trusted interior.
pub fn curvature_errors(p: &WarpedParams, geo: &Geometry) -> Result<CurvatureErrors> {
    let chart = geo.metric.chart().clone();
    let (christoffel, off_gamma) = christoffel_errors(p, &chart, geo.christoffel())?;
    let ric = geo.ricci();
    let cf = |r: f64| closed_form_curvature(p, r).expect("trusted nodes lie in range");
    let margin = nested_margin(2);
    let ric_scale = chart
        .trusted_nodes(margin)
        .map(|n| {
            let c = cf(chart.coords(n)[0]);
            c.ric_rr.abs().max(c.ric_xx.abs())
        })
        .fold(0.0, f64::max);
    let ric_rr = rel_max_error(&chart, margin, Some(ric_scale), |n| ric.get(n, 0, 0), |r| cf(r).ric_rr);
    let ric_xx = rel_max_error(&chart, margin, Some(ric_scale), |n| ric.get(n, 1, 1), |r| cf(r).ric_xx)
        .max(rel_max_error(&chart, margin, Some(ric_scale), |n| ric.get(n, 2, 2), |r| cf(r).ric_xx));
    let ric_off = chart
        .trusted_nodes(margin)
        .map(|n| [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| ric.get(n, i, j).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        / ric_scale.max(f64::MIN_POSITIVE);
    let scalar = rel_max_error(&chart, margin, None, |n| geo.scalar().at(n), |r| cf(r).scalar);
    Ok(CurvatureErrors {
        christoffel,
        ric_rr,
        ric_xx,
        scalar,
        off_pattern: off_gamma.max(ric_off),
    })
}

/// Numeric `E_F` diagnostics at the warped metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EinsteinDiagnostics {
    /// `max |E_F − λg| / scale` on the trusted interior.
    pub proportionality: f64,
    /// `(max λ − min λ) / scale` on the trusted interior.
    pub lambda_spread: f64,
    pub lambda_mean: f64,
    /// `max |μ_numeric − μ(r)| / max |μ(r)|`.
    pub mu_error: f64,
    /// `max |F′(S)Ric − Hess F′(S) − μ(r) g| / scale`.
    pub mu_identity: f64,
    /// Numeric `Hess F′(S)` against the closed forms, relative.
    pub hess_error: f64,
    pub scale: f64,
}

pub fn einstein_diagnostics(p: &WarpedParams, geo: &Geometry) -> Result<EinsteinDiagnostics> {
    let chart = geo.metric.chart().clone();
    let f = p.f();
    let pkg = einstein::f_einstein_tensor(geo, &f, EinsteinForm::Compact)?;
    let margin = nested_margin(4);
    let trusted = |n: usize| chart.is_trusted(n, margin);
    let scale = pkg.scale;
    let proportionality = pkg.max_proportionality_residual(trusted) / scale;
    let lambda_spread = pkg.lambda_spread(trusted) / scale;
    let lambda_mean = pkg.lambda_mean(trusted);
    let mu_error = rel_max_error(&chart, margin, None, |n| pkg.mu_field.at(n), |r| mu_of_r(p.beta, r));

    let fp = f.apply(1, geo.scalar());
    let hess = crate::curvature::hessian(&fp, geo)?;
    let mut identity: f64 = 0.0;
    for node in chart.trusted_nodes(margin) {
        let r = chart.coords(node)[0];
        let mu = mu_of_r(p.beta, r);
        for i in 0..3 {
            for j in i..3 {
                let v = fp.at(node) * geo.ricci().get(node, i, j) - hess.get(node, i, j) - mu * geo.metric.g().get(node, i, j);
                identity = identity.max(v.abs());
            }
        }
    }
    let cf = |r: f64| closed_form_hess_fprime(p, r).expect("trusted nodes lie in range");
    let hess_rr = rel_max_error(&chart, margin, None, |n| hess.get(n, 0, 0), |r| cf(r).hess_rr);
    let hess_xx = rel_max_error(&chart, margin, None, |n| hess.get(n, 1, 1), |r| cf(r).hess_xx);
    Ok(EinsteinDiagnostics {
        proportionality,
        lambda_spread,
        lambda_mean,
        mu_error,
        mu_identity: identity / scale,
        hess_error: if p.beta == 1 { hess.max_abs_where(trusted) / scale } else { hess_rr.max(hess_xx) },
        scale,
    })
}

/// Tolerances for [`cross_validate_numeric`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpedTolerances {
    pub curvature: f64,
    pub proportionality: f64,
    pub lambda_spread: f64,
    pub mu: f64,
}

impl Default for WarpedTolerances {
    fn default() -> Self {
        WarpedTolerances {
            curvature: 1e-5,
            proportionality: 1e-5,
            lambda_spread: 1e-6,
            mu: 1e-5,
        }
    }
}

impl WarpedTolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        WarpedTolerances {
            curvature: self.curvature * factor,
            proportionality: self.proportionality * factor,
            lambda_spread: self.lambda_spread * factor,
            mu: self.mu * factor,
        }
    }
}

/// Compares the numeric pipeline against the closed forms on `chart`. The
/// Einstein checks run only when `α = α(β)`; off the critical curve they
/// report the proportionality residual, which must then be large.
pub fn cross_validate_numeric(p: &WarpedParams, chart: &Arc<ChartSpec>, tol: &WarpedTolerances) -> Result<VerificationReport> {
    p.validate()?;
    let a0 = chart.axis(0);
    if chart.dim() != 3 || (a0.origin - p.r_min).abs() > 1e-12 || (a0.origin + a0.extent - p.r_max).abs() > 1e-12 {
        return Err(GeomError::InvalidChart("chart must be r ∈ [r_min, r_max] times two periodic axes".into()));
    }
    let geo = Geometry::new(warped_metric(p.alpha, chart))?;
    let mut report = VerificationReport::default();
    let errs = curvature_errors(p, &geo)?;
    for (name, v) in errs.named() {
        report.push(ReportEntry::new(SUITE, name, None, v, tol.curvature, None));
    }
    let critical = alpha_of_beta(p.beta).map(|a| (a - p.alpha).abs() < 1e-12).unwrap_or(false);
    let d = einstein_diagnostics(p, &geo)?;
    if critical {
        report.push(ReportEntry::new(SUITE, "E_F proportional to g", None, d.proportionality, tol.proportionality, None));
        report.push(ReportEntry::new(SUITE, "lambda constant", None, d.lambda_spread, tol.lambda_spread, None));
        report.push(ReportEntry::new(SUITE, "mu(r) closed form", None, d.mu_error, tol.mu, None));
        report.push(ReportEntry::new(SUITE, "F'(S) Ric - Hess F'(S) = mu g", None, d.mu_identity, tol.mu, None));
    } else {
        let mut e = ReportEntry::new(SUITE, "E_F not proportional off the critical curve", None, d.proportionality, tol.proportionality, None);
        e.status = if d.proportionality > 10.0 * tol.proportionality { Status::Pass } else { Status::Fail };
        e.note = Some("negative control: residual must exceed 10x tolerance".into());
        report.push(e);
    }
    Ok(report)
}

/// Fitted refinement order of the worst curvature error over `n_r` values.
pub fn curvature_refinement(p: &WarpedParams, resolutions: &[usize], n_xy: usize) -> Result<(Vec<f64>, f64)> {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for &n in resolutions {
        let chart = p.chart(n, n_xy)?;
        let geo = Geometry::new(warped_metric(p.alpha, &chart))?;
        hs.push(chart.spacing(0));
        errs.push(curvature_errors(p, &geo)?.worst());
    }
    let order = fit_order(&hs, &errs);
    Ok((errs, order))
}
