//! Finite differences in `t` along metric families: the independent oracle
//! every analytic variation formula is checked against.
//!
//! Derivatives use central differences over a ladder of step sizes with one
//! Richardson level. The `t`-order reported is fitted from the
//! self-convergence of successive estimates, so spatial discretization error
//! (which does not depend on `t`) never enters it; spatial error is measured
//! separately by grid refinement.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, Divergence, Geometry};
use crate::einstein::{self, EinsteinForm};
use crate::error::{GeomError, Result};
use crate::ffunc::FScalarFunction;
use crate::field::{self, CovectorField, Field, Kind, ScalarField, SymTensor2Field, VectorField};
use crate::grid::{Boundary, ChartSpec, MIN_RESOLUTION};
use crate::metrics::{self, MetricSpec};
use crate::numeric::{fit_order, NeumaierSum};
use crate::report::{ReportEntry, VerificationReport};
use crate::tensor::{self, MetricField};
use crate::variation::{self, VariationDirection};
use crate::warped;

/// Default step ladder in `t`.
pub const DEFAULT_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Self-convergence of a finite-difference ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    /// Step sizes, decreasing.
    pub steps: Vec<f64>,
    /// `|D(stepᵢ) − D(stepᵢ₊₁)|` (max-norm for fields).
    pub residuals: Vec<f64>,
    /// Fitted order of the residuals against the step size.
    pub order: f64,
    /// Minimum acceptable order.
    pub threshold: f64,
    /// Residuals decrease monotonically.
    pub monotone: bool,
    /// The estimates agree to rounding: the quantity is polynomial of low
    /// degree in `t` and no order can be fitted.
    pub exact: bool,
}

impl ConvergenceRecord {
    fn new(steps: &[f64], residuals: Vec<f64>, floor: f64, threshold: f64) -> Self {
        let exact = residuals.last().map(|&r| r <= floor).unwrap_or(false);
        let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
        let order = if exact {
            f64::INFINITY
        } else {
            fit_order(&steps[..residuals.len()], &residuals)
        };
        ConvergenceRecord {
            steps: steps.to_vec(),
            residuals,
            order,
            threshold,
            monotone,
            exact,
        }
    }

    pub fn order_ok(&self) -> bool {
        self.exact || self.order >= self.threshold
    }

    /// The order for reports (`None` when exact in `t`).
    pub fn reported_order(&self) -> Option<f64> {
        if self.exact {
            None
        } else {
            Some(self.order)
        }
    }
}

fn check_steps(steps: &[f64]) -> Result<()> {
    if steps.len() < 3 {
        return Err(GeomError::InvalidParameter("at least three step sizes are required".into()));
    }
    if steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GeomError::InvalidParameter("step sizes must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order == 1 || order == 2 {
        Ok(())
    } else {
        Err(GeomError::InvalidParameter(format!("derivative order must be 1 or 2, got {order}")))
    }
}

fn richardson(coarse: f64, fine: f64, ratio: f64) -> f64 {
    let r2 = ratio * ratio;
    fine + (fine - coarse) / (r2 - 1.0)
}

/// Minimum acceptable fitted `t`-order.
pub const MIN_T_ORDER: f64 = 1.9;

/// `d^order/dt^order eval(t)` at `t = 0`.
pub fn fd_scalar_derivative(
    eval: impl Fn(f64) -> Result<f64>,
    steps: &[f64],
    order: usize,
) -> Result<(f64, ConvergenceRecord)> {
    check_steps(steps)?;
    check_order(order)?;
    let f0 = if order == 2 { eval(0.0)? } else { 0.0 };
    let mut mag = f0.abs();
    let mut est = Vec::with_capacity(steps.len());
    for &dt in steps {
        let (p, m) = (eval(dt)?, eval(-dt)?);
        if !(p.is_finite() && m.is_finite() && f0.is_finite()) {
            return Err(GeomError::NonFinite(format!("evaluation at t = ±{dt}")));
        }
        mag = mag.max(p.abs()).max(m.abs());
        est.push(if order == 1 {
            (p - m) / (2.0 * dt)
        } else {
            (p - 2.0 * f0 + m) / (dt * dt)
        });
    }
    let k = steps.len();
    let residuals: Vec<f64> = est.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let floor = 64.0 * f64::EPSILON * mag.max(f64::MIN_POSITIVE) / steps[k - 1].powi(order as i32);
    let value = richardson(est[k - 2], est[k - 1], steps[k - 2] / steps[k - 1]);
    Ok((value, ConvergenceRecord::new(steps, residuals, floor, MIN_T_ORDER)))
}

/// Componentwise `d^order/dt^order eval(t)` at `t = 0`, with one record
/// built from max-norm residuals.
pub fn fd_field_derivative<K: Kind>(
    eval: impl Fn(f64) -> Result<Field<K>>,
    steps: &[f64],
    order: usize,
) -> Result<(Field<K>, ConvergenceRecord)> {
    check_steps(steps)?;
    check_order(order)?;
    let f0 = if order == 2 { Some(eval(0.0)?) } else { None };
    let mut mag = f0.as_ref().map(|f| f.max_abs()).unwrap_or(0.0);
    let mut est: Vec<Field<K>> = Vec::with_capacity(steps.len());
    for &dt in steps {
        let (p, m) = (eval(dt)?, eval(-dt)?);
        p.ensure_finite("finite-difference sample")?;
        m.ensure_finite("finite-difference sample")?;
        mag = mag.max(p.max_abs()).max(m.max_abs());
        let d = match &f0 {
            None => p.lincomb(1.0 / (2.0 * dt), &m, -1.0 / (2.0 * dt)),
            Some(c) => {
                let s = &p + &m;
                s.lincomb(1.0 / (dt * dt), c, -2.0 / (dt * dt))
            }
        };
        est.push(d);
    }
    let k = steps.len();
    let residuals: Vec<f64> = est.windows(2).map(|w| (&w[0] - &w[1]).max_abs()).collect();
    let floor = 64.0 * f64::EPSILON * mag.max(f64::MIN_POSITIVE) / steps[k - 1].powi(order as i32);
    let ratio = steps[k - 2] / steps[k - 1];
    let r2 = ratio * ratio;
    let value = est[k - 1].lincomb(r2 / (r2 - 1.0), &est[k - 2], -1.0 / (r2 - 1.0));
    Ok((value, ConvergenceRecord::new(steps, residuals, floor, MIN_T_ORDER)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyMode {
    /// `g_t = g + t h`.
    Linear,
    /// `g_t = g + t h + ½ t² k`.
    Quadratic,
    /// `g_t = φ(t)(g + t h)` with `Vol(g_t) = Vol(g)`.
    VolumeNormalized,
}

/// A one-parameter family of metrics through a base metric.
#[derive(Clone, Debug)]
pub struct MetricFamily {
    base: MetricField,
    direction: VariationDirection,
    mode: FamilyMode,
    target_volume: f64,
    /// `φ′(0)` and `φ″(0)` (zero unless volume-normalized).
    phi_derivs: (f64, f64),
}

impl MetricFamily {
    pub fn linear(base: &MetricField, h: SymTensor2Field) -> Result<Self> {
        Self::build(base, VariationDirection::new(h), FamilyMode::Linear)
    }

    pub fn quadratic(base: &MetricField, h: SymTensor2Field, k: SymTensor2Field) -> Result<Self> {
        Self::build(base, VariationDirection { h, k: Some(k) }, FamilyMode::Quadratic)
    }

    /// `φ(t)(g + th)` with `φ(t) = (c / Vol(g + th))^{2/n}`, `c = Vol(g)`:
    /// since `Vol(φG) = φ^{n/2} Vol(G)` the normalization is exact.
    pub fn volume_normalized(base: &MetricField, h: SymTensor2Field) -> Result<Self> {
        Self::build(base, VariationDirection::new(h), FamilyMode::VolumeNormalized)
    }

    fn build(base: &MetricField, direction: VariationDirection, mode: FamilyMode) -> Result<Self> {
        base.g().check_chart(&direction.h)?;
        if let Some(k) = &direction.k {
            base.g().check_chart(k)?;
        }
        let target_volume = base.volume()?;
        let mut fam = MetricFamily {
            base: base.clone(),
            direction,
            mode,
            target_volume,
            phi_derivs: (0.0, 0.0),
        };
        if mode == FamilyMode::VolumeNormalized {
            // V(t) = Vol(g + th): V′(0) = ∫½Tr h v, V″(0) = ∫[¼(Tr h)² − ½|h|²] v
            let h = &fam.direction.h;
            let tr = tensor::trace(h, base)?;
            let v1 = base.integrate(&(&tr * 0.5))?;
            let sq = tensor::norm_sq(h, base)?;
            let v2 = base.integrate(&tr.mul(&tr).lincomb(0.25, &sq, -0.5))?;
            let n = base.dim() as f64;
            let c = target_volume;
            let u1 = -(2.0 / n) * v1 / c;
            let u2 = -(2.0 / n) * (v2 / c - (v1 / c).powi(2));
            fam.phi_derivs = (u1, u2 + u1 * u1);
        }
        Ok(fam)
    }

    pub fn mode(&self) -> FamilyMode {
        self.mode
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn target_volume(&self) -> f64 {
        self.target_volume
    }

    fn unnormalized(&self, t: f64) -> SymTensor2Field {
        let mut g = self.base.g().lincomb(1.0, &self.direction.h, t);
        if let (FamilyMode::Quadratic, Some(k)) = (self.mode, &self.direction.k) {
            g = g.lincomb(1.0, k, 0.5 * t * t);
        }
        g
    }

    /// `φ(t)`; identically 1 unless volume-normalized.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if self.mode != FamilyMode::VolumeNormalized {
            return Ok(1.0);
        }
        let v = crate::grid::integrate_scalar(&ScalarField::constant(self.base.chart(), 1.0), &self.unnormalized(t))?;
        Ok((self.target_volume / v).powf(2.0 / self.base.dim() as f64))
    }

    pub fn metric_at(&self, t: f64) -> Result<MetricField> {
        let g = self.unnormalized(t);
        let phi = self.phi(t)?;
        MetricField::new(if phi == 1.0 { g } else { &g * phi })
    }

    pub fn geometry_at(&self, t: f64) -> Result<Geometry> {
        Geometry::from_metric(self.metric_at(t)?)
    }

    /// `∂g_t/∂t|₀`.
    pub fn h_eff(&self) -> SymTensor2Field {
        let (p1, _) = self.phi_derivs;
        self.direction.h.lincomb(1.0, self.base.g(), p1)
    }

    /// `∂²g_t/∂t²|₀`.
    pub fn k_eff(&self) -> SymTensor2Field {
        match self.mode {
            FamilyMode::Linear => SymTensor2Field::zeros(self.base.chart()),
            FamilyMode::Quadratic => self
                .direction
                .k
                .clone()
                .unwrap_or_else(|| SymTensor2Field::zeros(self.base.chart())),
            FamilyMode::VolumeNormalized => {
                let (p1, p2) = self.phi_derivs;
                self.base.g().lincomb(p2, &self.direction.h, 2.0 * p1)
            }
        }
    }

    /// The largest steps of `steps` (halved as needed, at most 20 times)
    /// for which `g_{±t}` stays positive definite.
    pub fn admissible_steps(&self, steps: &[f64]) -> Result<Vec<f64>> {
        let mut s = steps.to_vec();
        for _ in 0..20 {
            let t = s[0];
            if self.metric_at(t).is_ok() && self.metric_at(-t).is_ok() {
                return Ok(s);
            }
            for v in &mut s {
                *v *= 0.5;
            }
        }
        Err(GeomError::InvalidParameter("family leaves the positive-definite cone for every step".into()))
    }
}

/// Checks `∫[−|h|² + Tr k + ½(Tr h)²] v = 0` for the effective `h`, `k`
/// of a volume-normalized family, relative to the integral of the absolute
/// values of the three terms.
pub fn verify_volume_constraint(fam: &MetricFamily, tolerance: f64) -> Result<ReportEntry> {
    if fam.mode() != FamilyMode::VolumeNormalized {
        return Err(GeomError::InvalidParameter("volume constraint needs a volume-normalized family".into()));
    }
    let m = fam.base();
    let (h, k) = (fam.h_eff(), fam.k_eff());
    let sq = tensor::norm_sq(&h, m)?;
    let trk = tensor::trace(&k, m)?;
    let trh = tensor::trace(&h, m)?;
    let half_tr2 = trh.mul(&trh).map(|v| 0.5 * v);
    let integrand = &(&trk - &sq) + &half_tr2;
    let abs = &(&sq.map(f64::abs) + &trk.map(f64::abs)) + &half_tr2;
    let value = m.integrate(&integrand)?;
    let scale = m.integrate(&abs)?.max(f64::MIN_POSITIVE);
    Ok(ReportEntry::new(
        Suite::SecondVariation.name(),
        "volume constraint: int[-|h|^2 + Tr k + (Tr h)^2/2] v = 0",
        None,
        value.abs() / scale,
        tolerance,
        None,
    ))
}

/// Largest relative deviation of `Vol(g_t)` from the target over the samples.
pub fn volume_drift(fam: &MetricFamily, samples: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in samples {
        let v = fam.metric_at(t)?.volume()?;
        worst = worst.max((v - fam.target_volume()).abs() / fam.target_volume());
    }
    Ok(worst)
}

/// The formula suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Variations of the volume element and of the scalar curvature.
    VolumeAndScalarVariation,
    /// Variation of the pointwise pairing of two symmetric 2-tensors.
    PairingVariation,
    /// Variation of the Levi-Civita connection.
    ConnectionVariation,
    /// Variations of the Hessian and the Laplacian.
    HessianLaplacianVariation,
    /// Variation of the Ricci tensor through the Lichnerowicz Laplacian.
    RicciVariation,
    /// First variation of the functional.
    FirstVariation,
    /// Second variation at an `E_F = λg` metric along volume-preserving families.
    SecondVariation,
    /// `δE_F = 0`.
    EinsteinDivergence,
    /// The trace of `E_F`.
    TraceIdentity,
    /// Direct and chain-rule forms of `E_F`.
    FormEquivalence,
    /// `(δT)(Z) = δ(T(·, Z)) + ½<T, L_Z g>`.
    DivergenceDecomposition,
    /// `δ(fα) = −<df, α> + f δα`.
    ProductRule,
    /// Contracted Bianchi identity, `R̊g = Ric`, `Δ_L g = 0`.
    CurvatureIdentities,
}

impl Suite {
    pub const ALL: [Suite; 13] = [
        Suite::VolumeAndScalarVariation,
        Suite::PairingVariation,
        Suite::ConnectionVariation,
        Suite::HessianLaplacianVariation,
        Suite::RicciVariation,
        Suite::FirstVariation,
        Suite::SecondVariation,
        Suite::EinsteinDivergence,
        Suite::TraceIdentity,
        Suite::FormEquivalence,
        Suite::DivergenceDecomposition,
        Suite::ProductRule,
        Suite::CurvatureIdentities,
    ];

    /// The pointwise variation lemmas.
    pub const LEMMAS: [Suite; 5] = [
        Suite::VolumeAndScalarVariation,
        Suite::PairingVariation,
        Suite::ConnectionVariation,
        Suite::HessianLaplacianVariation,
        Suite::RicciVariation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::VolumeAndScalarVariation => "volume_and_scalar_variation",
            Suite::PairingVariation => "pairing_variation",
            Suite::ConnectionVariation => "connection_variation",
            Suite::HessianLaplacianVariation => "hessian_laplacian_variation",
            Suite::RicciVariation => "ricci_variation",
            Suite::FirstVariation => "first_variation",
            Suite::SecondVariation => "second_variation",
            Suite::EinsteinDivergence => "einstein_divergence",
            Suite::TraceIdentity => "trace_identity",
            Suite::FormEquivalence => "form_equivalence",
            Suite::DivergenceDecomposition => "divergence_decomposition",
            Suite::ProductRule => "product_rule",
            Suite::CurvatureIdentities => "curvature_identities",
        }
    }
}

/// Pass thresholds. All residuals are relative (see each suite).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Richardson-extrapolated FD value against a first-variation formula.
    pub fd_relative: f64,
    /// FD second derivative of the functional against `∫<T₀+T₁, h>`.
    pub second_variation: f64,
    /// Minimum fitted `t`-order.
    pub min_t_order: f64,
    /// Volume-constraint integral.
    pub volume_constraint: f64,
    /// Relative drift of the volume along a normalized family.
    pub volume_drift: f64,
    /// Algebraic trace identity of `E_F`.
    pub trace_identity: f64,
    /// Identities hold within this multiple of the measured stencil error.
    pub stencil_factor: f64,
    /// `E_F = λg` hypothesis check.
    pub hypothesis: f64,
    /// `‖δE_F‖∞ / scale` at the finest grid.
    pub divergence: f64,
    /// Minimum fitted order under grid refinement.
    pub min_refinement_order: f64,
    /// Operators that must agree exactly (up to rounding).
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fd_relative: 1e-6,
            second_variation: 1e-4,
            min_t_order: MIN_T_ORDER,
            volume_constraint: 1e-8,
            volume_drift: 1e-12,
            trace_identity: 1e-10,
            stencil_factor: 10.0,
            hypothesis: 1e-6,
            divergence: 1e-2,
            min_refinement_order: 3.0,
            exact: 1e-12,
        }
    }
}

impl Tolerances {
    /// Multiplies every residual tolerance by `factor`; orders and the
    /// stencil factor are left alone.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            fd_relative: self.fd_relative * factor,
            second_variation: self.second_variation * factor,
            volume_constraint: self.volume_constraint * factor,
            volume_drift: self.volume_drift * factor,
            trace_identity: self.trace_identity * factor,
            hypothesis: self.hypothesis * factor,
            divergence: self.divergence * factor,
            exact: self.exact * factor,
            ..self.clone()
        }
    }
}

/// Everything a suite needs: base metric, `F`, random-direction seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub chart: Arc<ChartSpec>,
    pub metric: MetricSpec,
    pub f: FScalarFunction,
    /// Number of random directions.
    pub directions: usize,
    pub seed: u64,
    /// Largest wavenumber of random data.
    pub max_wavenumber: i64,
    pub steps: Vec<f64>,
    pub tolerances: Tolerances,
}

const MODES: usize = 3;

impl Scenario {
    pub fn new(chart: Arc<ChartSpec>, metric: MetricSpec, f: FScalarFunction) -> Self {
        Scenario {
            chart,
            metric,
            f,
            directions: 3,
            seed: 0,
            max_wavenumber: 2,
            steps: DEFAULT_STEPS.to_vec(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.geometry_on(&self.chart)
    }

    fn geometry_on(&self, chart: &Arc<ChartSpec>) -> Result<Geometry> {
        Geometry::new(self.metric.build(chart)?)
    }

    /// Random field number `index` of the given kind, reproducible from the
    /// seed and identical on every chart of the same box.
    pub fn random<K: Kind>(&self, chart: &Arc<ChartSpec>, index: u64) -> Field<K> {
        metrics::random_field(chart, self.seed, index, self.max_wavenumber, MODES)
    }

    /// Direction `i`: a random symmetric 2-tensor.
    pub fn direction(&self, i: usize) -> SymTensor2Field {
        self.random(&self.chart, 1000 + i as u64)
    }
}

/// `max|a − b| / max|b|`, with a unit floor when `b` vanishes.
fn field_rel<K: Kind>(a: &Field<K>, b: &Field<K>) -> f64 {
    (a - b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

fn fd_entry(suite: Suite, formula: &str, dir: usize, residual: f64, tol: &Tolerances, rec: &ConvergenceRecord) -> ReportEntry {
    let mut e = ReportEntry::new(suite.name(), formula, Some(dir), residual, tol.fd_relative, rec.reported_order());
    if !rec.exact {
        e = e.require_order(tol.min_t_order);
    } else {
        e = e.with_note("exact in t: no order to fit");
    }
    if !rec.monotone {
        e = e.with_note("non-monotone finite-difference residuals");
    }
    e
}

/// One field-valued lemma check: FD of `eval` along `g + th` against `analytic`.
#[allow(clippy::too_many_arguments)]
fn lemma_check<K: Kind>(
    sc: &Scenario,
    suite: Suite,
    formula: &str,
    dir: usize,
    fam: &MetricFamily,
    steps: &[f64],
    eval: impl Fn(&Geometry, f64) -> Result<Field<K>>,
    analytic: &Field<K>,
) -> Result<ReportEntry> {
    let (fd, rec) = fd_field_derivative(|t| eval(&fam.geometry_at(t)?, t), steps, 1)?;
    Ok(fd_entry(suite, formula, dir, field_rel(&fd, analytic), &sc.tolerances, &rec))
}

fn suite_volume_scalar(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let suite = Suite::VolumeAndScalarVariation;
    let h = sc.direction(dir);
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let dv = variation::volume_element_variation(&h, &geo.metric)?.mul(geo.metric.sqrt_det());
    let ds = variation::scalar_curvature_variation(&h, geo)?;
    Ok(vec![
        lemma_check(sc, suite, "dv = (1/2) Tr h v", dir, &fam, &steps, |g, _| Ok(g.metric.sqrt_det().clone()), &dv)?,
        lemma_check(sc, suite, "dS = Lap(Tr h) + div(div h) - <Ric, h>", dir, &fam, &steps, |g, _| Ok(g.scalar().clone()), &ds)?,
    ])
}

fn suite_pairing(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let suite = Suite::PairingVariation;
    let h = sc.direction(dir);
    let base = 2000 + 10 * dir as u64;
    let (t, q): (SymTensor2Field, SymTensor2Field) = (sc.random(&sc.chart, base), sc.random(&sc.chart, base + 1));
    let (td, qd): (SymTensor2Field, SymTensor2Field) = (sc.random(&sc.chart, base + 2), sc.random(&sc.chart, base + 3));
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let m = &geo.metric;
    let fixed = variation::inner_product_variation(&t, &q, None, None, &h, m)?;
    let moving = variation::inner_product_variation(&t, &q, Some(&td), Some(&qd), &h, m)?;
    Ok(vec![
        lemma_check(sc, suite, "d<T, Q> = -2<T, h o Q> (static T, Q)", dir, &fam, &steps, |g, _| tensor::inner_product(&t, &q, &g.metric), &fixed)?,
        lemma_check(
            sc,
            suite,
            "d<T, Q> = <T', Q> + <T, Q'> - 2<T, h o Q>",
            dir,
            &fam,
            &steps,
            |g, s| tensor::inner_product(&t.lincomb(1.0, &td, s), &q.lincomb(1.0, &qd, s), &g.metric),
            &moving,
        )?,
    ])
}

fn suite_connection(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let h = sc.direction(dir);
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let c = variation::connection_variation(&h, geo)?;
    Ok(vec![lemma_check(
        sc,
        Suite::ConnectionVariation,
        "g(dNabla(X, Y), Z) = [(Nabla_X h)(Y, Z) + (Nabla_Y h)(X, Z) - (Nabla_Z h)(X, Y)] / 2",
        dir,
        &fam,
        &steps,
        |g, _| Ok(g.christoffel().clone()),
        &c,
    )?])
}

fn suite_hessian_laplacian(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let suite = Suite::HessianLaplacianVariation;
    let h = sc.direction(dir);
    let base = 3000 + 10 * dir as u64;
    let f: ScalarField = sc.random(&sc.chart, base);
    let fd: ScalarField = sc.random(&sc.chart, base + 1);
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let hess = variation::hessian_variation(&f, &fd, &h, geo)?;
    let lap = variation::laplacian_variation(&f, &fd, &h, geo)?;
    Ok(vec![
        lemma_check(
            sc,
            suite,
            "dHess f = Hess f' - ((Nabla.h)(., grad f))^sym + Nabla_{grad f} h / 2",
            dir,
            &fam,
            &steps,
            |g, s| curvature::hessian(&f.lincomb(1.0, &fd, s), g),
            &hess,
        )?,
        lemma_check(
            sc,
            suite,
            "dLap f = Lap f' - <div h + d(Tr h)/2, df> + <Hess f, h>",
            dir,
            &fam,
            &steps,
            |g, s| curvature::laplacian(&f.lincomb(1.0, &fd, s), g),
            &lap,
        )?,
    ])
}

fn suite_ricci(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let h = sc.direction(dir);
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let r = variation::ricci_variation(&h, geo)?;
    Ok(vec![lemma_check(
        sc,
        Suite::RicciVariation,
        "dRic = Lich(h) / 2 - delta*(div h) - Hess(Tr h) / 2",
        dir,
        &fam,
        &steps,
        |g, _| Ok(g.ricci().clone()),
        &r,
    )?])
}

/// Natural size of `d/dt ∫F(S)v`: `∫(|F′(S) ∂S| + |½F(S) Tr h|) v`,
/// floored at the volume so that it stays meaningful when every term vanishes.
fn first_variation_scale(geo: &Geometry, f: &FScalarFunction, h: &SymTensor2Field) -> Result<f64> {
    let s = geo.scalar();
    let ds = variation::scalar_curvature_variation(h, geo)?;
    let tr = tensor::trace(h, &geo.metric)?;
    let a = ds.mul(&f.apply(1, s)).map(f64::abs);
    let b = tr.mul(&f.apply(0, s)).map(|v| 0.5 * v.abs());
    Ok(geo.metric.integrate(&(&a + &b))?.max(geo.metric.volume()?))
}

fn suite_first_variation(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let h = sc.direction(dir);
    let fam = MetricFamily::linear(&geo.metric, h.clone())?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let analytic = variation::first_variation_functional(geo, &sc.f, &h)?;
    let (fd, rec) = fd_scalar_derivative(|t| einstein::functional_value(&fam.geometry_at(t)?, &sc.f), &steps, 1)?;
    let scale = first_variation_scale(geo, &sc.f, &h)?.max(analytic.abs()).max(f64::MIN_POSITIVE);
    Ok(vec![fd_entry(
        Suite::FirstVariation,
        "dE/dt = -int <E_F, h> v",
        dir,
        (fd - analytic).abs() / scale,
        &sc.tolerances,
        &rec,
    )])
}

/// Requires `E_F = λg` on the base; returns `λ`.
fn critical_lambda(sc: &Scenario, geo: &Geometry) -> Result<f64> {
    let pkg = einstein::f_einstein_tensor(geo, &sc.f, EinsteinForm::Compact)?;
    pkg.constant_lambda(sc.tolerances.hypothesis)
}

/// Natural size of the second variation:
/// `∫(|<T₀h, h>| + |<T₁h, h>| + |F′(S)|·|<∇*∇h, h>|) v`. The last term
/// keeps the scale honest when the leading terms cancel.
fn second_variation_scale(
    geo: &Geometry,
    f: &FScalarFunction,
    h: &SymTensor2Field,
    terms: &variation::SecondVariationTerms,
) -> Result<f64> {
    let m = &geo.metric;
    let a = tensor::inner_product(&terms.t0, h, m)?.map(f64::abs);
    let b = tensor::inner_product(&terms.t1, h, m)?.map(f64::abs);
    let rough = tensor::inner_product(&curvature::rough_laplacian(h, geo)?, h, m)?;
    let c = rough.mul(&f.apply(1, geo.scalar())).map(f64::abs);
    m.integrate(&(&(&a + &b) + &c))
}

fn suite_second_variation(sc: &Scenario, geo: &Geometry, dir: usize) -> Result<Vec<ReportEntry>> {
    let suite = Suite::SecondVariation;
    let tol = &sc.tolerances;
    let lambda = match critical_lambda(sc, geo) {
        Ok(l) => l,
        Err(GeomError::Hypothesis(why)) => {
            return Ok(vec![ReportEntry::skipped(suite.name(), "d2E/dt2 = int <T0(h) + T1(h), h> v", Some(dir), why)]);
        }
        Err(e) => return Err(e),
    };
    let fam = MetricFamily::volume_normalized(&geo.metric, sc.direction(dir))?;
    let steps = fam.admissible_steps(&sc.steps)?;
    let h = fam.h_eff();
    let mut out = Vec::new();
    out.push(verify_volume_constraint(&fam, tol.volume_constraint)?.tap_direction(dir));
    let mut samples = vec![0.0];
    samples.extend(steps.iter().flat_map(|&s| [s, -s]));
    out.push(ReportEntry::new(suite.name(), "volume preserved along the family", Some(dir), volume_drift(&fam, &samples)?, tol.volume_drift, None));

    let (value, terms) = variation::second_variation_value(&h, geo, &sc.f, lambda, tol.hypothesis)?;
    let (fd, rec) = fd_scalar_derivative(|t| einstein::functional_value(&fam.geometry_at(t)?, &sc.f), &steps, 2)?;
    let scale = second_variation_scale(geo, &sc.f, &h, &terms)?.max(value.abs()).max(f64::MIN_POSITIVE);
    let mut e = ReportEntry::new(
        suite.name(),
        "d2E/dt2 = int <T0(h) + T1(h), h> v",
        Some(dir),
        (fd - value).abs() / scale,
        tol.second_variation,
        rec.reported_order(),
    );
    if !rec.exact {
        e = e.require_order(tol.min_t_order);
    }
    out.push(e);

    if sc.f == FScalarFunction::Linear {
        out.push(ReportEntry::new(suite.name(), "T1 vanishes for F(s) = s", Some(dir), terms.t1.max_abs(), 0.0, None));
        let mu = geo.scalar().map(|s| lambda + 0.5 * s);
        let reduced = variation::t0_einstein_reduced(&h, geo, &mu)?;
        out.push(ReportEntry::new(
            suite.name(),
            "T0 equals the reduced operator with mu = lambda + S/2",
            Some(dir),
            field_rel(&terms.t0, &reduced),
            tol.exact,
            None,
        ));
    }
    Ok(out)
}

trait TapDirection {
    fn tap_direction(self, dir: usize) -> Self;
}

impl TapDirection for ReportEntry {
    fn tap_direction(mut self, dir: usize) -> Self {
        self.direction = Some(dir);
        self
    }
}

/// The chart with every axis coarsened `levels` times by halving the node
/// spacing count, finest first.
pub fn refinement_ladder(chart: &Arc<ChartSpec>, levels: usize) -> Result<Vec<Arc<ChartSpec>>> {
    let mut out = vec![chart.clone()];
    for _ in 1..levels {
        let last = out.last().expect("nonempty").clone();
        let res: Vec<usize> = last
            .axes()
            .iter()
            .map(|a| match a.boundary {
                Boundary::Periodic => a.resolution / 2,
                Boundary::OpenPatch => (a.resolution - 1) / 2 + 1,
            })
            .collect();
        let ok = last.axes().iter().zip(&res).all(|(a, &n)| {
            n >= MIN_RESOLUTION
                && match a.boundary {
                    Boundary::Periodic => a.resolution % 2 == 0,
                    Boundary::OpenPatch => (a.resolution - 1) % 2 == 0,
                }
        });
        if !ok {
            return Err(GeomError::InvalidChart(format!(
                "resolution {:?} cannot be halved {} times",
                chart.axes().iter().map(|a| a.resolution).collect::<Vec<_>>(),
                levels - 1
            )));
        }
        out.push(last.with_resolutions(&res)?);
    }
    out.reverse();
    Ok(out)
}

/// Relative residuals below this are rounding noise.
const ROUNDOFF_RELATIVE: f64 = 1e-11;

/// Nested derivative passes in `δE_F`: metric, connection, curvature,
/// two for `Hess F′(S)`, one for the divergence.
const DIVERGENCE_PASSES: usize = 5;

/// `‖δE_F‖∞ / scale` over the trusted interior, for every chart of a
/// refinement ladder, and the fitted order.
pub fn divergence_refinement(metric: &MetricSpec, f: &FScalarFunction, charts: &[Arc<ChartSpec>]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let margin = warped::nested_margin(DIVERGENCE_PASSES);
    let mut hs = Vec::new();
    let mut res = Vec::new();
    for chart in charts {
        let geo = Geometry::new(metric.build(chart)?)?;
        let pkg = einstein::f_einstein_tensor(&geo, f, EinsteinForm::Compact)?;
        let div = einstein::divergence_of_ef(&pkg, &geo)?;
        hs.push(chart.spacing(0));
        res.push(div.max_abs_where(|n| chart.is_trusted(n, margin)) / pkg.scale.max(f64::MIN_POSITIVE));
    }
    let order = fit_order(&hs, &res);
    Ok((hs, res, order))
}

fn suite_divergence(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let charts = refinement_ladder(&sc.chart, 3)?;
    let (_, res, order) = divergence_refinement(&sc.metric, &sc.f, &charts)?;
    let finest = *res.last().expect("three levels");
    let e = ReportEntry::new(
        Suite::EinsteinDivergence.name(),
        "div E_F = 0",
        None,
        finest,
        sc.tolerances.divergence,
        Some(order),
    );
    let e = if finest <= ROUNDOFF_RELATIVE {
        e.with_note("at rounding level on every grid: no order to fit")
    } else {
        e.require_order(sc.tolerances.min_refinement_order)
    };
    Ok(vec![e])
}

fn suite_trace(sc: &Scenario, geo: &Geometry) -> Result<Vec<ReportEntry>> {
    let mut out = Vec::new();
    for form in [EinsteinForm::Compact, EinsteinForm::Expanded] {
        let pkg = einstein::f_einstein_tensor(geo, &sc.f, form)?;
        let res = einstein::trace_identity_residual(&pkg, geo, &sc.f)?;
        let n = geo.dim() as f64;
        let s = geo.scalar();
        let scale = [
            s.mul(&sc.f.apply(1, s)).max_abs(),
            pkg.lap_fprime.max_abs() * (n - 1.0),
            sc.f.apply(0, s).max_abs() * 0.5 * n,
            tensor::trace(&pkg.e_f, &geo.metric)?.max_abs(),
        ]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
        let label = match form {
            EinsteinForm::Compact => "Tr E_F = S F'(S) + (1 - n) Lap F'(S) - n F(S) / 2 (direct form)",
            EinsteinForm::Expanded => "Tr E_F = S F'(S) + (1 - n) Lap F'(S) - n F(S) / 2 (chain-rule form)",
        };
        out.push(ReportEntry::new(Suite::TraceIdentity.name(), label, None, res.max_abs() / scale, sc.tolerances.trace_identity, None));
    }
    Ok(out)
}

/// Estimated stencil error of a field at the finer of two charts from the
/// difference with the coarser one: `max|Q_coarse − Q_fine| / 15`.
pub fn stencil_error<K: Kind>(coarse: &Field<K>, fine: &Field<K>, keep: impl Fn(usize) -> bool) -> Result<f64> {
    let r = field::restrict(fine, coarse.chart())?;
    Ok((coarse - &r).max_abs_where(keep) / 15.0)
}

fn suite_forms(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    let charts = refinement_ladder(&sc.chart, 2)?;
    let margin = warped::nested_margin(4);
    let mut compact = Vec::new();
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (i, chart) in charts.iter().enumerate() {
        let geo = sc.geometry_on(chart)?;
        let a = einstein::f_einstein_tensor(&geo, &sc.f, EinsteinForm::Compact)?;
        if i == 1 {
            let b = einstein::f_einstein_tensor(&geo, &sc.f, EinsteinForm::Expanded)?;
            diff = (&a.e_f - &b.e_f).max_abs_where(|n| chart.is_trusted(n, margin));
            scale = a.scale.max(f64::MIN_POSITIVE);
        }
        compact.push(a.e_f);
    }
    let coarse = &charts[0];
    let est = stencil_error(&compact[0], &compact[1], |n| coarse.is_trusted(n, margin))?;
    let e = ReportEntry::new(
        Suite::FormEquivalence.name(),
        "direct E_F = chain-rule E_F",
        None,
        diff / scale,
        (sc.tolerances.stencil_factor * est / scale).max(sc.tolerances.exact),
        None,
    )
    .with_note(format!("stencil error estimate {:.3e}", est / scale));
    Ok(vec![e])
}

/// `lhs = rhs` for an identity that holds in the continuum: the residual at
/// the finest chart must stay within `stencil_factor` times the stencil
/// error of either side.
fn identity_check<K: Kind>(
    sc: &Scenario,
    suite: Suite,
    formula: &str,
    sides: impl Fn(&Arc<ChartSpec>, &Geometry) -> Result<(Field<K>, Field<K>)>,
) -> Result<ReportEntry> {
    let charts = refinement_ladder(&sc.chart, 2)?;
    let margin = warped::nested_margin(4);
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for chart in &charts {
        let geo = sc.geometry_on(chart)?;
        let (l, r) = sides(chart, &geo)?;
        lhs.push(l);
        rhs.push(r);
    }
    let fine = &charts[1];
    let coarse = &charts[0];
    let keep_c = |n| coarse.is_trusted(n, margin);
    let est = stencil_error(&lhs[0], &lhs[1], keep_c)?.max(stencil_error(&rhs[0], &rhs[1], keep_c)?);
    let scale = lhs[1].max_abs().max(rhs[1].max_abs()).max(f64::MIN_POSITIVE);
    let residual = (&lhs[1] - &rhs[1]).max_abs_where(|n| fine.is_trusted(n, margin));
    let tol = (sc.tolerances.stencil_factor * est).max(sc.tolerances.exact * scale);
    Ok(ReportEntry::new(suite.name(), formula, None, residual / scale, tol / scale, None)
        .with_note(format!("stencil error estimate {:.3e}", est / scale)))
}

fn suite_product_rule(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    Ok(vec![identity_check(sc, Suite::ProductRule, "div(f a) = -<df, a> + f div a", |chart, geo| {
        let f: ScalarField = sc.random(chart, 4000);
        let a: CovectorField = sc.random(chart, 4001);
        let lhs = a.scale_by(&f).divergence(geo)?;
        let df = curvature::differential(&f)?;
        let rhs = &f.mul(&a.divergence(geo)?) - &tensor::covector_inner(&df, &a, &geo.metric)?;
        Ok((lhs, rhs))
    })?])
}

fn suite_divergence_decomposition(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    Ok(vec![identity_check(
        sc,
        Suite::DivergenceDecomposition,
        "(div T)(Z) = div(T(., Z)) + <T, L_Z g> / 2",
        |chart, geo| {
            let t: SymTensor2Field = sc.random(chart, 5000);
            let z: VectorField = sc.random(chart, 5001);
            let lhs = tensor::pair(&t.divergence(geo)?, &z)?;
            let tz = tensor::contract_vector(&t, &z)?;
            let lie = curvature::lie_derivative_metric(&z, geo)?;
            let rhs = &tz.divergence(geo)? + &(&tensor::inner_product(&t, &lie, &geo.metric)? * 0.5);
            Ok((lhs, rhs))
        },
    )?])
}

fn suite_curvature_identities(sc: &Scenario) -> Result<Vec<ReportEntry>> {
    Ok(vec![
        identity_check(sc, Suite::CurvatureIdentities, "div Ric = -dS / 2", |_, geo| {
            Ok((geo.ricci().divergence(geo)?, &curvature::differential(geo.scalar())? * -0.5))
        })?,
        identity_check(sc, Suite::CurvatureIdentities, "R(g) = Ric", |_, geo| {
            Ok((curvature::ring_r(geo.metric.g(), geo)?, geo.ricci().clone()))
        })?,
        identity_check(sc, Suite::CurvatureIdentities, "Lich(g) = 0", |_, geo| {
            let ring = &curvature::ring_r(geo.metric.g(), geo)? * 2.0;
            Ok((&curvature::lichnerowicz(geo.metric.g(), geo)? + &ring, ring))
        })?,
    ])
}

fn per_direction(
    sc: &Scenario,
    geo: &Geometry,
    run: impl Fn(&Scenario, &Geometry, usize) -> Result<Vec<ReportEntry>> + Sync,
) -> Result<Vec<ReportEntry>> {
    let parts: Result<Vec<Vec<ReportEntry>>> = (0..sc.directions).into_par_iter().map(|d| run(sc, geo, d)).collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// Runs one suite and returns its entries sorted by formula and direction.
pub fn run_formula_suite(sc: &Scenario, suite: Suite) -> Result<VerificationReport> {
    sc.f.validate()?;
    let entries = match suite {
        Suite::EinsteinDivergence => suite_divergence(sc)?,
        Suite::FormEquivalence => suite_forms(sc)?,
        Suite::ProductRule => suite_product_rule(sc)?,
        Suite::DivergenceDecomposition => suite_divergence_decomposition(sc)?,
        Suite::CurvatureIdentities => suite_curvature_identities(sc)?,
        _ => {
            let geo = sc.geometry()?;
            match suite {
                Suite::VolumeAndScalarVariation => per_direction(sc, &geo, suite_volume_scalar)?,
                Suite::PairingVariation => per_direction(sc, &geo, suite_pairing)?,
                Suite::ConnectionVariation => per_direction(sc, &geo, suite_connection)?,
                Suite::HessianLaplacianVariation => per_direction(sc, &geo, suite_hessian_laplacian)?,
                Suite::RicciVariation => per_direction(sc, &geo, suite_ricci)?,
                Suite::FirstVariation => {
                    if !sc.chart.is_periodic() {
                        return Err(GeomError::NotPeriodic);
                    }
                    per_direction(sc, &geo, suite_first_variation)?
                }
                Suite::SecondVariation => {
                    if !sc.chart.is_periodic() {
                        return Err(GeomError::NotPeriodic);
                    }
                    per_direction(sc, &geo, suite_second_variation)?
                }
                Suite::TraceIdentity => suite_trace(sc, &geo)?,
                _ => unreachable!("handled above"),
            }
        }
    };
    let mut report = VerificationReport { entries };
    report.sort();
    Ok(report)
}

/// Integral with compensated summation of `|f|` over the flat measure; used
/// for scale estimates that must not depend on the metric.
pub fn flat_abs_integral(f: &ScalarField) -> f64 {
    let chart = f.chart();
    let s: NeumaierSum = f.values().iter().map(|v| v.abs()).collect();
    s.value() * chart.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use std::f64::consts::PI;

    #[test]
    fn scalar_fd_trivial_cases() {
        let (v, rec) = fd_scalar_derivative(|t| Ok(t * t), &DEFAULT_STEPS, 2).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        assert!(rec.exact);
        let (v, rec) = fd_scalar_derivative(|t: f64| Ok(t.sin()), &DEFAULT_STEPS, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        assert!(rec.order > 1.9 && rec.order < 2.1, "{}", rec.order);
        assert!(rec.monotone);
        let (v, rec) = fd_scalar_derivative(|t: f64| Ok(t.exp()), &DEFAULT_STEPS, 2).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        assert!(rec.order_ok());
    }

    #[test]
    fn fd_rejects_bad_ladders() {
        assert!(fd_scalar_derivative(Ok, &[1e-2, 5e-3], 1).is_err());
        assert!(fd_scalar_derivative(Ok, &[1e-2, 1e-2, 5e-3], 1).is_err());
        assert!(fd_scalar_derivative(Ok, &DEFAULT_STEPS, 3).is_err());
        assert!(fd_scalar_derivative(|_| Ok(f64::NAN), &DEFAULT_STEPS, 1).is_err());
    }

    #[test]
    fn field_fd_of_scaled_flat_metric() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let base = MetricField::flat(&chart);
        let fam = MetricFamily::linear(&base, base.g().clone()).unwrap();
        let (ds, _) = fd_field_derivative(|t| Ok(fam.geometry_at(t)?.scalar().clone()), &DEFAULT_STEPS, 1).unwrap();
        assert!(ds.max_abs() < 1e-9);
        let (dv, _) = fd_field_derivative(|t| Ok(fam.metric_at(t)?.sqrt_det().clone()), &DEFAULT_STEPS, 1).unwrap();
        assert!(dv.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn first_variation_closed_form_on_flat_torus() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let base = MetricField::flat(&chart);
        let f = FScalarFunction::polynomial(&[1.0, 1.0]);
        let fam = MetricFamily::linear(&base, base.g().clone()).unwrap();
        let (v, _) = fd_scalar_derivative(|t| einstein::functional_value(&fam.geometry_at(t)?, &f), &DEFAULT_STEPS, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn volume_normalized_family_keeps_volume_and_constraint() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let base = MetricField::new(SymTensor2Field::from_coords_mat(&chart, |x| {
            let mut m = linalg::identity(2);
            m[0][0] = 1.0 + 0.1 * (2.0 * PI * x[1]).sin();
            m
        }))
        .unwrap();
        let h: SymTensor2Field = metrics::random_field(&chart, 1, 0, 2, 3);
        let fam = MetricFamily::volume_normalized(&base, h).unwrap();
        assert!(volume_drift(&fam, &[-0.01, 0.0, 0.005, 0.01]).unwrap() < 1e-13);
        let e = verify_volume_constraint(&fam, 1e-10).unwrap();
        assert!(e.passed(), "{e:?}");
        // the analytic h_eff, k_eff agree with FD of g_t
        let (d1, _) = fd_field_derivative(|t| Ok(fam.metric_at(t)?.g().clone()), &DEFAULT_STEPS, 1).unwrap();
        assert!((&d1 - &fam.h_eff()).max_abs() < 1e-9);
        let (d2, _) = fd_field_derivative(|t| Ok(fam.metric_at(t)?.g().clone()), &DEFAULT_STEPS, 2).unwrap();
        assert!((&d2 - &fam.k_eff()).max_abs() < 1e-6);
    }

    #[test]
    fn volume_normalized_conformal_direction() {
        let chart = ChartSpec::periodic(2, 1.0, 8).unwrap();
        let base = MetricField::flat(&chart);
        let fam = MetricFamily::volume_normalized(&base, base.g().clone()).unwrap();
        for t in [0.01, -0.02] {
            assert!((fam.phi(t).unwrap() - 1.0 / (1.0 + t)).abs() < 1e-14);
        }
        assert!(fam.h_eff().max_abs() < 1e-15);
        assert!(fam.k_eff().max_abs() < 1e-14);
        assert!(verify_volume_constraint(&fam, 1e-10).unwrap().passed());
        let zero = MetricFamily::volume_normalized(&base, SymTensor2Field::zeros(&chart)).unwrap();
        assert_eq!(zero.k_eff().max_abs(), 0.0);
    }

    #[test]
    fn quadratic_family_exposes_k() {
        let chart = ChartSpec::periodic(2, 1.0, 8).unwrap();
        let base = MetricField::flat(&chart);
        let h: SymTensor2Field = metrics::random_field(&chart, 2, 0, 1, 2);
        let k: SymTensor2Field = metrics::random_field(&chart, 2, 1, 1, 2);
        let fam = MetricFamily::quadratic(&base, h, k.clone()).unwrap();
        let (d2, _) = fd_field_derivative(|t| Ok(fam.metric_at(t)?.g().clone()), &DEFAULT_STEPS, 2).unwrap();
        assert!((&d2 - &k).max_abs() < 1e-9);
    }

    #[test]
    fn refinement_ladder_halves_spacing() {
        let chart = ChartSpec::periodic(2, 1.0, 32).unwrap();
        let l = refinement_ladder(&chart, 3).unwrap();
        assert_eq!(l.iter().map(|c| c.axis(0).resolution).collect::<Vec<_>>(), vec![8, 16, 32]);
        assert!(refinement_ladder(&chart, 4).is_err());
        let p = crate::warped::WarpedParams::critical(2).unwrap();
        let l = refinement_ladder(&p.chart(65, 16).unwrap(), 2).unwrap();
        assert_eq!(l[0].axis(0).resolution, 33);
    }

    #[test]
    fn second_variation_suite_skips_non_critical_base() {
        let chart = ChartSpec::periodic(2, 1.0, 16).unwrap();
        let spec = MetricSpec::ConformalPerturbed {
            amplitude: 0.1,
            wavenumbers: 1,
            seed: 3,
        };
        let mut sc = Scenario::new(chart, spec, FScalarFunction::power(2));
        sc.directions = 1;
        let r = run_formula_suite(&sc, Suite::SecondVariation).unwrap();
        assert_eq!(r.summary().skipped, 1);
        assert!(r.all_passed());
    }
}
