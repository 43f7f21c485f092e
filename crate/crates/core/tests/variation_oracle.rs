use fehlab_core::oracle::{self, fd_field_derivative, run_formula_suite, MetricFamily, Scenario, Suite, DEFAULT_STEPS};
use fehlab_core::{tensor, variation, ChartSpec, FScalarFunction, Geometry, MetricSpec, Status, SymTensor2Field};

fn conformal() -> MetricSpec {
    MetricSpec::ConformalPerturbed {
        amplitude: 0.1,
        wavenumbers: 1,
        seed: 4,
    }
}

fn scenario(n: usize, metric: MetricSpec, f: FScalarFunction) -> Scenario {
    let mut sc = Scenario::new(ChartSpec::periodic(2, 1.0, n).unwrap(), metric, f);
    sc.directions = 2;
    sc.max_wavenumber = 1;
    sc
}

#[test]
fn lemma_suites_agree_with_finite_differences_on_a_coarse_torus() {
    let mut sc = scenario(64, conformal(), FScalarFunction::Linear);
    sc.tolerances = sc.tolerances.scaled(100.0);
    for suite in Suite::LEMMAS {
        let r = run_formula_suite(&sc, suite).unwrap();
        assert!(r.all_passed(), "{suite:?}: {:#?}", r.failures().collect::<Vec<_>>());
        assert!(r.entries.iter().all(|e| e.order.map(|o| o > 1.9).unwrap_or(true)));
    }
}

#[test]
fn oracle_rejects_a_pairing_formula_without_the_metric_term() {
    let chart = ChartSpec::periodic(2, 1.0, 32).unwrap();
    let geo = Geometry::new(conformal().build(&chart).unwrap()).unwrap();
    let h: SymTensor2Field = fehlab_core::metrics::random_field(&chart, 9, 0, 1, 3);
    let t: SymTensor2Field = fehlab_core::metrics::random_field(&chart, 9, 1, 1, 3);
    let fam = MetricFamily::linear(&geo.metric, h.clone()).unwrap();
    let (fd, _) = fd_field_derivative(|s| tensor::inner_product(&t, &t, &fam.metric_at(s)?), &DEFAULT_STEPS, 1).unwrap();
    let right = variation::inner_product_variation(&t, &t, None, None, &h, &geo.metric).unwrap();
    let wrong = &right * 0.5;
    let rel = |a: &fehlab_core::ScalarField| (&fd - a).max_abs() / fd.max_abs();
    assert!(rel(&right) < 1e-9);
    assert!(rel(&wrong) > 0.1);
}

#[test]
fn first_variation_matches_the_functional_derivative() {
    for metric in [MetricSpec::Flat, conformal()] {
        let mut sc = scenario(64, metric, FScalarFunction::power(2));
        sc.tolerances = sc.tolerances.scaled(100.0);
        let r = run_formula_suite(&sc, Suite::FirstVariation).unwrap();
        assert!(r.all_passed(), "{:#?}", r.entries);
        assert_eq!(r.entries.len(), 2);
    }
}

#[test]
fn second_variation_on_the_flat_torus() {
    for f in [FScalarFunction::Linear, FScalarFunction::power(2)] {
        let mut sc = scenario(64, MetricSpec::Flat, f.clone());
        sc.tolerances = sc.tolerances.scaled(10.0);
        let r = run_formula_suite(&sc, Suite::SecondVariation).unwrap();
        assert!(r.all_passed(), "{f:?}: {:#?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.summary().skipped, 0);
        let structural = r.entries.iter().filter(|e| e.formula.starts_with("T")).count();
        assert_eq!(structural, if f == FScalarFunction::Linear { 4 } else { 0 });
    }
}

#[test]
fn second_variation_is_skipped_away_from_critical_metrics() {
    let sc = scenario(32, conformal(), FScalarFunction::power(2));
    let r = run_formula_suite(&sc, Suite::SecondVariation).unwrap();
    assert!(r.entries.iter().all(|e| e.status == Status::SkippedHypothesis));
    assert_eq!(r.summary().skipped, 2);
}

#[test]
fn volume_normalized_family_on_a_perturbed_base() {
    let chart = ChartSpec::periodic(3, 1.0, 16).unwrap();
    let g = conformal().build(&chart).unwrap();
    let geo = Geometry::new(g).unwrap();
    let h: SymTensor2Field = fehlab_core::metrics::random_field(&chart, 2, 7, 1, 3);
    let fam = MetricFamily::volume_normalized(&geo.metric, h).unwrap();
    assert!(oracle::verify_volume_constraint(&fam, 1e-8).unwrap().passed());
    let drift = oracle::volume_drift(&fam, &[-0.01, -0.005, 0.0, 0.005, 0.01]).unwrap();
    assert!(drift < 1e-12, "{drift}");
}

#[test]
fn reports_are_deterministic_in_the_seed() {
    let a = run_formula_suite(&scenario(32, conformal(), FScalarFunction::Linear), Suite::PairingVariation).unwrap();
    let b = run_formula_suite(&scenario(32, conformal(), FScalarFunction::Linear), Suite::PairingVariation).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mut other = scenario(32, conformal(), FScalarFunction::Linear);
    other.seed = 1;
    let c = run_formula_suite(&other, Suite::PairingVariation).unwrap();
    assert_ne!(a.entries[0].residual, c.entries[0].residual);
}

#[test]
fn variation_suites_refuse_open_patches() {
    let p = fehlab_core::WarpedParams::critical(2).unwrap();
    let sc = Scenario::new(p.chart(17, 8).unwrap(), MetricSpec::Warped { alpha: p.alpha }, p.f());
    assert!(run_formula_suite(&sc, Suite::FirstVariation).is_err());
}
