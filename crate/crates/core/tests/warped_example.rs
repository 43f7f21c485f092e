use fehlab_core::warped::{self, cross_validate_numeric, WarpedParams, WarpedTolerances};

fn loose() -> WarpedTolerances {
    WarpedTolerances {
        curvature: 1e-2,
        proportionality: 1e-4,
        lambda_spread: 1e-4,
        mu: 1e-3,
    }
}

#[test]
fn critical_pairs_are_einstein_on_a_moderate_grid() {
    for beta in [2, 3] {
        let p = WarpedParams::critical(beta).unwrap();
        let r = cross_validate_numeric(&p, &p.chart(129, 8).unwrap(), &loose()).unwrap();
        assert!(r.all_passed(), "beta {beta}: {:#?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.entries.len(), 9);
    }
}

#[test]
fn off_the_critical_curve_the_negative_control_fires() {
    let p = WarpedParams::on_unit_range(-5.9, 2).unwrap();
    assert!(warped::criticality_residual(&p).abs() > 0.05);
    let r = cross_validate_numeric(&p, &p.chart(65, 8).unwrap(), &WarpedTolerances::default()).unwrap();
    let control = r.entries.iter().find(|e| e.formula.contains("not proportional")).unwrap();
    assert!(control.passed(), "{control:?}");
}

#[test]
fn curvature_converges_at_fourth_order_for_a_mild_exponent() {
    let p = WarpedParams::on_unit_range(1.0, 2).unwrap();
    let (errs, order) = warped::curvature_refinement(&p, &[16, 32, 64], 8).unwrap();
    assert!(errs[2] < 1e-5, "{errs:?}");
    assert!(order > 3.0, "{order}");
}

#[test]
fn mismatched_chart_is_rejected() {
    let p = WarpedParams::critical(2).unwrap();
    let q = WarpedParams::new(p.alpha, 2, 1.0, 3.0).unwrap();
    assert!(cross_validate_numeric(&p, &q.chart(33, 8).unwrap(), &loose()).is_err());
}
