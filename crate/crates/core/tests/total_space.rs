use std::collections::BTreeMap;

use ambrose_core::fixtures::{catalog, instantiate, Capability, Fixture};
use ambrose_core::total_space::{
    bar_parallelism_check, connection_agreement, distribution_parallel_check, submersion_residuals, torsion_agreement,
    TotalSpaceModel, HYPOTHESES_FAILED,
};

fn bundle_fixtures() -> Vec<(Fixture, TotalSpaceModel)> {
    catalog()
        .iter()
        .filter(|d| d.provides.contains(&Capability::TotalSpace))
        .map(|d| {
            let fx = instantiate(d.name, &BTreeMap::new()).unwrap();
            let model = TotalSpaceModel::from_fixture(&fx).unwrap();
            (fx, model)
        })
        .collect()
}

#[test]
fn case_tables_agree_with_direct_evaluation() {
    for (fx, model) in bundle_fixtures() {
        let pts = fx.chart.sample_interior(3, 42);
        let t = torsion_agreement(&model, &pts).unwrap();
        let c = connection_agreement(&model, &pts).unwrap();
        assert!(t < 1e-6 && c < 1e-6, "{}: torsion {t}, connection {c}", fx.name);
    }
}

#[test]
fn connection_metrics_are_riemannian_submersions() {
    for (fx, model) in bundle_fixtures() {
        for x in fx.chart.sample_interior(8, 42) {
            let (mixed, horiz) = submersion_residuals(&model, &x).unwrap();
            assert!(mixed < 1e-10 && horiz < 1e-10, "{}: {mixed} {horiz}", fx.name);
            let g = model.connection_metric(&x).unwrap();
            let m = model.fiber_dim();
            let n = model.base_dim();
            let vertical = g.view((n, n), (m, m)).into_owned();
            assert_eq!(vertical, model.inner.matrix().clone(), "{}", fx.name);
        }
    }
}

#[test]
fn bar_connection_torsion_and_curvature_are_parallel() {
    for (fx, model) in bundle_fixtures() {
        let r = bar_parallelism_check(&model, &fx.chart.sample_interior(3, 42)).unwrap();
        assert!(r.pass && r.flags.is_empty(), "{}: {:?} {:?}", fx.name, r.residuals, r.flags);
    }
}

#[test]
fn distributions_are_parallel_exactly_when_the_shift_is() {
    for (fx, model) in bundle_fixtures() {
        let pts = fx.chart.sample_interior(3, 42);
        let a0 = model.form.shifted(fx.parallel_alpha.as_ref().unwrap()).unwrap();
        let r = distribution_parallel_check(&model, &a0, &pts).unwrap();
        assert!(r.pass, "{}: {:?}", fx.name, r.residuals);
        let a0 = model.form.shifted(fx.bump_alpha.as_ref().unwrap()).unwrap();
        let r = distribution_parallel_check(&model, &a0, &pts).unwrap();
        assert!(r.residuals["a0_distribution"] > 1e-2, "{}: {:?}", fx.name, r.residuals);
        assert!(r.residuals["a_distribution"] < 1e-5, "{}: {:?}", fx.name, r.residuals);
        assert!(r.flags.iter().any(|f| f == HYPOTHESES_FAILED));
    }
}
