//! Parallelism criteria for a metric, a principal bundle and a connection on
//! it, and the comparison of the two condition systems for a metric connection.

use rayon::prelude::*;

use super::tower::nested_chart;
use crate::bundle::{curvature_form_field, Connection, LocalConnectionForm, SectionComponent};
use crate::chart::{curvature_field, torsion_field, Chart, ConnectionCoeffs, MetricField, TensorFieldSpec};
use crate::error::{GeomError, Result};
use crate::fixtures::{Fiber, Fixture};
use crate::lie::LinearRep;
use crate::report::VerificationReport;

pub const PARALLEL_TOL: f64 = 1e-5;

/// `‖∇g‖` above which a connection is rejected as not metric.
pub const METRIC_TOL: f64 = 1e-7;

/// A metric, a structure algebra and the reference connection `A0`.
#[derive(Clone, Debug)]
pub struct TripleSpec {
    pub metric: MetricField,
    pub chart: Chart,
    pub fiber: Option<Fiber>,
    pub a0: Option<LocalConnectionForm>,
}

impl TripleSpec {
    pub fn new(metric: MetricField, chart: Chart, fiber: Option<Fiber>, a0: Option<LocalConnectionForm>) -> Result<Self> {
        if metric.dim() != chart.dim() {
            return Err(GeomError::AxisMismatch("metric and chart dimensions differ".into()));
        }
        match (&fiber, &a0) {
            (Some(f), Some(a)) => {
                if a.algebra() != &f.algebra || a.base_dim() != chart.dim() {
                    return Err(GeomError::RepMismatch("connection form does not match the fiber".into()));
                }
            }
            (None, None) => {}
            _ => return Err(GeomError::RepMismatch("a fiber needs a connection form and vice versa".into())),
        }
        Ok(Self {
            metric,
            chart,
            fiber,
            a0,
        })
    }

    /// The fixture's triple on the chart with the nested step policy.
    pub fn from_fixture(fx: &Fixture) -> Result<Self> {
        Self::new(fx.metric.clone(), nested_chart(&fx.chart), fx.fiber.clone(), fx.form.clone())
    }
}

/// Frame norm of `∇^B` of each named component, maximized over points.
fn max_parallel_residuals(
    b: &Connection,
    metric: &MetricField,
    chart: &Chart,
    comps: &[SectionComponent],
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let derived = comps
        .iter()
        .map(|c| b.derivative(c, chart))
        .collect::<Result<Vec<_>>>()?;
    let per_point = points
        .par_iter()
        .map(|x| {
            chart.check_interior(x)?;
            let frame = metric.frame(x)?;
            derived
                .iter()
                .map(|d| Ok(d.field.eval(x)?.to_frame(&frame)?.norm()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = vec![0.0_f64; comps.len()];
    for row in per_point {
        for (w, v) in worst.iter_mut().zip(row) {
            *w = if v.is_nan() { f64::NAN } else { w.max(v) };
        }
    }
    Ok(worst)
}

fn adjoint_component(name: &str, field: TensorFieldSpec, form: &LocalConnectionForm) -> SectionComponent {
    SectionComponent::with_rep(name, field, LinearRep::adjoint(form.algebra()))
}

/// Residuals `∇R^∇`, `∇T^∇`, `(∇⊗∇^A)F^A` and `(∇⊗∇^A)(A − A0)`.
pub fn check_lh_triple(
    spec: &TripleSpec,
    gamma: &ConnectionCoeffs,
    a: Option<&LocalConnectionForm>,
    points: &[Vec<f64>],
) -> Result<VerificationReport> {
    let chart = &spec.chart;
    let mut names = vec!["nabla_R", "nabla_T"];
    let mut comps = vec![
        SectionComponent::tangent("R", curvature_field(gamma, chart)),
        SectionComponent::tangent("T", torsion_field(gamma)),
    ];
    match (a, &spec.a0) {
        (Some(a), Some(a0)) => {
            names.extend(["nabla_F", "nabla_alpha"]);
            comps.push(adjoint_component("F", curvature_form_field(a, chart), a));
            comps.push(adjoint_component("alpha", a.difference(a0)?, a));
        }
        (None, None) => {}
        _ => return Err(GeomError::RepMismatch("connection form given without a fiber or vice versa".into())),
    }
    let b = Connection::new(gamma.clone(), a.cloned());
    let values = max_parallel_residuals(&b, &spec.metric, chart, &comps, points)?;
    let mut report = VerificationReport::new("check-lh-triple", points.to_vec());
    for (name, v) in names.iter().zip(values) {
        report.record(name, v, PARALLEL_TOL);
    }
    Ok(report)
}

/// Residuals `∇^g R^g` and `(∇^g⊗∇^{A0})F^{A0}`.
pub fn check_ls_triple(spec: &TripleSpec, points: &[Vec<f64>]) -> Result<VerificationReport> {
    let chart = &spec.chart;
    let lc = ConnectionCoeffs::levi_civita(&spec.metric, chart);
    let mut names = vec!["nabla_R_g"];
    let mut comps = vec![SectionComponent::tangent("R", curvature_field(&lc, chart))];
    if let Some(a0) = &spec.a0 {
        names.push("nabla_F_A0");
        comps.push(adjoint_component("F", curvature_form_field(a0, chart), a0));
    }
    let b = Connection::new(lc, spec.a0.clone());
    let values = max_parallel_residuals(&b, &spec.metric, chart, &comps, points)?;
    let mut report = VerificationReport::new("check-ls-triple", points.to_vec());
    for (name, v) in names.iter().zip(values) {
        report.record(name, v, PARALLEL_TOL);
    }
    Ok(report)
}

/// Frame norm of `∇g`, maximized over points.
pub fn metricity_residual(gamma: &ConnectionCoeffs, metric: &MetricField, chart: &Chart, points: &[Vec<f64>]) -> Result<f64> {
    let b = Connection::linear(gamma.clone());
    let comp = SectionComponent::tangent("g", metric.field().clone());
    Ok(max_parallel_residuals(&b, metric, chart, &[comp], points)?[0])
}

/// For a metric connection `∇` with `S = ∇ − ∇^g`, evaluates
/// system 1 (`∇R^g = 0`, `∇S = 0`) and system 2 (`∇R^∇ = 0`, `∇T^∇ = 0`).
/// The verdicts `system1`, `system2` and their `agreement` are recorded.
pub fn equivalence_check_c_c0(
    gamma: &ConnectionCoeffs,
    metric: &MetricField,
    chart: &Chart,
    points: &[Vec<f64>],
) -> Result<VerificationReport> {
    let nabla_g = metricity_residual(gamma, metric, chart, points)?;
    if nabla_g.is_nan() || nabla_g >= METRIC_TOL {
        return Err(GeomError::NotMetric(nabla_g));
    }
    let lc = ConnectionCoeffs::levi_civita(metric, chart);
    let s = gamma.difference(&lc)?;
    let comps = vec![
        SectionComponent::tangent("Rg", curvature_field(&lc, chart)),
        SectionComponent::tangent("S", s),
        SectionComponent::tangent("R", curvature_field(gamma, chart)),
        SectionComponent::tangent("T", torsion_field(gamma)),
    ];
    let b = Connection::linear(gamma.clone());
    let v = max_parallel_residuals(&b, metric, chart, &comps, points)?;
    let mut report = VerificationReport::new("equivalence", points.to_vec());
    report.record("system1.nabla_R_g", v[0], PARALLEL_TOL);
    report.record("system1.nabla_S", v[1], PARALLEL_TOL);
    report.record("system2.nabla_R", v[2], PARALLEL_TOL);
    report.record("system2.nabla_T", v[3], PARALLEL_TOL);
    let first = report.holds("system1.nabla_R_g") && report.holds("system1.nabla_S");
    let second = report.holds("system2.nabla_R") && report.holds("system2.nabla_T");
    report.verdicts.insert("system1".into(), first);
    report.verdicts.insert("system2".into(), second);
    report.verdicts.insert("agreement".into(), first == second);
    report.record("nabla_g", nabla_g, METRIC_TOL);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fixtures::instantiate;
    use crate::tensor::{Axis, DenseTensor};

    fn fixture(name: &str) -> (Fixture, TripleSpec, Vec<Vec<f64>>) {
        let fx = instantiate(name, &BTreeMap::new()).unwrap();
        let spec = TripleSpec::from_fixture(&fx).unwrap();
        let pts = fx.chart.sample_interior(5, 9);
        (fx, spec, pts)
    }

    #[test]
    fn flat_triple_is_exact() {
        let (fx, spec, pts) = fixture("flat_torus_chart");
        let lh = check_lh_triple(&spec, &fx.levi_civita(), fx.form.as_ref(), &pts).unwrap();
        assert_eq!(lh.residuals.len(), 4);
        assert!(lh.residuals.values().all(|v| *v < 1e-10));
        let ls = check_ls_triple(&spec, &pts).unwrap();
        assert_eq!(ls.residuals.len(), 2);
        assert!(ls.residuals.values().all(|v| *v < 1e-10));
    }

    #[test]
    fn hopf_triple_is_locally_symmetric() {
        let (fx, spec, pts) = fixture("hopf_monopole");
        let lh = check_lh_triple(&spec, &fx.levi_civita(), fx.form.as_ref(), &pts).unwrap();
        assert!(lh.pass, "{:?}", lh.residuals);
        let ls = check_ls_triple(&spec, &pts).unwrap();
        assert!(ls.pass, "{:?}", ls.residuals);
    }

    #[test]
    fn bumped_reference_form_fails() {
        let (fx, mut spec, pts) = fixture("hopf_monopole");
        let a = fx.form.clone().unwrap();
        spec.a0 = Some(a.shifted(fx.bump_alpha.as_ref().unwrap()).unwrap());
        let lh = check_lh_triple(&spec, &fx.levi_civita(), Some(&a), &pts).unwrap();
        assert!(lh.residuals["nabla_alpha"] > 1e-2);
        assert!(!lh.pass);
    }

    #[test]
    fn berger_is_not_locally_symmetric() {
        let (_, spec, pts) = fixture("berger_sphere");
        let ls = check_ls_triple(&spec, &pts).unwrap();
        assert!(ls.residuals["nabla_R_g"] > 1e-2);
        assert!(!ls.pass);
    }

    #[test]
    fn berger_with_canonical_connection_is_homogeneous() {
        let (fx, spec, pts) = fixture("berger_sphere");
        let lh = check_lh_triple(&spec, fx.canonical.as_ref().unwrap(), None, &pts).unwrap();
        assert!(lh.pass, "{:?}", lh.residuals);
    }

    #[test]
    fn systems_agree_for_levi_civita_on_the_sphere() {
        let (fx, spec, pts) = fixture("round_sphere2");
        let r = equivalence_check_c_c0(&fx.levi_civita(), &fx.metric, &spec.chart, &pts).unwrap();
        assert!(r.verdicts["system1"] && r.verdicts["system2"] && r.verdicts["agreement"]);
    }

    #[test]
    fn systems_agree_for_the_su2_canonical_connection() {
        let (fx, spec, pts) = fixture("su2_canonical");
        let r = equivalence_check_c_c0(fx.canonical.as_ref().unwrap(), &fx.metric, &spec.chart, &pts).unwrap();
        assert!(r.verdicts["system1"] && r.verdicts["system2"] && r.verdicts["agreement"], "{:?}", r.residuals);
    }

    #[test]
    fn systems_agree_when_both_fail() {
        let (fx, spec, pts) = fixture("twisted_sphere2");
        let r = equivalence_check_c_c0(fx.canonical.as_ref().unwrap(), &fx.metric, &spec.chart, &pts).unwrap();
        assert!(!r.verdicts["system1"] && !r.verdicts["system2"] && r.verdicts["agreement"]);
    }

    #[test]
    fn non_metric_connection_is_rejected() {
        let (fx, spec, pts) = fixture("round_sphere2");
        let s = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3], |_| {
            let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3]);
            t.set(&[0, 0, 0], 0.2);
            Ok(t)
        });
        let gamma = fx.levi_civita().add_difference(&s).unwrap();
        let r = equivalence_check_c_c0(&gamma, &fx.metric, &spec.chart, &pts);
        assert!(matches!(r, Err(GeomError::NotMetric(_))));
    }

    #[test]
    fn mismatched_triples_are_rejected() {
        let fx = instantiate("hopf_monopole", &BTreeMap::new()).unwrap();
        let r = TripleSpec::new(fx.metric.clone(), fx.chart.clone(), fx.fiber.clone(), None);
        assert!(matches!(r, Err(GeomError::RepMismatch(_))));
    }

    #[test]
    fn points_too_close_to_the_edge_fail() {
        let (_, spec, _) = fixture("round_sphere2");
        assert!(matches!(check_ls_triple(&spec, &[vec![0.3, 0.0]]), Err(GeomError::OutOfDomain { .. })));
    }
}
