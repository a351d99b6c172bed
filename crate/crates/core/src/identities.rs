//! Pointwise residuals of the identities tying connections to their
//! variations, curvatures and torsion, evaluated on a fixture.

use rayon::prelude::*;

use crate::bundle::{
    bianchi_residual, connection_variation_check, curvature_variation_check, exterior_cov_derivative, leibniz_check,
    Connection, ConnectionVariation, LocalConnectionForm, SectionComponent,
};
use crate::chart::{torsion, Chart, ConnectionCoeffs, TensorFieldSpec};
use crate::error::Result;
use crate::fixtures::Fixture;
use crate::homogeneity::{metric_curvature_section, nested_chart};
use crate::lie::LinearRep;
use crate::report::VerificationReport;
use crate::tensor::{Axis, DenseTensor};

pub const IDENTITY_TOL: f64 = 1e-6;

/// A smooth, nowhere special `(1,2)` tensor used as the tangent part of a
/// connection variation.
pub fn probe_variation(n: usize) -> TensorFieldSpec {
    let axes = vec![Axis::Contra, Axis::Co, Axis::Co];
    TensorFieldSpec::new(axes.clone(), vec![n; 3], move |x| {
        let mut t = DenseTensor::zeros(axes.clone(), vec![n; 3]);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let phase: f64 = x
                        .iter()
                        .enumerate()
                        .map(|(mu, xm)| 0.5 * (1 + (k + 2 * i + 3 * j + mu) % 3) as f64 * xm)
                        .sum();
                    t.set(&[k, i, j], 0.1 * (phase + k as f64).sin());
                }
            }
        }
        Ok(t)
    })
}

/// `‖d^Aα − α(T^∇(·,·))‖`, which vanishes when `(∇⊗∇^A)α = 0`.
pub fn torsion_form_residual(
    gamma: &ConnectionCoeffs,
    a: &LocalConnectionForm,
    alpha: &TensorFieldSpec,
    chart: &Chart,
    x: &[f64],
) -> Result<f64> {
    let da = exterior_cov_derivative(a, alpha, chart, x)?;
    let t = torsion(gamma, x)?;
    let al = alpha.eval(x)?;
    let (n, m) = (a.base_dim(), a.algebra().dim());
    let mut out = da;
    for mu in 0..n {
        for nu in 0..n {
            for k in 0..m {
                let at: f64 = (0..n).map(|l| al.get(&[l, k]) * t.get(&[l, mu, nu])).sum();
                out.set(&[mu, nu, k], out.get(&[mu, nu, k]) - at);
            }
        }
    }
    Ok(out.norm())
}

struct ParallelForm {
    gamma: ConnectionCoeffs,
    a: LocalConnectionForm,
    alpha: TensorFieldSpec,
}

fn parallel_form(fx: &Fixture) -> Option<ParallelForm> {
    if let (Some(a), Some(alpha)) = (&fx.form, &fx.parallel_alpha) {
        return Some(ParallelForm {
            gamma: fx.preferred_connection(),
            a: a.clone(),
            alpha: alpha.clone(),
        });
    }
    let (alg, alpha) = fx.canonical_parallel_form.clone()?;
    Some(ParallelForm {
        gamma: fx.canonical.clone()?,
        a: LocalConnectionForm::zero(&alg, fx.dim()),
        alpha,
    })
}

/// Max over points of each identity residual:
///
/// - `leibniz`: `∇(β·η) = (∇β)·η + β·∇η` for `η = (R^g, F^A)`;
/// - `connection_variation`: `∇^{B+β}η − ∇^Bη = β·η`;
/// - `curvature_variation`: `F^{A+α} = F^A + d^Aα + ½[α∧α]`;
/// - `bianchi`: `d^A F^A = 0`;
/// - `torsion_form`: `d^Aα = α(T^∇(·,·))` for a parallel `α`, whose
///   parallelism is recorded as `nabla_alpha`.
///
/// Bundle identities are skipped on fixtures without a connection form.
pub fn identity_report(fx: &Fixture, points: &[Vec<f64>]) -> Result<VerificationReport> {
    let chart = nested_chart(&fx.chart);
    let n = fx.dim();
    let gamma = fx.preferred_connection();
    let conn = Connection::new(gamma.clone(), fx.form.clone());
    let eta = metric_curvature_section(&fx.metric, fx.form.as_ref(), &chart);
    let s = probe_variation(n);
    let bump = fx.form.as_ref().and(fx.bump_alpha.clone());
    let beta = ConnectionVariation {
        s: Some(s.clone()),
        alpha: bump.clone(),
    };
    let shifted = Connection::new(
        gamma.add_difference(&s)?,
        match (&fx.form, &bump) {
            (Some(a), Some(b)) => Some(a.shifted(b)?),
            (a, _) => a.clone(),
        },
    );
    let parallel = parallel_form(fx);

    let rows = points
        .par_iter()
        .map(|x| {
            chart.check_interior(x)?;
            let mut row = vec![
                ("leibniz", leibniz_check(&beta, &eta, &conn, &chart, x)?),
                ("connection_variation", connection_variation_check(&eta, &conn, &shifted, &chart, x)?),
            ];
            if let (Some(a), Some(b)) = (&fx.form, &bump) {
                row.push(("curvature_variation", curvature_variation_check(a, b, &chart, x)?));
                row.push(("bianchi", bianchi_residual(a, &chart, x)?));
            }
            if let Some(p) = &parallel {
                let c = Connection::new(p.gamma.clone(), Some(p.a.clone()));
                let comp = SectionComponent::with_rep("alpha", p.alpha.clone(), LinearRep::adjoint(p.a.algebra()));
                let frame = fx.metric.frame(x)?;
                let d = c.derivative_at(&comp, &chart, x)?.to_frame(&frame)?.norm();
                row.push(("nabla_alpha", d));
                row.push(("torsion_form", torsion_form_residual(&p.gamma, &p.a, &p.alpha, &chart, x)?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = VerificationReport::new("identities", points.to_vec()).for_fixture(&fx.name, &fx.params);
    for (i, (name, _)) in rows.first().map(|r| r.as_slice()).unwrap_or(&[]).iter().enumerate() {
        let worst = rows.iter().map(|r| r[i].1).fold(0.0_f64, |w, v| if v.is_nan() { f64::NAN } else { w.max(v) });
        report.record(name, worst, IDENTITY_TOL);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fixtures::instantiate;

    fn report(name: &str) -> VerificationReport {
        let fx = instantiate(name, &BTreeMap::new()).unwrap();
        let pts = fx.chart.sample_interior(8, 3);
        identity_report(&fx, &pts).unwrap()
    }

    #[test]
    fn euclidean_identities_are_exact() {
        let r = report("euclidean");
        assert_eq!(r.residuals.len(), 2);
        assert!(r.residuals.values().all(|v| *v < 1e-10), "{:?}", r.residuals);
    }

    #[test]
    fn sphere_bundles_satisfy_every_identity() {
        for name in ["hopf_monopole", "su2_bundle_sphere2"] {
            let r = report(name);
            assert_eq!(r.residuals.len(), 6, "{name}");
            assert!(r.pass, "{name}: {:?}", r.residuals);
        }
    }

    #[test]
    fn maurer_cartan_form_relates_torsion_and_exterior_derivative() {
        for name in ["su2_canonical", "berger_sphere"] {
            let r = report(name);
            assert!(r.pass, "{name}: {:?}", r.residuals);
            assert!(r.residuals.contains_key("torsion_form"));
        }
    }

    #[test]
    fn torsion_form_detects_a_non_parallel_form() {
        // with Levi-Civita the Maurer-Cartan form is not parallel and the
        // identity no longer holds
        let fx = instantiate("su2_canonical", &BTreeMap::new()).unwrap();
        let chart = nested_chart(&fx.chart);
        let (alg, mc) = fx.canonical_parallel_form.clone().unwrap();
        let a = LocalConnectionForm::zero(&alg, 3);
        let x = fx.chart.sample_interior(1, 0).remove(0);
        let r = torsion_form_residual(&fx.levi_civita(), &a, &mc, &chart, &x).unwrap();
        assert!(r > 1e-2, "{r}");
    }
}
