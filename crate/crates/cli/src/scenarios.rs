//! One function per scenario, each producing a report over the sample points.

use std::f64::consts::FRAC_PI_2;

use ambrose_core::bundle::{Connection, LocalConnectionForm};
use ambrose_core::chart::{central_difference, curvature, lower_first};
use ambrose_core::fixtures::{instantiate, Capability, Fixture};
use ambrose_core::homogeneity::chain::SUBSPACE_ANGLE_TOL;
use ambrose_core::homogeneity::{
    adapted_connection, adapted_residuals, check_lh_triple, check_ls_triple, orbit_match, stabilizer_field,
    tower_fields, ChainFlag, OrbitOptions, SectionSetup, TripleSpec, PARALLEL_TOL,
};
use ambrose_core::identities::identity_report;
use ambrose_core::lie::{group_exp, LieAlgebra, LinearRep};
use ambrose_core::report::VerificationReport;
use ambrose_core::total_space::{
    bar_parallelism_check, connection_agreement, distribution_parallel_check, submersion_residuals,
    torsion_agreement, TotalSpaceModel,
};
use ambrose_core::{Chart, ConnectionCoeffs, DenseTensor, GeomError, OrthoFrame, Result, TensorFieldSpec};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{ConfigError, Scenario, Shift};

/// Bracket closure of computed stabilizers.
pub const CLOSURE_TOL: f64 = 1e-7;
/// Case tables against direct evaluation.
pub const AGREEMENT_TOL: f64 = 1e-6;
/// Orthogonality and norm preservation of the connection metric.
pub const SUBMERSION_TOL: f64 = 1e-10;

/// What a scenario needs from its fixture.
pub fn required_capability(s: Scenario) -> Option<(Capability, &'static str)> {
    match s {
        Scenario::Singer | Scenario::Identities => Some((Capability::Metric, "a metric")),
        Scenario::CheckLhTriple | Scenario::CheckLsTriple => Some((Capability::Triple, "a triple")),
        Scenario::Adapt => Some((Capability::CanonicalConnection, "a canonical connection")),
        Scenario::TotalSpace => Some((Capability::TotalSpace, "a bundle with a connection form")),
        Scenario::Selftest => None,
    }
}

/// Instantiates the fixture and checks it suits the scenario.
pub fn load_fixture(s: Scenario, name: &str, params: &std::collections::BTreeMap<String, f64>) -> std::result::Result<Fixture, ConfigError> {
    let fx = instantiate(name, params).map_err(ConfigError::Fixture)?;
    if let Some((cap, needs)) = required_capability(s) {
        if !fx.has(cap) {
            return Err(ConfigError::Incompatible {
                scenario: s,
                fixture: name.to_string(),
                needs,
            });
        }
    }
    Ok(fx)
}

fn max_nan(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0_f64, |w, v| if v.is_nan() || w.is_nan() { f64::NAN } else { w.max(v) })
}

/// Copies residuals, tolerances, verdicts and flags of `other` into `into`.
fn merge(into: &mut VerificationReport, other: &VerificationReport) {
    for (name, v) in &other.residuals {
        into.record(name, *v, other.tolerances[name]);
    }
    into.verdicts.extend(other.verdicts.iter().map(|(k, v)| (k.clone(), *v)));
    for f in &other.flags {
        into.flag(f);
    }
}

/// `A0` of the triple: the fixture's form, optionally moved by multiples of
/// its parallel and bump 1-forms.
fn reference_form(fx: &Fixture, shift: Shift) -> Result<Option<LocalConnectionForm>> {
    let Some(a) = &fx.form else {
        return Ok(None);
    };
    let mut a0 = a.clone();
    for (scale, alpha) in [(shift.parallel, &fx.parallel_alpha), (shift.bump, &fx.bump_alpha)] {
        if scale != 0.0 {
            let alpha = alpha
                .as_ref()
                .ok_or_else(|| GeomError::Invalid(format!("`{}` has no such 1-form to shift by", fx.name)))?;
            a0 = a0.shifted(&alpha.scale(scale))?;
        }
    }
    Ok(Some(a0))
}

pub fn singer(fx: &Fixture, points: &[Vec<f64>], kmax: Option<usize>) -> Result<VerificationReport> {
    let setup = SectionSetup::for_fixture(fx)?;
    let analyses = points
        .par_iter()
        .map(|x| setup.analyze(x, kmax))
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::new(Scenario::Singer.name(), points.to_vec());
    let first = &analyses[0].1;
    report.stabilizer_dims = first.reported_dims();
    report.singer_k = first.singer_k;
    let disagree = analyses
        .iter()
        .filter(|(_, c)| c.singer_k != first.singer_k || c.reported_dims() != report.stabilizer_dims)
        .count();
    report.record("singer_k_disagreement", disagree as f64, 0.5);
    report.record("nesting_angle", max_nan(analyses.iter().map(|(_, c)| c.nesting_angle())), SUBSPACE_ANGLE_TOL);
    report.record(
        "closure",
        max_nan(analyses.iter().map(|(_, c)| c.closure_residual(&setup.algebra))),
        CLOSURE_TOL,
    );
    for (_, c) in &analyses {
        for f in &c.flags {
            report.flag(match f {
                ChainFlag::Truncated => "chain-truncated",
                ChainFlag::Ambiguous => "chain-ambiguous",
            });
        }
    }
    // infinitesimal homogeneity: every point against the first
    if let Some(k) = first.singer_k {
        let depth = k + 1;
        if analyses.iter().all(|(t, _)| t.kmax >= depth) {
            let opts = OrbitOptions::default();
            let matches = analyses[1..]
                .par_iter()
                .map(|(t, _)| orbit_match(&analyses[0].0, t, &setup.algebra, depth, &opts))
                .collect::<Result<Vec<_>>>()?;
            for m in &matches {
                if let Some(reason) = &m.reason {
                    let kind = match reason {
                        ambrose_core::homogeneity::NoMatchReason::SingerMismatch { .. } => "orbit-singer-mismatch",
                        ambrose_core::homogeneity::NoMatchReason::Invariant { .. } => "orbit-invariant-mismatch",
                        ambrose_core::homogeneity::NoMatchReason::Residual => "orbit-no-match",
                    };
                    report.flag(kind);
                }
            }
            report.record("orbit_residual", max_nan(matches.iter().map(|m| m.residual)), opts.match_tol);
        } else {
            report.flag("orbit-skipped-shallow-tower");
        }
    }
    Ok(report)
}

fn triple(fx: &Fixture, shift: Shift) -> Result<(TripleSpec, Option<LocalConnectionForm>)> {
    let a0 = reference_form(fx, shift)?;
    let spec = TripleSpec::from_fixture(fx)?;
    let spec = TripleSpec::new(spec.metric, spec.chart, spec.fiber, a0)?;
    Ok((spec, fx.form.clone()))
}

pub fn check_lh(fx: &Fixture, points: &[Vec<f64>], shift: Shift) -> Result<VerificationReport> {
    let (spec, a) = triple(fx, shift)?;
    let gamma = fx
        .canonical
        .clone()
        .unwrap_or_else(|| ConnectionCoeffs::levi_civita(&fx.metric, &spec.chart));
    check_lh_triple(&spec, &gamma, a.as_ref(), points)
}

pub fn check_ls(fx: &Fixture, points: &[Vec<f64>], shift: Shift) -> Result<VerificationReport> {
    let (spec, _) = triple(fx, shift)?;
    check_ls_triple(&spec, points)
}

pub fn adapt(fx: &Fixture, points: &[Vec<f64>], kmax: Option<usize>) -> Result<VerificationReport> {
    let setup = SectionSetup::for_fixture(fx)?;
    let (_, chain) = setup.analyze(&points[0], kmax)?;
    let k = chain
        .singer_k
        .ok_or_else(|| GeomError::Invalid("the stabilizer chain did not stabilize; raise kmax".into()))?;
    let depth = k + 1;
    let canonical = fx.canonical.clone().expect("capability checked");
    let b_prime = Connection::new(canonical, fx.form.clone());
    let adapted = adapted_connection(
        &setup.b0,
        &b_prime,
        &setup.metric,
        &setup.algebra,
        &setup.inner,
        stabilizer_field(&setup, depth),
    )?;
    let levels = tower_fields(&setup.sigma, &setup.b0, &setup.chart, depth)?;
    let rows = points
        .par_iter()
        .map(|x| adapted_residuals(&adapted, &levels, &setup.metric, &setup.chart, x))
        .collect::<Result<Vec<_>>>()?;
    let mut report = VerificationReport::new(Scenario::Adapt.name(), points.to_vec());
    report.stabilizer_dims = chain.reported_dims();
    report.singer_k = chain.singer_k;
    report.record("nabla_difference", max_nan(rows.iter().map(|r| r.difference)), PARALLEL_TOL);
    for level in 0..=depth {
        report.record(
            &format!("nabla_level_{level}"),
            max_nan(rows.iter().map(|r| r.levels[level])),
            PARALLEL_TOL,
        );
    }
    Ok(report)
}

pub fn total_space(fx: &Fixture, points: &[Vec<f64>], shift: Shift) -> Result<VerificationReport> {
    let model = TotalSpaceModel::from_fixture(fx)?;
    let mut report = VerificationReport::new(Scenario::TotalSpace.name(), points.to_vec());
    report.record("bar_torsion_agreement", torsion_agreement(&model, points)?, AGREEMENT_TOL);
    report.record("bar_connection_agreement", connection_agreement(&model, points)?, AGREEMENT_TOL);
    let sub = points
        .par_iter()
        .map(|x| submersion_residuals(&model, x))
        .collect::<Result<Vec<_>>>()?;
    report.record("submersion", max_nan(sub.iter().map(|(a, b)| a.max(*b))), SUBMERSION_TOL);
    merge(&mut report, &bar_parallelism_check(&model, points)?);
    // A0 defaults to A moved by the fixture's parallel 1-form
    let shift = if shift == Shift::default() {
        Shift {
            parallel: 1.0,
            bump: 0.0,
        }
    } else {
        shift
    };
    let a0 = reference_form(fx, shift)?.expect("capability checked");
    merge(&mut report, &distribution_parallel_check(&model, &a0, points)?);
    Ok(report)
}

pub fn identities(fx: &Fixture, points: &[Vec<f64>]) -> Result<VerificationReport> {
    identity_report(fx, points)
}

/// Quick internal consistency checks that need no fixture.
pub fn selftest() -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Scenario::Selftest.name(), vec![]);
    for alg in [LieAlgebra::su2(), LieAlgebra::so(4)] {
        report.record(&format!("jacobi.{}", alg.name()), alg.jacobi_residual(), 1e-10);
    }
    let su2 = LieAlgebra::su2();
    let (e1, e2, e3) = (DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, 0.0]), DVector::from_vec(vec![0.0, 0.0, 2.0]));
    report.record("su2_bracket", (su2.bracket(&e1, &e2) - e3).amax(), 1e-14);
    report.record("adjoint_homomorphism", LinearRep::adjoint(&su2).homomorphism_residual(&su2), 1e-12);

    let q = group_exp(&[0.3, -1.1, 0.8, 0.2, 0.5, -0.7], &LinearRep::vector(4));
    report.record("exp_orthogonality", (&q * q.transpose() - DMatrix::identity(4, 4)).amax(), 1e-12);

    let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
    let frame = OrthoFrame::cholesky(&[0.0; 3], &g)?;
    let t = DenseTensor::from_vec(
        vec![ambrose_core::Axis::Contra, ambrose_core::Axis::Co],
        vec![3, 3],
        (0..9).map(|i| (i as f64 * 0.7).sin()).collect(),
    )?;
    let back = t.to_frame(&frame)?.from_frame(&frame)?;
    report.record("frame_round_trip", back.sub(&t)?.max_abs(), 1e-12);

    let chart = Chart::cube(1, -1.0, 1.0, 0.2)?;
    let f = TensorFieldSpec::new(vec![], vec![], |x| Ok(DenseTensor::scalar(x[0].sin())));
    let err = |h: f64| -> Result<f64> { Ok((central_difference(&f, &chart, &[0.4], 0, h)?.data()[0] - 0.4f64.cos()).abs()) };
    report.record("fd_order", (err(0.05)? / err(0.025)? - 4.0).abs(), 0.5);

    let sphere = instantiate("round_sphere2", &Default::default())?;
    let x = [FRAC_PI_2, 0.0];
    let r = lower_first(&curvature(&sphere.levi_civita(), &sphere.chart, &x)?, &sphere.metric.matrix(&x)?)?;
    report.record("sphere_curvature", (r.get(&[0, 1, 0, 1]) - 1.0).abs(), 1e-7);
    Ok(report)
}
