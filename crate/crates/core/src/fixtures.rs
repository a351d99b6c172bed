//! Closed-form example geometries used as oracles.
//!
//! Every fixture lives on one chart and documents the outcomes the checks are
//! expected to produce on it (see [`Expectations`]).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Vector3};
use serde::Serialize;

use crate::bundle::LocalConnectionForm;
use crate::chart::{Chart, ConnectionCoeffs, MetricField, TensorFieldSpec};
use crate::error::{GeomError, Result};
use crate::lie::{AdInvariantInner, LieAlgebra};
use crate::tensor::{Axis, DenseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    Metric,
    ConnectionForm,
    CanonicalConnection,
    Triple,
    TotalSpace,
}

/// Structure algebra of a bundle with its invariant inner product.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub algebra: LieAlgebra,
    pub inner: AdInvariantInner,
}

impl Fiber {
    pub fn new(algebra: LieAlgebra) -> Result<Self> {
        let inner = AdInvariantInner::default_for(&algebra)?;
        Ok(Self { algebra, inner })
    }
}

/// Which tuple `σ` the stabilizer machinery uses by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefaultSection {
    /// `σ = (R^g, F^{A0})` differentiated with the Levi-Civita connection and `A0`.
    MetricCurvature,
    /// `σ = (T^∇, R^∇)` of the canonical connection, differentiated with it.
    CanonicalTorsionCurvature,
}

/// Outcomes the test suite asserts for a fixture.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Expectations {
    pub homogeneous: bool,
    pub locally_symmetric: bool,
    pub sectional_curvature: Option<f64>,
    pub stabilizer_dim0: Option<usize>,
    pub singer_k: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureDescriptor {
    pub name: &'static str,
    pub parameters: Vec<(&'static str, f64)>,
    pub provides: Vec<Capability>,
    pub summary: &'static str,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub provides: BTreeSet<Capability>,
    pub chart: Chart,
    pub metric: MetricField,
    /// A distinguished metric connection (the canonical one where it differs
    /// from Levi-Civita).
    pub canonical: Option<ConnectionCoeffs>,
    pub fiber: Option<Fiber>,
    /// Connection form `A0` of the triple.
    pub form: Option<LocalConnectionForm>,
    /// An adjoint-valued 1-form parallel for `∇^g ⊗ ∇^{A0}`.
    pub parallel_alpha: Option<TensorFieldSpec>,
    /// An adjoint-valued 1-form that is far from parallel.
    pub bump_alpha: Option<TensorFieldSpec>,
    /// A 1-form with values in a Lie algebra that is parallel for the
    /// canonical connection together with the flat trivial bundle.
    pub canonical_parallel_form: Option<(LieAlgebra, TensorFieldSpec)>,
    pub default_section: DefaultSection,
    pub expect: Expectations,
}

impl Fixture {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn levi_civita(&self) -> ConnectionCoeffs {
        ConnectionCoeffs::levi_civita(&self.metric, &self.chart)
    }

    /// The canonical connection if present, else Levi-Civita.
    pub fn preferred_connection(&self) -> ConnectionCoeffs {
        self.canonical.clone().unwrap_or_else(|| self.levi_civita())
    }

    pub fn has(&self, c: Capability) -> bool {
        self.provides.contains(&c)
    }
}

pub fn catalog() -> Vec<FixtureDescriptor> {
    use Capability::*;
    vec![
        FixtureDescriptor {
            name: "euclidean",
            parameters: vec![("n", 2.0)],
            provides: vec![Metric, Triple],
            summary: "flat R^n on the cube [-1,1]^n",
        },
        FixtureDescriptor {
            name: "flat_torus_chart",
            parameters: vec![],
            provides: vec![Metric, ConnectionForm, Triple, TotalSpace],
            summary: "flat square chart of a torus with the trivial flat u(1) bundle",
        },
        FixtureDescriptor {
            name: "round_sphere2",
            parameters: vec![("radius", 1.0)],
            provides: vec![Metric, Triple],
            summary: "round 2-sphere in polar coordinates",
        },
        FixtureDescriptor {
            name: "hyperbolic_plane",
            parameters: vec![],
            provides: vec![Metric, Triple],
            summary: "upper half-plane with curvature -1",
        },
        FixtureDescriptor {
            name: "round_sphere3",
            parameters: vec![],
            provides: vec![Metric, CanonicalConnection, Triple],
            summary: "unit 3-sphere as SU(2) in Euler angles with its canonical connection",
        },
        FixtureDescriptor {
            name: "berger_sphere",
            parameters: vec![("lambda", 2.0)],
            provides: vec![Metric, CanonicalConnection, Triple],
            summary: "SU(2) with metric diag(lambda^2,1,1) in the left-invariant frame",
        },
        FixtureDescriptor {
            name: "su2_canonical",
            parameters: vec![],
            provides: vec![Metric, CanonicalConnection, Triple],
            summary: "bi-invariant SU(2), canonical connection, sigma = (T, R) of it",
        },
        FixtureDescriptor {
            name: "hopf_monopole",
            parameters: vec![("charge", 1.0)],
            provides: vec![Metric, ConnectionForm, Triple, TotalSpace],
            summary: "round 2-sphere with the u(1) monopole connection",
        },
        FixtureDescriptor {
            name: "su2_bundle_sphere2",
            parameters: vec![],
            provides: vec![Metric, ConnectionForm, Triple, TotalSpace],
            summary: "round 2-sphere with the invariant su(2) connection a(X) = -p x X / 2",
        },
        FixtureDescriptor {
            name: "twisted_sphere2",
            parameters: vec![],
            provides: vec![Metric, CanonicalConnection],
            summary: "round 2-sphere with a metric connection Levi-Civita + w (x) J, w not parallel",
        },
        FixtureDescriptor {
            name: "trivial_bundle_flat",
            parameters: vec![],
            provides: vec![Metric, ConnectionForm, Triple, TotalSpace],
            summary: "flat plane with the trivial bundle; structure algebra given as trivial_bundle_flat(<algebra>), default su(2)",
        },
    ]
}

fn take_params(
    name: &str,
    given: &BTreeMap<String, f64>,
    defaults: &[(&str, f64)],
) -> Result<BTreeMap<String, f64>> {
    for k in given.keys() {
        if !defaults.iter().any(|(d, _)| d == k) {
            return Err(GeomError::BadParameters(format!("`{name}` has no parameter `{k}`")));
        }
    }
    Ok(defaults
        .iter()
        .map(|(k, v)| (k.to_string(), *given.get(*k).unwrap_or(v)))
        .collect())
}

/// Builds a fixture by name. Names may carry an argument in parentheses,
/// e.g. `trivial_bundle_flat(u(1))`.
pub fn instantiate(name: &str, params: &BTreeMap<String, f64>) -> Result<Fixture> {
    let (base, arg) = match name.find('(') {
        Some(i) if name.ends_with(')') => (&name[..i], Some(&name[i + 1..name.len() - 1])),
        _ => (name, None),
    };
    if arg.is_some() && base != "trivial_bundle_flat" {
        return Err(GeomError::UnknownFixture(name.to_string()));
    }
    let desc = catalog()
        .into_iter()
        .find(|d| d.name == base)
        .ok_or_else(|| GeomError::UnknownFixture(name.to_string()))?;
    let p = take_params(base, params, &desc.parameters)?;
    let mut fx = match base {
        "euclidean" => euclidean(&p)?,
        "flat_torus_chart" => flat_torus()?,
        "round_sphere2" => round_sphere2(p["radius"])?,
        "hyperbolic_plane" => hyperbolic_plane()?,
        "round_sphere3" => berger(1.0, "round_sphere3")?,
        "berger_sphere" => berger(p["lambda"], "berger_sphere")?,
        "su2_canonical" => {
            let mut f = berger(1.0, "su2_canonical")?;
            f.default_section = DefaultSection::CanonicalTorsionCurvature;
            f
        }
        "hopf_monopole" => hopf(p["charge"])?,
        "su2_bundle_sphere2" => su2_bundle_sphere2()?,
        "twisted_sphere2" => twisted_sphere2()?,
        "trivial_bundle_flat" => trivial_bundle(arg.unwrap_or("su(2)"))?,
        _ => return Err(GeomError::UnknownFixture(name.to_string())),
    };
    fx.name = name.to_string();
    fx.params = p;
    fx.provides = desc.provides.into_iter().collect();
    Ok(fx)
}

fn bare(name: &str, chart: Chart, metric: MetricField, expect: Expectations) -> Fixture {
    Fixture {
        name: name.to_string(),
        params: BTreeMap::new(),
        provides: BTreeSet::new(),
        chart,
        metric,
        canonical: None,
        fiber: None,
        form: None,
        parallel_alpha: None,
        bump_alpha: None,
        canonical_parallel_form: None,
        default_section: DefaultSection::MetricCurvature,
        expect,
    }
}

fn flat_expect(n: usize) -> Expectations {
    Expectations {
        homogeneous: true,
        locally_symmetric: true,
        sectional_curvature: Some(0.0),
        stabilizer_dim0: Some(n * (n - 1) / 2),
        singer_k: Some(0),
    }
}

fn euclidean(p: &BTreeMap<String, f64>) -> Result<Fixture> {
    let nf = p["n"];
    if nf.fract() != 0.0 || !(1.0..=6.0).contains(&nf) {
        return Err(GeomError::BadParameters(format!("n must be an integer in 1..=6, got {nf}")));
    }
    let n = nf as usize;
    let chart = Chart::cube(n, -1.0, 1.0, 0.1)?;
    Ok(bare("euclidean", chart, MetricField::euclidean(n), flat_expect(n)))
}

fn zero_alpha(n: usize, m: usize) -> TensorFieldSpec {
    TensorFieldSpec::zero(vec![Axis::Co, Axis::Lie], vec![n, m], n)
}

/// Smooth, far-from-parallel adjoint 1-form: a Gaussian bump in the first
/// coordinate direction along the first algebra axis.
fn bump(center: Vec<f64>, width: f64, amplitude: f64, m: usize) -> TensorFieldSpec {
    let n = center.len();
    TensorFieldSpec::new(vec![Axis::Co, Axis::Lie], vec![n, m], move |x| {
        let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut t = DenseTensor::zeros(vec![Axis::Co, Axis::Lie], vec![n, m]);
        t.set(&[0, 0], amplitude * (-r2 / (width * width)).exp());
        Ok(t)
    })
}

fn with_flat_bundle(mut fx: Fixture, algebra: LieAlgebra) -> Result<Fixture> {
    let n = fx.dim();
    let m = algebra.dim();
    fx.form = Some(LocalConnectionForm::zero(&algebra, n));
    fx.parallel_alpha = Some(zero_alpha(n, m));
    fx.bump_alpha = Some(bump(vec![0.0; n], 0.5, 0.5, m));
    fx.fiber = Some(Fiber::new(algebra)?);
    Ok(fx)
}

fn flat_torus() -> Result<Fixture> {
    let chart = Chart::cube(2, 0.0, 2.0 * PI, 0.2)?;
    let fx = bare("flat_torus_chart", chart, MetricField::euclidean(2), flat_expect(2));
    let mut fx = with_flat_bundle(fx, LieAlgebra::u1())?;
    fx.expect.stabilizer_dim0 = Some(2);
    fx.bump_alpha = Some(bump(vec![PI, PI], 1.0, 0.5, 1));
    Ok(fx)
}

fn trivial_bundle(alg: &str) -> Result<Fixture> {
    let algebra = LieAlgebra::by_name(alg).map_err(|_| GeomError::BadParameters(format!("unknown algebra `{alg}`")))?;
    let chart = Chart::cube(2, -1.0, 1.0, 0.1)?;
    let fx = bare("trivial_bundle_flat", chart, MetricField::euclidean(2), flat_expect(2));
    let mut fx = with_flat_bundle(fx, algebra.clone())?;
    fx.expect.stabilizer_dim0 = Some(1 + algebra.dim());
    // constant 1-forms along central directions are parallel for the flat connection
    let center = algebra.center();
    if center.ncols() > 0 {
        let z: Vec<f64> = center.column(0).iter().cloned().collect();
        let m = algebra.dim();
        let mut t = DenseTensor::zeros(vec![Axis::Co, Axis::Lie], vec![2, m]);
        for k in 0..m {
            t.set(&[0, k], 0.3 * z[k]);
        }
        fx.parallel_alpha = Some(TensorFieldSpec::constant(t, 2));
    }
    Ok(fx)
}

fn sphere_metric(radius: f64) -> MetricField {
    let r2 = radius * radius;
    MetricField::new(2, move |x| DMatrix::from_row_slice(2, 2, &[r2, 0.0, 0.0, r2 * x[0].sin().powi(2)]))
        .with_derivative(move |x| {
            let s2 = (2.0 * x[0]).sin();
            vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, r2 * s2]),
                DMatrix::zeros(2, 2),
            ]
        })
}

fn sphere_chart() -> Result<Chart> {
    Chart::new(vec![0.2, -PI], vec![PI - 0.2, PI], 0.3)
}

fn round_sphere2(radius: f64) -> Result<Fixture> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeomError::BadParameters(format!("radius must be positive, got {radius}")));
    }
    let k = 1.0 / (radius * radius);
    Ok(bare(
        "round_sphere2",
        sphere_chart()?,
        sphere_metric(radius),
        Expectations {
            homogeneous: true,
            locally_symmetric: true,
            sectional_curvature: Some(k),
            stabilizer_dim0: Some(1),
            singer_k: Some(0),
        },
    ))
}

fn hyperbolic_plane() -> Result<Fixture> {
    let chart = Chart::new(vec![-1.0, 0.5], vec![1.0, 2.0], 0.1)?;
    let metric = MetricField::new(2, |x| DMatrix::identity(2, 2) / (x[1] * x[1]))
        .with_derivative(|x| vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2) * (-2.0 / x[1].powi(3))]);
    Ok(bare(
        "hyperbolic_plane",
        chart,
        metric,
        Expectations {
            homogeneous: true,
            locally_symmetric: true,
            sectional_curvature: Some(-1.0),
            stabilizer_dim0: Some(1),
            singer_k: Some(0),
        },
    ))
}

/// Left-invariant coframe of SU(2) in Euler angles `g = e^{φe3} e^{θe2} e^{ψe3}`
/// (`e_k = −iσ_k`), coordinates `(θ, φ, ψ)`: row `k` holds `ω^k`.
pub fn su2_coframe(x: &[f64]) -> DMatrix<f64> {
    let (s2t, c2t) = (2.0 * x[0]).sin_cos();
    let (s2p, c2p) = (2.0 * x[2]).sin_cos();
    DMatrix::from_row_slice(3, 3, &[s2p, -s2t * c2p, 0.0, c2p, s2t * s2p, 0.0, 0.0, c2t, 1.0])
}

fn su2_coframe_partials(x: &[f64]) -> [DMatrix<f64>; 3] {
    let (s2t, c2t) = (2.0 * x[0]).sin_cos();
    let (s2p, c2p) = (2.0 * x[2]).sin_cos();
    [
        DMatrix::from_row_slice(3, 3, &[0.0, -2.0 * c2t * c2p, 0.0, 0.0, 2.0 * c2t * s2p, 0.0, 0.0, -2.0 * s2t, 0.0]),
        DMatrix::zeros(3, 3),
        DMatrix::from_row_slice(
            3,
            3,
            &[2.0 * c2p, 2.0 * s2t * s2p, 0.0, -2.0 * s2p, 2.0 * s2t * c2p, 0.0, 0.0, 0.0, 0.0],
        ),
    ]
}

/// Euler chart away from `sin 2θ = 0`.
pub fn su2_chart() -> Result<Chart> {
    Chart::new(vec![0.15, -FRAC_PI_2, -FRAC_PI_2], vec![FRAC_PI_2 - 0.15, FRAC_PI_2, FRAC_PI_2], 0.2)
}

fn berger(lambda: f64, name: &str) -> Result<Fixture> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(GeomError::BadParameters(format!("lambda must be positive, got {lambda}")));
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![lambda * lambda, 1.0, 1.0]));
    let d2 = d.clone();
    let metric = MetricField::new(3, move |x| {
        let w = su2_coframe(x);
        w.transpose() * &d * w
    })
    .with_derivative(move |x| {
        let w = su2_coframe(x);
        su2_coframe_partials(x)
            .iter()
            .map(|dw| dw.transpose() * &d2 * &w + w.transpose() * &d2 * dw)
            .collect()
    });
    let chart = su2_chart()?;
    let canonical = su2_canonical_connection();
    let round = (lambda - 1.0).abs() < 1e-15;
    let mut fx = bare(
        name,
        chart,
        metric,
        Expectations {
            homogeneous: true,
            locally_symmetric: round,
            sectional_curvature: if round { Some(1.0) } else { None },
            stabilizer_dim0: Some(if round { 3 } else { 1 }),
            singer_k: Some(0),
        },
    );
    fx.canonical = Some(canonical);
    fx.canonical_parallel_form = Some((LieAlgebra::su2(), su2_maurer_cartan()));
    if round {
        fx.default_section = DefaultSection::CanonicalTorsionCurvature;
    }
    Ok(fx)
}

/// The Maurer–Cartan form `g⁻¹dg` as an su(2)-valued 1-form: `α_μ = Σ_k ω^k_μ e_k`.
pub fn su2_maurer_cartan() -> TensorFieldSpec {
    let axes = vec![Axis::Co, Axis::Lie];
    TensorFieldSpec::new(axes.clone(), vec![3, 3], move |x| {
        DenseTensor::from_vec(axes.clone(), vec![3, 3], su2_coframe(x).data.as_vec().clone())
    })
    .with_derivative(|x| {
        let data = su2_coframe_partials(x).iter().flat_map(|d| d.data.as_vec().clone()).collect();
        DenseTensor::from_vec(vec![Axis::Co, Axis::Co, Axis::Lie], vec![3, 3, 3], data)
    })
}

/// The flat connection making the left-invariant frame parallel:
/// `Γ_i = −∂_iE·E⁻¹ = Ω⁻¹ ∂_iΩ` for the coframe `Ω = E⁻¹`.
pub fn su2_canonical_connection() -> ConnectionCoeffs {
    let field = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![3; 3], |x| {
        let inv = su2_frame(x)?;
        let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![3; 3]);
        for (i, dw) in su2_coframe_partials(x).iter().enumerate() {
            let gi = &inv * dw;
            for k in 0..3 {
                for j in 0..3 {
                    t.set(&[k, i, j], gi[(k, j)]);
                }
            }
        }
        Ok(t)
    });
    ConnectionCoeffs::from_field(field, false).expect("well-formed coefficient field")
}

/// Moving frame of left-invariant fields `E_k` (columns) on the Euler chart.
pub fn su2_frame(x: &[f64]) -> Result<DMatrix<f64>> {
    su2_coframe(x)
        .try_inverse()
        .ok_or_else(|| GeomError::SingularFrame(x.to_vec()))
}

fn hopf(charge: f64) -> Result<Fixture> {
    if !charge.is_finite() {
        return Err(GeomError::BadParameters("charge must be finite".into()));
    }
    let u1 = LieAlgebra::u1();
    let mut fx = bare(
        "hopf_monopole",
        sphere_chart()?,
        sphere_metric(1.0),
        Expectations {
            homogeneous: true,
            locally_symmetric: true,
            sectional_curvature: Some(1.0),
            stabilizer_dim0: Some(2),
            singer_k: Some(0),
        },
    );
    let form_field = TensorFieldSpec::new(vec![Axis::Co, Axis::Lie], vec![2, 1], move |x| {
        DenseTensor::from_vec(vec![Axis::Co, Axis::Lie], vec![2, 1], vec![0.0, 0.5 * charge * (1.0 - x[0].cos())])
    })
    .with_derivative(move |x| {
        DenseTensor::from_vec(
            vec![Axis::Co, Axis::Co, Axis::Lie],
            vec![2, 2, 1],
            vec![0.0, 0.5 * charge * x[0].sin(), 0.0, 0.0],
        )
    });
    fx.form = Some(LocalConnectionForm::new(&u1, form_field)?);
    fx.parallel_alpha = Some(zero_alpha(2, 1));
    fx.bump_alpha = Some(bump(vec![FRAC_PI_2, 0.0], 0.6, 0.5, 1));
    fx.fiber = Some(Fiber::new(u1)?);
    Ok(fx)
}

fn sphere_point(x: &[f64]) -> [Vector3<f64>; 3] {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    [
        Vector3::new(st * cp, st * sp, ct),
        Vector3::new(ct * cp, ct * sp, -st),
        Vector3::new(-st * sp, st * cp, 0.0),
    ]
}

/// Round unit 2-sphere with the `SO(3)`-invariant su(2) connection
/// `a(X) = −½ p × X` (identifying su(2) with ℝ³ via `e_k`), for which
/// `α(X) = X` is a parallel adjoint 1-form.
fn su2_bundle_sphere2() -> Result<Fixture> {
    let su2 = LieAlgebra::su2();
    let mut fx = bare(
        "su2_bundle_sphere2",
        sphere_chart()?,
        sphere_metric(1.0),
        Expectations {
            homogeneous: true,
            locally_symmetric: true,
            sectional_curvature: Some(1.0),
            stabilizer_dim0: Some(2),
            singer_k: Some(0),
        },
    );
    let form = LocalConnectionForm::from_fn(&su2, 2, |x| {
        let [p, pt, pp] = sphere_point(x);
        let a0 = -0.5 * p.cross(&pt);
        let a1 = -0.5 * p.cross(&pp);
        DMatrix::from_row_slice(2, 3, &[a0[0], a0[1], a0[2], a1[0], a1[1], a1[2]])
    });
    fx.form = Some(form);
    fx.parallel_alpha = Some(TensorFieldSpec::new(vec![Axis::Co, Axis::Lie], vec![2, 3], |x| {
        let [_, pt, pp] = sphere_point(x);
        DenseTensor::from_vec(
            vec![Axis::Co, Axis::Lie],
            vec![2, 3],
            vec![0.4 * pt[0], 0.4 * pt[1], 0.4 * pt[2], 0.4 * pp[0], 0.4 * pp[1], 0.4 * pp[2]],
        )
    }));
    fx.bump_alpha = Some(bump(vec![FRAC_PI_2, 0.0], 0.6, 0.5, 3));
    fx.fiber = Some(Fiber::new(su2)?);
    Ok(fx)
}

/// Round unit 2-sphere with the metric connection `∇^g + ω ⊗ J`, `J` the
/// rotation by +90° and `ω = 0.3 cos θ dθ + 0.2 sin θ dφ`.
fn twisted_sphere2() -> Result<Fixture> {
    let mut fx = bare(
        "twisted_sphere2",
        sphere_chart()?,
        sphere_metric(1.0),
        Expectations {
            homogeneous: true,
            locally_symmetric: true,
            sectional_curvature: Some(1.0),
            stabilizer_dim0: Some(1),
            singer_k: Some(0),
        },
    );
    let s = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3], |x| {
        let (st, ct) = x[0].sin_cos();
        let w = [0.3 * ct, 0.2 * st];
        // J ∂θ = ∂φ / sinθ, J ∂φ = −sinθ ∂θ
        let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3]);
        for (mu, wm) in w.iter().enumerate() {
            t.set(&[1, mu, 0], wm / st);
            t.set(&[0, mu, 1], -wm * st);
        }
        Ok(t)
    });
    let lc = fx.levi_civita();
    fx.canonical = Some(lc.add_difference(&s)?);
    Ok(fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_bad_parameters() {
        assert!(matches!(instantiate("klein_bottle", &BTreeMap::new()), Err(GeomError::UnknownFixture(_))));
        let mut p = BTreeMap::new();
        p.insert("radius".to_string(), -1.0);
        assert!(matches!(instantiate("round_sphere2", &p), Err(GeomError::BadParameters(_))));
        let mut p = BTreeMap::new();
        p.insert("lambda".to_string(), 0.0);
        assert!(matches!(instantiate("berger_sphere", &p), Err(GeomError::BadParameters(_))));
        let mut p = BTreeMap::new();
        p.insert("colour".to_string(), 1.0);
        assert!(matches!(instantiate("hopf_monopole", &p), Err(GeomError::BadParameters(_))));
    }

    #[test]
    fn every_catalog_entry_instantiates() {
        for d in catalog() {
            let f = instantiate(d.name, &BTreeMap::new()).unwrap();
            let (lo, hi) = f.chart.interior();
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            f.metric.matrix(&mid).unwrap();
        }
        let f = instantiate("trivial_bundle_flat(u(1))", &BTreeMap::new()).unwrap();
        assert_eq!(f.fiber.unwrap().algebra.dim(), 1);
    }

    #[test]
    fn euler_coframe_determinant() {
        let x = [0.4, 0.3, -0.2];
        assert!((su2_coframe(&x).determinant() - (0.8_f64).sin()).abs() < 1e-14);
    }
}
