//! Removing the stabilizer part of a connection change: given `B0` and a `B′`
//! that makes the tower parallel, `B = B0 + β_𝔨` with `β = B′ − B0` projected
//! onto the complement of `h(x)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::sections::SectionSetup;
use crate::bundle::{Connection, LocalConnectionForm, SectionComponent, SectionSpec};
use crate::chart::{Chart, ConnectionCoeffs, MetricField, TensorFieldSpec};
use crate::error::{GeomError, Result};
use crate::lie::{inner_projector, reductive_complement, AdInvariantInner, FrameAlgebra, LinearRep};
use crate::tensor::{Axis, DenseTensor};

/// `x ↦` orthonormal basis (columns, `so(n) ⊕ 𝔨` coordinates in the Cholesky
/// frame of the metric at `x`) of a subalgebra.
pub type SubalgebraField = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;

/// Relative size of the symmetric part of a frame-expressed `S_μ` tolerated
/// before the change of connection counts as not metric.
const SKEW_TOL: f64 = 1e-6;

/// `x ↦ h(level)` of the setup's tower at `x`.
pub fn stabilizer_field(setup: &SectionSetup, level: usize) -> SubalgebraField {
    let setup = setup.clone();
    Arc::new(move |x| {
        let tower = setup.tower(x, level.max(1))?;
        let chain = super::chain::stabilizer_chain(&tower, &setup.algebra)?;
        Ok(chain.bases[level].clone())
    })
}

/// The projected difference `B − B0 = (S_𝔨, α_𝔨)` as fields.
#[derive(Clone, Debug)]
pub struct AdaptedConnection {
    pub connection: Connection,
    pub s: TensorFieldSpec,
    pub alpha: Option<TensorFieldSpec>,
}

struct Projection {
    s: TensorFieldSpec,
    alpha: Option<TensorFieldSpec>,
    metric: MetricField,
    algebra: FrameAlgebra,
    inner: AdInvariantInner,
    h: SubalgebraField,
}

impl Projection {
    fn eval(&self, x: &[f64]) -> Result<(DenseTensor, Option<DenseTensor>)> {
        let n = self.algebra.base_dim();
        let so = self.algebra.so_dim();
        let m = self.algebra.dim();
        let frame = self.metric.frame(x)?;
        let s = self.s.eval(x)?;
        let alpha = self.alpha.as_ref().map(|a| a.eval(x)).transpose()?;
        let h = (self.h)(x)?;
        reductive_complement(self.algebra.algebra(), &h, &self.inner)
            .map_err(|e| GeomError::NotReductive(e.to_string()))?;
        let keep = DMatrix::identity(m, m) - inner_projector(&h, &self.inner);

        let mut s_out = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]);
        let mut a_out = alpha.as_ref().map(|a| DenseTensor::zeros(a.axes().to_vec(), a.dims().to_vec()));
        for mu in 0..n {
            let s_mu = DMatrix::from_fn(n, n, |k, j| s.get(&[k, mu, j]));
            let hat = &frame.coframe * &s_mu * &frame.frame;
            let sym = (&hat + hat.transpose()).amax() / 2.0;
            if sym > SKEW_TOL * hat.amax().max(1.0) {
                return Err(GeomError::NotMetric(sym));
            }
            let mut beta = DVector::zeros(m);
            for (c, v) in self.algebra.so_coords(&hat).into_iter().enumerate() {
                beta[c] = v;
            }
            if let Some(a) = &alpha {
                for c in so..m {
                    beta[c] = a.get(&[mu, c - so]);
                }
            }
            let beta = &keep * beta;
            let rot = self.algebra.rotation_part(beta.as_slice());
            let back = &frame.frame * rot * &frame.coframe;
            for k in 0..n {
                for j in 0..n {
                    s_out.set(&[k, mu, j], back[(k, j)]);
                }
            }
            if let Some(a) = a_out.as_mut() {
                for c in so..m {
                    a.set(&[mu, c - so], beta[c]);
                }
            }
        }
        Ok((s_out, a_out))
    }
}

/// `B = B0 + (B′ − B0)_𝔨`, the `𝔨`-part taken pointwise against `h(x)` with
/// the invariant inner product on `so(n) ⊕ 𝔨`.
///
/// Evaluating the result fails with `NotMetric` where `Γ′ − Γ0` is not
/// skew in an orthonormal frame, and with `NotReductive` where `h(x)` is not a
/// subalgebra with invariant complement.
pub fn adapted_connection(
    b0: &Connection,
    b_prime: &Connection,
    metric: &MetricField,
    algebra: &FrameAlgebra,
    inner: &AdInvariantInner,
    h: SubalgebraField,
) -> Result<AdaptedConnection> {
    let n = metric.dim();
    if b0.gamma.dim() != n || b_prime.gamma.dim() != n || algebra.base_dim() != n {
        return Err(GeomError::AxisMismatch("connections, metric and algebra disagree on dimension".into()));
    }
    let s = b_prime.gamma.difference(&b0.gamma)?;
    let alpha = match (&b0.form, &b_prime.form) {
        (Some(a0), Some(ap)) => {
            if a0.algebra() != algebra.fiber() {
                return Err(GeomError::RepMismatch("form algebra differs from the fiber algebra".into()));
            }
            Some(ap.difference(a0)?)
        }
        (None, None) => None,
        _ => return Err(GeomError::RepMismatch("only one connection carries a form".into())),
    };
    let proj = Arc::new(Projection {
        s,
        alpha: alpha.clone(),
        metric: metric.clone(),
        algebra: algebra.clone(),
        inner: inner.clone(),
        h,
    });
    let p = proj.clone();
    let s_k = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], move |x| Ok(p.eval(x)?.0));
    let alpha_k = alpha.map(|a| {
        let p = proj.clone();
        TensorFieldSpec::new(a.axes().to_vec(), a.dims().to_vec(), move |x| {
            Ok(p.eval(x)?.1.expect("form present"))
        })
    });
    let gamma = ConnectionCoeffs::from_field(b0.gamma.field().add(&s_k)?, false)?;
    let form = match (&b0.form, &alpha_k) {
        (Some(a0), Some(ak)) => Some(LocalConnectionForm::new(a0.algebra(), a0.field().add(ak)?)?),
        _ => None,
    };
    Ok(AdaptedConnection {
        connection: Connection::new(gamma, form),
        s: s_k,
        alpha: alpha_k,
    })
}

/// Frame norms of `∇^B(B − B0)` and of `∇^B σ^(k)` for `k ≤ depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedResiduals {
    pub difference: f64,
    pub levels: Vec<f64>,
}

impl AdaptedResiduals {
    pub fn max(&self) -> f64 {
        self.levels.iter().cloned().fold(self.difference, f64::max)
    }
}

/// Checks the two parallelism contracts of an adapted connection at `x`.
pub fn adapted_residuals(
    adapted: &AdaptedConnection,
    levels: &[SectionSpec],
    metric: &MetricField,
    chart: &Chart,
    x: &[f64],
) -> Result<AdaptedResiduals> {
    chart.check_interior(x)?;
    let frame = metric.frame(x)?;
    let b = &adapted.connection;
    let frame_norm = |comp: &SectionComponent| -> Result<f64> {
        Ok(b.derivative(comp, chart)?.field.eval(x)?.to_frame(&frame)?.norm())
    };
    let mut difference = frame_norm(&SectionComponent::tangent("S", adapted.s.clone()))?.powi(2);
    if let (Some(alpha), Some(form)) = (&adapted.alpha, &b.form) {
        let comp = SectionComponent::with_rep("alpha", alpha.clone(), LinearRep::adjoint(form.algebra()));
        difference += frame_norm(&comp)?.powi(2);
    }
    let levels = levels
        .iter()
        .map(|level| {
            let mut sq = 0.0;
            for comp in &level.components {
                sq += frame_norm(comp)?.powi(2);
            }
            Ok(sq.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdaptedResiduals {
        difference: difference.sqrt(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fixtures::instantiate;
    use crate::homogeneity::tower_fields;

    fn berger_setup(lambda: f64) -> (crate::fixtures::Fixture, SectionSetup) {
        let mut p = BTreeMap::new();
        p.insert("lambda".to_string(), lambda);
        let fx = instantiate("berger_sphere", &p).unwrap();
        let s = SectionSetup::for_fixture(&fx).unwrap();
        (fx, s)
    }

    #[test]
    fn equal_connections_are_kept() {
        let (fx, s) = berger_setup(2.0);
        let b = adapted_connection(&s.b0, &s.b0, &s.metric, &s.algebra, &s.inner, stabilizer_field(&s, 1)).unwrap();
        for x in fx.chart.sample_interior(3, 1) {
            assert_eq!(b.s.eval(&x).unwrap().max_abs(), 0.0);
            assert_eq!(b.connection.gamma.value(&x).unwrap(), s.b0.gamma.value(&x).unwrap());
        }
    }

    #[test]
    fn differences_inside_the_stabilizer_are_removed() {
        // on the round S² the stabilizer is all of so(2), so any metric change is projected away
        let sphere = instantiate("round_sphere2", &BTreeMap::new()).unwrap();
        let twisted = instantiate("twisted_sphere2", &BTreeMap::new()).unwrap();
        let s = SectionSetup::for_fixture(&sphere).unwrap();
        let b_prime = Connection::linear(twisted.canonical.clone().unwrap());
        let b = adapted_connection(&s.b0, &b_prime, &s.metric, &s.algebra, &s.inner, stabilizer_field(&s, 1)).unwrap();
        for x in sphere.chart.sample_interior(3, 2) {
            assert!(b.s.eval(&x).unwrap().max_abs() < 1e-10);
            let raw = b_prime.gamma.difference(&s.b0.gamma).unwrap().eval(&x).unwrap();
            assert!(raw.max_abs() > 1e-2);
        }
    }

    #[test]
    fn berger_contracts_hold() {
        for lambda in [2.0, 0.7] {
            let (fx, s) = berger_setup(lambda);
            let b_prime = Connection::linear(fx.canonical.clone().unwrap());
            let b = adapted_connection(&s.b0, &b_prime, &s.metric, &s.algebra, &s.inner, stabilizer_field(&s, 1)).unwrap();
            let levels = tower_fields(&s.sigma, &s.b0, &s.chart, 1).unwrap();
            for x in fx.chart.sample_interior(3, 4) {
                let r = adapted_residuals(&b, &levels, &s.metric, &s.chart, &x).unwrap();
                assert!(r.max() < 1e-5, "lambda {lambda}: {r:?}");
            }
        }
    }

    #[test]
    fn non_metric_change_is_rejected() {
        let (fx, s) = berger_setup(2.0);
        // a symmetric change Γ' = Γ0 + δ^k_i δ_j0-type term is not metric
        let n = 3;
        let bump = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], |_| {
            let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![3; 3]);
            t.set(&[0, 0, 0], 0.5);
            Ok(t)
        });
        let b_prime = Connection::linear(s.b0.gamma.add_difference(&bump).unwrap());
        let b = adapted_connection(&s.b0, &b_prime, &s.metric, &s.algebra, &s.inner, stabilizer_field(&s, 1)).unwrap();
        let x = &fx.chart.sample_interior(1, 4)[0];
        assert!(matches!(b.s.eval(x), Err(GeomError::NotMetric(_))));
    }

    #[test]
    fn non_subalgebra_is_not_reductive() {
        let (fx, s) = berger_setup(2.0);
        let b_prime = Connection::linear(fx.canonical.clone().unwrap());
        // two rotation generators of so(3) do not close under the bracket
        let h: SubalgebraField = Arc::new(|_| Ok(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])));
        let b = adapted_connection(&s.b0, &b_prime, &s.metric, &s.algebra, &s.inner, h).unwrap();
        let x = &fx.chart.sample_interior(1, 4)[0];
        assert!(matches!(b.s.eval(x), Err(GeomError::NotReductive(_))));
    }
}
