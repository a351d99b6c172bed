//! Ready-made section tuples `σ` and the per-point Singer analysis.

use crate::bundle::{curvature_form_field, Connection, LocalConnectionForm, SectionComponent, SectionSpec};
use crate::chart::{curvature_field, torsion_field, Chart, ConnectionCoeffs, MetricField, TensorFieldSpec};
use crate::error::Result;
use crate::fixtures::{DefaultSection, Fixture};
use crate::lie::{AdInvariantInner, FrameAlgebra, LieAlgebra, LinearRep};

use super::chain::{stabilizer_chain, StabilizerChain};
use super::tower::{build_tower, nested_chart, DerivativeTower};

/// Deepest tower the default depth policy will build.
pub const MAX_DEFAULT_KMAX: usize = 4;

/// `σ = (R^g)` plus `F^{a0}` in the adjoint representation when a form is given.
pub fn metric_curvature_section(metric: &MetricField, form: Option<&LocalConnectionForm>, chart: &Chart) -> SectionSpec {
    let lc = ConnectionCoeffs::levi_civita(metric, chart);
    let mut comps = vec![SectionComponent::tangent("R", curvature_field(&lc, chart))];
    if let Some(a) = form {
        comps.push(SectionComponent::with_rep(
            "F",
            curvature_form_field(a, chart),
            LinearRep::adjoint(a.algebra()),
        ));
    }
    SectionSpec::new(comps)
}

/// `σ = (T^∇, R^∇)` of a linear connection, to be differentiated with `∇` itself.
pub fn torsion_curvature_section(gamma: &ConnectionCoeffs, chart: &Chart) -> SectionSpec {
    SectionSpec::new(vec![
        SectionComponent::tangent("T", torsion_field(gamma)),
        SectionComponent::tangent("R", curvature_field(gamma, chart)),
    ])
}

/// `σ = (P_1, …, P_k)` for a family of tangent tensor fields.
pub fn parallel_tensors_section(tensors: Vec<(String, TensorFieldSpec)>) -> SectionSpec {
    SectionSpec::new(
        tensors
            .into_iter()
            .map(|(name, field)| SectionComponent::tangent(&name, field))
            .collect(),
    )
}

/// Everything needed to build towers and chains on a fixture.
#[derive(Clone, Debug)]
pub struct SectionSetup {
    pub sigma: SectionSpec,
    pub b0: Connection,
    pub metric: MetricField,
    /// Chart with the nested step policy.
    pub chart: Chart,
    pub algebra: FrameAlgebra,
    /// Invariant inner product on `so(n) ⊕ 𝔨`.
    pub inner: AdInvariantInner,
}

impl SectionSetup {
    pub fn new(
        sigma: SectionSpec,
        b0: Connection,
        metric: MetricField,
        chart: Chart,
        fiber: &LieAlgebra,
        fiber_inner: &AdInvariantInner,
    ) -> Result<Self> {
        let algebra = FrameAlgebra::new(metric.dim(), fiber);
        let inner = algebra.inner(fiber_inner)?;
        Ok(Self {
            sigma,
            b0,
            metric,
            chart,
            algebra,
            inner,
        })
    }

    /// The fixture's default `σ` with the connection it is differentiated by.
    pub fn for_fixture(fx: &Fixture) -> Result<Self> {
        let chart = nested_chart(&fx.chart);
        let (fiber, fiber_inner) = match &fx.fiber {
            Some(f) => (f.algebra.clone(), f.inner.clone()),
            None => {
                let t = LieAlgebra::trivial();
                let ip = AdInvariantInner::default_for(&t)?;
                (t, ip)
            }
        };
        let (sigma, b0) = match (fx.default_section, &fx.canonical) {
            (DefaultSection::CanonicalTorsionCurvature, Some(gamma)) => {
                let mut sigma = torsion_curvature_section(gamma, &chart);
                if let Some(a) = &fx.form {
                    sigma.components.push(SectionComponent::with_rep(
                        "F",
                        curvature_form_field(a, &chart),
                        LinearRep::adjoint(a.algebra()),
                    ));
                }
                (sigma, Connection::new(gamma.clone(), fx.form.clone()))
            }
            _ => (
                metric_curvature_section(&fx.metric, fx.form.as_ref(), &chart),
                Connection::new(ConnectionCoeffs::levi_civita(&fx.metric, &chart), fx.form.clone()),
            ),
        };
        Self::new(sigma, b0, fx.metric.clone(), chart, &fiber, &fiber_inner)
    }

    pub fn tower(&self, x: &[f64], kmax: usize) -> Result<DerivativeTower> {
        build_tower(&self.sigma, &self.b0, &self.metric, &self.chart, x, kmax)
    }

    /// Tower and chain at `x`. With `kmax = None` the depth grows from 2 until
    /// it reaches `singer_k + 2` or [`MAX_DEFAULT_KMAX`].
    pub fn analyze(&self, x: &[f64], kmax: Option<usize>) -> Result<(DerivativeTower, StabilizerChain)> {
        if let Some(k) = kmax {
            let tower = self.tower(x, k)?;
            let chain = stabilizer_chain(&tower, &self.algebra)?;
            return Ok((tower, chain));
        }
        let mut k = 2;
        loop {
            let tower = self.tower(x, k)?;
            let chain = stabilizer_chain(&tower, &self.algebra)?;
            let wanted = chain.singer_k.map_or(MAX_DEFAULT_KMAX, |s| (s + 2).min(MAX_DEFAULT_KMAX));
            if wanted <= k {
                return Ok((tower, chain));
            }
            k = wanted;
        }
    }
}
