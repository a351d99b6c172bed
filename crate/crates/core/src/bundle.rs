//! Principal connections in a local trivialization and the covariant
//! derivatives they induce on associated tensor bundles.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{
    assemble_covariant, covariant_field, covariant_unchecked, partials, Chart, ConnectionCoeffs, LieMatrices,
    TensorFieldSpec,
};
use crate::error::{GeomError, Result};
use crate::lie::{LieAlgebra, LinearRep};
use crate::tensor::{Axis, DenseTensor};

/// Lie-algebra valued 1-form `a_μ(x)`, stored as a `[Co, Lie]` field.
#[derive(Clone, Debug)]
pub struct LocalConnectionForm {
    algebra: LieAlgebra,
    field: TensorFieldSpec,
}

impl LocalConnectionForm {
    pub fn new(algebra: &LieAlgebra, field: TensorFieldSpec) -> Result<Self> {
        if field.axes() != [Axis::Co, Axis::Lie] || field.dims()[1] != algebra.dim() {
            return Err(GeomError::AxisMismatch(format!(
                "connection form must be [Co, Lie] with Lie dim {}",
                algebra.dim()
            )));
        }
        Ok(Self {
            algebra: algebra.clone(),
            field,
        })
    }

    /// From a closure returning the `n × m` matrix whose row `μ` is `a_μ`.
    pub fn from_fn<F>(algebra: &LieAlgebra, n: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let m = algebra.dim();
        let field = TensorFieldSpec::new(vec![Axis::Co, Axis::Lie], vec![n, m], move |x| {
            Ok(DenseTensor::from_matrix(Axis::Co, Axis::Lie, &f(x)))
        });
        Self {
            algebra: algebra.clone(),
            field,
        }
    }

    pub fn zero(algebra: &LieAlgebra, n: usize) -> Self {
        let m = algebra.dim();
        Self {
            algebra: algebra.clone(),
            field: TensorFieldSpec::zero(vec![Axis::Co, Axis::Lie], vec![n, m], n),
        }
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn base_dim(&self) -> usize {
        self.field.dims()[0]
    }

    pub fn field(&self) -> &TensorFieldSpec {
        &self.field
    }

    pub fn value(&self, x: &[f64]) -> Result<DenseTensor> {
        self.field.eval(x)
    }

    /// `a_μ` as algebra coordinates.
    pub fn component(&self, x: &[f64], mu: usize) -> Result<DVector<f64>> {
        Ok(DVector::from_column_slice(self.value(x)?.leading_slice(mu).data()))
    }

    /// `a + α`.
    pub fn shifted(&self, alpha: &TensorFieldSpec) -> Result<Self> {
        Ok(Self {
            algebra: self.algebra.clone(),
            field: self.field.add(alpha)?,
        })
    }

    /// `self − other` as an adjoint-valued 1-form.
    pub fn difference(&self, other: &LocalConnectionForm) -> Result<TensorFieldSpec> {
        if self.algebra != other.algebra {
            return Err(GeomError::RepMismatch("connection forms over different algebras".into()));
        }
        self.field.sub(&other.field)
    }

    /// `x ↦ [ρ(a_μ(x))]_μ`.
    pub fn lie_matrices(&self, rep: &LinearRep) -> Result<LieMatrices> {
        if rep.generators().len() != self.algebra.dim() {
            return Err(GeomError::RepMismatch(format!(
                "representation of {} generators for an algebra of dim {}",
                rep.generators().len(),
                self.algebra.dim()
            )));
        }
        let (field, rep) = (self.field.clone(), rep.clone());
        Ok(Arc::new(move |x| {
            let a = field.eval(x)?;
            Ok((0..a.dims()[0]).map(|mu| rep.act(a.leading_slice(mu).data())).collect())
        }))
    }
}

/// One component of a section tuple, with the representation acting on its Lie axes.
#[derive(Clone, Debug)]
pub struct SectionComponent {
    pub name: String,
    pub field: TensorFieldSpec,
    pub rep: Option<LinearRep>,
}

impl SectionComponent {
    pub fn tangent(name: &str, field: TensorFieldSpec) -> Self {
        Self {
            name: name.to_string(),
            field,
            rep: None,
        }
    }

    pub fn with_rep(name: &str, field: TensorFieldSpec, rep: LinearRep) -> Self {
        Self {
            name: name.to_string(),
            field,
            rep: Some(rep),
        }
    }
}

/// A tuple of tensor fields `σ = (σ_1, …, σ_r)`.
#[derive(Clone, Debug, Default)]
pub struct SectionSpec {
    pub components: Vec<SectionComponent>,
}

impl SectionSpec {
    pub fn new(components: Vec<SectionComponent>) -> Self {
        Self { components }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<DenseTensor>> {
        self.components.iter().map(|c| c.field.eval(x)).collect()
    }
}

/// A connection on `TM ⊗ (associated bundle)`: linear coefficients `Γ` on the
/// tangent axes and an optional principal connection form on the Lie axes.
#[derive(Clone, Debug)]
pub struct Connection {
    pub gamma: ConnectionCoeffs,
    pub form: Option<LocalConnectionForm>,
}

impl Connection {
    pub fn new(gamma: ConnectionCoeffs, form: Option<LocalConnectionForm>) -> Self {
        Self { gamma, form }
    }

    pub fn linear(gamma: ConnectionCoeffs) -> Self {
        Self { gamma, form: None }
    }

    fn lie_for(&self, comp: &SectionComponent) -> Result<Option<LieMatrices>> {
        if !comp.field.axes().contains(&Axis::Lie) {
            return Ok(None);
        }
        let rep = comp
            .rep
            .as_ref()
            .ok_or_else(|| GeomError::RepMismatch(format!("component `{}` has Lie axes but no representation", comp.name)))?;
        let form = self
            .form
            .as_ref()
            .ok_or_else(|| GeomError::RepMismatch("Lie axes need a connection form".into()))?;
        form.lie_matrices(rep).map(Some)
    }

    /// `∇` of one component as a field (leading covariant axis added).
    pub fn derivative(&self, comp: &SectionComponent, chart: &Chart) -> Result<SectionComponent> {
        let lie = self.lie_for(comp)?;
        Ok(SectionComponent {
            name: format!("D{}", comp.name),
            field: covariant_field(&self.gamma, lie, chart, &comp.field),
            rep: comp.rep.clone(),
        })
    }

    /// `∇` of every component of `s`.
    pub fn derivative_section(&self, s: &SectionSpec, chart: &Chart) -> Result<SectionSpec> {
        Ok(SectionSpec::new(
            s.components
                .iter()
                .map(|c| self.derivative(c, chart))
                .collect::<Result<_>>()?,
        ))
    }

    pub(crate) fn derivative_at(&self, comp: &SectionComponent, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
        let lie = self.lie_for(comp)?;
        covariant_unchecked(&self.gamma, lie.as_ref(), chart, &comp.field, x)
    }
}

/// `(∇s)_μ = ∂_μ s + Γ-corrections + ρ(a_μ)·s` for every component.
pub fn assoc_covariant_derivative(
    conn: &Connection,
    s: &SectionSpec,
    chart: &Chart,
    x: &[f64],
) -> Result<Vec<DenseTensor>> {
    chart.check_interior(x)?;
    s.components.iter().map(|c| conn.derivative_at(c, chart, x)).collect()
}

fn curvature_form_unchecked(a: &LocalConnectionForm, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    let n = a.base_dim();
    let m = a.algebra.dim();
    let av = a.value(x)?;
    let da = partials(a.field(), chart, x)?; // da[μ][ν][k] = ∂_μ a_ν^k
    let mut f = DenseTensor::zeros(vec![Axis::Co, Axis::Co, Axis::Lie], vec![n, n, m]);
    let rows: Vec<DVector<f64>> = (0..n)
        .map(|mu| DVector::from_column_slice(av.leading_slice(mu).data()))
        .collect();
    for mu in 0..n {
        for nu in 0..n {
            let br = a.algebra.bracket(&rows[mu], &rows[nu]);
            for k in 0..m {
                f.set(&[mu, nu, k], da.get(&[mu, nu, k]) - da.get(&[nu, mu, k]) + br[k]);
            }
        }
    }
    Ok(f)
}

/// `F_{μν} = ∂_μ a_ν − ∂_ν a_μ + [a_μ, a_ν]`, axes `[Co, Co, Lie]`.
pub fn curvature_form(a: &LocalConnectionForm, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    curvature_form_unchecked(a, chart, x)
}

pub fn curvature_form_field(a: &LocalConnectionForm, chart: &Chart) -> TensorFieldSpec {
    let n = a.base_dim();
    let m = a.algebra.dim();
    let (a, chart) = (a.clone(), chart.clone());
    TensorFieldSpec::new(vec![Axis::Co, Axis::Co, Axis::Lie], vec![n, n, m], move |x| {
        curvature_form_unchecked(&a, &chart, x)
    })
}

fn check_adjoint_one_form(alpha: &TensorFieldSpec, a: &LocalConnectionForm) -> Result<()> {
    if alpha.axes() != [Axis::Co, Axis::Lie] || alpha.dims() != a.field().dims() {
        return Err(GeomError::AxisMismatch("expected an adjoint-valued 1-form".into()));
    }
    Ok(())
}

/// `(d^a α)_{μν} = ∂_μ α_ν − ∂_ν α_μ + [a_μ, α_ν] − [a_ν, α_μ]` (coordinate
/// vector fields commute).
pub fn exterior_cov_derivative(
    a: &LocalConnectionForm,
    alpha: &TensorFieldSpec,
    chart: &Chart,
    x: &[f64],
) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    check_adjoint_one_form(alpha, a)?;
    let n = a.base_dim();
    let m = a.algebra.dim();
    let av = a.value(x)?;
    let al = alpha.eval(x)?;
    let d = partials(alpha, chart, x)?;
    let row = |t: &DenseTensor, mu: usize| DVector::from_column_slice(t.leading_slice(mu).data());
    let mut out = DenseTensor::zeros(vec![Axis::Co, Axis::Co, Axis::Lie], vec![n, n, m]);
    for mu in 0..n {
        for nu in 0..n {
            let br = a.algebra.bracket(&row(&av, mu), &row(&al, nu)) - a.algebra.bracket(&row(&av, nu), &row(&al, mu));
            for k in 0..m {
                out.set(&[mu, nu, k], d.get(&[mu, nu, k]) - d.get(&[nu, mu, k]) + br[k]);
            }
        }
    }
    Ok(out)
}

/// `[α ∧ α]/2` in components: `[α_μ, α_ν]`.
fn wedge_bracket(alg: &LieAlgebra, alpha: &DenseTensor) -> DenseTensor {
    let n = alpha.dims()[0];
    let m = alg.dim();
    let mut out = DenseTensor::zeros(vec![Axis::Co, Axis::Co, Axis::Lie], vec![n, n, m]);
    for mu in 0..n {
        for nu in 0..n {
            let br = alg.bracket(
                &DVector::from_column_slice(alpha.leading_slice(mu).data()),
                &DVector::from_column_slice(alpha.leading_slice(nu).data()),
            );
            for k in 0..m {
                out.set(&[mu, nu, k], br[k]);
            }
        }
    }
    out
}

/// Norm of `F^{a+α} − (F^a + d^a α + ½[α∧α])`.
pub fn curvature_variation_check(
    a: &LocalConnectionForm,
    alpha: &TensorFieldSpec,
    chart: &Chart,
    x: &[f64],
) -> Result<f64> {
    chart.check_interior(x)?;
    check_adjoint_one_form(alpha, a)?;
    let shifted = a.shifted(alpha)?;
    let lhs = curvature_form_unchecked(&shifted, chart, x)?;
    let mut rhs = curvature_form_unchecked(a, chart, x)?;
    rhs.axpy(1.0, &exterior_cov_derivative(a, alpha, chart, x)?)?;
    rhs.axpy(1.0, &wedge_bracket(&a.algebra, &alpha.eval(x)?))?;
    Ok(lhs.sub(&rhs)?.norm())
}

/// Cyclic sum `∇_λ F_{μν} + ∇_μ F_{νλ} + ∇_ν F_{λμ}` with `∇ = ∂ + ad(a)`.
pub fn bianchi_residual(a: &LocalConnectionForm, chart: &Chart, x: &[f64]) -> Result<f64> {
    chart.check_interior(x)?;
    let n = a.base_dim();
    let m = a.algebra.dim();
    let f = curvature_form_field(a, chart);
    let fv = f.eval(x)?;
    let df = partials(&f, chart, x)?;
    let av = a.value(x)?;
    let mut worst = 0.0_f64;
    for l in 0..n {
        let adl = a.algebra.ad(&DVector::from_column_slice(av.leading_slice(l).data()));
        for mu in 0..n {
            for nu in 0..n {
                let mut acc = DVector::zeros(m);
                for (p, q, r) in [(l, mu, nu), (mu, nu, l), (nu, l, mu)] {
                    let adp = if p == l {
                        adl.clone()
                    } else {
                        a.algebra.ad(&DVector::from_column_slice(av.leading_slice(p).data()))
                    };
                    let fqr = DVector::from_fn(m, |k, _| fv.get(&[q, r, k]));
                    let dfqr = DVector::from_fn(m, |k, _| df.get(&[p, q, r, k]));
                    acc += dfqr + adp * fqr;
                }
                worst = worst.max(acc.norm());
            }
        }
    }
    Ok(worst)
}

/// A change of connection `β = (S, α)`: `S = Γ′ − Γ` on tangent axes and
/// `α = a′ − a` on Lie axes.
#[derive(Clone, Debug)]
pub struct ConnectionVariation {
    pub s: Option<TensorFieldSpec>,
    pub alpha: Option<TensorFieldSpec>,
}

impl ConnectionVariation {
    pub fn between(b: &Connection, b_prime: &Connection) -> Result<Self> {
        let s = Some(b_prime.gamma.difference(&b.gamma)?);
        let alpha = match (&b.form, &b_prime.form) {
            (Some(a), Some(ap)) => Some(ap.difference(a)?),
            (None, None) => None,
            _ => return Err(GeomError::RepMismatch("only one connection carries a form".into())),
        };
        Ok(Self { s, alpha })
    }

    /// `β_μ · η` for every μ, stacked along a leading covariant axis.
    pub fn act(&self, x: &[f64], n: usize, eta: &DenseTensor, rep: Option<&LinearRep>) -> Result<DenseTensor> {
        let s = match &self.s {
            Some(s) => s.eval(x)?,
            None => DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]),
        };
        let mats = self.lie_matrices(x, eta, rep)?;
        let mut zero_axes = vec![Axis::Co];
        zero_axes.extend_from_slice(eta.axes());
        let mut zero_dims = vec![n];
        zero_dims.extend_from_slice(eta.dims());
        let zero = DenseTensor::zeros(zero_axes, zero_dims);
        assemble_covariant(eta, &zero, &s, mats.as_deref())
    }

    fn lie_matrices(&self, x: &[f64], eta: &DenseTensor, rep: Option<&LinearRep>) -> Result<Option<Vec<DMatrix<f64>>>> {
        if !eta.axes().contains(&Axis::Lie) {
            return Ok(None);
        }
        let rep = rep.ok_or_else(|| GeomError::RepMismatch("Lie axes without representation".into()))?;
        match &self.alpha {
            None => Ok(Some(vec![DMatrix::zeros(rep.dim(), rep.dim()); self.base_dim()?])),
            Some(alpha) => {
                let a = alpha.eval(x)?;
                if a.dims()[1] != rep.generators().len() {
                    return Err(GeomError::RepMismatch("variation and representation disagree".into()));
                }
                Ok(Some((0..a.dims()[0]).map(|mu| rep.act(a.leading_slice(mu).data())).collect()))
            }
        }
    }

    fn base_dim(&self) -> Result<usize> {
        self.s
            .as_ref()
            .map(|s| s.dims()[0])
            .or_else(|| self.alpha.as_ref().map(|a| a.dims()[0]))
            .ok_or_else(|| GeomError::Invalid("empty variation".into()))
    }
}

/// Norm of `∇^{B′}η − ∇^B η − β·η` summed over components.
pub fn connection_variation_check(
    eta: &SectionSpec,
    b: &Connection,
    b_prime: &Connection,
    chart: &Chart,
    x: &[f64],
) -> Result<f64> {
    chart.check_interior(x)?;
    let beta = ConnectionVariation::between(b, b_prime)?;
    let n = chart.dim();
    let mut total = 0.0;
    for c in &eta.components {
        let lhs = b_prime.derivative_at(c, chart, x)?;
        let base = b.derivative_at(c, chart, x)?;
        let act = beta.act(x, n, &c.field.eval(x)?, c.rep.as_ref())?;
        let r = lhs.sub(&base)?.sub(&act)?;
        total += r.norm().powi(2);
    }
    Ok(total.sqrt())
}

/// Norm of `∇(β·η) − ((∇β)·η + β·(∇η))`, all derivatives taken with `conn`.
pub fn leibniz_check(
    beta: &ConnectionVariation,
    eta: &SectionSpec,
    conn: &Connection,
    chart: &Chart,
    x: &[f64],
) -> Result<f64> {
    chart.check_interior(x)?;
    let n = chart.dim();
    // ∇β, component by component
    let ds = match &beta.s {
        Some(s) => Some(conn.derivative_at(&SectionComponent::tangent("S", s.clone()), chart, x)?),
        None => None,
    };
    let dalpha = match &beta.alpha {
        Some(a) => {
            let form = conn
                .form
                .as_ref()
                .ok_or_else(|| GeomError::RepMismatch("variation has a Lie part but the connection has no form".into()))?;
            let adj = LinearRep::adjoint(form.algebra());
            Some(conn.derivative_at(&SectionComponent::with_rep("alpha", a.clone(), adj), chart, x)?)
        }
        None => None,
    };
    let mut total = 0.0;
    for c in &eta.components {
        let rep = c.rep.clone();
        let beta_c = beta.clone();
        let field = c.field.clone();
        let mut axes = vec![Axis::Co];
        axes.extend_from_slice(field.axes());
        let mut dims = vec![n];
        dims.extend_from_slice(field.dims());
        let product = TensorFieldSpec::new(axes, dims, move |y| {
            beta_c.act(y, n, &field.eval(y)?, rep.as_ref())
        });
        let lhs = conn.derivative_at(&SectionComponent { name: "beta.eta".into(), field: product, rep: c.rep.clone() }, chart, x)?;

        let eta_x = c.field.eval(x)?;
        let deta = conn.derivative_at(c, chart, x)?;
        let mut parts = Vec::with_capacity(n);
        for nu in 0..n {
            let dvar = ConnectionVariation {
                s: ds.as_ref().map(|d| {
                    let v = d.leading_slice(nu);
                    TensorFieldSpec::constant(v, n)
                }),
                alpha: dalpha.as_ref().map(|d| TensorFieldSpec::constant(d.leading_slice(nu), n)),
            };
            let mut term = dvar.act(x, n, &eta_x, c.rep.as_ref())?;
            term.axpy(1.0, &beta.act(x, n, &deta.leading_slice(nu), c.rep.as_ref())?)?;
            parts.push(term);
        }
        let rhs = DenseTensor::stack(Axis::Co, &parts)?;
        total += lhs.sub(&rhs)?.norm().powi(2);
    }
    Ok(total.sqrt())
}
