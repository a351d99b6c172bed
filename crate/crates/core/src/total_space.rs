//! The total space of a principal bundle seen through a local section `s`:
//! the connection metric `g_A` and the connection `∇̄ = ∇^{h,A} ⊕ ∇^{v,A}`
//! with its torsion and curvature.
//!
//! Everything is evaluated at points `s(x)`, where two frames are in use: the
//! product frame `{D_i, e_a^#}` of the trivialization `(x, k) ↦ s(x)·k` and the
//! adapted frame `{X̃_i, e_a^#}` with `X̃_i = D_i − a_i^#`. Component functions
//! of the fields handled here are either constant along the fiber or
//! Ad-equivariant, so their vertical derivatives at `s(x)` follow from the
//! bracket and no group coordinates are needed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bundle::{curvature_form, LocalConnectionForm};
use crate::chart::{covariant_derivative, curvature, partials, torsion, Chart, ConnectionCoeffs, MetricField, TensorFieldSpec};
use crate::error::{GeomError, Result};
use crate::fixtures::{Fiber, Fixture};
use crate::homogeneity::{check_lh_triple, nested_chart, TripleSpec, PARALLEL_TOL};
use crate::lie::{AdInvariantInner, LieAlgebra};
use crate::report::VerificationReport;
use crate::tensor::{Axis, DenseTensor, OrthoFrame};

/// Tolerance the base hypotheses must meet before total-space checks count.
pub const HYPOTHESIS_TOL: f64 = 1e-6;

/// Flag raised when the base hypotheses of a total-space check fail.
pub const HYPOTHESES_FAILED: &str = "hypotheses-failed";

/// Base data of the total space: chart, metric, linear connection `Γ`,
/// connection form `a` and the fiber inner product.
#[derive(Clone, Debug)]
pub struct TotalSpaceModel {
    pub chart: Chart,
    pub metric: MetricField,
    pub gamma: ConnectionCoeffs,
    pub form: LocalConnectionForm,
    pub inner: AdInvariantInner,
}

impl TotalSpaceModel {
    pub fn new(
        chart: Chart,
        metric: MetricField,
        gamma: ConnectionCoeffs,
        form: LocalConnectionForm,
        inner: AdInvariantInner,
    ) -> Result<Self> {
        let n = chart.dim();
        if metric.dim() != n || gamma.dim() != n || form.base_dim() != n {
            return Err(GeomError::AxisMismatch("chart, metric, connection and form dimensions differ".into()));
        }
        if inner.matrix().nrows() != form.algebra().dim() {
            return Err(GeomError::RepMismatch("inner product does not match the structure algebra".into()));
        }
        Ok(Self {
            chart,
            metric,
            gamma,
            form,
            inner,
        })
    }

    /// The fixture's bundle with its preferred connection, on the chart with
    /// the nested step policy.
    pub fn from_fixture(fx: &Fixture) -> Result<Self> {
        let (Some(fiber), Some(form)) = (&fx.fiber, &fx.form) else {
            return Err(GeomError::Invalid(format!("fixture `{}` carries no bundle", fx.name)));
        };
        let chart = nested_chart(&fx.chart);
        let gamma = match &fx.canonical {
            Some(c) => c.clone(),
            None => ConnectionCoeffs::levi_civita(&fx.metric, &chart),
        };
        Self::new(chart, fx.metric.clone(), gamma, form.clone(), fiber.inner.clone())
    }

    /// The same model with another connection form.
    pub fn with_form(&self, form: LocalConnectionForm) -> Result<Self> {
        Self::new(self.chart.clone(), self.metric.clone(), self.gamma.clone(), form, self.inner.clone())
    }

    pub fn algebra(&self) -> &LieAlgebra {
        self.form.algebra()
    }

    pub fn base_dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.algebra().dim()
    }

    /// `g_A` in the product frame `{D_i, e_a^#}` at `s(x)`:
    /// `g_A(U, V) = g(U_h, V_h) + ⟨ω_A(U), ω_A(V)⟩`.
    pub fn connection_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (n, m) = (self.base_dim(), self.fiber_dim());
        let g = self.metric.matrix(x)?;
        let a = form_matrix(&self.form, x)?;
        let q = self.inner.matrix();
        let aq = &a * q;
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&(g + &aq * a.transpose()));
        out.view_mut((0, n), (n, m)).copy_from(&aq);
        out.view_mut((n, 0), (m, n)).copy_from(&aq.transpose());
        out.view_mut((n, n), (m, m)).copy_from(q);
        Ok(out)
    }

    /// `g_A` in the adapted frame, `diag(g, ⟨,⟩)`.
    pub fn adapted_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (n, m) = (self.base_dim(), self.fiber_dim());
        Ok(block_diag(&self.metric.matrix(x)?, self.inner.matrix(), n, m))
    }

    /// Components of a field in the product frame at `s(x)`.
    pub fn product_components(&self, f: &TotalField, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        f.check(self)?;
        let p = parts(&self.form, f, x)?;
        Ok((p.h, p.inv + p.eq))
    }

    /// Components of a field in the adapted frame at `s(x)`.
    pub fn adapted_components(&self, f: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
        f.check(self)?;
        let p = parts(&self.form, f, x)?.adapted(&self.form, x)?;
        Ok(AdaptedFrameVector {
            horizontal: p.h,
            vertical: p.inv + p.eq,
        })
    }
}

/// A vector at `s(x)` split along the adapted frame: horizontal components in
/// the coordinate basis, vertical components in the algebra basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedFrameVector {
    pub horizontal: DVector<f64>,
    pub vertical: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameTag {
    Horizontal,
    Vertical,
    Mixed,
    Zero,
}

impl AdaptedFrameVector {
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            horizontal: DVector::zeros(n),
            vertical: DVector::zeros(m),
        }
    }

    pub fn horizontal(h: DVector<f64>, m: usize) -> Self {
        Self {
            horizontal: h,
            vertical: DVector::zeros(m),
        }
    }

    pub fn vertical(n: usize, v: DVector<f64>) -> Self {
        Self {
            horizontal: DVector::zeros(n),
            vertical: v,
        }
    }

    pub fn tag(&self) -> FrameTag {
        let h = self.horizontal.iter().any(|v| *v != 0.0);
        let v = self.vertical.iter().any(|v| *v != 0.0);
        match (h, v) {
            (true, true) => FrameTag::Mixed,
            (true, false) => FrameTag::Horizontal,
            (false, true) => FrameTag::Vertical,
            (false, false) => FrameTag::Zero,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            horizontal: &self.horizontal - &other.horizontal,
            vertical: &self.vertical - &other.vertical,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.horizontal.amax().max(self.vertical.amax())
    }
}

/// Vector fields on the total space built from horizontal lifts, fundamental
/// fields and `ξ(ν)` over functions on the base.
#[derive(Clone, Debug)]
pub enum TotalField {
    /// Horizontal lift `X̃` of a base vector field (`[Contra]`).
    Lift(TensorFieldSpec),
    /// Fundamental field `a^#` of a fixed algebra element.
    Fundamental(DVector<f64>),
    /// `ξ(ν)` for an adjoint section `ν` (`[Lie]`) in the gauge of `s`.
    Xi(TensorFieldSpec),
    /// `f·U` with `f` a scalar field on the base.
    Scaled(TensorFieldSpec, Box<TotalField>),
    Sum(Vec<TotalField>),
}

impl TotalField {
    pub fn lift_const(v: &[f64]) -> Self {
        TotalField::Lift(TensorFieldSpec::constant(DenseTensor::vector(v), v.len()))
    }

    /// Lift of the coordinate field `∂_i`.
    pub fn coordinate_lift(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self::lift_const(&v)
    }

    pub fn basis_fundamental(m: usize, a: usize) -> Self {
        let mut v = DVector::zeros(m);
        v[a] = 1.0;
        TotalField::Fundamental(v)
    }

    fn kind(&self) -> &'static str {
        match self {
            TotalField::Lift(_) => "horizontal lift",
            TotalField::Fundamental(_) => "fundamental field",
            TotalField::Xi(_) => "xi field",
            TotalField::Scaled(..) => "scaled field",
            TotalField::Sum(_) => "sum of fields",
        }
    }

    fn check(&self, model: &TotalSpaceModel) -> Result<()> {
        let (n, m) = (model.base_dim(), model.fiber_dim());
        let bad = |what: String| Err(GeomError::AxisMismatch(what));
        match self {
            TotalField::Lift(f) if f.axes() != [Axis::Contra] || f.dims() != [n] => {
                bad(format!("lifted field must be [Contra] of dim {n}"))
            }
            TotalField::Fundamental(a) if a.len() != m => bad(format!("algebra element must have dim {m}")),
            TotalField::Xi(f) if f.axes() != [Axis::Lie] || f.dims() != [m] => {
                bad(format!("adjoint section must be [Lie] of dim {m}"))
            }
            TotalField::Scaled(f, u) => {
                if !f.axes().is_empty() {
                    return bad("coefficient must be a scalar field".into());
                }
                u.check(model)
            }
            TotalField::Sum(us) => us.iter().try_for_each(|u| u.check(model)),
            _ => Ok(()),
        }
    }
}

/// Pointwise value of a generator: a horizontal vector or an algebra element.
enum Generator {
    H(DVector<f64>),
    V(DVector<f64>),
}

fn unsupported(f: &TotalField) -> GeomError {
    GeomError::UnsupportedFieldKind(format!(
        "{}: the case table takes horizontal lifts, fundamental fields and xi fields",
        f.kind()
    ))
}

fn generator_value(f: &TotalField, x: &[f64]) -> Result<Generator> {
    match f {
        TotalField::Lift(v) => Ok(Generator::H(dvec(&v.eval(x)?))),
        TotalField::Fundamental(a) => Ok(Generator::V(a.clone())),
        TotalField::Xi(nu) => Ok(Generator::V(dvec(&nu.eval(x)?))),
        other => Err(unsupported(other)),
    }
}

fn dvec(t: &DenseTensor) -> DVector<f64> {
    DVector::from_column_slice(t.data())
}

/// `a` at `x` as an `n × m` matrix; `a(h) = Aᵀh`.
fn form_matrix(form: &LocalConnectionForm, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(form.value(x)?.to_matrix())
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>, n: usize, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// Component functions of a field at `s(x)`: horizontal part, fiber-constant
/// vertical part and Ad-equivariant vertical part.
#[derive(Clone, Debug)]
struct Parts {
    h: DVector<f64>,
    inv: DVector<f64>,
    eq: DVector<f64>,
}

impl Parts {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            h: DVector::zeros(n),
            inv: DVector::zeros(m),
            eq: DVector::zeros(m),
        }
    }

    /// Product-frame parts to adapted-frame parts: `D_i = X̃_i + (Ad a_i)^#`.
    fn adapted(mut self, form: &LocalConnectionForm, x: &[f64]) -> Result<Self> {
        self.eq += form_matrix(form, x)?.transpose() * &self.h;
        Ok(self)
    }

    fn pack(&self) -> DenseTensor {
        let data: Vec<f64> = self.h.iter().chain(self.inv.iter()).chain(self.eq.iter()).cloned().collect();
        let len = data.len();
        DenseTensor::from_vec(vec![Axis::Lie], vec![len], data).expect("packed parts")
    }

    fn unpack(t: &DenseTensor, n: usize, m: usize) -> Self {
        let d = t.data();
        Self {
            h: DVector::from_column_slice(&d[..n]),
            inv: DVector::from_column_slice(&d[n..n + m]),
            eq: DVector::from_column_slice(&d[n + m..n + 2 * m]),
        }
    }
}

fn parts(form: &LocalConnectionForm, f: &TotalField, x: &[f64]) -> Result<Parts> {
    let (n, m) = (form.base_dim(), form.algebra().dim());
    Ok(match f {
        TotalField::Lift(v) => {
            let h = dvec(&v.eval(x)?);
            let eq = -(form_matrix(form, x)?.transpose() * &h);
            Parts {
                h,
                inv: DVector::zeros(m),
                eq,
            }
        }
        TotalField::Fundamental(a) => Parts {
            h: DVector::zeros(n),
            inv: a.clone(),
            eq: DVector::zeros(m),
        },
        TotalField::Xi(nu) => Parts {
            h: DVector::zeros(n),
            inv: DVector::zeros(m),
            eq: dvec(&nu.eval(x)?),
        },
        TotalField::Scaled(s, u) => {
            let c = s.eval(x)?.data()[0];
            let p = parts(form, u, x)?;
            Parts {
                h: p.h * c,
                inv: p.inv * c,
                eq: p.eq * c,
            }
        }
        TotalField::Sum(us) => {
            let mut acc = Parts::zeros(n, m);
            for u in us {
                let p = parts(form, u, x)?;
                acc.h += p.h;
                acc.inv += p.inv;
                acc.eq += p.eq;
            }
            acc
        }
    })
}

/// The parts of `f` as a field on the base, in the product or adapted frame.
fn parts_field(form: &LocalConnectionForm, f: &TotalField, adapted: bool) -> TensorFieldSpec {
    let (n, m) = (form.base_dim(), form.algebra().dim());
    let (form, f) = (form.clone(), f.clone());
    TensorFieldSpec::new(vec![Axis::Lie], vec![n + 2 * m], move |x| {
        let p = parts(&form, &f, x)?;
        let p = if adapted { p.adapted(&form, x)? } else { p };
        Ok(p.pack())
    })
}

/// `U` applied to the component functions of `V` at `s(x)`; `u` holds the
/// product-frame parts of `U`, `dv` the partials of `V`'s packed parts.
/// Returns `(horizontal, vertical)` derivatives.
fn derive_parts(
    alg: &LieAlgebra,
    u: &Parts,
    v: &Parts,
    dv: &DenseTensor,
    n: usize,
    m: usize,
) -> (DVector<f64>, DVector<f64>) {
    let mut d = DVector::zeros(n + 2 * m);
    for i in 0..n {
        d += DVector::from_column_slice(dv.leading_slice(i).data()) * u.h[i];
    }
    let d = Parts::unpack(&DenseTensor::vector(d.as_slice()), n, m);
    // e_b^# acts on Ad-equivariant components by −ad_b
    let uv = &u.inv + &u.eq;
    let vertical = d.inv + d.eq - alg.bracket(&uv, &v.eq);
    (d.h, vertical)
}

/// `∇̄_U V` at `s(x)` from the component functions of `V` in the adapted frame
/// and the frame coefficients `∇̄_{X̃_i}X̃_j = Γ^k_{ij}X̃_k`,
/// `∇̄_{a^#}b^# = [a,b]^#`, mixed ones zero.
pub fn bar_connection_direct(model: &TotalSpaceModel, u: &TotalField, v: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
    model.chart.check_interior(x)?;
    u.check(model)?;
    v.check(model)?;
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let form = &model.form;
    let alg = form.algebra();
    let up = parts(form, u, x)?;
    let ua = up.clone().adapted(form, x)?;
    let vfield = parts_field(form, v, true);
    let va = Parts::unpack(&vfield.eval(x)?, n, m);
    let dv = partials(&vfield, &model.chart, x)?;
    let (mut h, mut vert) = derive_parts(alg, &up, &va, &dv, n, m);
    let g = model.gamma.value(x)?;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                h[k] += g.get(&[k, i, j]) * ua.h[i] * va.h[j];
            }
        }
    }
    vert += alg.bracket(&(&ua.inv + &ua.eq), &(&va.inv + &va.eq));
    Ok(AdaptedFrameVector {
        horizontal: h,
        vertical: vert,
    })
}

/// `[U, V]` at `s(x)` in the adapted frame, from the product-frame component
/// functions (differentiated by finite differences along the base) and
/// `[e_a^#, e_b^#] = [e_a, e_b]^#`.
pub fn lie_bracket_direct(model: &TotalSpaceModel, u: &TotalField, v: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
    model.chart.check_interior(x)?;
    u.check(model)?;
    v.check(model)?;
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let form = &model.form;
    let alg = form.algebra();
    let (uf, vf) = (parts_field(form, u, false), parts_field(form, v, false));
    let up = Parts::unpack(&uf.eval(x)?, n, m);
    let vp = Parts::unpack(&vf.eval(x)?, n, m);
    let du = partials(&uf, &model.chart, x)?;
    let dv = partials(&vf, &model.chart, x)?;
    let (uvh, uvv) = derive_parts(alg, &up, &vp, &dv, n, m);
    let (vuh, vuv) = derive_parts(alg, &vp, &up, &du, n, m);
    let h = uvh - vuh;
    let vert = uvv - vuv + alg.bracket(&(&up.inv + &up.eq), &(&vp.inv + &vp.eq));
    let vert = vert + form_matrix(form, x)?.transpose() * &h;
    Ok(AdaptedFrameVector {
        horizontal: h,
        vertical: vert,
    })
}

/// `∇̄_U V − ∇̄_V U − [U, V]` evaluated directly.
pub fn bar_torsion_direct(model: &TotalSpaceModel, u: &TotalField, v: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
    let uv = bar_connection_direct(model, u, v, x)?;
    let vu = bar_connection_direct(model, v, u, x)?;
    let br = lie_bracket_direct(model, u, v, x)?;
    Ok(uv.sub(&vu).sub(&br))
}

/// `∇̄_U V` from the case table:
/// `∇̄_{X̃}Ỹ = (∇_X Y)~`, `∇̄_{X̃}ξ(ν) = ξ(∇^A_X ν)`, `∇̄_{a^#}b^# = [a,b]^#`,
/// `∇̄_{ξ(ν)}b^# = [ν,b]^#`, and zero for the mixed cases.
pub fn bar_connection_apply(model: &TotalSpaceModel, u: &TotalField, v: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
    use TotalField::*;
    model.chart.check_interior(x)?;
    u.check(model)?;
    v.check(model)?;
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let alg = model.algebra();
    match (u, v) {
        (Lift(xf), Lift(yf)) => {
            let xv = dvec(&xf.eval(x)?);
            let dy = covariant_derivative(&model.gamma, &model.chart, yf, x)?;
            let mut h = DVector::zeros(n);
            for mu in 0..n {
                h += dvec(&dy.leading_slice(mu)) * xv[mu];
            }
            Ok(AdaptedFrameVector::horizontal(h, m))
        }
        (Lift(xf), Xi(nu)) => {
            let xv = dvec(&xf.eval(x)?);
            let nv = dvec(&nu.eval(x)?);
            let dn = partials(nu, &model.chart, x)?;
            let a = form_matrix(&model.form, x)?;
            let mut v = DVector::zeros(m);
            for mu in 0..n {
                let a_mu = a.row(mu).transpose();
                v += (dvec(&dn.leading_slice(mu)) + alg.bracket(&a_mu, &nv)) * xv[mu];
            }
            Ok(AdaptedFrameVector::vertical(n, v))
        }
        (Fundamental(a), Fundamental(b)) => Ok(AdaptedFrameVector::vertical(n, alg.bracket(a, b))),
        (Xi(nu), Fundamental(b)) => Ok(AdaptedFrameVector::vertical(n, alg.bracket(&dvec(&nu.eval(x)?), b))),
        (Lift(_) | Fundamental(_) | Xi(_), Lift(_) | Fundamental(_) | Xi(_)) => Ok(AdaptedFrameVector::zero(n, m)),
        (Lift(_) | Fundamental(_) | Xi(_), other) | (other, _) => Err(unsupported(other)),
    }
}

/// Base tensors the case tables need at one point.
struct BaseValues {
    t: DenseTensor,
    f: DenseTensor,
    r: Option<DenseTensor>,
}

impl BaseValues {
    fn at(model: &TotalSpaceModel, x: &[f64], with_curvature: bool) -> Result<Self> {
        Ok(Self {
            t: torsion(&model.gamma, x)?,
            f: curvature_form(&model.form, &model.chart, x)?,
            r: if with_curvature {
                Some(curvature(&model.gamma, &model.chart, x)?)
            } else {
                None
            },
        })
    }

    /// `F(X, Y)` as an algebra element.
    fn f_of(&self, xv: &DVector<f64>, yv: &DVector<f64>) -> DVector<f64> {
        let (n, m) = (self.f.dims()[0], self.f.dims()[2]);
        DVector::from_fn(m, |c, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.f.get(&[i, j, c]) * xv[i] * yv[j];
                }
            }
            s
        })
    }
}

fn torsion_case(alg: &LieAlgebra, b: &BaseValues, p: &Generator, q: &Generator) -> AdaptedFrameVector {
    let (n, m) = (b.t.dims()[0], alg.dim());
    match (p, q) {
        (Generator::H(xv), Generator::H(yv)) => {
            let h = DVector::from_fn(n, |k, _| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += b.t.get(&[k, i, j]) * xv[i] * yv[j];
                    }
                }
                s
            });
            AdaptedFrameVector {
                horizontal: h,
                vertical: b.f_of(xv, yv),
            }
        }
        (Generator::V(a), Generator::V(c)) => AdaptedFrameVector::vertical(n, alg.bracket(a, c)),
        _ => AdaptedFrameVector::zero(n, m),
    }
}

fn curvature_case(alg: &LieAlgebra, b: &BaseValues, p: &Generator, q: &Generator, w: &Generator) -> AdaptedFrameVector {
    let (n, m) = (b.t.dims()[0], alg.dim());
    match (p, q, w) {
        (Generator::H(xv), Generator::H(yv), Generator::H(zv)) => {
            let r = b.r.as_ref().expect("curvature requested");
            let h = DVector::from_fn(n, |l, _| {
                let mut s = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            s += r.get(&[l, k, i, j]) * zv[k] * xv[i] * yv[j];
                        }
                    }
                }
                s
            });
            AdaptedFrameVector::horizontal(h, m)
        }
        (Generator::H(xv), Generator::H(yv), Generator::V(c)) => {
            AdaptedFrameVector::vertical(n, alg.bracket(&b.f_of(xv, yv), c))
        }
        _ => AdaptedFrameVector::zero(n, m),
    }
}

/// `T̄(X, Y)` from the case table: `T^∇(X,Y)~ + ξ(F^A(X,Y))` for two lifts,
/// `[a, b]^#` for two vertical fields, exact zero for a mixed pair.
pub fn bar_torsion(model: &TotalSpaceModel, u: &TotalField, v: &TotalField, x: &[f64]) -> Result<AdaptedFrameVector> {
    model.chart.check_interior(x)?;
    u.check(model)?;
    v.check(model)?;
    let (p, q) = (generator_value(u, x)?, generator_value(v, x)?);
    let b = BaseValues::at(model, x, false)?;
    Ok(torsion_case(model.algebra(), &b, &p, &q))
}

/// `R̄(X, Y)W` from the case table: `(R^∇(X,Y)Z)~` for three lifts,
/// `[F^A(X,Y), c]^#` for two lifts and a vertical `W`, zero otherwise.
pub fn bar_curvature(
    model: &TotalSpaceModel,
    u: &TotalField,
    v: &TotalField,
    w: &TotalField,
    x: &[f64],
) -> Result<AdaptedFrameVector> {
    model.chart.check_interior(x)?;
    for f in [u, v, w] {
        f.check(model)?;
    }
    let (p, q, r) = (generator_value(u, x)?, generator_value(v, x)?, generator_value(w, x)?);
    let b = BaseValues::at(model, x, true)?;
    Ok(curvature_case(model.algebra(), &b, &p, &q, &r))
}

fn basis_generator(n: usize, m: usize, a: usize) -> Generator {
    if a < n {
        let mut v = DVector::zeros(n);
        v[a] = 1.0;
        Generator::H(v)
    } else {
        let mut v = DVector::zeros(m);
        v[a - n] = 1.0;
        Generator::V(v)
    }
}

fn stack_vector(v: &AdaptedFrameVector) -> Vec<f64> {
    v.horizontal.iter().chain(v.vertical.iter()).cloned().collect()
}

/// `T̄^C_{AB}` in the adapted frame, axes `[Contra C, Co A, Co B]`.
fn torsion_components(model: &TotalSpaceModel, x: &[f64]) -> Result<DenseTensor> {
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let big = n + m;
    let alg = model.algebra();
    let b = BaseValues::at(model, x, false)?;
    let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![big; 3]);
    for a in 0..big {
        for c in 0..big {
            let v = torsion_case(alg, &b, &basis_generator(n, m, a), &basis_generator(n, m, c));
            for (d, val) in stack_vector(&v).into_iter().enumerate() {
                t.set(&[d, a, c], val);
            }
        }
    }
    Ok(t)
}

/// `R̄^D_{CAB}` with `R̄(E_A, E_B)E_C = R̄^D_{CAB}E_D`, axes `[Contra, Co, Co, Co]`.
fn curvature_components(model: &TotalSpaceModel, x: &[f64]) -> Result<DenseTensor> {
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let big = n + m;
    let alg = model.algebra();
    let b = BaseValues::at(model, x, true)?;
    let mut r = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co, Axis::Co], vec![big; 4]);
    for a in 0..big {
        for c in 0..big {
            for w in 0..big {
                let v = curvature_case(
                    alg,
                    &b,
                    &basis_generator(n, m, a),
                    &basis_generator(n, m, c),
                    &basis_generator(n, m, w),
                );
                for (d, val) in stack_vector(&v).into_iter().enumerate() {
                    r.set(&[d, w, a, c], val);
                }
            }
        }
    }
    Ok(r)
}

/// The derivation induced by `mat` on every index of `t`.
fn derivation(t: &DenseTensor, mat: &DMatrix<f64>) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(t.axes().to_vec(), t.dims().to_vec());
    let mt = -mat.transpose();
    for (p, ax) in t.axes().iter().enumerate() {
        match ax {
            Axis::Contra => out.axpy(1.0, &t.apply_axis(p, mat))?,
            Axis::Co => out.axpy(1.0, &t.apply_axis(p, &mt))?,
            Axis::Lie => return Err(GeomError::AxisMismatch("total-space tensors carry no Lie axes".into())),
        }
    }
    Ok(out)
}

/// `∇̄τ` at `s(x)` for a K-invariant tensor with adapted-frame components
/// `field`, with the direction as a new leading covariant axis.
///
/// Along `X̃_i = D_i − a_i^#` the components change by `∂_i τ + ρ(a_i)τ`, since
/// `e_c^#` acts on the components of an invariant tensor by `−ρ(e_c)`; the
/// connection adds `Γ_i` on horizontal indices. Along `e_a^#` the fiber
/// derivative `−ρ(e_a)τ` and the connection term `ρ(e_a)τ` cancel.
fn bar_covariant(model: &TotalSpaceModel, field: &TensorFieldSpec, x: &[f64]) -> Result<DenseTensor> {
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let alg = model.algebra();
    let t = field.eval(x)?;
    let dt = partials(field, &model.chart, x)?;
    let g = model.gamma.value(x)?;
    let a = form_matrix(&model.form, x)?;
    let zn = DMatrix::zeros(n, n);
    let zm = DMatrix::zeros(m, m);
    let vertical_rho = |e: &DVector<f64>| block_diag(&zn, &alg.ad(e), n, m);
    let mut parts_out = Vec::with_capacity(n + m);
    for i in 0..n {
        let mut out = dt.leading_slice(i);
        let a_i = a.row(i).transpose();
        // −a_i^c e_c^#(τ) = +ρ(a_i)τ
        out.axpy(1.0, &derivation(&t, &vertical_rho(&a_i))?)?;
        let gi = DMatrix::from_fn(n, n, |k, j| g.get(&[k, i, j]));
        out.axpy(1.0, &derivation(&t, &block_diag(&gi, &zm, n, m))?)?;
        parts_out.push(out);
    }
    for c in 0..m {
        let mut e = DVector::zeros(m);
        e[c] = 1.0;
        let rho = derivation(&t, &vertical_rho(&e))?;
        let mut out = rho.scale(-1.0);
        out.axpy(1.0, &rho)?;
        parts_out.push(out);
    }
    DenseTensor::stack(Axis::Co, &parts_out)
}

fn adapted_frame(model: &TotalSpaceModel, x: &[f64]) -> Result<OrthoFrame> {
    OrthoFrame::cholesky(x, &model.adapted_metric(x)?)
}

/// `‖∇̄T̄‖` and `‖∇̄R̄‖` at `s(x)` in a `g_A`-orthonormal frame.
pub fn bar_parallel_residuals(model: &TotalSpaceModel, x: &[f64]) -> Result<(f64, f64)> {
    model.chart.check_interior(x)?;
    let big = model.base_dim() + model.fiber_dim();
    let mt = model.clone();
    let tfield = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![big; 3], move |y| {
        torsion_components(&mt, y)
    });
    let mr = model.clone();
    let rfield = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co, Axis::Co], vec![big; 4], move |y| {
        curvature_components(&mr, y)
    });
    let frame = adapted_frame(model, x)?;
    let dt = bar_covariant(model, &tfield, x)?.to_frame(&frame)?.norm();
    let dr = bar_covariant(model, &rfield, x)?.to_frame(&frame)?.norm();
    Ok((dt, dr))
}

fn max_nan(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |w, v| if w.is_nan() || v.is_nan() { f64::NAN } else { w.max(v) })
}

/// Records base hypotheses under `hypothesis.*` and flags failure.
fn record_hypotheses(report: &mut VerificationReport, base: &VerificationReport, names: &[&str]) {
    let mut ok = true;
    for name in names {
        let v = base.residuals.get(*name).copied().unwrap_or(f64::NAN);
        report.record(&format!("hypothesis.{name}"), v, HYPOTHESIS_TOL);
        ok &= v < HYPOTHESIS_TOL;
    }
    if !ok {
        report.flag(HYPOTHESES_FAILED);
    }
}

fn triple_spec(model: &TotalSpaceModel, a0: &LocalConnectionForm) -> Result<TripleSpec> {
    let fiber = Fiber {
        algebra: model.algebra().clone(),
        inner: model.inner.clone(),
    };
    TripleSpec::new(model.metric.clone(), model.chart.clone(), Some(fiber), Some(a0.clone()))
}

/// Checks `∇̄T̄ = 0` and `∇̄R̄ = 0` at the points, after the base hypotheses
/// `∇R^∇ = 0`, `∇T^∇ = 0`, `(∇⊗∇^A)F^A = 0`.
pub fn bar_parallelism_check(model: &TotalSpaceModel, points: &[Vec<f64>]) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("total-space", points.to_vec());
    let base = check_lh_triple(&triple_spec(model, &model.form)?, &model.gamma, Some(&model.form), points)?;
    record_hypotheses(&mut report, &base, &["nabla_R", "nabla_T", "nabla_F"]);
    let values = points
        .par_iter()
        .map(|x| bar_parallel_residuals(model, x))
        .collect::<Result<Vec<_>>>()?;
    report.record("nabla_bar_T", max_nan(values.iter().map(|v| v.0)), PARALLEL_TOL);
    report.record("nabla_bar_R", max_nan(values.iter().map(|v| v.1)), PARALLEL_TOL);
    Ok(report)
}

/// `α(Z) = (a − a0)(Z)` at `x`: the A-lift of `Z` is its A0-lift minus `ξ(α(Z))`.
pub fn horizontal_lift_shift(
    z: &TensorFieldSpec,
    a0: &LocalConnectionForm,
    a: &LocalConnectionForm,
    x: &[f64],
) -> Result<DVector<f64>> {
    if a0.algebra() != a.algebra() || a0.base_dim() != a.base_dim() {
        return Err(GeomError::RepMismatch("connection forms live on different bundles".into()));
    }
    if z.axes() != [Axis::Contra] || z.dims() != [a.base_dim()] {
        return Err(GeomError::AxisMismatch("Z must be a base vector field".into()));
    }
    let zv = dvec(&z.eval(x)?);
    let diff = form_matrix(a, x)? - form_matrix(a0, x)?;
    Ok(diff.transpose() * zv)
}

fn inner_norm(inner: &AdInvariantInner, v: &DVector<f64>) -> f64 {
    inner.inner(v, v).max(0.0).sqrt()
}

/// For the directions `Y ∈ {X̃_i, e_a^#}` and the coordinate fields `Z = ∂_j`,
/// measures the A-vertical part of `∇̄_Y Z̃^A` and the A0-vertical part of
/// `∇̄_Y Z̃^{A0}`, with `Z̃^{A0} = Z̃^A + ξ(α(Z))`. Both distributions are
/// `∇̄`-parallel when the hypotheses hold, including `(∇⊗∇^A)(A − A0) = 0`.
pub fn distribution_parallel_check(
    model: &TotalSpaceModel,
    a0: &LocalConnectionForm,
    points: &[Vec<f64>],
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("total-space", points.to_vec());
    let base = check_lh_triple(&triple_spec(model, a0)?, &model.gamma, Some(&model.form), points)?;
    record_hypotheses(&mut report, &base, &["nabla_R", "nabla_T", "nabla_F", "nabla_alpha"]);
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let alpha = model.form.difference(a0)?;
    let directions: Vec<TotalField> = (0..n)
        .map(|i| TotalField::coordinate_lift(n, i))
        .chain((0..m).map(|a| TotalField::basis_fundamental(m, a)))
        .collect();
    let lifts: Vec<(TotalField, TotalField)> = (0..n)
        .map(|j| {
            let a_lift = TotalField::coordinate_lift(n, j);
            let alpha = alpha.clone();
            let alpha_j = TensorFieldSpec::new(vec![Axis::Lie], vec![m], move |x| Ok(alpha.eval(x)?.leading_slice(j)));
            let a0_lift = TotalField::Sum(vec![a_lift.clone(), TotalField::Xi(alpha_j)]);
            (a_lift, a0_lift)
        })
        .collect();
    let values = points
        .par_iter()
        .map(|x| {
            let al = form_matrix(&model.form, x)? - form_matrix(a0, x)?;
            let mut worst = (0.0_f64, 0.0_f64);
            for y in &directions {
                for (a_lift, a0_lift) in &lifts {
                    let w = bar_connection_direct(model, y, a_lift, x)?;
                    let w0 = bar_connection_direct(model, y, a0_lift, x)?;
                    let v0 = &w0.vertical - al.transpose() * &w0.horizontal;
                    worst.0 = max_nan([worst.0, inner_norm(&model.inner, &w.vertical)]);
                    worst.1 = max_nan([worst.1, inner_norm(&model.inner, &v0)]);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    report.record("a_distribution", max_nan(values.iter().map(|v| v.0)), PARALLEL_TOL);
    report.record("a0_distribution", max_nan(values.iter().map(|v| v.1)), PARALLEL_TOL);
    Ok(report)
}

/// `(max |g_A(X̃_i, e_a^#)|, max |g_A(X̃_i, X̃_j) − g_ij|)` at `s(x)`.
pub fn submersion_residuals(model: &TotalSpaceModel, x: &[f64]) -> Result<(f64, f64)> {
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let ga = model.connection_metric(x)?;
    let g = model.metric.matrix(x)?;
    let a = form_matrix(&model.form, x)?;
    // product components of the lifts X̃_i as columns
    let mut lifts = DMatrix::zeros(n + m, n);
    lifts.view_mut((0, 0), (n, n)).fill_with_identity();
    lifts.view_mut((n, 0), (m, n)).copy_from(&(-a.transpose()));
    let mut verticals = DMatrix::zeros(n + m, m);
    verticals.view_mut((n, 0), (m, m)).fill_with_identity();
    let mixed = lifts.transpose() * &ga * verticals;
    let horiz = lifts.transpose() * &ga * &lifts - g;
    Ok((mixed.amax(), horiz.amax()))
}

/// Fields used to probe identities: lifts of coordinate and varying fields,
/// fundamental fields of the basis, and `ξ` of constant and varying sections.
pub fn probe_fields(n: usize, m: usize) -> Vec<TotalField> {
    let mut out: Vec<TotalField> = (0..n).map(|i| TotalField::coordinate_lift(n, i)).collect();
    out.push(TotalField::Lift(TensorFieldSpec::new(vec![Axis::Contra], vec![n], move |x| {
        let v: Vec<f64> = (0..n).map(|k| 1.0 + 0.3 * (x[k] + 0.7 * k as f64).sin() + 0.2 * x[(k + 1) % n]).collect();
        Ok(DenseTensor::vector(&v))
    })));
    out.extend((0..m).map(|a| TotalField::basis_fundamental(m, a)));
    out.push(TotalField::Xi(TensorFieldSpec::new(vec![Axis::Lie], vec![m], move |x| {
        let v: Vec<f64> = (0..m).map(|c| 0.5 * (x[0] + c as f64).cos() + 0.2 * x[n - 1]).collect();
        Ok(DenseTensor::from_vec(vec![Axis::Lie], vec![m], v).expect("section"))
    })));
    out
}

/// Largest difference between the case-table torsion and the direct
/// `∇̄_U V − ∇̄_V U − [U, V]` over all probe pairs and points.
pub fn torsion_agreement(model: &TotalSpaceModel, points: &[Vec<f64>]) -> Result<f64> {
    let probes = probe_fields(model.base_dim(), model.fiber_dim());
    let per_point = points
        .par_iter()
        .map(|x| {
            let mut worst = 0.0_f64;
            for u in &probes {
                for v in &probes {
                    let table = bar_torsion(model, u, v, x)?;
                    let direct = bar_torsion_direct(model, u, v, x)?;
                    worst = max_nan([worst, table.sub(&direct).max_abs()]);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(max_nan(per_point))
}

/// Largest difference between the case table for `∇̄` and the direct
/// evaluation from component functions, over probe pairs and points.
pub fn connection_agreement(model: &TotalSpaceModel, points: &[Vec<f64>]) -> Result<f64> {
    let probes = probe_fields(model.base_dim(), model.fiber_dim());
    let per_point = points
        .par_iter()
        .map(|x| {
            let mut worst = 0.0_f64;
            for u in &probes {
                for v in &probes {
                    let table = bar_connection_apply(model, u, v, x)?;
                    let direct = bar_connection_direct(model, u, v, x)?;
                    worst = max_nan([worst, table.sub(&direct).max_abs()]);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(max_nan(per_point))
}
