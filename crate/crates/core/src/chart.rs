//! Calculus on a single coordinate chart: finite differences, Levi-Civita
//! coefficients, curvature, torsion and covariant derivatives.
//!
//! Connection coefficients are stored as a `[Contra, Co, Co]` tensor `Γ^k_{ij}`
//! with `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::tensor::{Axis, DenseTensor};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> Result<DenseTensor> + Send + Sync>;

/// Per-direction matrices acting on the Lie axes of a tensor (e.g. `ρ(a_μ)`).
pub type LieMatrices = Arc<dyn Fn(&[f64]) -> Result<Vec<DMatrix<f64>>> + Send + Sync>;

pub const DEFAULT_STEP_SCALE: f64 = 1e-3;

/// A coordinate box with an interior margin reserved for difference stencils.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    lo: Vec<f64>,
    hi: Vec<f64>,
    margin: f64,
    step_scale: f64,
}

impl Chart {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, margin: f64) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(GeomError::Invalid("chart bounds must be nonempty and paired".into()));
        }
        if margin <= 0.0 || !margin.is_finite() {
            return Err(GeomError::Invalid(format!("chart margin must be positive, got {margin}")));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(b - a > 2.0 * margin) {
                return Err(GeomError::Invalid(format!(
                    "interval [{a}, {b}] leaves no interior for margin {margin}"
                )));
            }
        }
        Ok(Self {
            lo,
            hi,
            margin,
            step_scale: DEFAULT_STEP_SCALE,
        })
    }

    pub fn cube(n: usize, lo: f64, hi: f64, margin: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n], margin)
    }

    pub fn with_step_scale(mut self, step_scale: f64) -> Self {
        assert!(step_scale > 0.0);
        self.step_scale = step_scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn width(&self, mu: usize) -> f64 {
        self.hi[mu] - self.lo[mu]
    }

    /// Base difference step along axis `mu`.
    pub fn step(&self, mu: usize) -> f64 {
        self.step_scale * self.width(mu)
    }

    /// Sampling box: the chart shrunk by the margin.
    pub fn interior(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.lo.iter().map(|v| v + self.margin).collect(),
            self.hi.iter().map(|v| v - self.margin).collect(),
        )
    }

    /// `count` quasi-random points of the sampling box: a Halton sequence
    /// shifted modulo 1 by a rotation drawn from `seed`.
    pub fn sample_interior(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        const BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        let (lo, hi) = self.interior();
        (1..=count as u64)
            .map(|i| {
                (0..self.dim())
                    .map(|d| {
                        let u = (radical_inverse(i, BASES[d % BASES.len()]) + shift[d]).fract();
                        lo[d] + u * (hi[d] - lo[d])
                    })
                    .collect()
            })
            .collect()
    }

    /// Fails unless `x` lies at least `margin` inside the box.
    pub fn check_interior(&self, x: &[f64]) -> Result<()> {
        self.check_reach(x, self.margin)
    }

    fn check_reach(&self, x: &[f64], reach: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeomError::AxisMismatch(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim()
            )));
        }
        // slack of a few ulps so points produced by `interior()` pass
        let inside = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| {
            let slack = 4.0 * f64::EPSILON * (a.abs() + b.abs() + reach);
            *v - reach >= *a - slack && *v + reach <= *b + slack
        });
        if inside {
            Ok(())
        } else {
            Err(GeomError::OutOfDomain {
                point: x.to_vec(),
                reach,
            })
        }
    }

    fn check_stencil(&self, x: &[f64], mu: usize, h: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeomError::AxisMismatch("point dimension".into()));
        }
        if x[mu] - h < self.lo[mu] || x[mu] + h > self.hi[mu] {
            return Err(GeomError::OutOfDomain {
                point: x.to_vec(),
                reach: h,
            });
        }
        Ok(())
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// A tensor field on a chart with declared valence and an optional exact
/// first derivative (leading covariant axis).
#[derive(Clone)]
pub struct TensorFieldSpec {
    axes: Vec<Axis>,
    dims: Vec<usize>,
    eval: Evaluator,
    deriv: Option<Evaluator>,
}

impl std::fmt::Debug for TensorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorFieldSpec")
            .field("axes", &self.axes)
            .field("dims", &self.dims)
            .field("analytic_derivative", &self.deriv.is_some())
            .finish()
    }
}

impl TensorFieldSpec {
    pub fn new<F>(axes: Vec<Axis>, dims: Vec<usize>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DenseTensor> + Send + Sync + 'static,
    {
        assert_eq!(axes.len(), dims.len());
        Self {
            axes,
            dims,
            eval: Arc::new(f),
            deriv: None,
        }
    }

    /// Attaches an exact derivative returning `∂_μ t` stacked along a leading covariant axis.
    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DenseTensor> + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(d));
        self
    }

    pub fn constant(t: DenseTensor, n: usize) -> Self {
        let mut daxes = vec![Axis::Co];
        daxes.extend_from_slice(t.axes());
        let mut ddims = vec![n];
        ddims.extend_from_slice(t.dims());
        let zero = DenseTensor::zeros(daxes, ddims);
        let (axes, dims) = (t.axes().to_vec(), t.dims().to_vec());
        Self::new(axes, dims, move |_| Ok(t.clone())).with_derivative(move |_| Ok(zero.clone()))
    }

    pub fn zero(axes: Vec<Axis>, dims: Vec<usize>, n: usize) -> Self {
        Self::constant(DenseTensor::zeros(axes, dims), n)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Result<DenseTensor> {
        let t = (self.eval)(x)?;
        if t.axes() != self.axes.as_slice() || t.dims() != self.dims.as_slice() {
            return Err(GeomError::AxisMismatch(format!(
                "field declared {:?}{:?}, evaluator returned {:?}{:?}",
                self.axes,
                self.dims,
                t.axes(),
                t.dims()
            )));
        }
        Ok(t)
    }

    pub fn analytic_derivative(&self, x: &[f64]) -> Option<Result<DenseTensor>> {
        self.deriv.as_ref().map(|d| d(x))
    }

    /// Drops any attached exact derivative so that differentiation falls back to differences.
    pub fn without_derivative(mut self) -> Self {
        self.deriv = None;
        self
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &TensorFieldSpec) -> Result<TensorFieldSpec> {
        self.combine(other, 1.0)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &TensorFieldSpec) -> Result<TensorFieldSpec> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &TensorFieldSpec, sign: f64) -> Result<TensorFieldSpec> {
        if self.axes != other.axes || self.dims != other.dims {
            return Err(GeomError::AxisMismatch("fields of different valence".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        let mut out = TensorFieldSpec::new(self.axes.clone(), self.dims.clone(), move |x| {
            let mut t = a.eval(x)?;
            t.axpy(sign, &b.eval(x)?)?;
            Ok(t)
        });
        if let (Some(da), Some(db)) = (self.deriv.clone(), other.deriv.clone()) {
            out.deriv = Some(Arc::new(move |x| {
                let mut t = da(x)?;
                t.axpy(sign, &db(x)?)?;
                Ok(t)
            }));
        }
        Ok(out)
    }

    pub fn scale(&self, alpha: f64) -> TensorFieldSpec {
        let a = self.clone();
        let mut out = TensorFieldSpec::new(self.axes.clone(), self.dims.clone(), move |x| {
            Ok(a.eval(x)?.scale(alpha))
        });
        if let Some(d) = self.deriv.clone() {
            out.deriv = Some(Arc::new(move |x| Ok(d(x)?.scale(alpha))));
        }
        out
    }
}

/// Plain central difference `(f(x+h e_μ) − f(x−h e_μ)) / 2h`.
pub fn central_difference(
    field: &TensorFieldSpec,
    chart: &Chart,
    x: &[f64],
    mu: usize,
    h: f64,
) -> Result<DenseTensor> {
    chart.check_stencil(x, mu, h)?;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[mu] += h;
    xm[mu] -= h;
    let fp = field.eval(&xp)?;
    let fm = field.eval(&xm)?;
    Ok(fp.sub(&fm)?.scale(0.5 / h))
}

/// Richardson-extrapolated central difference `(4 D(h/2) − D(h)) / 3` with
/// `h = step_scale × width`.
pub fn fd_partial(field: &TensorFieldSpec, chart: &Chart, x: &[f64], mu: usize) -> Result<DenseTensor> {
    let h = chart.step(mu);
    let d1 = central_difference(field, chart, x, mu, h)?;
    let d2 = central_difference(field, chart, x, mu, 0.5 * h)?;
    let mut out = d2.scale(4.0 / 3.0);
    out.axpy(-1.0 / 3.0, &d1)?;
    Ok(out)
}

/// All first partials stacked along a leading covariant axis; uses the exact
/// derivative when the field carries one.
pub fn partials(field: &TensorFieldSpec, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    if let Some(d) = field.analytic_derivative(x) {
        return d;
    }
    let parts = (0..chart.dim())
        .map(|mu| fd_partial(field, chart, x, mu))
        .collect::<Result<Vec<_>>>()?;
    DenseTensor::stack(Axis::Co, &parts)
}

/// A Riemannian metric as a symmetric `[Co, Co]` field.
#[derive(Clone, Debug)]
pub struct MetricField {
    field: TensorFieldSpec,
}

impl MetricField {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let field = TensorFieldSpec::new(vec![Axis::Co, Axis::Co], vec![n, n], move |x| {
            Ok(DenseTensor::from_matrix(Axis::Co, Axis::Co, &f(x)))
        });
        Self { field }
    }

    pub fn from_field(field: TensorFieldSpec) -> Result<Self> {
        if field.axes() != [Axis::Co, Axis::Co] {
            return Err(GeomError::AxisMismatch("metric must be a (0,2) field".into()));
        }
        Ok(Self { field })
    }

    /// Attaches exact first derivatives `d(x)[μ] = ∂_μ G`.
    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.field = self.field.with_derivative(move |x| {
            let parts: Vec<DenseTensor> = d(x)
                .iter()
                .map(|m| DenseTensor::from_matrix(Axis::Co, Axis::Co, m))
                .collect();
            DenseTensor::stack(Axis::Co, &parts)
        });
        self
    }

    pub fn euclidean(n: usize) -> Self {
        let id = DMatrix::<f64>::identity(n, n);
        Self::new(n, move |_| id.clone()).with_derivative(move |_| vec![DMatrix::zeros(n, n); n])
    }

    pub fn dim(&self) -> usize {
        self.field.dims()[0]
    }

    pub fn field(&self) -> &TensorFieldSpec {
        &self.field
    }

    /// Metric matrix at `x`; fails if not symmetric or not positive definite.
    pub fn matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.field.eval(x)?.to_matrix();
        let asym = (&m - m.transpose()).amax();
        if !asym.is_finite() || asym > 1e-12 * m.amax().max(1.0) {
            return Err(GeomError::DegenerateMetric(x.to_vec()));
        }
        if m.clone().cholesky().is_none() {
            return Err(GeomError::DegenerateMetric(x.to_vec()));
        }
        Ok(m)
    }

    pub fn frame(&self, x: &[f64]) -> Result<crate::tensor::OrthoFrame> {
        crate::tensor::OrthoFrame::cholesky(x, &self.matrix(x)?)
    }
}

/// Connection coefficients `Γ^k_{ij}` as a `[Contra, Co, Co]` field.
#[derive(Clone, Debug)]
pub struct ConnectionCoeffs {
    field: TensorFieldSpec,
    symmetric: bool,
}

impl ConnectionCoeffs {
    pub fn from_field(field: TensorFieldSpec, symmetric: bool) -> Result<Self> {
        if field.axes() != [Axis::Contra, Axis::Co, Axis::Co] {
            return Err(GeomError::AxisMismatch(
                "connection coefficients must be a [Contra, Co, Co] field".into(),
            ));
        }
        Ok(Self { field, symmetric })
    }

    pub fn flat(n: usize) -> Self {
        Self {
            field: TensorFieldSpec::zero(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], n),
            symmetric: true,
        }
    }

    /// Levi-Civita coefficients of `g`, differentiated on `chart`.
    pub fn levi_civita(g: &MetricField, chart: &Chart) -> Self {
        let n = g.dim();
        let (g, chart) = (g.clone(), chart.clone());
        let field = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], move |x| {
            christoffel_unchecked(&g, &chart, x)
        });
        Self {
            field,
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dims()[0]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn field(&self) -> &TensorFieldSpec {
        &self.field
    }

    pub fn value(&self, x: &[f64]) -> Result<DenseTensor> {
        let t = self.field.eval(x)?;
        if !t.is_finite() {
            return Err(GeomError::Invalid(format!("non-finite connection coefficients at {x:?}")));
        }
        Ok(t)
    }

    /// `Γ + S` for a `(1,2)` difference tensor field `S`.
    pub fn add_difference(&self, s: &TensorFieldSpec) -> Result<Self> {
        Ok(Self {
            field: self.field.add(s)?,
            symmetric: false,
        })
    }

    /// `Γ_self − Γ_other` as a `(1,2)` tensor field.
    pub fn difference(&self, other: &ConnectionCoeffs) -> Result<TensorFieldSpec> {
        self.field.sub(&other.field)
    }
}

/// `(Γ_μ)^k_j = Γ^k_{μj}`
fn gamma_matrix(gamma: &DenseTensor, mu: usize) -> DMatrix<f64> {
    let n = gamma.dims()[0];
    DMatrix::from_fn(n, n, |k, j| gamma.get(&[k, mu, j]))
}

/// Levi-Civita coefficients `½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})` at `x`.
pub fn christoffel(g: &MetricField, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    christoffel_unchecked(g, chart, x)
}

fn christoffel_unchecked(g: &MetricField, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    let n = g.dim();
    let m = g.matrix(x)?;
    let inv = m
        .cholesky()
        .ok_or_else(|| GeomError::DegenerateMetric(x.to_vec()))?
        .inverse();
    let dg = partials(g.field(), chart, x)?; // dg[l][i][j] = ∂_l g_ij
    let mut lowered = vec![0.0; n * n * n]; // [l][i][j] = Γ_{l,ij}
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                lowered[(l * n + i) * n + j] =
                    0.5 * (dg.get(&[i, j, l]) + dg.get(&[j, i, l]) - dg.get(&[l, i, j]));
            }
        }
    }
    let mut out = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|l| inv[(k, l)] * lowered[(l * n + i) * n + j]).sum();
                out.set(&[k, i, j], v);
            }
        }
    }
    Ok(out)
}

/// Pointwise assembly of `∇_μ t = ∂_μ t + (Γ_μ on contravariant axes) − (Γ_μᵀ on
/// covariant axes) + (L_μ on Lie axes)`.
pub(crate) fn assemble_covariant(
    t: &DenseTensor,
    dt: &DenseTensor,
    gamma: &DenseTensor,
    lie: Option<&[DMatrix<f64>]>,
) -> Result<DenseTensor> {
    let n = gamma.dims()[0];
    let mut parts = Vec::with_capacity(n);
    for mu in 0..n {
        let mut out = dt.leading_slice(mu);
        let g = gamma_matrix(gamma, mu);
        let gt = g.transpose();
        for (p, ax) in t.axes().iter().enumerate() {
            match ax {
                Axis::Contra => out.axpy(1.0, &t.apply_axis(p, &g))?,
                Axis::Co => out.axpy(-1.0, &t.apply_axis(p, &gt))?,
                Axis::Lie => {
                    let mats = lie.ok_or_else(|| {
                        GeomError::RepMismatch("Lie axis without a connection form".into())
                    })?;
                    let l = &mats[mu];
                    if l.ncols() != t.dims()[p] {
                        return Err(GeomError::RepMismatch(format!(
                            "representation of dim {} on Lie axis of dim {}",
                            l.ncols(),
                            t.dims()[p]
                        )));
                    }
                    out.axpy(1.0, &t.apply_axis(p, l))?;
                }
            }
        }
        parts.push(out);
    }
    DenseTensor::stack(Axis::Co, &parts)
}

pub(crate) fn covariant_unchecked(
    gamma: &ConnectionCoeffs,
    lie: Option<&LieMatrices>,
    chart: &Chart,
    t: &TensorFieldSpec,
    x: &[f64],
) -> Result<DenseTensor> {
    let value = t.eval(x)?;
    let dt = partials(t, chart, x)?;
    let g = gamma.value(x)?;
    let mats = match lie {
        Some(l) if t.axes().contains(&Axis::Lie) => Some(l(x)?),
        _ => None,
    };
    assemble_covariant(&value, &dt, &g, mats.as_deref())
}

/// Field `x ↦ ∇t(x)`, suitable for nesting.
pub(crate) fn covariant_field(
    gamma: &ConnectionCoeffs,
    lie: Option<LieMatrices>,
    chart: &Chart,
    t: &TensorFieldSpec,
) -> TensorFieldSpec {
    let n = chart.dim();
    let mut axes = vec![Axis::Co];
    axes.extend_from_slice(t.axes());
    let mut dims = vec![n];
    dims.extend_from_slice(t.dims());
    let (gamma, chart, t) = (gamma.clone(), chart.clone(), t.clone());
    TensorFieldSpec::new(axes, dims, move |x| {
        covariant_unchecked(&gamma, lie.as_ref(), &chart, &t, x)
    })
}

/// `∇t` at `x` with a new leading covariant axis; `t` must not carry Lie axes.
pub fn covariant_derivative(
    gamma: &ConnectionCoeffs,
    chart: &Chart,
    t: &TensorFieldSpec,
    x: &[f64],
) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    if t.axes().contains(&Axis::Lie) {
        return Err(GeomError::RepMismatch(
            "Lie axes need a bundle connection; use the associated covariant derivative".into(),
        ));
    }
    covariant_unchecked(gamma, None, chart, t, x)
}

/// Field version of [`covariant_derivative`].
pub fn covariant_derivative_field(
    gamma: &ConnectionCoeffs,
    chart: &Chart,
    t: &TensorFieldSpec,
) -> Result<TensorFieldSpec> {
    if t.axes().contains(&Axis::Lie) {
        return Err(GeomError::RepMismatch("Lie axes need a bundle connection".into()));
    }
    Ok(covariant_field(gamma, None, chart, t))
}

fn curvature_unchecked(gamma: &ConnectionCoeffs, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    let n = gamma.dim();
    let g = gamma.value(x)?;
    let dg = partials(gamma.field(), chart, x)?; // dg[i][l][j][k] = ∂_i Γ^l_{jk}
    let mut r = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co, Axis::Co], vec![n; 4]);
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = dg.get(&[i, l, j, k]) - dg.get(&[j, l, i, k]);
                    for m in 0..n {
                        v += g.get(&[l, i, m]) * g.get(&[m, j, k]) - g.get(&[l, j, m]) * g.get(&[m, i, k]);
                    }
                    r.set(&[l, k, i, j], v);
                }
            }
        }
    }
    Ok(r)
}

/// `R^l_{kij} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}`,
/// axes `[Contra l, Co k, Co i, Co j]`.
pub fn curvature(gamma: &ConnectionCoeffs, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    curvature_unchecked(gamma, chart, x)
}

pub fn curvature_field(gamma: &ConnectionCoeffs, chart: &Chart) -> TensorFieldSpec {
    let n = gamma.dim();
    let (gamma, chart) = (gamma.clone(), chart.clone());
    TensorFieldSpec::new(
        vec![Axis::Contra, Axis::Co, Axis::Co, Axis::Co],
        vec![n; 4],
        move |x| curvature_unchecked(&gamma, &chart, x),
    )
}

fn torsion_value(gamma: &DenseTensor) -> DenseTensor {
    let n = gamma.dims()[0];
    let mut t = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.set(&[k, i, j], gamma.get(&[k, i, j]) - gamma.get(&[k, j, i]));
            }
        }
    }
    t
}

/// `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}` in the coordinate frame.
pub fn torsion(gamma: &ConnectionCoeffs, x: &[f64]) -> Result<DenseTensor> {
    Ok(torsion_value(&gamma.value(x)?))
}

pub fn torsion_field(gamma: &ConnectionCoeffs) -> TensorFieldSpec {
    let n = gamma.dim();
    let gamma = gamma.clone();
    TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], move |x| {
        torsion(&gamma, x)
    })
}

/// `T_S(X,Y) = S(X)(Y) − S(Y)(X)` for `S^k_{μj}` stored like connection coefficients.
pub fn difference_torsion(s: &DenseTensor) -> Result<DenseTensor> {
    if s.axes() != [Axis::Contra, Axis::Co, Axis::Co] {
        return Err(GeomError::AxisMismatch("difference tensor must be [Contra, Co, Co]".into()));
    }
    Ok(torsion_value(s))
}

/// Lowers the first (contravariant) index with `g`.
pub fn lower_first(t: &DenseTensor, g: &DMatrix<f64>) -> Result<DenseTensor> {
    if t.axes().first() != Some(&Axis::Contra) {
        return Err(GeomError::AxisMismatch("first axis must be contravariant".into()));
    }
    let mut axes = t.axes().to_vec();
    axes[0] = Axis::Co;
    t.apply_axis(0, g).with_axes(axes)
}

pub type MatrixEvaluator = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;

/// A connection given in a moving frame: columns of `frame(x)` are the frame
/// vectors `E_a` in coordinates and `∇_{E_a} E_b = ω^c_{ab} E_c`.
#[derive(Clone)]
pub struct FrameFieldConnection {
    n: usize,
    frame: MatrixEvaluator,
    coeffs: TensorFieldSpec,
}

impl std::fmt::Debug for FrameFieldConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameFieldConnection").field("n", &self.n).finish()
    }
}

impl FrameFieldConnection {
    pub fn new<F>(n: usize, frame: F, coeffs: TensorFieldSpec) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        if coeffs.axes() != [Axis::Contra, Axis::Co, Axis::Co] || coeffs.dims() != [n, n, n] {
            return Err(GeomError::AxisMismatch("frame coefficients must be [Contra, Co, Co]".into()));
        }
        Ok(Self {
            n,
            frame: Arc::new(frame),
            coeffs,
        })
    }

    /// Connection making the frame parallel (all coefficients zero).
    pub fn parallelizing<F>(n: usize, frame: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        let coeffs = TensorFieldSpec::zero(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], n);
        Self {
            n,
            frame: Arc::new(frame),
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn frame_at(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let e = (self.frame)(x)?;
        let inv = e
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| GeomError::SingularFrame(x.to_vec()))?;
        Ok((e, inv))
    }

    fn frame_field(&self) -> TensorFieldSpec {
        let f = self.frame.clone();
        TensorFieldSpec::new(vec![Axis::Contra, Axis::Co], vec![self.n, self.n], move |x| {
            Ok(DenseTensor::from_matrix(Axis::Contra, Axis::Co, &f(x)?))
        })
    }

    /// `∂_μ E` for every μ.
    fn frame_partials(&self, chart: &Chart, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let d = partials(&self.frame_field(), chart, x)?;
        Ok((0..self.n).map(|mu| d.leading_slice(mu).to_matrix()).collect())
    }

    /// Lie brackets of frame vectors in frame components: `[E_a, E_b] = c^k_{ab} E_k`.
    pub fn frame_brackets(&self, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
        let n = self.n;
        let (e, inv) = self.frame_at(x)?;
        let de = self.frame_partials(chart, x)?;
        let mut out = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]);
        for a in 0..n {
            for b in 0..n {
                // coordinate components of [E_a, E_b]
                let mut v = nalgebra::DVector::zeros(n);
                for k in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += e[(i, a)] * de[i][(k, b)] - e[(i, b)] * de[i][(k, a)];
                    }
                    v[k] = s;
                }
                let w = &inv * v;
                for c in 0..n {
                    out.set(&[c, a, b], w[c]);
                }
            }
        }
        Ok(out)
    }

    /// Torsion in frame components including the bracket term:
    /// `T^c_{ab} = ω^c_{ab} − ω^c_{ba} − c^c_{ab}`.
    pub fn frame_torsion(&self, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
        let w = self.coeffs.eval(x)?;
        let mut t = torsion_value(&w);
        t.axpy(-1.0, &self.frame_brackets(chart, x)?)?;
        Ok(t)
    }

    /// Coordinate coefficients as a field.
    pub fn to_coordinate(&self, chart: &Chart) -> ConnectionCoeffs {
        let (me, chart) = (self.clone(), chart.clone());
        let n = self.n;
        let field = TensorFieldSpec::new(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3], move |x| {
            frame_to_coordinate_unchecked(&me, &chart, x)
        });
        ConnectionCoeffs {
            field,
            symmetric: false,
        }
    }
}

fn frame_to_coordinate_unchecked(
    ffc: &FrameFieldConnection,
    chart: &Chart,
    x: &[f64],
) -> Result<DenseTensor> {
    let n = ffc.n;
    let (e, inv) = ffc.frame_at(x)?;
    let de = ffc.frame_partials(chart, x)?;
    let w = ffc.coeffs.eval(x)?;
    let mut out = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![n; 3]);
    for i in 0..n {
        // −∂_i E · E⁻¹
        let mut gi = -(&de[i] * &inv);
        // E ω(E⁻¹_i, E⁻¹_j) with ω_a = (ω^c_{ab})
        for a in 0..n {
            let ca = inv[(a, i)];
            if ca == 0.0 {
                continue;
            }
            let wa = DMatrix::from_fn(n, n, |c, b| w.get(&[c, a, b]));
            gi += (&e * wa * &inv) * ca;
        }
        for k in 0..n {
            for j in 0..n {
                out.set(&[k, i, j], gi[(k, j)]);
            }
        }
    }
    Ok(out)
}

/// Coordinate connection coefficients of a moving-frame connection at `x`.
pub fn frame_to_coordinate(ffc: &FrameFieldConnection, chart: &Chart, x: &[f64]) -> Result<DenseTensor> {
    chart.check_interior(x)?;
    frame_to_coordinate_unchecked(ffc, chart, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_field<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> TensorFieldSpec {
        TensorFieldSpec::new(vec![], vec![], move |x| Ok(DenseTensor::scalar(f(x))))
    }

    fn sphere() -> (MetricField, Chart) {
        let g = MetricField::new(2, |x| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin().powi(2)]));
        let chart = Chart::new(vec![0.2, -PI], vec![PI - 0.2, PI], 0.05).unwrap();
        (g, chart)
    }

    #[test]
    fn fd_polynomial_and_constant() {
        let chart = Chart::cube(2, -5.0, 5.0, 0.1).unwrap();
        let f = scalar_field(|x| x[0] * x[0]);
        let d = fd_partial(&f, &chart, &[3.0, 0.0], 0).unwrap();
        assert!((d.data()[0] - 6.0).abs() < 1e-8);
        let c = scalar_field(|_| 2.5);
        assert!(fd_partial(&c, &chart, &[1.0, 1.0], 1).unwrap().data()[0].abs() < 1e-12);
    }

    #[test]
    fn fd_sine_matches_cosine() {
        let chart = Chart::cube(1, -1.0, 1.0, 0.1).unwrap();
        let f = scalar_field(|x| x[0].sin());
        let d = fd_partial(&f, &chart, &[0.0], 0).unwrap();
        assert!((d.data()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fd_stencil_outside_box() {
        let chart = Chart::cube(1, 0.0, 1.0, 0.1).unwrap();
        let f = scalar_field(|x| x[0]);
        assert!(matches!(
            fd_partial(&f, &chart, &[0.0], 0),
            Err(GeomError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn sphere_christoffel() {
        let (g, chart) = sphere();
        let th = PI / 3.0;
        let gam = christoffel(&g, &chart, &[th, 0.3]).unwrap();
        assert!((gam.get(&[0, 1, 1]) + th.sin() * th.cos()).abs() < 1e-8);
        assert!((gam.get(&[1, 0, 1]) - th.cos() / th.sin()).abs() < 1e-8);
        assert!((gam.get(&[1, 1, 0]) - gam.get(&[1, 0, 1])).abs() < 1e-12);
    }

    #[test]
    fn half_plane_christoffel() {
        let g = MetricField::new(2, |x| DMatrix::identity(2, 2) / (x[1] * x[1]));
        let chart = Chart::new(vec![-2.0, 0.5], vec![2.0, 4.0], 0.05).unwrap();
        let gam = christoffel(&g, &chart, &[0.1, 2.0]).unwrap();
        assert!((gam.get(&[0, 0, 1]) + 0.5).abs() < 1e-8);
    }

    #[test]
    fn euclidean_is_flat() {
        let g = MetricField::euclidean(3);
        let chart = Chart::cube(3, -1.0, 1.0, 0.1).unwrap();
        let lc = ConnectionCoeffs::levi_civita(&g, &chart);
        let x = [0.1, 0.2, -0.3];
        assert!(lc.value(&x).unwrap().max_abs() < 1e-12);
        assert!(curvature(&lc, &chart, &x).unwrap().max_abs() < 1e-12);
        assert!(torsion(&lc, &x).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sphere_curvature_at_equator() {
        let (g, chart) = sphere();
        let lc = ConnectionCoeffs::levi_civita(&g, &chart);
        let x = [PI / 2.0, 0.4];
        let r = curvature(&lc, &chart, &x).unwrap();
        let low = lower_first(&r, &g.matrix(&x).unwrap()).unwrap();
        assert!((low.get(&[0, 1, 0, 1]) - 1.0).abs() < 1e-7, "{}", low.get(&[0, 1, 0, 1]));
    }

    #[test]
    fn metricity_of_levi_civita() {
        let (g, chart) = sphere();
        let lc = ConnectionCoeffs::levi_civita(&g, &chart);
        let dg = covariant_derivative(&lc, &chart, g.field(), &[1.1, 0.7]).unwrap();
        assert!(dg.max_abs() < 1e-8, "{}", dg.max_abs());
    }

    #[test]
    fn torsion_of_single_coefficient() {
        let mut gam = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3]);
        gam.set(&[0, 0, 1], 0.7);
        let t = difference_torsion(&gam).unwrap();
        assert_eq!(t.get(&[0, 0, 1]), 0.7);
        assert_eq!(t.get(&[0, 1, 0]), -0.7);
    }

    #[test]
    fn difference_torsion_example() {
        // S = e^1 ⊗ (e^2 ⊗ e_1): S(e1)(e2) = e1
        let mut s = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3]);
        s.set(&[0, 0, 1], 1.0);
        let t = difference_torsion(&s).unwrap();
        assert_eq!(t.get(&[0, 0, 1]), 1.0);
        assert_eq!(t.get(&[0, 1, 0]), -1.0);
    }

    #[test]
    fn constant_frame_is_similarity() {
        let chart = Chart::cube(2, -1.0, 1.0, 0.1).unwrap();
        let e = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let mut w = DenseTensor::zeros(vec![Axis::Contra, Axis::Co, Axis::Co], vec![2; 3]);
        w.set(&[1, 0, 0], 0.5);
        let ffc = FrameFieldConnection::new(
            2,
            {
                let e = e.clone();
                move |_| Ok(e.clone())
            },
            TensorFieldSpec::constant(w.clone(), 2),
        )
        .unwrap();
        let gam = frame_to_coordinate(&ffc, &chart, &[0.0, 0.0]).unwrap();
        // ∇_{∂_i}∂_j = E ω(E⁻¹∂_i, E⁻¹∂_j)
        let inv = e.clone().try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut v = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                v += e[(k, c)] * w.get(&[c, a, b]) * inv[(a, i)] * inv[(b, j)];
                            }
                        }
                    }
                    assert!((gam.get(&[k, i, j]) - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn covariant_derivative_rejects_lie_axes() {
        let chart = Chart::cube(2, -1.0, 1.0, 0.1).unwrap();
        let t = TensorFieldSpec::zero(vec![Axis::Lie], vec![3], 2);
        let r = covariant_derivative(&ConnectionCoeffs::flat(2), &chart, &t, &[0.0, 0.0]);
        assert!(matches!(r, Err(GeomError::RepMismatch(_))));
    }
}
