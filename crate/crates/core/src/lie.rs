//! Finite-dimensional Lie algebras, representations, invariant inner products
//! and the infinitesimal action of `so(n) ⊕ 𝔨` on frame-expressed tensors.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::tensor::{Axis, DenseTensor};

/// Structure constants `c^k_{ij}` with `[b_i, b_j] = c^k_{ij} b_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    name: String,
    labels: Vec<String>,
    c: Vec<f64>,
}

impl LieAlgebra {
    /// `c` is indexed `[k][i][j]`.
    pub fn new(name: &str, labels: Vec<String>, c: Vec<f64>) -> Result<Self> {
        let m = labels.len();
        if c.len() != m * m * m {
            return Err(GeomError::Invalid(format!(
                "{} structure constants for dimension {m}",
                c.len()
            )));
        }
        let alg = Self {
            name: name.to_string(),
            labels,
            c,
        };
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    if alg.structure(k, i, j) != -alg.structure(k, j, i) {
                        return Err(GeomError::Invalid(format!(
                            "structure constants of {name} are not antisymmetric"
                        )));
                    }
                }
            }
        }
        let jac = alg.jacobi_residual();
        if jac > 1e-10 {
            return Err(GeomError::Invalid(format!("Jacobi identity fails for {name} ({jac:e})")));
        }
        Ok(alg)
    }

    /// Algebra spanned by Frobenius-orthogonal matrices closed under the commutator.
    pub fn from_matrices(name: &str, labels: Vec<String>, mats: &[DMatrix<f64>]) -> Result<Self> {
        let m = mats.len();
        let mut c = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                let br = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                let mut rebuilt = DMatrix::zeros(br.nrows(), br.ncols());
                for k in 0..m {
                    let coef = br.dot(&mats[k]) / mats[k].dot(&mats[k]);
                    c[(k * m + i) * m + j] = coef;
                    rebuilt += &mats[k] * coef;
                }
                let err = (br - rebuilt).amax();
                if err > 1e-12 {
                    return Err(GeomError::NotSubalgebra(err));
                }
            }
        }
        // exact antisymmetry
        for k in 0..m {
            for i in 0..m {
                for j in (i + 1)..m {
                    let v = c[(k * m + i) * m + j];
                    c[(k * m + j) * m + i] = -v;
                }
                c[(k * m + i) * m + i] = 0.0;
            }
        }
        Self::new(name, labels, c)
    }

    pub fn abelian(name: &str, m: usize) -> Self {
        let labels = (1..=m).map(|i| format!("t{i}")).collect();
        Self {
            name: name.to_string(),
            labels,
            c: vec![0.0; m * m * m],
        }
    }

    /// The zero algebra.
    pub fn trivial() -> Self {
        Self::abelian("0", 0)
    }

    pub fn u1() -> Self {
        Self::abelian("u(1)", 1)
    }

    /// `so(n)` in the basis of [`so_basis`].
    pub fn so(n: usize) -> Self {
        let (labels, mats) = so_basis(n);
        Self::from_matrices(&format!("so({n})"), labels, &mats).expect("so(n) basis closes")
    }

    /// `su(2)` in the basis `e_k = −iσ_k`, so `[e_i, e_j] = 2ε_{ijk} e_k`.
    pub fn su2() -> Self {
        let mut c = vec![0.0; 27];
        for (i, j, k, s) in levi_civita_3() {
            c[(k * 3 + i) * 3 + j] = 2.0 * s;
        }
        Self::new("su(2)", vec!["e1".into(), "e2".into(), "e3".into()], c).expect("su(2) is a Lie algebra")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "u(1)" | "u1" => Ok(Self::u1()),
            "su(2)" | "su2" => Ok(Self::su2()),
            "0" | "trivial" => Ok(Self::trivial()),
            _ => {
                let inner = name
                    .strip_prefix("so(")
                    .and_then(|s| s.strip_suffix(')'))
                    .or_else(|| name.strip_prefix("so"));
                match inner.and_then(|s| s.parse::<usize>().ok()) {
                    Some(n) if n >= 1 => Ok(Self::so(n)),
                    _ => Err(GeomError::Invalid(format!("unknown Lie algebra `{name}`"))),
                }
            }
        }
    }

    pub fn direct_sum(a: &LieAlgebra, b: &LieAlgebra) -> Self {
        let (ma, mb) = (a.dim(), b.dim());
        let m = ma + mb;
        let mut c = vec![0.0; m * m * m];
        for k in 0..ma {
            for i in 0..ma {
                for j in 0..ma {
                    c[(k * m + i) * m + j] = a.structure(k, i, j);
                }
            }
        }
        for k in 0..mb {
            for i in 0..mb {
                for j in 0..mb {
                    c[((k + ma) * m + i + ma) * m + j + ma] = b.structure(k, i, j);
                }
            }
        }
        let mut labels = a.labels.clone();
        labels.extend(b.labels.iter().cloned());
        Self {
            name: format!("{}+{}", a.name, b.name),
            labels,
            c,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn structure(&self, k: usize, i: usize, j: usize) -> f64 {
        let m = self.dim();
        self.c[(k * m + i) * m + j]
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.ad(x) * y
    }

    /// Matrix of `ad_x`: `(ad_x)_{kj} = Σ_i x_i c^k_{ij}`.
    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |k, j| (0..m).map(|i| x[i] * self.structure(k, i, j)).sum())
    }

    pub fn ad_basis(&self, i: usize) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |k, j| self.structure(k, i, j))
    }

    pub fn killing(&self) -> DMatrix<f64> {
        let m = self.dim();
        let ads: Vec<_> = (0..m).map(|i| self.ad_basis(i)).collect();
        DMatrix::from_fn(m, m, |i, j| (&ads[i] * &ads[j]).trace())
    }

    /// Orthonormal basis of the center.
    pub fn center(&self) -> DMatrix<f64> {
        let m = self.dim();
        if m == 0 {
            return DMatrix::zeros(0, 0);
        }
        // z is central iff ad_{b_j} z = 0 for all j
        let mut rows = DMatrix::zeros(m * m, m);
        for j in 0..m {
            let a = self.ad_basis(j);
            rows.view_mut((j * m, 0), (m, m)).copy_from(&a);
        }
        nullspace(&rows, 1e-12)
    }

    pub fn jacobi_residual(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for out in 0..m {
                        let mut s = 0.0;
                        for l in 0..m {
                            s += self.structure(out, i, l) * self.structure(l, j, k)
                                + self.structure(out, j, l) * self.structure(l, k, i)
                                + self.structure(out, k, l) * self.structure(l, i, j);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest component of `[u, v]` outside `span(basis)` over basis pairs;
    /// `basis` must have orthonormal columns.
    pub fn closure_residual(&self, basis: &DMatrix<f64>) -> f64 {
        let mut worst = 0.0_f64;
        let p = basis * basis.transpose();
        for a in 0..basis.ncols() {
            for b in 0..basis.ncols() {
                let br = self.bracket(&basis.column(a).into_owned(), &basis.column(b).into_owned());
                let off = &br - &p * &br;
                worst = worst.max(off.norm());
            }
        }
        worst
    }
}

fn levi_civita_3() -> [(usize, usize, usize, f64); 6] {
    [
        (0, 1, 2, 1.0),
        (1, 2, 0, 1.0),
        (2, 0, 1, 1.0),
        (1, 0, 2, -1.0),
        (2, 1, 0, -1.0),
        (0, 2, 1, -1.0),
    ]
}

/// Standard basis of `so(n)` acting on `ℝ^n`.
///
/// `n = 2`: `J` with `J e1 = e2`. `n = 3`: `L_i` with `(L_i)_{jk} = −ε_{ijk}`, so
/// `[L_i, L_j] = ε_{ijk} L_k` and `L_3 e1 = e2`. Otherwise the rotations `E_{ab}`
/// (`a < b`) with `E_{ab} e_a = e_b`.
pub fn so_basis(n: usize) -> (Vec<String>, Vec<DMatrix<f64>>) {
    if n == 3 {
        let mut mats = vec![DMatrix::zeros(3, 3); 3];
        for (i, j, k, s) in levi_civita_3() {
            mats[i][(j, k)] = -s;
        }
        return (vec!["L1".into(), "L2".into(), "L3".into()], mats);
    }
    let mut labels = Vec::new();
    let mut mats = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let mut m = DMatrix::zeros(n, n);
            m[(b, a)] = 1.0;
            m[(a, b)] = -1.0;
            labels.push(if n == 2 { "J".to_string() } else { format!("E{}{}", a + 1, b + 1) });
            mats.push(m);
        }
    }
    (labels, mats)
}

/// Infinitesimal representation `ρ_*(b_i)` on a vector space of dim `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRep {
    dim: usize,
    mats: Vec<DMatrix<f64>>,
}

impl LinearRep {
    /// Checks `ρ([b_i, b_j]) = [ρ(b_i), ρ(b_j)]` within 1e-9.
    pub fn new(alg: &LieAlgebra, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.len() != alg.dim() {
            return Err(GeomError::RepMismatch(format!(
                "{} matrices for an algebra of dim {}",
                mats.len(),
                alg.dim()
            )));
        }
        let dim = mats.first().map(|m| m.nrows()).unwrap_or(0);
        if mats.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(GeomError::RepMismatch("matrices of different sizes".into()));
        }
        let rep = Self { dim, mats };
        let err = rep.homomorphism_residual(alg);
        if err > 1e-9 {
            return Err(GeomError::RepMismatch(format!("not a representation (residual {err:e})")));
        }
        Ok(rep)
    }

    pub fn adjoint(alg: &LieAlgebra) -> Self {
        Self {
            dim: alg.dim(),
            mats: (0..alg.dim()).map(|i| alg.ad_basis(i)).collect(),
        }
    }

    /// The defining representation of `so(n)` on `ℝ^n`.
    pub fn vector(n: usize) -> Self {
        Self {
            dim: n,
            mats: so_basis(n).1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn act(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (c, m) in x.iter().zip(&self.mats) {
            if *c != 0.0 {
                out += m * *c;
            }
        }
        out
    }

    pub fn homomorphism_residual(&self, alg: &LieAlgebra) -> f64 {
        let m = alg.dim();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                let lhs: Vec<f64> = (0..m).map(|k| alg.structure(k, i, j)).collect();
                let l = self.act(&lhs);
                let r = &self.mats[i] * &self.mats[j] - &self.mats[j] * &self.mats[i];
                worst = worst.max((l - r).amax());
            }
        }
        worst
    }
}

/// Matrix exponential of `Σ θ_i ρ_*(b_i)`.
pub fn group_exp(theta: &[f64], rep: &LinearRep) -> DMatrix<f64> {
    rep.act(theta).exp()
}

/// An `ad`-invariant positive definite inner product on a Lie algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AdInvariantInner {
    m: DMatrix<f64>,
}

impl AdInvariantInner {
    pub fn new(alg: &LieAlgebra, m: DMatrix<f64>) -> Result<Self> {
        let d = alg.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(GeomError::Invalid("inner product size".into()));
        }
        if (&m - m.transpose()).amax() > 1e-12 || (d > 0 && m.clone().cholesky().is_none()) {
            return Err(GeomError::NotReductive("inner product is not positive definite".into()));
        }
        let me = Self { m };
        let err = me.invariance_residual(alg);
        if err > 1e-9 {
            return Err(GeomError::NotInvariant(err));
        }
        Ok(me)
    }

    /// Negative Killing form plus the identity on the center.
    pub fn default_for(alg: &LieAlgebra) -> Result<Self> {
        let z = alg.center();
        let m = -alg.killing() + &z * z.transpose();
        Self::new(alg, m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.m * y)[(0, 0)]
    }

    pub fn invariance_residual(&self, alg: &LieAlgebra) -> f64 {
        let d = alg.dim();
        let mut worst = 0.0_f64;
        for a in 0..d {
            // ⟨[a,b],c⟩ + ⟨b,[a,c]⟩ = (ad_aᵀ M + M ad_a)_{bc}
            let ad = alg.ad_basis(a);
            let s = ad.transpose() * &self.m + &self.m * &ad;
            worst = worst.max(s.amax());
        }
        worst
    }
}

/// Orthonormal basis (columns) of the kernel of `m`; singular values at or
/// below `rel_tol × σ_max` count as zero.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (_, sv, v) = svd_full(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let cut = rel_tol * smax;
    select_kernel(&sv, &v, cut)
}

/// Kernel with an absolute singular-value threshold.
pub fn nullspace_abs(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (_, sv, v) = svd_full(m);
    select_kernel(&sv, &v, tol)
}

/// Singular values of `m` padded with zeros to the column count, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv = svd_full(m).1;
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn select_kernel(sv: &[f64], v: &DMatrix<f64>, cut: f64) -> DMatrix<f64> {
    let c = v.nrows();
    let cols: Vec<DVector<f64>> = (0..c)
        .filter(|&i| sv[i] <= cut)
        .map(|i| v.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Returns (rows, singular values per right vector, V with right singular
/// vectors as columns) with `V` square.
fn svd_full(m: &DMatrix<f64>) -> (usize, Vec<f64>, DMatrix<f64>) {
    let c = m.ncols();
    if c == 0 {
        return (m.nrows(), vec![], DMatrix::zeros(0, 0));
    }
    let padded = if m.nrows() < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (m.nrows(), c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    (m.nrows(), sv, vt.transpose())
}

/// Orthonormal basis of the column span (columns below `tol` dropped).
pub fn orthonormalize(cols: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if cols.ncols() == 0 {
        return cols.clone();
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .map(|i| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        DMatrix::zeros(cols.nrows(), 0)
    } else {
        DMatrix::from_columns(&keep)
    }
}

/// Principal angles between the column spans of orthonormal `a` and `b`,
/// ascending; `min(dim a, dim b)` values.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return vec![];
    }
    let s = (a.transpose() * b).singular_values();
    let mut angles: Vec<f64> = s.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    angles.truncate(a.ncols().min(b.ncols()));
    angles
}

/// Largest angle between a unit vector of `span(a)` and `span(b)`; zero iff
/// `span(a) ⊆ span(b)`. Both orthonormal.
pub fn containment_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    if b.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let proj = b.transpose() * a;
    let s = proj.singular_values();
    let smin = if a.ncols() > b.ncols() {
        0.0
    } else {
        s.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    smin.clamp(-1.0, 1.0).acos()
}

/// Projector onto `span(h)` along its `inner`-orthogonal complement.
pub fn inner_projector(h: &DMatrix<f64>, inner: &AdInvariantInner) -> DMatrix<f64> {
    let m = inner.matrix().nrows();
    if h.ncols() == 0 {
        return DMatrix::zeros(m, m);
    }
    let q = inner.matrix();
    let gram = h.transpose() * q * h;
    let inv = gram
        .cholesky()
        .expect("basis of a subspace has a definite Gram matrix")
        .inverse();
    h * inv * h.transpose() * q
}

/// `inner`-orthogonal complement of the subalgebra `span(h)` (orthonormal
/// columns), checked for `[h, k] ⊆ k`.
pub fn reductive_complement(alg: &LieAlgebra, h: &DMatrix<f64>, inner: &AdInvariantInner) -> Result<DMatrix<f64>> {
    let m = alg.dim();
    let h = orthonormalize(h, 1e-12);
    let closure = alg.closure_residual(&h);
    if closure > 1e-9 {
        return Err(GeomError::NotSubalgebra(closure));
    }
    if h.ncols() == 0 {
        return Ok(DMatrix::identity(m, m));
    }
    let constraint = h.transpose() * inner.matrix();
    let k = nullspace(&constraint, 1e-12);
    let ph = inner_projector(&h, inner);
    let mut worst = 0.0_f64;
    for a in 0..h.ncols() {
        for b in 0..k.ncols() {
            let br = alg.bracket(&h.column(a).into_owned(), &k.column(b).into_owned());
            worst = worst.max((&ph * br).norm());
        }
    }
    if worst > 1e-8 {
        return Err(GeomError::NotInvariant(worst));
    }
    Ok(k)
}

/// The algebra `𝔤 = so(n) ⊕ 𝔨` acting on frame-expressed tensors: the `so(n)`
/// part rotates contravariant and covariant axes, the `𝔨` part acts on Lie axes
/// through the representation registered for each tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameAlgebra {
    n: usize,
    fiber: LieAlgebra,
    total: LieAlgebra,
    vector: LinearRep,
}

/// A tensor together with the representation acting on its Lie axes.
#[derive(Clone, Copy, Debug)]
pub struct Registered<'a> {
    pub tensor: &'a DenseTensor,
    pub rep: Option<&'a LinearRep>,
}

impl FrameAlgebra {
    pub fn new(n: usize, fiber: &LieAlgebra) -> Self {
        let so = LieAlgebra::so(n);
        Self {
            n,
            fiber: fiber.clone(),
            total: LieAlgebra::direct_sum(&so, fiber),
            vector: LinearRep::vector(n),
        }
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn so_dim(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn fiber(&self) -> &LieAlgebra {
        &self.fiber
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.total
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// Default invariant inner product on `𝔤`: the so(n) part with its default
    /// and the fiber part given.
    pub fn inner(&self, fiber_inner: &AdInvariantInner) -> Result<AdInvariantInner> {
        let so = AdInvariantInner::default_for(&LieAlgebra::so(self.n))?;
        let s = self.so_dim();
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        m.view_mut((0, 0), (s, s)).copy_from(so.matrix());
        m.view_mut((s, s), (self.fiber.dim(), self.fiber.dim()))
            .copy_from(fiber_inner.matrix());
        AdInvariantInner::new(&self.total, m)
    }

    /// Rotation generator of the `so(n)` part of `b` as an `n × n` matrix.
    pub fn rotation_part(&self, b: &[f64]) -> DMatrix<f64> {
        self.vector.act(&b[..self.so_dim()])
    }

    /// `so(n)` coordinates of an antisymmetric matrix.
    pub fn so_coords(&self, a: &DMatrix<f64>) -> Vec<f64> {
        self.vector
            .generators()
            .iter()
            .map(|g| a.dot(g) / g.dot(g))
            .collect()
    }

    fn check(&self, r: &Registered<'_>) -> Result<()> {
        for (ax, d) in r.tensor.axes().iter().zip(r.tensor.dims()) {
            match ax {
                Axis::Contra | Axis::Co if *d != self.n => {
                    return Err(GeomError::AxisMismatch(format!(
                        "tangent axis of dim {d} for base dim {}",
                        self.n
                    )))
                }
                Axis::Lie => match r.rep {
                    None => return Err(GeomError::RepMismatch("Lie axis with no registered representation".into())),
                    Some(rep) if rep.dim() != *d || rep.generators().len() != self.fiber.dim() => {
                        return Err(GeomError::RepMismatch(format!(
                            "representation of dim {} on a Lie axis of dim {d}",
                            rep.dim()
                        )))
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }

    fn apply_matrices(
        &self,
        r: &Registered<'_>,
        tangent: &DMatrix<f64>,
        cotangent: &DMatrix<f64>,
        lie: Option<&DMatrix<f64>>,
        derivation: bool,
    ) -> DenseTensor {
        let t = r.tensor;
        if derivation {
            let mut out = DenseTensor::zeros(t.axes().to_vec(), t.dims().to_vec());
            for (p, ax) in t.axes().iter().enumerate() {
                let m = match ax {
                    Axis::Contra => tangent,
                    Axis::Co => cotangent,
                    Axis::Lie => lie.expect("checked"),
                };
                out.axpy(1.0, &t.apply_axis(p, m)).expect("same shape");
            }
            out
        } else {
            let mut out = t.clone();
            for (p, ax) in t.axes().iter().enumerate() {
                let m = match ax {
                    Axis::Contra => tangent,
                    Axis::Co => cotangent,
                    Axis::Lie => lie.expect("checked"),
                };
                out = out.apply_axis(p, m);
            }
            out
        }
    }

    /// Leibniz action `b·η`: `+U` on contravariant axes, `−Uᵀ` on covariant
    /// axes, `ρ(b_𝔨)` on Lie axes.
    pub fn act(&self, b: &[f64], r: Registered<'_>) -> Result<DenseTensor> {
        if b.len() != self.dim() {
            return Err(GeomError::RepMismatch(format!(
                "element with {} coordinates for an algebra of dim {}",
                b.len(),
                self.dim()
            )));
        }
        self.check(&r)?;
        let u = self.rotation_part(b);
        let ut = -u.transpose();
        let lie = r.rep.map(|rep| rep.act(&b[self.so_dim()..]));
        Ok(self.apply_matrices(&r, &u, &ut, lie.as_ref(), true))
    }

    /// Group action of `exp(θ)`: `R` on contravariant axes, `R⁻ᵀ` on
    /// covariant axes, `exp(ρ(θ_𝔨))` on Lie axes.
    pub fn act_group(&self, theta: &[f64], r: Registered<'_>) -> Result<DenseTensor> {
        self.check(&r)?;
        let rot = self.rotation_part(theta).exp();
        let rot_it = rot.clone().try_inverse().expect("exponential is invertible").transpose();
        let lie = r.rep.map(|rep| rep.act(&theta[self.so_dim()..]).exp());
        Ok(self.apply_matrices(&r, &rot, &rot_it, lie.as_ref(), false))
    }

    /// Column `j` is the concatenation of `b_j · t` over all tensors.
    pub fn stacked_action_matrix(&self, tensors: &[Registered<'_>]) -> Result<DMatrix<f64>> {
        let rows: usize = tensors.iter().map(|r| r.tensor.len()).sum();
        let m = self.dim();
        let mut out = DMatrix::zeros(rows, m);
        for j in 0..m {
            let mut b = vec![0.0; m];
            b[j] = 1.0;
            let mut row = 0;
            for r in tensors {
                let a = self.act(&b, *r)?;
                for (i, v) in a.data().iter().enumerate() {
                    out[(row + i, j)] = *v;
                }
                row += a.len();
            }
        }
        Ok(out)
    }
}

/// Spec-level helper: `b·η` for `𝔤 = so(n) ⊕ 𝔨`.
pub fn tensor_action(alg: &FrameAlgebra, b: &[f64], eta: &DenseTensor, rep: Option<&LinearRep>) -> Result<DenseTensor> {
    alg.act(b, Registered { tensor: eta, rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn so3_brackets_are_cross_products() {
        let so3 = LieAlgebra::so(3);
        let b = so3.bracket(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]));
        assert_eq!(b, v(&[0.0, 0.0, 1.0]));
        assert!(so3.jacobi_residual() < 1e-14);
    }

    #[test]
    fn su2_brackets() {
        let su2 = LieAlgebra::su2();
        let b = su2.bracket(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]));
        assert_eq!(b, v(&[0.0, 0.0, 2.0]));
    }

    #[test]
    fn so4_is_closed() {
        let so4 = LieAlgebra::so(4);
        assert_eq!(so4.dim(), 6);
        assert!(so4.jacobi_residual() < 1e-12);
        assert!(LinearRep::vector(4).homomorphism_residual(&so4) < 1e-12);
    }

    #[test]
    fn default_inner_products() {
        let so3 = LieAlgebra::so(3);
        let ip = AdInvariantInner::default_for(&so3).unwrap();
        assert!((ip.matrix() - DMatrix::<f64>::identity(3, 3) * 2.0).amax() < 1e-12);
        let su2 = AdInvariantInner::default_for(&LieAlgebra::su2()).unwrap();
        assert!((su2.matrix() - DMatrix::<f64>::identity(3, 3) * 8.0).amax() < 1e-12);
        let u1 = AdInvariantInner::default_for(&LieAlgebra::u1()).unwrap();
        assert_eq!(u1.matrix()[(0, 0)], 1.0);
        let sum = LieAlgebra::direct_sum(&so3, &LieAlgebra::u1());
        let ip = AdInvariantInner::default_for(&sum).unwrap();
        assert_eq!(ip.matrix()[(3, 3)], 1.0);
    }

    #[test]
    fn non_invariant_inner_is_rejected() {
        let so3 = LieAlgebra::so(3);
        let m = DMatrix::from_diagonal(&v(&[1.0, 2.0, 3.0]));
        assert!(matches!(AdInvariantInner::new(&so3, m), Err(GeomError::NotInvariant(_))));
    }

    #[test]
    fn rotation_generator_on_vectors_and_metric() {
        let fa = FrameAlgebra::new(2, &LieAlgebra::trivial());
        let e1 = DenseTensor::vector(&[1.0, 0.0]);
        let je1 = tensor_action(&fa, &[1.0], &e1, None).unwrap();
        assert_eq!(je1.data(), &[0.0, 1.0]);
        let g = DenseTensor::from_matrix(Axis::Co, Axis::Co, &DMatrix::identity(2, 2));
        assert!(tensor_action(&fa, &[0.7], &g, None).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rotation_generator_on_covariant_square() {
        // (J·η)(w1,w2) = −η(Jw1,w2) − η(w1,Jw2) with η = e^1⊗e^1 gives e^2⊗e^1 + e^1⊗e^2
        let fa = FrameAlgebra::new(2, &LieAlgebra::trivial());
        let e1 = DenseTensor::covector(&[1.0, 0.0]);
        let eta = e1.outer(&e1);
        let out = tensor_action(&fa, &[1.0], &eta, None).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn lie_axis_needs_rep() {
        let fa = FrameAlgebra::new(2, &LieAlgebra::u1());
        let t = DenseTensor::from_vec(vec![Axis::Lie], vec![1], vec![1.0]).unwrap();
        assert!(matches!(tensor_action(&fa, &[0.0, 1.0], &t, None), Err(GeomError::RepMismatch(_))));
        let wrong = LinearRep::adjoint(&LieAlgebra::su2());
        assert!(matches!(
            tensor_action(&fa, &[0.0, 1.0], &t, Some(&wrong)),
            Err(GeomError::RepMismatch(_))
        ));
    }

    #[test]
    fn nullspace_examples() {
        assert_eq!(nullspace(&DMatrix::identity(3, 3), 1e-8).ncols(), 0);
        assert_eq!(nullspace(&DMatrix::zeros(2, 4), 1e-8).ncols(), 4);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let k = nullspace(&m, 1e-8);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).amax() < 1e-10);
        assert!((k.transpose() * &k - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn stacked_action_examples() {
        let fa = FrameAlgebra::new(2, &LieAlgebra::trivial());
        let z = DenseTensor::zeros(vec![Axis::Co, Axis::Co], vec![2, 2]);
        let m = fa.stacked_action_matrix(&[Registered { tensor: &z, rep: None }]).unwrap();
        assert_eq!(nullspace(&m, 1e-8).ncols(), 1);
        let e1 = DenseTensor::vector(&[1.0, 0.0]);
        let m = fa.stacked_action_matrix(&[Registered { tensor: &e1, rep: None }]).unwrap();
        assert_eq!(nullspace(&m, 1e-8).ncols(), 0);
    }

    #[test]
    fn complement_in_so3() {
        let so3 = LieAlgebra::so(3);
        let ip = AdInvariantInner::default_for(&so3).unwrap();
        let h = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let k = reductive_complement(&so3, &h, &ip).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(k.row(2).amax() < 1e-12);
        assert_eq!(reductive_complement(&so3, &DMatrix::identity(3, 3), &ip).unwrap().ncols(), 0);
        assert_eq!(reductive_complement(&so3, &DMatrix::zeros(3, 0), &ip).unwrap().ncols(), 3);
        let bad = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(reductive_complement(&so3, &bad, &ip), Err(GeomError::NotSubalgebra(_))));
    }

    #[test]
    fn exp_of_rotation_generator() {
        let r = group_exp(&[FRAC_PI_2], &LinearRep::vector(2));
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r - expect).amax() < 1e-12);
        assert_eq!(group_exp(&[0.0, 0.0, 0.0], &LinearRep::vector(3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn principal_angle_basics() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(containment_angle(&a, &b) < 1e-12);
        let c = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert!((containment_angle(&c, &b) - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(principal_angles(&a, &b).len(), 1);
    }
}
