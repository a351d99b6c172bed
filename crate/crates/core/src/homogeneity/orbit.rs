//! Infinitesimal homogeneity between two points: is there `θ ∈ 𝔤` with
//! `exp(θ)·σ1^(i) = σ2^(i)` for every level `i ≤ depth`?

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::chain::stabilizer_chain;
use super::tower::DerivativeTower;
use crate::error::{GeomError, Result};
use crate::lie::{FrameAlgebra, Registered};
use crate::tensor::{Axis, DenseTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitOptions {
    pub starts: usize,
    pub max_iter: usize,
    /// Relative residual below which the towers count as matched.
    pub match_tol: f64,
    /// Relative agreement required of the invariants before searching.
    pub prescreen_tol: f64,
    pub seed: u64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iter: 500,
            match_tol: 1e-6,
            prescreen_tol: 1e-5,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoMatchReason {
    SingerMismatch { first: Option<usize>, second: Option<usize> },
    Invariant { name: String, first: f64, second: f64 },
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub matched: bool,
    /// Best algebra coordinates found (empty if the search never ran).
    pub theta: Vec<f64>,
    /// Element `s` of the stabilizer of `σ1`; the transformation found is
    /// `exp(θ)·exp(s)`. Zero unless the sweep along the stabilizer improved on
    /// the plain search.
    pub shift: Vec<f64>,
    /// `‖exp(θ)·exp(s)·σ1 − σ2‖ / max(1, ‖σ2‖)` over levels `0..=depth`.
    pub residual: f64,
    pub reason: Option<NoMatchReason>,
}

impl MatchResult {
    fn rejected(reason: NoMatchReason) -> Self {
        Self {
            matched: false,
            theta: vec![],
            shift: vec![],
            residual: f64::INFINITY,
            reason: Some(reason),
        }
    }
}

/// Sum over a pair of axes with the identity form.
fn trace_pair(t: &DenseTensor, p: usize, q: usize) -> DenseTensor {
    let mut perm = vec![p, q];
    perm.extend((0..t.rank()).filter(|&a| a != p && a != q));
    let moved = t.permute(&perm);
    let mut out = moved.leading_slice(0).leading_slice(0);
    for i in 1..t.dims()[p] {
        out.axpy(1.0, &moved.leading_slice(i).leading_slice(i)).expect("same shape");
    }
    out
}

/// Contracts tangent axes pairwise, then Lie axes pairwise; a scalar result is
/// returned signed, anything left over by its norm.
fn full_trace(mut t: DenseTensor) -> f64 {
    loop {
        let tangent: Vec<usize> = (0..t.rank()).filter(|&a| t.axes()[a] != Axis::Lie).collect();
        if tangent.len() >= 2 {
            t = trace_pair(&t, tangent[0], tangent[1]);
            continue;
        }
        let lie: Vec<usize> = (0..t.rank()).filter(|&a| t.axes()[a] == Axis::Lie).collect();
        if lie.len() >= 2 {
            t = trace_pair(&t, lie[0], lie[1]);
            continue;
        }
        break;
    }
    if t.rank() == 0 {
        t.data()[0]
    } else {
        t.norm()
    }
}

fn orthogonal_action(reps: &[Registered<'_>]) -> bool {
    reps.iter().all(|r| {
        r.rep
            .is_none_or(|rep| rep.generators().iter().all(|g| (g + g.transpose()).amax() < 1e-12))
    })
}

/// Quantities unchanged by the frame action: per-level norms and, for every
/// pair of tangent axes of every component, the full trace starting with that
/// pair. Empty if some registered representation is not orthogonal.
pub fn tower_invariants(t: &DerivativeTower, depth: usize) -> Vec<(String, f64)> {
    if !orthogonal_action(&t.registered(depth)) {
        return vec![];
    }
    let mut out = Vec::new();
    for k in 0..=depth.min(t.kmax) {
        out.push((format!("norm[{k}]"), t.entry_norm(k)));
        for (c, comp) in t.entries[k].iter().enumerate() {
            let tangent: Vec<usize> = (0..comp.rank()).filter(|&a| comp.axes()[a] != Axis::Lie).collect();
            for (i, &p) in tangent.iter().enumerate() {
                for &q in &tangent[i + 1..] {
                    out.push((format!("trace[{k}][{c}]({p},{q})"), full_trace(trace_pair(comp, p, q))));
                }
            }
        }
    }
    out
}

struct Problem<'a> {
    alg: &'a FrameAlgebra,
    source: Vec<Registered<'a>>,
    target: DVector<f64>,
    scale: f64,
}

impl<'a> Problem<'a> {
    fn with_source<'b>(&self, source: Vec<Registered<'b>>) -> Problem<'b>
    where
        'a: 'b,
    {
        Problem {
            alg: self.alg,
            source,
            target: self.target.clone(),
            scale: self.scale,
        }
    }

    fn residual(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let mut parts = Vec::with_capacity(self.target.len());
        for r in &self.source {
            parts.extend_from_slice(self.alg.act_group(theta, *r)?.data());
        }
        Ok(DVector::from_vec(parts) - &self.target)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let h = 1e-6;
        let mut j = DMatrix::zeros(self.target.len(), theta.len());
        let mut tp = theta.to_vec();
        for c in 0..theta.len() {
            tp[c] = theta[c] + h;
            let plus = self.residual(&tp)?;
            tp[c] = theta[c] - h;
            let minus = self.residual(&tp)?;
            tp[c] = theta[c];
            j.set_column(c, &((plus - minus) / (2.0 * h)));
        }
        Ok(j)
    }

    /// Levenberg–Marquardt from `theta`: damped Gauss–Newton steps, capped in
    /// length so the iterate stays where exponential coordinates are regular.
    fn descend(&self, mut theta: Vec<f64>, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        const MAX_STEP: f64 = 0.5;
        let mut r = self.residual(&theta)?;
        let mut f = r.norm_squared();
        let mut mu = 1e-3;
        for _ in 0..max_iter {
            if f.sqrt() / self.scale < 1e-14 {
                break;
            }
            let j = self.jacobian(&theta)?;
            let jt = j.transpose();
            let jtj = &jt * &j;
            let g = &jt * &r;
            let scale = jtj.diagonal().amax().max(1e-300);
            let mut accepted = false;
            while mu < 1e12 {
                let mut a = jtj.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += mu * scale;
                }
                let Some(step) = a.cholesky().map(|c| -c.solve(&g)) else {
                    mu *= 10.0;
                    continue;
                };
                let len = step.norm();
                let step = if len > MAX_STEP { step * (MAX_STEP / len) } else { step };
                let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
                let rt = self.residual(&trial)?;
                let ft = rt.norm_squared();
                if ft < f {
                    let stalled = f - ft <= 1e-6 * f;
                    theta = trial;
                    r = rt;
                    f = ft;
                    mu = (mu * 0.3).max(1e-15);
                    accepted = !stalled;
                    break;
                }
                mu *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        Ok((theta, f.sqrt() / self.scale))
    }
}

/// Grid points per stabilizer dimension, keeping the sweep near 4096 points.
fn sweep_points(d: usize) -> usize {
    match d {
        1 => 128,
        _ => (4096f64.powf(1.0 / d as f64).floor() as usize).max(3),
    }
}

/// `(θ, residual, s)` of the best point found along the stabilizer.
type SweepHit = (Vec<f64>, f64, Vec<f64>);

/// Minimizers form a coset of the stabilizer, along which the residual only
/// varies through difference-quotient noise. A local search lands somewhere on
/// that coset depending on its start, so the coset is swept on a fixed grid of
/// `exp(θ)·exp(s)` and the best grid point polished.
fn sweep_stabilizer(
    problem: &Problem<'_>,
    theta: &[f64],
    stab: &DMatrix<f64>,
    max_iter: usize,
) -> Result<Option<SweepHit>> {
    let d = stab.ncols();
    if d == 0 {
        return Ok(None);
    }
    let per = sweep_points(d);
    let span = 2.0 * std::f64::consts::TAU;
    let total = per.pow(d as u32);
    let shifted = |s: &DVector<f64>| -> Result<Vec<DenseTensor>> {
        problem
            .source
            .iter()
            .map(|r| problem.alg.act_group(s.as_slice(), *r))
            .collect()
    };
    let values: Vec<Result<(f64, usize)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let s = grid_point(stab, per, span, idx);
            let tensors = shifted(&s)?;
            let p = problem.with_source(registered_like(&problem.source, &tensors));
            Ok((p.residual(theta)?.norm(), idx))
        })
        .collect();
    let mut best = (f64::INFINITY, 0);
    for v in values {
        let v = v?;
        if v.0 < best.0 {
            best = v;
        }
    }
    let s = grid_point(stab, per, span, best.1);
    let tensors = shifted(&s)?;
    let p = problem.with_source(registered_like(&problem.source, &tensors));
    let (th, res) = p.descend(theta.to_vec(), max_iter)?;
    Ok(Some((th, res, s.as_slice().to_vec())))
}

fn grid_point(stab: &DMatrix<f64>, per: usize, span: f64, mut idx: usize) -> DVector<f64> {
    let mut coords = DVector::zeros(stab.ncols());
    for c in coords.iter_mut() {
        let i = idx % per;
        idx /= per;
        *c = -span / 2.0 + (i as f64 + 0.5) * span / per as f64;
    }
    stab * coords
}

fn registered_like<'b>(like: &[Registered<'b>], tensors: &'b [DenseTensor]) -> Vec<Registered<'b>> {
    like.iter()
        .zip(tensors)
        .map(|(r, t)| Registered { tensor: t, rep: r.rep })
        .collect()
}

/// Searches `𝔤` for a frame transformation carrying tower `t1` onto `t2` up to
/// `depth`. Towers with different Singer numbers or different invariants are
/// rejected before searching.
pub fn orbit_match(
    t1: &DerivativeTower,
    t2: &DerivativeTower,
    alg: &FrameAlgebra,
    depth: usize,
    opts: &OrbitOptions,
) -> Result<MatchResult> {
    for t in [t1, t2] {
        if t.kmax < depth {
            return Err(GeomError::DepthMismatch {
                needed: depth,
                have: t.kmax,
            });
        }
    }
    let (c1, c2) = (stabilizer_chain(t1, alg)?, stabilizer_chain(t2, alg)?);
    if c1.singer_k != c2.singer_k {
        return Ok(MatchResult::rejected(NoMatchReason::SingerMismatch {
            first: c1.singer_k,
            second: c2.singer_k,
        }));
    }
    let (i1, i2) = (tower_invariants(t1, depth), tower_invariants(t2, depth));
    for ((name, a), (_, b)) in i1.iter().zip(&i2) {
        if (a - b).abs() > opts.prescreen_tol * a.abs().max(b.abs()).max(1.0) {
            return Ok(MatchResult::rejected(NoMatchReason::Invariant {
                name: name.clone(),
                first: *a,
                second: *b,
            }));
        }
    }

    let source = t1.registered(depth);
    let target = t2.registered(depth);
    if source.len() != target.len() || source.iter().zip(&target).any(|(a, b)| !a.tensor.same_shape(b.tensor)) {
        return Err(GeomError::AxisMismatch("towers of different section shapes".into()));
    }
    let target_vec: Vec<f64> = target.iter().flat_map(|r| r.tensor.data().iter().cloned()).collect();
    let problem = Problem {
        alg,
        source,
        scale: t2.stack_norm(depth).max(1.0),
        target: DVector::from_vec(target_vec),
    };

    let m = alg.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; m]];
    while starts.len() < opts.starts.max(1) {
        starts.push((0..m).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect());
    }
    let results: Vec<Result<(Vec<f64>, f64)>> = starts
        .into_par_iter()
        .map(|s| problem.descend(s, opts.max_iter))
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in results {
        let (theta, res) = r?;
        if best.as_ref().is_none_or(|(_, b)| res < *b) {
            best = Some((theta, res));
        }
    }
    let (mut theta, mut residual) = best.expect("at least one start");
    let mut shift = vec![0.0; m];
    if let Some((th, res, s)) = sweep_stabilizer(&problem, &theta, &c1.bases[depth], opts.max_iter)? {
        if res < residual {
            (theta, residual, shift) = (th, res, s);
        }
    }
    let matched = residual < opts.match_tol;
    Ok(MatchResult {
        matched,
        theta,
        shift,
        residual,
        reason: (!matched).then_some(NoMatchReason::Residual),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use nalgebra::DMatrix;

    use super::*;
    use crate::fixtures::instantiate;
    use crate::homogeneity::SectionSetup;

    fn setup(name: &str) -> (SectionSetup, Vec<Vec<f64>>) {
        let fx = instantiate(name, &BTreeMap::new()).unwrap();
        let pts = fx.chart.sample_interior(4, 5);
        (SectionSetup::for_fixture(&fx).unwrap(), pts)
    }

    #[test]
    fn same_point_matches_at_the_origin() {
        let (s, pts) = setup("round_sphere2");
        let t = s.tower(&pts[0], 2).unwrap();
        let r = orbit_match(&t, &t, &s.algebra, 1, &OrbitOptions::default()).unwrap();
        assert!(r.matched);
        assert!(r.residual < 1e-12);
        assert!(r.theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_points_match() {
        let (s, pts) = setup("round_sphere2");
        let t1 = s.tower(&pts[0], 2).unwrap();
        for x in &pts[1..] {
            let t2 = s.tower(x, 2).unwrap();
            let r = orbit_match(&t1, &t2, &s.algebra, 1, &OrbitOptions::default()).unwrap();
            assert!(r.matched && r.residual < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn berger_points_match() {
        let (s, pts) = setup("berger_sphere");
        let t1 = s.tower(&pts[0], 2).unwrap();
        let t2 = s.tower(&pts[1], 2).unwrap();
        let r = orbit_match(&t1, &t2, &s.algebra, 1, &OrbitOptions::default()).unwrap();
        assert!(r.matched, "{r:?}");
    }

    #[test]
    fn sphere_and_hyperbolic_plane_differ_in_scalar_curvature() {
        let (s1, p1) = setup("round_sphere2");
        let (s2, p2) = setup("hyperbolic_plane");
        let t1 = s1.tower(&p1[0], 2).unwrap();
        let t2 = s2.tower(&p2[0], 2).unwrap();
        let r = orbit_match(&t1, &t2, &s1.algebra, 1, &OrbitOptions::default()).unwrap();
        assert!(!r.matched);
        match r.reason {
            Some(NoMatchReason::Invariant { first, second, .. }) => {
                // scalar curvature: full trace of R^l_{kij} is +2 on S², −2 on H²
                assert!((first - 2.0).abs() < 1e-6 && (second + 2.0).abs() < 1e-6, "{first} {second}");
            }
            other => panic!("unexpected reason {other:?}"),
        }
    }

    #[test]
    fn invariants_report_the_scalar_curvature() {
        let (s, pts) = setup("round_sphere2");
        let inv = tower_invariants(&s.tower(&pts[0], 1).unwrap(), 0);
        // R^l_{kij} contracted l with i, then k with j
        let (_, scalar) = inv.iter().find(|(n, _)| n == "trace[0][0](0,2)").unwrap();
        assert!((scalar - 2.0).abs() < 1e-6, "{scalar}");
    }

    #[test]
    fn shallow_towers_are_rejected() {
        let (s, pts) = setup("round_sphere2");
        let t = s.tower(&pts[0], 1).unwrap();
        let r = orbit_match(&t, &t, &s.algebra, 2, &OrbitOptions::default());
        assert!(matches!(r, Err(GeomError::DepthMismatch { needed: 2, have: 1 })));
    }

    #[test]
    fn residual_does_not_depend_on_the_frame() {
        let (s, pts) = setup("berger_sphere");
        let t1 = s.tower(&pts[0], 2).unwrap();
        let t2 = s.tower(&pts[2], 2).unwrap();
        let opts = OrbitOptions::default();
        let base = orbit_match(&t1, &t2, &s.algebra, 1, &opts).unwrap();
        let q = crate::lie::group_exp(&[0.4, -1.2, 0.7], &crate::lie::LinearRep::vector(3));
        assert!((&q * q.transpose() - DMatrix::identity(3, 3)).amax() < 1e-12);
        let rotated = t2.frame.rotated(&q);
        let t2r = crate::homogeneity::build_tower_in_frame(&s.sigma, &s.b0, &s.chart, &rotated, 2).unwrap();
        let t1r = crate::homogeneity::build_tower_in_frame(&s.sigma, &s.b0, &s.chart, &t1.frame.rotated(&q.transpose()), 2)
            .unwrap();
        for (a, b) in [(&t1, &t2r), (&t1r, &t2)] {
            let r = orbit_match(a, b, &s.algebra, 1, &opts).unwrap();
            assert!(r.matched && base.matched);
            assert!((r.residual - base.residual).abs() < 1e-10, "{} vs {}", r.residual, base.residual);
        }
    }
}
