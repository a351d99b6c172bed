//! Nested stabilizer subalgebras `h(0) ⊇ h(1) ⊇ …` of a derivative tower and
//! the first stage at which they stabilize.

use nalgebra::DMatrix;
use serde::Serialize;

use super::tower::DerivativeTower;
use crate::error::Result;
use crate::lie::{containment_angle, singular_values, nullspace_abs, FrameAlgebra};

/// Singular values at or below `STABILIZER_TOL × max(1, ‖tower stack‖)` count
/// as annihilating directions. Third nested difference quotients carry noise
/// near 1e-6 relative to the tower, so the cut sits two decades above that.
pub const STABILIZER_TOL: f64 = 1e-4;

/// Ratios to the threshold inside `(AMBIGUITY_BAND⁻¹, AMBIGUITY_BAND)` raise
/// the `Ambiguous` flag.
pub const AMBIGUITY_BAND: f64 = 10.0;

/// Two nested subspaces of equal dimension count as equal below this angle.
pub const SUBSPACE_ANGLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainFlag {
    /// No stabilization observed up to the tower depth.
    Truncated,
    /// A singular value sits within a decade of the threshold.
    Ambiguous,
}

#[derive(Clone, Debug)]
pub struct StabilizerChain {
    /// Orthonormal bases (columns, `𝔤` coordinates) of `h(0), …, h(kmax)`.
    pub bases: Vec<DMatrix<f64>>,
    pub dims: Vec<usize>,
    pub singer_k: Option<usize>,
    pub flags: Vec<ChainFlag>,
    /// Smallest ratio `σ / threshold` over singular values above the threshold.
    pub margin_above: f64,
    /// Largest ratio `σ / threshold` over singular values at or below it.
    pub margin_below: f64,
}

impl StabilizerChain {
    /// Dimensions of `h(0), …, h(singer_k)`, or all computed ones when truncated.
    pub fn reported_dims(&self) -> Vec<usize> {
        match self.singer_k {
            Some(k) => self.dims[..=k].to_vec(),
            None => self.dims.clone(),
        }
    }

    /// `h(singer_k + 1)` when available.
    pub fn stable_algebra(&self) -> Option<&DMatrix<f64>> {
        self.singer_k.and_then(|k| self.bases.get(k + 1))
    }

    /// Largest angle by which some `h(k+1)` leaves `h(k)`.
    pub fn nesting_angle(&self) -> f64 {
        self.bases
            .windows(2)
            .map(|w| containment_angle(&w[1], &w[0]))
            .fold(0.0, f64::max)
    }

    /// Largest component of a bracket of two basis vectors outside its `h(k)`.
    pub fn closure_residual(&self, alg: &FrameAlgebra) -> f64 {
        self.bases
            .iter()
            .map(|b| alg.algebra().closure_residual(b))
            .fold(0.0, f64::max)
    }
}

/// `h(k) = ker` of the stacked action on entries `0..=k`, for `k ≤ kmax`.
pub fn stabilizer_chain(tower: &DerivativeTower, alg: &FrameAlgebra) -> Result<StabilizerChain> {
    stabilizer_chain_with(tower, alg, STABILIZER_TOL)
}

pub fn stabilizer_chain_with(tower: &DerivativeTower, alg: &FrameAlgebra, rel_tol: f64) -> Result<StabilizerChain> {
    let scale = tower.stack_norm(tower.kmax).max(1.0);
    let threshold = rel_tol * scale;
    let mut bases = Vec::with_capacity(tower.kmax + 1);
    let mut margin_above = f64::INFINITY;
    let mut margin_below = 0.0_f64;
    for k in 0..=tower.kmax {
        let m = alg.stacked_action_matrix(&tower.registered(k))?;
        for s in singular_values(&m) {
            let r = s / threshold;
            if r > 1.0 {
                margin_above = margin_above.min(r);
            } else {
                margin_below = margin_below.max(r);
            }
        }
        bases.push(nullspace_abs(&m, threshold));
    }
    let dims: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
    let singer_k = (0..tower.kmax).find(|&k| {
        dims[k] == dims[k + 1] && containment_angle(&bases[k], &bases[k + 1]) < SUBSPACE_ANGLE_TOL
    });
    let mut flags = Vec::new();
    if singer_k.is_none() {
        flags.push(ChainFlag::Truncated);
    }
    if margin_above < AMBIGUITY_BAND || margin_below > AMBIGUITY_BAND.recip() {
        flags.push(ChainFlag::Ambiguous);
    }
    Ok(StabilizerChain {
        bases,
        dims,
        singer_k,
        flags,
        margin_above,
        margin_below,
    })
}
