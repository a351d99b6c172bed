//! Iterated covariant derivatives of a section tuple, expressed in an
//! orthonormal frame at the base point.

use crate::bundle::{Connection, SectionSpec};
use crate::chart::{Chart, MetricField};
use crate::error::{GeomError, Result};
use crate::lie::{LinearRep, Registered};
use crate::tensor::{DenseTensor, OrthoFrame};

/// Step scale used for every operation that nests difference quotients more
/// than twice. Each nesting level amplifies roundoff by roughly `1/h`, while
/// truncation grows like `h⁴`; on the fixture charts this step balances the
/// two for third derivatives of curvature.
pub const NESTED_STEP_SCALE: f64 = 2e-3;

/// `chart` with the step policy for nested differentiation.
pub fn nested_chart(chart: &Chart) -> Chart {
    chart.clone().with_step_scale(NESTED_STEP_SCALE)
}

/// `σ^(0), …, σ^(kmax)` at one point, each a tuple of frame-expressed tensors.
#[derive(Clone, Debug)]
pub struct DerivativeTower {
    pub point: Vec<f64>,
    pub kmax: usize,
    pub frame: OrthoFrame,
    pub entries: Vec<Vec<DenseTensor>>,
    pub reps: Vec<Option<LinearRep>>,
}

impl DerivativeTower {
    /// Entries `0..=depth` flattened with their registered representations.
    pub fn registered(&self, depth: usize) -> Vec<Registered<'_>> {
        self.entries[..=depth.min(self.kmax)]
            .iter()
            .flat_map(|entry| {
                entry.iter().zip(&self.reps).map(|(t, r)| Registered {
                    tensor: t,
                    rep: r.as_ref(),
                })
            })
            .collect()
    }

    /// Frobenius norm of entry `k` (all components together).
    pub fn entry_norm(&self, k: usize) -> f64 {
        self.entries[k].iter().map(|t| t.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn stack_norm(&self, depth: usize) -> f64 {
        (0..=depth.min(self.kmax))
            .map(|k| self.entry_norm(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// The iterated derivative fields `σ^(0), …, σ^(kmax)` of `sigma` under `b0`.
pub fn tower_fields(sigma: &SectionSpec, b0: &Connection, chart: &Chart, kmax: usize) -> Result<Vec<SectionSpec>> {
    let mut levels = vec![sigma.clone()];
    for _ in 0..kmax {
        let next = b0.derivative_section(levels.last().expect("nonempty"), chart)?;
        levels.push(next);
    }
    Ok(levels)
}

/// Tower at `x` in the Cholesky frame of `metric`.
pub fn build_tower(
    sigma: &SectionSpec,
    b0: &Connection,
    metric: &MetricField,
    chart: &Chart,
    x: &[f64],
    kmax: usize,
) -> Result<DerivativeTower> {
    let frame = metric.frame(x)?;
    build_tower_in_frame(sigma, b0, chart, &frame, kmax)
}

/// Tower at `frame.point` expressed in an arbitrary orthonormal frame.
pub fn build_tower_in_frame(
    sigma: &SectionSpec,
    b0: &Connection,
    chart: &Chart,
    frame: &OrthoFrame,
    kmax: usize,
) -> Result<DerivativeTower> {
    if kmax < 1 {
        return Err(GeomError::Invalid("tower depth must be at least 1".into()));
    }
    let x = frame.point.clone();
    chart.check_interior(&x)?;
    let levels = tower_fields(sigma, b0, chart, kmax)?;
    let entries = levels
        .iter()
        .map(|s| {
            s.eval(&x)?
                .iter()
                .map(|t| t.to_frame(frame))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivativeTower {
        point: x,
        kmax,
        frame: frame.clone(),
        entries,
        reps: sigma.components.iter().map(|c| c.rep.clone()).collect(),
    })
}
