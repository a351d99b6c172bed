//! Dense multi-index tensors at a point, orthonormal frames and index algebra.
//!
//! Components are stored row-major over `dims`. Every axis carries a marker
//! telling how it transforms: tangent (`Contra`), cotangent (`Co`) or a fiber
//! axis of the structure algebra representation (`Lie`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Contra,
    Co,
    Lie,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    axes: Vec<Axis>,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(axes: Vec<Axis>, dims: Vec<usize>) -> Self {
        assert_eq!(axes.len(), dims.len(), "one dim per axis");
        let len = dims.iter().product();
        Self {
            axes,
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(axes: Vec<Axis>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if axes.len() != dims.len() {
            return Err(GeomError::AxisMismatch(format!(
                "{} axis markers for {} dims",
                axes.len(),
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(GeomError::AxisMismatch("zero-sized axis".into()));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(GeomError::AxisMismatch(format!(
                "{} components for shape {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { axes, dims, data })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            axes: vec![],
            dims: vec![],
            data: vec![value],
        }
    }

    pub fn vector(v: &[f64]) -> Self {
        Self {
            axes: vec![Axis::Contra],
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn covector(v: &[f64]) -> Self {
        Self {
            axes: vec![Axis::Co],
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    /// Rank-2 tensor with the given markers from a matrix (rows index the first axis).
    pub fn from_matrix(first: Axis, second: Axis, m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            axes: vec![first, second],
            dims: vec![r, c],
            data,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2, "to_matrix needs a rank-2 tensor");
        DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.data)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &DenseTensor) -> bool {
        self.axes == other.axes && self.dims == other.dims
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    fn check_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(GeomError::AxisMismatch(format!(
                "{:?}{:?} vs {:?}{:?}",
                self.axes, self.dims, other.axes, other.dims
            )))
        }
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        self.check_shape(other)?;
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    pub fn scale(&self, alpha: f64) -> DenseTensor {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= alpha);
        out
    }

    /// Frobenius norm of the component array.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Applies `m` along one axis: `out[.., i, ..] = Σ_j m[i, j] self[.., j, ..]`.
    ///
    /// `m` may be rectangular; the axis dim becomes `m.nrows()`.
    pub fn apply_axis(&self, axis: usize, m: &DMatrix<f64>) -> DenseTensor {
        assert!(axis < self.rank());
        assert_eq!(m.ncols(), self.dims[axis], "matrix/axis size mismatch");
        let outer: usize = self.dims[..axis].iter().product();
        let inner: usize = self.dims[axis + 1..].iter().product();
        let d_in = self.dims[axis];
        let d_out = m.nrows();
        let mut dims = self.dims.clone();
        dims[axis] = d_out;
        let mut data = vec![0.0; outer * d_out * inner];
        for o in 0..outer {
            for i in 0..d_out {
                let dst = &mut data[(o * d_out + i) * inner..(o * d_out + i + 1) * inner];
                for j in 0..d_in {
                    let c = m[(i, j)];
                    if c == 0.0 {
                        continue;
                    }
                    let src = &self.data[(o * d_in + j) * inner..(o * d_in + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
        DenseTensor {
            axes: self.axes.clone(),
            dims,
            data,
        }
    }

    /// Single contraction of a contravariant axis against a covariant one.
    pub fn contract(&self, axis_a: usize, axis_b: usize) -> Result<DenseTensor> {
        if axis_a >= self.rank() || axis_b >= self.rank() || axis_a == axis_b {
            return Err(GeomError::AxisMismatch(format!(
                "cannot contract axes {axis_a} and {axis_b} of a rank-{} tensor",
                self.rank()
            )));
        }
        let (ma, mb) = (self.axes[axis_a], self.axes[axis_b]);
        let compatible = matches!(
            (ma, mb),
            (Axis::Contra, Axis::Co) | (Axis::Co, Axis::Contra)
        );
        if !compatible {
            return Err(GeomError::AxisMismatch(format!(
                "contraction needs one contravariant and one covariant axis, got {ma:?}/{mb:?}"
            )));
        }
        self.contract_raw(axis_a, axis_b, None)
    }

    /// Contraction of two axes of the same kind through a symmetric bilinear form.
    pub fn contract_with(&self, axis_a: usize, axis_b: usize, form: &DMatrix<f64>) -> Result<DenseTensor> {
        if axis_a >= self.rank() || axis_b >= self.rank() || axis_a == axis_b {
            return Err(GeomError::AxisMismatch("bad contraction axes".into()));
        }
        if self.axes[axis_a] != self.axes[axis_b] {
            return Err(GeomError::AxisMismatch(format!(
                "metric contraction of unlike axes {:?}/{:?}",
                self.axes[axis_a], self.axes[axis_b]
            )));
        }
        if form.nrows() != self.dims[axis_a] || form.ncols() != self.dims[axis_b] {
            return Err(GeomError::AxisMismatch("form size mismatch".into()));
        }
        self.contract_raw(axis_a, axis_b, Some(form))
    }

    fn contract_raw(&self, a: usize, b: usize, form: Option<&DMatrix<f64>>) -> Result<DenseTensor> {
        if self.dims[a] != self.dims[b] {
            return Err(GeomError::AxisMismatch(format!(
                "dims {} and {} differ",
                self.dims[a], self.dims[b]
            )));
        }
        let keep: Vec<usize> = (0..self.rank()).filter(|&k| k != a && k != b).collect();
        let axes: Vec<Axis> = keep.iter().map(|&k| self.axes[k]).collect();
        let dims: Vec<usize> = keep.iter().map(|&k| self.dims[k]).collect();
        let mut out = DenseTensor::zeros(axes, dims);
        let strides = self.strides();
        let n = self.dims[a];
        let out_len = out.len();
        let mut idx = vec![0usize; keep.len()];
        for o in 0..out_len {
            // decode o into idx
            let mut rem = o;
            for k in (0..keep.len()).rev() {
                idx[k] = rem % out.dims[k];
                rem /= out.dims[k];
            }
            let base: usize = keep.iter().zip(&idx).map(|(&ax, &i)| strides[ax] * i).sum();
            let mut acc = 0.0;
            match form {
                None => {
                    for i in 0..n {
                        acc += self.data[base + i * (strides[a] + strides[b])];
                    }
                }
                Some(f) => {
                    for i in 0..n {
                        for j in 0..n {
                            let w = f[(i, j)];
                            if w != 0.0 {
                                acc += w * self.data[base + i * strides[a] + j * strides[b]];
                            }
                        }
                    }
                }
            }
            out.data[o] = acc;
        }
        Ok(out)
    }

    /// Tensor product `self ⊗ other`.
    pub fn outer(&self, other: &DenseTensor) -> DenseTensor {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            data.extend(other.data.iter().map(|b| a * b));
        }
        DenseTensor { axes, dims, data }
    }

    /// Reorders axes: output axis `k` is input axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> DenseTensor {
        assert_eq!(perm.len(), self.rank());
        let axes: Vec<Axis> = perm.iter().map(|&p| self.axes[p]).collect();
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let in_strides = self.strides();
        let mut out = DenseTensor::zeros(axes, dims);
        let mut idx = vec![0usize; perm.len()];
        for o in 0..out.len() {
            let mut rem = o;
            for k in (0..perm.len()).rev() {
                idx[k] = rem % out.dims[k];
                rem /= out.dims[k];
            }
            let src: usize = perm.iter().zip(&idx).map(|(&p, &i)| in_strides[p] * i).sum();
            out.data[o] = self.data[src];
        }
        out
    }

    /// Relabels axis markers without touching components.
    pub fn with_axes(mut self, axes: Vec<Axis>) -> Result<DenseTensor> {
        if axes.len() != self.dims.len() {
            return Err(GeomError::AxisMismatch("marker count".into()));
        }
        self.axes = axes;
        Ok(self)
    }

    /// Slice along the leading axis.
    pub fn leading_slice(&self, i: usize) -> DenseTensor {
        assert!(self.rank() >= 1 && i < self.dims[0]);
        let inner: usize = self.dims[1..].iter().product();
        DenseTensor {
            axes: self.axes[1..].to_vec(),
            dims: self.dims[1..].to_vec(),
            data: self.data[i * inner..(i + 1) * inner].to_vec(),
        }
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(axis: Axis, parts: &[DenseTensor]) -> Result<DenseTensor> {
        let first = parts
            .first()
            .ok_or_else(|| GeomError::AxisMismatch("empty stack".into()))?;
        let mut axes = vec![axis];
        axes.extend_from_slice(&first.axes);
        let mut dims = vec![parts.len()];
        dims.extend_from_slice(&first.dims);
        let mut data = Vec::with_capacity(parts.len() * first.len());
        for p in parts {
            first.check_shape(p)?;
            data.extend_from_slice(&p.data);
        }
        Ok(DenseTensor { axes, dims, data })
    }

    /// Expresses a coordinate-basis tensor in the frame `f`.
    pub fn to_frame(&self, f: &OrthoFrame) -> Result<DenseTensor> {
        f.check_finite()?;
        let frame_t = f.frame.transpose();
        let mut out = self.clone();
        for (k, ax) in self.axes.iter().enumerate() {
            match ax {
                Axis::Contra => out = out.apply_axis(k, &f.coframe),
                Axis::Co => out = out.apply_axis(k, &frame_t),
                Axis::Lie => {}
            }
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::to_frame`].
    pub fn from_frame(&self, f: &OrthoFrame) -> Result<DenseTensor> {
        f.check_finite()?;
        let coframe_t = f.coframe.transpose();
        let mut out = self.clone();
        for (k, ax) in self.axes.iter().enumerate() {
            match ax {
                Axis::Contra => out = out.apply_axis(k, &f.frame),
                Axis::Co => out = out.apply_axis(k, &coframe_t),
                Axis::Lie => {}
            }
        }
        Ok(out)
    }
}

/// An orthonormal frame at a point: columns of `frame` are the frame vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoFrame {
    pub point: Vec<f64>,
    pub frame: DMatrix<f64>,
    pub coframe: DMatrix<f64>,
}

impl OrthoFrame {
    /// Frame `L⁻ᵀ` from the lower Cholesky factor `G = L Lᵀ`.
    pub fn cholesky(point: &[f64], metric: &DMatrix<f64>) -> Result<Self> {
        let chol = metric
            .clone()
            .cholesky()
            .ok_or_else(|| GeomError::DegenerateMetric(point.to_vec()))?;
        let l = chol.l();
        let coframe = l.transpose();
        let frame = coframe
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::SingularFrame(point.to_vec()))?;
        let f = Self {
            point: point.to_vec(),
            frame,
            coframe,
        };
        f.check_finite()?;
        Ok(f)
    }

    /// Wraps an explicit frame; fails unless `Fᵀ G F = I` within 1e-10.
    pub fn new(point: &[f64], frame: DMatrix<f64>, metric: &DMatrix<f64>) -> Result<Self> {
        let coframe = frame
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::SingularFrame(point.to_vec()))?;
        let gram = frame.transpose() * metric * &frame;
        let n = frame.nrows();
        let err = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if err > 1e-10 {
            return Err(GeomError::Invalid(format!(
                "frame is not orthonormal (error {err:e})"
            )));
        }
        let f = Self {
            point: point.to_vec(),
            frame,
            coframe,
        };
        f.check_finite()?;
        Ok(f)
    }

    /// The frame `F·q` for an orthogonal matrix `q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        Self {
            point: self.point.clone(),
            frame: &self.frame * q,
            coframe: q.transpose() * &self.coframe,
        }
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    fn check_finite(&self) -> Result<()> {
        if self.coframe.iter().all(|v| v.is_finite()) && self.frame.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GeomError::SingularFrame(self.point.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_11(n: usize) -> DenseTensor {
        DenseTensor::from_matrix(Axis::Contra, Axis::Co, &DMatrix::identity(n, n))
    }

    #[test]
    fn trace_of_identity() {
        let t = identity_11(3);
        assert_eq!(t.contract(0, 1).unwrap().data(), &[3.0]);
    }

    #[test]
    fn off_diagonal_trace_vanishes() {
        let e1 = DenseTensor::vector(&[1.0, 0.0, 0.0]);
        let e2 = DenseTensor::covector(&[0.0, 1.0, 0.0]);
        let t = e1.outer(&e2);
        assert_eq!(t.contract(0, 1).unwrap().data(), &[0.0]);
    }

    #[test]
    fn trace_of_diag() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0]));
        let t = DenseTensor::from_matrix(Axis::Contra, Axis::Co, &m);
        assert_eq!(t.contract(0, 1).unwrap().data(), &[7.0]);
    }

    #[test]
    fn contraction_rejects_like_axes_and_dim_mismatch() {
        let m = DMatrix::identity(2, 2);
        let t = DenseTensor::from_matrix(Axis::Co, Axis::Co, &m);
        assert!(matches!(t.contract(0, 1), Err(GeomError::AxisMismatch(_))));
        let r = DenseTensor::from_matrix(Axis::Contra, Axis::Co, &DMatrix::zeros(2, 3));
        assert!(matches!(r.contract(0, 1), Err(GeomError::AxisMismatch(_))));
    }

    #[test]
    fn metric_contraction_of_lie_axes() {
        let t = DenseTensor::from_matrix(Axis::Lie, Axis::Lie, &DMatrix::identity(3, 3));
        let form = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 2.0]));
        assert_eq!(t.contract_with(0, 1, &form).unwrap().data(), &[6.0]);
    }

    #[test]
    fn identity_frame_is_noop() {
        let g = DMatrix::identity(2, 2);
        let f = OrthoFrame::cholesky(&[0.0, 0.0], &g).unwrap();
        let t = DenseTensor::from_vec(
            vec![Axis::Contra, Axis::Co, Axis::Lie],
            vec![2, 2, 1],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert_eq!(t.to_frame(&f).unwrap(), t);
    }

    #[test]
    fn sphere_metric_in_cholesky_frame_is_identity() {
        let theta = std::f64::consts::PI / 3.0;
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, theta.sin().powi(2)]);
        let f = OrthoFrame::cholesky(&[theta, 0.0], &g).unwrap();
        let gf = DenseTensor::from_matrix(Axis::Co, Axis::Co, &g).to_frame(&f).unwrap();
        let err = (gf.to_matrix() - DMatrix::<f64>::identity(2, 2)).amax();
        assert!(err < 1e-12, "{err}");
        // independent check: the frame is diag(1, 1/sinθ)
        assert!((f.frame[(1, 1)] - 1.0 / theta.sin()).abs() < 1e-14);
        assert!((f.coframe.clone() * &f.frame - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            OrthoFrame::cholesky(&[0.0, 0.0], &g),
            Err(GeomError::DegenerateMetric(_))
        ));
    }

    #[test]
    fn permute_and_leading_slice() {
        let t = DenseTensor::from_vec(vec![Axis::Co, Axis::Contra], vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        let p = t.permute(&[1, 0]);
        assert_eq!(p.dims(), &[3, 2]);
        assert_eq!(p.get(&[2, 1]), t.get(&[1, 2]));
        assert_eq!(t.leading_slice(1).data(), &[3.0, 4.0, 5.0]);
    }
}
