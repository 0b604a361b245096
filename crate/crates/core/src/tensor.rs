//! Dense real-valued multi-index arrays.
//!
//! A [`Tensor`] is a row-major flat buffer plus an explicit shape. The module
//! provides the three primitives everything upstream is built from:
//! pairwise contraction ([`contract`]), truncated singular value
//! decomposition ([`svd_truncate`]) and thin QR ([`qr_split`]).
//!
//! Contractions are routed through a single GEMM after permuting the
//! contracted axes to the boundary; factorizations reshape the tensor into a
//! matrix by grouping the first `split` indices as rows.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape/data mismatch: shape {shape:?} implies {expected} entries, got {actual}")]
    ShapeDataMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("axis {axis} out of bounds for rank-{rank} tensor")]
    AxisOutOfBounds { axis: usize, rank: usize },

    #[error("contraction axis lists have different lengths ({len_a} vs {len_b})")]
    AxisListMismatch { len_a: usize, len_b: usize },

    #[error("duplicate contraction axis {axis}")]
    DuplicateAxis { axis: usize },

    #[error(
        "dimension mismatch on contracted axis pair ({axis_a}, {axis_b}): {dim_a} vs {dim_b}"
    )]
    DimensionMismatch {
        axis_a: usize,
        axis_b: usize,
        dim_a: usize,
        dim_b: usize,
    },

    #[error("split point {split} invalid for rank-{rank} tensor (need 1 <= split < rank)")]
    InvalidSplit { split: usize, rank: usize },

    #[error("zero tensor has no SVD truncation")]
    ZeroTensor,

    #[error("zero dimension in shape {0:?}")]
    ZeroDimension(Vec<usize>),
}

/// Dense tensor: row-major data with explicit shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ZeroDimension(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Rank-0 tensor holding a single scalar.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// 2x2 matrix, handy for single-site operators.
    pub fn from_2x2(m: [[f64; 2]; 2]) -> Self {
        Self {
            shape: vec![2, 2],
            data: vec![m[0][0], m[0][1], m[1][0], m[1][1]],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Extract the single entry of a rank-0 tensor.
    pub fn as_scalar(&self) -> Option<f64> {
        if self.shape.is_empty() {
            Some(self.data[0])
        } else {
            None
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.rank());
        let strides = self.strides();
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        debug_assert_eq!(idx.len(), self.rank());
        let strides = self.strides();
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat] = value;
    }

    /// Reinterpret the data under a new shape with the same total size.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self, TensorError> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn into_reshaped(self, shape: Vec<usize>) -> Result<Self, TensorError> {
        Tensor::new(shape, self.data)
    }

    /// Reorder axes; `perm[k]` names the source axis placed at position `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let rank = self.rank();
        if perm.len() != rank {
            return Err(TensorError::AxisListMismatch {
                len_a: perm.len(),
                len_b: rank,
            });
        }
        let mut seen = vec![false; rank];
        for &p in perm {
            if p >= rank {
                return Err(TensorError::AxisOutOfBounds { axis: p, rank });
            }
            if seen[p] {
                return Err(TensorError::DuplicateAxis { axis: p });
            }
            seen[p] = true;
        }
        if rank <= 1 || perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let src_strides = self.strides();
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut out = vec![0.0; self.data.len()];
        // Walk the output in order, tracking the source flat offset.
        let mut idx = vec![0usize; rank];
        let perm_strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                src += perm_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= perm_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data: out,
        })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }

    pub fn add_scaled(&mut self, other: &Tensor, factor: f64) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeDataMismatch {
                shape: other.shape.clone(),
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += factor * y;
        }
        Ok(())
    }

    /// View the tensor as a matrix grouping the first `split` indices as rows.
    fn matrix_dims(&self, split: usize) -> Result<(usize, usize), TensorError> {
        let rank = self.rank();
        if split == 0 || split >= rank {
            return Err(TensorError::InvalidSplit { split, rank });
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        Ok((rows, cols))
    }
}

/// Pairwise tensor contraction: sum over the paired axes.
///
/// The result carries the free indices of `a` followed by the free indices of
/// `b`, each in their original order. Internally the contracted axes are
/// permuted to the boundary and the sum is performed as one matrix product.
pub fn contract(
    a: &Tensor,
    axes_a: &[usize],
    b: &Tensor,
    axes_b: &[usize],
) -> Result<Tensor, TensorError> {
    if axes_a.len() != axes_b.len() {
        return Err(TensorError::AxisListMismatch {
            len_a: axes_a.len(),
            len_b: axes_b.len(),
        });
    }
    check_axes(axes_a, a.rank())?;
    check_axes(axes_b, b.rank())?;
    for (&ax_a, &ax_b) in axes_a.iter().zip(axes_b) {
        let (da, db) = (a.shape[ax_a], b.shape[ax_b]);
        if da != db {
            return Err(TensorError::DimensionMismatch {
                axis_a: ax_a,
                axis_b: ax_b,
                dim_a: da,
                dim_b: db,
            });
        }
    }

    let free_a: Vec<usize> = (0..a.rank()).filter(|ax| !axes_a.contains(ax)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|ax| !axes_b.contains(ax)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let ap = a.permute(&perm_a)?;
    let bp = b.permute(&perm_b)?;

    let m: usize = free_a.iter().map(|&ax| a.shape[ax]).product();
    let n: usize = free_b.iter().map(|&ax| b.shape[ax]).product();
    let k: usize = axes_a.iter().map(|&ax| a.shape[ax]).product();

    // Row-major (m,k) data is the column-major transpose; multiplying the
    // transposes in swapped order yields the row-major product directly.
    let a_t = DMatrix::from_vec(k, m, ap.into_data());
    let b_t = DMatrix::from_vec(n, k, bp.into_data());
    let c_t = b_t * a_t;

    let mut shape: Vec<usize> = free_a.iter().map(|&ax| a.shape[ax]).collect();
    shape.extend(free_b.iter().map(|&ax| b.shape[ax]));
    Tensor::new(shape, c_t.data.into())
}

fn check_axes(axes: &[usize], rank: usize) -> Result<(), TensorError> {
    for (i, &ax) in axes.iter().enumerate() {
        if ax >= rank {
            return Err(TensorError::AxisOutOfBounds { axis: ax, rank });
        }
        if axes[..i].contains(&ax) {
            return Err(TensorError::DuplicateAxis { axis: ax });
        }
    }
    Ok(())
}

/// What a truncated SVD kept and what it threw away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    /// Number of retained singular values.
    pub kept: usize,
    /// Sum of squared discarded singular values over the sum of all squares.
    pub discarded_weight: f64,
}

/// Truncated SVD of `t` viewed as a matrix grouping the first `split`
/// indices as rows.
///
/// Keeps `min(chi_max, #{i : s_i^2 / sum(s^2) > cutoff})` singular values,
/// sorted descending. Returns `U` with shape `t.shape[..split] + [kept]`,
/// the retained singular values, `Vt` with shape `[kept] + t.shape[split..]`,
/// and the truncation report.
pub fn svd_truncate(
    t: &Tensor,
    split: usize,
    chi_max: usize,
    cutoff: f64,
) -> Result<(Tensor, Vec<f64>, Tensor, TruncationReport), TensorError> {
    let (rows, cols) = t.matrix_dims(split)?;
    if t.data.iter().all(|&x| x == 0.0) {
        return Err(TensorError::ZeroTensor);
    }

    let mat = DMatrix::from_row_slice(rows, cols, &t.data);
    let svd = mat.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vt");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());

    let total_sq: f64 = sv.iter().map(|s| s * s).sum();
    let above_cutoff = order
        .iter()
        .filter(|&&i| sv[i] * sv[i] / total_sq > cutoff)
        .count();
    let kept = chi_max.min(above_cutoff).max(1);

    let kept_sq: f64 = order[..kept].iter().map(|&i| sv[i] * sv[i]).sum();
    let report = TruncationReport {
        kept,
        discarded_weight: ((total_sq - kept_sq) / total_sq).max(0.0),
    };

    let mut u_data = vec![0.0; rows * kept];
    for (new_col, &old_col) in order[..kept].iter().enumerate() {
        for r in 0..rows {
            u_data[r * kept + new_col] = u[(r, old_col)];
        }
    }
    let mut vt_data = vec![0.0; kept * cols];
    for (new_row, &old_row) in order[..kept].iter().enumerate() {
        for c in 0..cols {
            vt_data[new_row * cols + c] = vt[(old_row, c)];
        }
    }
    let s: Vec<f64> = order[..kept].iter().map(|&i| sv[i]).collect();

    let mut u_shape: Vec<usize> = t.shape[..split].to_vec();
    u_shape.push(kept);
    let mut vt_shape = vec![kept];
    vt_shape.extend_from_slice(&t.shape[split..]);

    Ok((
        Tensor::new(u_shape, u_data)?,
        s,
        Tensor::new(vt_shape, vt_data)?,
        report,
    ))
}

/// Thin QR of `t` viewed as a matrix grouping the first `split` indices as
/// rows. `Q` has orthonormal columns and the sign convention diag(R) >= 0.
pub fn qr_split(t: &Tensor, split: usize) -> Result<(Tensor, Tensor), TensorError> {
    let (rows, cols) = t.matrix_dims(split)?;
    let mat = DMatrix::from_row_slice(rows, cols, &t.data);
    let qr = mat.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let k = q.ncols();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
            for c in 0..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
        }
    }

    let mut q_data = vec![0.0; rows * k];
    for i in 0..rows {
        for j in 0..k {
            q_data[i * k + j] = q[(i, j)];
        }
    }
    let mut r_data = vec![0.0; k * cols];
    for i in 0..k {
        for j in 0..cols {
            r_data[i * cols + j] = r[(i, j)];
        }
    }

    let mut q_shape: Vec<usize> = t.shape[..split].to_vec();
    q_shape.push(k);
    let mut r_shape = vec![k];
    r_shape.extend_from_slice(&t.shape[split..]);
    Ok((Tensor::new(q_shape, q_data)?, Tensor::new(r_shape, r_data)?))
}
