//! Iterative lowest-eigenpair solver for large symmetric operators.
//!
//! Implements restarted Lanczos with full reorthogonalization. The operator
//! is supplied as a matrix-vector product closure, so callers can use
//! implicit representations (tensor-network environments, Kronecker
//! structure) without materializing a dense matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("initial vector has zero norm")]
    ZeroInitialVector,

    #[error(
        "no convergence after {applies} operator applications (best residual {residual:.3e}, tolerance {tol:.3e})"
    )]
    NoConvergence {
        applies: usize,
        /// Smallest explicit residual reached before giving up.
        residual: f64,
        tol: f64,
        /// Best (eigenvalue, unit eigenvector) candidate found; still
        /// variational (its Rayleigh quotient never exceeds the start
        /// vector's), so callers may use it as a degraded result.
        best: Option<(f64, Vec<f64>)>,
    },

    #[error("dimension mismatch: operator dimension {dim}, vector length {len}")]
    DimensionMismatch { dim: usize, len: usize },

    #[error("operator produced non-finite values")]
    NonFinite,
}

/// Tuning knobs for [`lowest_eigenpair`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Convergence threshold on the residual, relative to `max(1, |lambda|)`.
    pub tol: f64,
    /// Approximate budget of operator applications across all restarts.
    pub max_applies: usize,
    /// Krylov basis size per restart cycle.
    pub basis_size: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_applies: 2000,
            basis_size: 24,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest eigenvalue and its eigenvector for a symmetric operator given as
/// a matvec closure `apply(input, output)`.
///
/// Runs Lanczos cycles of `basis_size` steps with full reorthogonalization
/// (each new direction is orthogonalized against the whole basis twice),
/// diagonalizes the small tridiagonal projection, verifies the Ritz pair
/// with an explicit residual `||A v - lambda v||`, and restarts from the
/// Ritz vector until the residual drops below `tol * max(1, |lambda|)` or
/// the application budget runs out. On failure the error reports the best
/// residual reached and carries the best candidate pair.
pub fn lowest_eigenpair<F>(
    dim: usize,
    mut apply: F,
    init: &[f64],
    opts: &LanczosOptions,
) -> Result<(f64, Vec<f64>), EigenError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if init.len() != dim {
        return Err(EigenError::DimensionMismatch {
            dim,
            len: init.len(),
        });
    }
    let init_norm = norm(init);
    if init_norm == 0.0 || !init_norm.is_finite() {
        return Err(EigenError::ZeroInitialVector);
    }

    if dim == 1 {
        let mut out = [0.0];
        apply(&[1.0], &mut out);
        return Ok((out[0], vec![1.0]));
    }

    let m = opts.basis_size.max(2).min(dim);
    let mut v: Vec<f64> = init.iter().map(|x| x / init_norm).collect();
    let mut applies = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;

    loop {
        // One Lanczos cycle: build basis and tridiagonal coefficients.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m.saturating_sub(1));
        basis.push(v.clone());
        let mut w = vec![0.0; dim];

        for j in 0..m {
            apply(&basis[j], &mut w);
            applies += 1;
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            if j + 1 == m {
                break;
            }
            // Subtract the tridiagonal part, then clean up against the whole
            // basis twice to stop the classical loss of orthogonality.
            for (x, y) in w.iter_mut().zip(&basis[j]) {
                *x -= alpha * y;
            }
            if j > 0 {
                let beta_prev = betas[j - 1];
                for (x, y) in w.iter_mut().zip(&basis[j - 1]) {
                    *x -= beta_prev * y;
                }
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (x, y) in w.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let beta = norm(&w);
            if beta < 1e-13 {
                // Invariant subspace: the projection is exact.
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        // Diagonalize the tridiagonal projection.
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut lowest = 0;
        for i in 1..k {
            if eig.eigenvalues[i] < eig.eigenvalues[lowest] {
                lowest = i;
            }
        }
        let lambda = eig.eigenvalues[lowest];
        let y = eig.eigenvectors.column(lowest);
        if !lambda.is_finite() {
            return Err(EigenError::NonFinite);
        }

        // Ritz vector in the full space.
        let mut ritz = vec![0.0; dim];
        for (j, q) in basis.iter().enumerate() {
            let c = y[j];
            for (x, qx) in ritz.iter_mut().zip(q) {
                *x += c * qx;
            }
        }
        let ritz_norm = norm(&ritz);
        if ritz_norm == 0.0 || !ritz_norm.is_finite() {
            return Err(EigenError::NonFinite);
        }
        for x in &mut ritz {
            *x /= ritz_norm;
        }

        // Explicit residual check before accepting or restarting.
        apply(&ritz, &mut w);
        applies += 1;
        let mut res_sq = 0.0;
        for (ax, x) in w.iter().zip(&ritz) {
            let r = ax - lambda * x;
            res_sq += r * r;
        }
        let residual = res_sq.sqrt();
        if !residual.is_finite() {
            return Err(EigenError::NonFinite);
        }
        if residual <= opts.tol * lambda.abs().max(1.0) {
            return Ok((lambda, ritz));
        }
        if residual < best_residual {
            best_residual = residual;
            best = Some((lambda, ritz.clone()));
        }
        if applies >= opts.max_applies {
            return Err(EigenError::NoConvergence {
                applies,
                residual: best_residual,
                tol: opts.tol,
                best,
            });
        }
        v = ritz;
    }
}
