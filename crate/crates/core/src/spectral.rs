//! Spectral clustering over the similarity graph induced by a kernel.
//!
//! The pipeline is: threshold the kernel into a 0/1 adjacency matrix, form
//! the Laplacian `L = A - D` (negative semidefinite in this sign
//! convention), embed each data point as its row across the eigenvectors
//! of the `c` algebraically largest eigenvalues, and run k-means on the
//! rows. Every step is deterministic: eigenvector ordering, signs, and
//! degenerate-subspace bases follow fixed canonicalization rules, and
//! k-means uses a seeded generator with index-based tie-breaking.

use crate::kernel::KernelMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("threshold tau must lie strictly between 0 and 1, got {0}")]
    BadTau(f64),

    #[error("requested {c} embedding columns from {d} data points")]
    BadColumnCount { c: usize, d: usize },

    #[error("matrix has eigenvalue {0} > 1e-9; not a graph Laplacian of this sign convention")]
    NotNegativeSemidefinite(f64),

    #[error("cluster count {c} invalid for {d} data points")]
    BadClusterCount { c: usize, d: usize },

    #[error("k-means needs at least one restart")]
    NoRestarts,
}

/// Unweighted thresholded similarity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    size: usize,
    adjacency: Vec<u8>,
    degree: Vec<usize>,
    tau: f64,
}

impl SimilarityGraph {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.size + j] == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// Number of connected components (union-find over edges).
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.size).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..self.size {
            for j in i + 1..self.size {
                if self.adjacent(i, j) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        (0..self.size)
            .filter(|&i| find(&mut parent, i) == i)
            .count()
    }
}

/// Draw an edge wherever the kernel entry strictly exceeds `tau`
/// (diagonal excluded: no self-loops).
pub fn build_graph(k: &KernelMatrix, tau: f64) -> Result<SimilarityGraph, SpectralError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SpectralError::BadTau(tau));
    }
    let d = k.size();
    let mut adjacency = vec![0u8; d * d];
    let mut degree = vec![0usize; d];
    for i in 0..d {
        for j in 0..d {
            if i != j && k.get(i, j) > tau {
                adjacency[i * d + j] = 1;
                degree[i] += 1;
            }
        }
    }
    Ok(SimilarityGraph {
        size: d,
        adjacency,
        degree,
        tau,
    })
}

/// Graph Laplacian in the convention `L = A - diag(degree)`: symmetric,
/// zero row sums, negative semidefinite.
pub fn laplacian(g: &SimilarityGraph) -> DMatrix<f64> {
    let d = g.size;
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            -(g.degree[i] as f64)
        } else {
            f64::from(g.adjacency[i * d + j])
        }
    })
}

/// Rows of the retained-eigenvector matrix, one row per data point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    size: usize,
    columns: usize,
    /// Row-major `size x columns`.
    delta: Vec<f64>,
    /// Retained eigenvalues, descending. Empty for embeddings built
    /// directly from raw rows.
    eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    /// Wrap raw coordinate rows (all the same length) as an embedding, for
    /// running k-means on data that did not come from a Laplacian.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let size = rows.len();
        let columns = rows.first().map_or(0, Vec::len);
        if size == 0 || columns == 0 || rows.iter().any(|r| r.len() != columns) {
            return Err(SpectralError::BadColumnCount { c: columns, d: size });
        }
        Ok(Self {
            size,
            columns,
            delta: rows.concat(),
            eigenvalues: Vec::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.delta[i * self.columns..(i + 1) * self.columns]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Copy of the embedding with every row rescaled to unit Euclidean
    /// norm (rows of zero norm are left untouched). Off by default in the
    /// pipeline; provided for experimentation.
    pub fn row_normalized(&self) -> SpectralEmbedding {
        let mut delta = self.delta.clone();
        for i in 0..self.size {
            let row = &mut delta[i * self.columns..(i + 1) * self.columns];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in row.iter_mut() {
                    *x /= norm;
                }
            }
        }
        SpectralEmbedding {
            size: self.size,
            columns: self.columns,
            delta,
            eigenvalues: self.eigenvalues.clone(),
        }
    }
}

/// Fix the overall sign of a unit vector: first component of magnitude
/// above 1e-10 is made positive.
fn fix_sign(v: &mut DVector<f64>) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-10) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

/// Deterministic orthonormal basis for a (possibly degenerate) eigenspace
/// spanned by the given orthonormal columns: sweep the coordinate vectors
/// in index order, project each onto the subspace, orthogonalize against
/// the vectors already accepted, and keep it when anything survives.
fn canonical_block_basis(span: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = span.len();
    let d = span[0].len();
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(m);
    for j in 0..d {
        if accepted.len() == m {
            break;
        }
        // Projection of e_j onto the block subspace.
        let mut w = DVector::<f64>::zeros(d);
        for q in span {
            w.axpy(q[j], q, 1.0);
        }
        // Orthogonalize (twice, for numerical hygiene) against accepted.
        for _ in 0..2 {
            for a in &accepted {
                let coeff = a.dot(&w);
                w.axpy(-coeff, a, 1.0);
            }
        }
        let nrm = w.norm();
        if nrm > 1e-8 {
            w /= nrm;
            fix_sign(&mut w);
            accepted.push(w);
        }
    }
    accepted
}

/// Retain the eigenvectors of the `c` algebraically largest eigenvalues of
/// a Laplacian as embedding columns.
///
/// Ordering is by descending eigenvalue; each eigenvector's sign is fixed
/// (first component of magnitude > 1e-10 positive); numerically degenerate
/// groups (consecutive eigenvalues closer than 1e-9, chained) are replaced
/// by the canonical basis aligned to the earliest coordinate directions,
/// so repeated runs are bit-identical and independent of eigensolver
/// internals.
pub fn embed(l: &DMatrix<f64>, c: usize) -> Result<SpectralEmbedding, SpectralError> {
    let d = l.nrows();
    if l.ncols() != d || d == 0 {
        return Err(SpectralError::BadColumnCount { c, d });
    }
    if c == 0 || c > d {
        return Err(SpectralError::BadColumnCount { c, d });
    }

    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if top > 1e-9 {
        return Err(SpectralError::NotNegativeSemidefinite(top));
    }

    // Walk eigenvalues in descending order, canonicalizing one degenerate
    // block at a time, until c columns are collected.
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(c);
    let mut eigenvalues: Vec<f64> = Vec::with_capacity(c);
    let mut k = 0;
    while columns.len() < c {
        let mut end = k + 1;
        while end < d
            && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() < 1e-9
        {
            end += 1;
        }
        let span: Vec<DVector<f64>> = (k..end)
            .map(|t| eig.eigenvectors.column(order[t]).into_owned())
            .collect();
        let basis = canonical_block_basis(&span);
        for (offset, v) in basis.into_iter().enumerate() {
            if columns.len() == c {
                break;
            }
            eigenvalues.push(eig.eigenvalues[order[k + offset]]);
            columns.push(v);
        }
        k = end;
    }

    let mut delta = vec![0.0; d * c];
    for (col, v) in columns.iter().enumerate() {
        for i in 0..d {
            delta[i * c + col] = v[i];
        }
    }
    Ok(SpectralEmbedding {
        size: d,
        columns: c,
        delta,
        eigenvalues,
    })
}

/// k-means output on embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// Row-major `cluster_count x dim` centroid coordinates.
    centroids: Vec<f64>,
    dim: usize,
    pub wcss: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.centroids.len() / self.dim
        }
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        &self.centroids[k * self.dim..(k + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assign each row to the nearest centroid; ties go to the lowest index.
fn assign(rows: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, cen) in centroids.iter().enumerate() {
                let d = sq_dist(row, cen);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn means(rows: &[&[f64]], labels: &[usize], c: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; c];
    let mut counts = vec![0usize; c];
    for (row, &lab) in rows.iter().zip(labels) {
        counts[lab] += 1;
        for (s, x) in sums[lab].iter_mut().zip(*row) {
            *s += x;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    (sums, counts)
}

/// Move the farthest point of a multi-member cluster into each empty
/// cluster (lowest point index on distance ties).
fn repair_empty(
    rows: &[&[f64]],
    labels: &mut [usize],
    centroids: &mut [Vec<f64>],
    counts: &mut [usize],
) {
    loop {
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let mut pick = None;
        let mut pick_d = -1.0;
        for (i, (row, &lab)) in rows.iter().zip(labels.iter()).enumerate() {
            if counts[lab] < 2 {
                continue;
            }
            let d = sq_dist(row, &centroids[lab]);
            if d > pick_d {
                pick_d = d;
                pick = Some(i);
            }
        }
        let Some(p) = pick else { return };
        counts[labels[p]] -= 1;
        labels[p] = empty;
        counts[empty] = 1;
        centroids[empty] = rows[p].to_vec();
    }
}

/// Seed `c` initial centroids: first uniform, the rest sampled with
/// probability proportional to the squared distance from the nearest
/// already-chosen centroid. A zero total (duplicate-heavy data) falls back
/// to the lowest-index unchosen point.
fn kmeans_pp(rows: &[&[f64]], c: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = rows.len();
    let mut chosen_idx: Vec<usize> = vec![rng.gen_range(0..d)];
    let mut best_d: Vec<f64> = rows
        .iter()
        .map(|row| sq_dist(row, rows[chosen_idx[0]]))
        .collect();
    while chosen_idx.len() < c {
        let total: f64 = best_d.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = d - 1;
            for (i, &w) in best_d.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            (0..d)
                .find(|i| !chosen_idx.contains(i))
                .expect("c <= d leaves an unchosen point")
        };
        chosen_idx.push(next);
        for (bd, row) in best_d.iter_mut().zip(rows) {
            let nd = sq_dist(row, rows[next]);
            if nd < *bd {
                *bd = nd;
            }
        }
    }
    chosen_idx.into_iter().map(|i| rows[i].to_vec()).collect()
}

/// Lloyd's algorithm from k-means++ initializations, best of `restarts` by
/// within-cluster sum of squares. Deterministic for a fixed seed; distance
/// ties break to the lowest centroid index; empty clusters are repaired by
/// reseeding with the farthest point.
pub fn kmeans(
    delta: &SpectralEmbedding,
    c: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<ClusterAssignment, SpectralError> {
    let d = delta.size();
    if c == 0 || c > d {
        return Err(SpectralError::BadClusterCount { c, d });
    }
    if restarts == 0 {
        return Err(SpectralError::NoRestarts);
    }
    let rows: Vec<&[f64]> = (0..d).map(|i| delta.row(i)).collect();
    let dim = delta.columns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..restarts {
        let seeds = kmeans_pp(&rows, c, &mut rng);
        let mut labels = assign(&rows, &seeds);
        let (mut cents, mut counts) = means(&rows, &labels, c, dim);
        repair_empty(&rows, &mut labels, &mut cents, &mut counts);
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            let (mut new_cents, _) = means(&rows, &labels, c, dim);
            let mut new_labels = assign(&rows, &new_cents);
            let (_, mut new_counts) = means(&rows, &new_labels, c, dim);
            repair_empty(&rows, &mut new_labels, &mut new_cents, &mut new_counts);
            let stable = new_labels == labels;
            labels = new_labels;
            if stable || iterations >= max_iter {
                break;
            }
        }
        // Final centroids consistent with the final labels.
        let (centroids, counts) = means(&rows, &labels, c, dim);
        debug_assert!(counts.iter().all(|&n| n > 0));
        let wcss: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(row, &lab)| sq_dist(row, &centroids[lab]))
            .sum();
        let candidate = ClusterAssignment {
            labels,
            centroids: centroids.concat(),
            dim,
            wcss,
            iterations,
            restarts_used: restarts,
        };
        if best.as_ref().is_none_or(|b| candidate.wcss < b.wcss) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
