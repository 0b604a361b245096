//! Independent reference implementations used to check the production
//! code. Everything here is deliberately written the slow, obvious way —
//! nested index loops, textbook Jacobi rotations, explicit Kronecker
//! products, brute-force enumeration — and shares no code with the
//! library paths it validates.

#![allow(dead_code)]

use phasemap_core::kernel::KernelMatrix;
use phasemap_core::mpo::HamiltonianSpec;
use phasemap_core::tensor::Tensor;

/// Contraction by explicit summation: pair up `axes_a` of `a` with
/// `axes_b` of `b`, keep the remaining axes of `a` then of `b` in order.
/// Mirrors the contract between tensors without touching its
/// implementation (no reshapes, no matrix products).
pub fn naive_contract(a: &Tensor, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Tensor {
    assert_eq!(axes_a.len(), axes_b.len());
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();
    let sum_dims: Vec<usize> = axes_a.iter().map(|&i| a.shape()[i]).collect();
    for (&ia, &ib) in axes_a.iter().zip(axes_b) {
        assert_eq!(a.shape()[ia], b.shape()[ib], "contracted axes must match");
    }
    let out_shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape()[i])
        .chain(free_b.iter().map(|&i| b.shape()[i]))
        .collect();
    let mut out = Tensor::zeros(if out_shape.is_empty() {
        vec![1]
    } else {
        out_shape.clone()
    });

    let mut out_idx = vec![0usize; out_shape.len().max(1)];
    let mut done_out = false;
    while !done_out {
        let mut acc = 0.0;
        let mut sum_idx = vec![0usize; sum_dims.len()];
        let mut done_sum = false;
        loop {
            if sum_dims.is_empty() && done_sum {
                break;
            }
            let mut ai = vec![0usize; a.rank()];
            let mut bi = vec![0usize; b.rank()];
            for (pos, &ax) in free_a.iter().enumerate() {
                ai[ax] = out_idx[pos];
            }
            for (pos, &ax) in free_b.iter().enumerate() {
                bi[ax] = out_idx[free_a.len() + pos];
            }
            for (k, (&ax_a, &ax_b)) in axes_a.iter().zip(axes_b).enumerate() {
                ai[ax_a] = sum_idx[k];
                bi[ax_b] = sum_idx[k];
            }
            acc += a.get(&ai) * b.get(&bi);
            if sum_dims.is_empty() {
                done_sum = true;
                continue;
            }
            // Advance the mixed-radix summation counter.
            let mut carry = true;
            for k in (0..sum_idx.len()).rev() {
                if !carry {
                    break;
                }
                sum_idx[k] += 1;
                if sum_idx[k] == sum_dims[k] {
                    sum_idx[k] = 0;
                } else {
                    carry = false;
                }
            }
            if carry {
                break;
            }
        }
        if out_shape.is_empty() {
            out.set(&[0], acc);
        } else {
            out.set(&out_idx, acc);
        }
        // Advance the output counter.
        let mut carry = true;
        for k in (0..out_shape.len()).rev() {
            if !carry {
                break;
            }
            out_idx[k] += 1;
            if out_idx[k] == out_shape[k] {
                out_idx[k] = 0;
            } else {
                carry = false;
            }
        }
        done_out = carry || out_shape.is_empty();
    }
    out
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix (row-major),
/// returning eigenvalues in ascending order with matching eigenvectors
/// (column k of the result pairs with eigenvalue k).
pub fn jacobi_eigen(mat: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Kronecker product of dense row-major square matrices.
pub fn kron(a: &[f64], na: usize, b: &[f64], nb: usize) -> Vec<f64> {
    let n = na * nb;
    let mut out = vec![0.0; n * n];
    for i in 0..na {
        for j in 0..na {
            let aij = a[i * na + j];
            if aij == 0.0 {
                continue;
            }
            for k in 0..nb {
                for l in 0..nb {
                    out[(i * nb + k) * n + (j * nb + l)] = aij * b[k * nb + l];
                }
            }
        }
    }
    out
}

/// Full `2^N x 2^N` Hamiltonian built instance-by-instance with explicit
/// Kronecker products (site 0 = leftmost factor = most significant bit).
pub fn kron_hamiltonian(spec: &HamiltonianSpec) -> Vec<f64> {
    let n = spec.n_sites;
    let dim = 1usize << n;
    let identity = vec![1.0, 0.0, 0.0, 1.0];
    let mut h = vec![0.0; dim * dim];
    for term in &spec.terms {
        let span = term.ops.len();
        for start in 0..=(n - span) {
            let mut acc = vec![1.0];
            let mut acc_n = 1usize;
            for site in 0..n {
                let factor: Vec<f64> = if site >= start && site < start + span {
                    term.ops[site - start].matrix().data().to_vec()
                } else {
                    identity.clone()
                };
                acc = kron(&acc, acc_n, &factor, 2);
                acc_n *= 2;
            }
            for (dst, src) in h.iter_mut().zip(&acc) {
                *dst += term.coefficient * src;
            }
        }
    }
    h
}

/// Minimum of an energy function over all `2^N` classical spin
/// configurations (entries are +1/-1).
pub fn min_classical_energy(n: usize, energy: impl Fn(&[i8]) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut config = vec![1i8; n];
    for bits in 0..(1u64 << n) {
        for (i, c) in config.iter_mut().enumerate() {
            *c = if bits >> i & 1 == 1 { -1 } else { 1 };
        }
        let e = energy(&config);
        if e < best {
            best = e;
        }
    }
    best
}

/// A kernel with perfect within-block similarity and weak cross-block
/// similarity. Returns the matrix and the ground-truth labels.
pub fn block_kernel(block_sizes: &[usize], rng: &mut TestRng) -> (KernelMatrix, Vec<usize>) {
    let d: usize = block_sizes.iter().sum();
    let mut labels = Vec::with_capacity(d);
    for (b, &size) in block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(b).take(size));
    }
    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = if i == j || labels[i] == labels[j] {
                1.0
            } else {
                // Below any reasonable threshold; symmetric by mirroring.
                rng.range(0.02, 0.35)
            };
            entries[i * d + j] = v;
            entries[j * d + i] = v;
        }
    }
    (KernelMatrix::from_entries(d, entries).unwrap(), labels)
}

/// Canonical form of a labeling: relabel clusters by first appearance, so
/// two labelings compare equal exactly when they induce the same partition.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    let mut next = 0usize;
    labels
        .iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let v = next;
                next += 1;
                v
            })
        })
        .collect()
}

/// Deterministic pseudo-random stream for test data (xorshift star),
/// independent of the library's RNG choices.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
