//! Two-site DMRG ground-state search over matrix product states.
//!
//! The variational state is an open-chain MPS with physical dimension 2 and
//! site tensors of shape `[bond_left, 2, bond_right]`. The search sweeps a
//! two-site window across the chain: at each bond the window tensor is
//! optimized as the lowest eigenvector of the environment-projected
//! Hamiltonian (restarted Lanczos), then refactored by truncated SVD with a
//! bond-dimension ceiling. Sweeping stops when the energy settles or the
//! sweep budget runs out; the best state found is returned either way.

use crate::eigen::{lowest_eigenpair, EigenError, LanczosOptions};
use crate::mpo::Mpo;
use crate::tensor::{contract, qr_split, svd_truncate, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmrgError {
    #[error("matrix product states have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },

    #[error("chain of {n_sites} sites is too short for a two-site sweep (need at least 3)")]
    ChainTooShort { n_sites: usize },

    #[error("dense materialization limited to {max} sites, got {n_sites}")]
    TooLarge { n_sites: usize, max: usize },

    #[error("local eigensolver failed at site {site}")]
    LocalSolve {
        site: usize,
        #[source]
        source: EigenError,
    },

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("invalid state tensors: {0}")]
    BadState(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt state file: {0}")]
    Corrupt(String),
}

/// Open-chain matrix product state with physical dimension 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    tensors: Vec<Tensor>,
    canonical_center: Option<usize>,
}

impl Mps {
    /// Build from explicit site tensors, validating the bond chain.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self, DmrgError> {
        if tensors.is_empty() {
            return Err(DmrgError::BadState("no site tensors".into()));
        }
        for (i, t) in tensors.iter().enumerate() {
            if t.rank() != 3 || t.shape()[1] != 2 {
                return Err(DmrgError::BadState(format!(
                    "site {i} has shape {:?}, expected [bond, 2, bond]",
                    t.shape()
                )));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[2] != 1 {
            return Err(DmrgError::BadState(
                "boundary bond dimensions must be 1".into(),
            ));
        }
        for i in 0..tensors.len() - 1 {
            if tensors[i].shape()[2] != tensors[i + 1].shape()[0] {
                return Err(DmrgError::BadState(format!(
                    "bond mismatch between sites {i} and {} ({} vs {})",
                    i + 1,
                    tensors[i].shape()[2],
                    tensors[i + 1].shape()[0]
                )));
            }
        }
        Ok(Self {
            tensors,
            canonical_center: None,
        })
    }

    /// Random state with entries drawn uniformly from [0, 1), symmetrized
    /// under the global spin flip (σx on every site).
    ///
    /// Bond dimensions grow to at most `chi_cap`, additionally capped by
    /// the exact Schmidt-rank bound `2^min(i, N-i)` near the chain ends.
    /// The returned state is ψ + Πσx·ψ for a positive random ψ, built as a
    /// bond direct sum. Rationale: the supported Hamiltonians commute with
    /// the global flip and their off-diagonal couplings are non-positive,
    /// so every ground manifold contains a flip-even member with
    /// non-negative amplitudes. Deep inside an ordered phase the manifold
    /// is degenerate beyond any eigensolver's resolution and a generic
    /// start would leave the choice of member to floating-point noise —
    /// scattering the fidelities between neighboring parameter points.
    /// Starting even (and positive) lands every solve on the same member,
    /// so fidelities reflect the physics rather than the initializer.
    pub fn random(n_sites: usize, chi_cap: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Base bond dimensions: half the cap, so the symmetrized direct
        // sum below respects `chi_cap` exactly.
        let half = (chi_cap.max(1) / 2).max(1);
        let bond = |i: usize| -> usize {
            let e = i.min(n_sites - i).min(10);
            half.min(1usize << e)
        };
        let base: Vec<Tensor> = (0..n_sites)
            .map(|i| {
                let (l, r) = (bond(i), bond(i + 1));
                let data: Vec<f64> = (0..l * 2 * r).map(|_| rng.gen::<f64>()).collect();
                Tensor::new(vec![l, 2, r], data).expect("sized data")
            })
            .collect();
        if n_sites == 1 || chi_cap == 1 {
            // No room for a direct sum: symmetrize entries in place.
            let tensors = base
                .iter()
                .map(|t| {
                    let (l, r) = (t.shape()[0], t.shape()[2]);
                    let mut data = vec![0.0; l * 2 * r];
                    for a in 0..l {
                        for s in 0..2 {
                            for b in 0..r {
                                data[(a * 2 + s) * r + b] = t.data()[(a * 2) * r + b]
                                    + t.data()[(a * 2 + 1) * r + b];
                            }
                        }
                    }
                    Tensor::new(vec![l, 2, r], data).expect("sized data")
                })
                .collect();
            return Self {
                tensors,
                canonical_center: None,
            };
        }
        // Direct sum of ψ and its site-wise spin flip: boundary tensors
        // concatenate along the internal bond, bulk tensors block-diagonal.
        let flip = |t: &Tensor| -> Tensor {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let mut data = vec![0.0; l * 2 * r];
            for a in 0..l {
                for s in 0..2 {
                    for b in 0..r {
                        data[(a * 2 + s) * r + b] = t.data()[(a * 2 + (1 - s)) * r + b];
                    }
                }
            }
            Tensor::new(vec![l, 2, r], data).expect("sized data")
        };
        let tensors = (0..n_sites)
            .map(|i| {
                let t = &base[i];
                let f = flip(t);
                let (l, r) = (t.shape()[0], t.shape()[2]);
                if i == 0 {
                    // (1, 2, r) ++ (1, 2, r) → (1, 2, 2r)
                    let mut data = vec![0.0; 2 * 2 * r];
                    for s in 0..2 {
                        for b in 0..r {
                            data[s * 2 * r + b] = t.data()[s * r + b];
                            data[s * 2 * r + r + b] = f.data()[s * r + b];
                        }
                    }
                    Tensor::new(vec![1, 2, 2 * r], data).expect("sized data")
                } else if i == n_sites - 1 {
                    // (l, 2, 1) stacked → (2l, 2, 1)
                    let mut data = vec![0.0; 2 * l * 2];
                    for a in 0..l {
                        for s in 0..2 {
                            data[(a * 2 + s) * 1] = t.data()[(a * 2 + s) * 1];
                            data[((l + a) * 2 + s) * 1] = f.data()[(a * 2 + s) * 1];
                        }
                    }
                    Tensor::new(vec![2 * l, 2, 1], data).expect("sized data")
                } else {
                    // block-diag over (left, right) bonds
                    let mut data = vec![0.0; (2 * l) * 2 * (2 * r)];
                    for a in 0..l {
                        for s in 0..2 {
                            for b in 0..r {
                                data[(a * 2 + s) * 2 * r + b] = t.data()[(a * 2 + s) * r + b];
                                data[((l + a) * 2 + s) * 2 * r + r + b] =
                                    f.data()[(a * 2 + s) * r + b];
                            }
                        }
                    }
                    Tensor::new(vec![2 * l, 2, 2 * r], data).expect("sized data")
                }
            })
            .collect();
        Self {
            tensors,
            canonical_center: None,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn site(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    /// Bond dimensions, length `n_sites + 1`, ends equal to 1.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.tensors.len() + 1);
        dims.push(self.tensors[0].shape()[0]);
        for t in &self.tensors {
            dims.push(t.shape()[2]);
        }
        dims
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.canonical_center
    }

    /// Euclidean norm of the represented vector.
    pub fn norm(&self) -> f64 {
        overlap_unchecked(self, self).sqrt()
    }

    /// Bring all sites except the first into right-orthonormal form and
    /// scale the state to unit norm; the canonical center lands on site 0.
    pub fn right_canonicalize(&mut self) -> Result<(), DmrgError> {
        for i in (1..self.tensors.len()).rev() {
            let grouped = self.tensors[i].permute(&[1, 2, 0])?; // [s, r, l]
            let (q, r) = qr_split(&grouped, 2)?; // q: [s, r, k], r: [k, l]
            self.tensors[i] = q.permute(&[2, 0, 1])?; // [k, s, r]
            self.tensors[i - 1] = contract(&self.tensors[i - 1], &[2], &r, &[1])?;
        }
        let nrm = self.tensors[0].norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(DmrgError::BadState("state has zero or non-finite norm".into()));
        }
        self.tensors[0].scale(1.0 / nrm);
        self.canonical_center = Some(0);
        Ok(())
    }
}

/// DMRG run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    /// Bond dimension ceiling.
    pub chi: usize,
    /// Maximum number of full (right + left) sweeps.
    pub max_sweeps: usize,
    /// Sweep-to-sweep energy change below which the run stops.
    pub energy_tol: f64,
    /// Relative squared-weight threshold for discarding singular values.
    pub svd_cutoff: f64,
    /// Seed for the random initial state.
    pub seed: u64,
    /// Residual tolerance of the local eigensolver, relative to the energy.
    pub eig_tol: f64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            chi: 16,
            max_sweeps: 30,
            energy_tol: 1e-8,
            svd_cutoff: 1e-15,
            seed: 0,
            eig_tol: 1e-10,
        }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> Result<(), DmrgError> {
        if self.chi < 2 {
            return Err(DmrgError::BadConfig(format!(
                "bond dimension chi must be at least 2, got {}",
                self.chi
            )));
        }
        if self.max_sweeps == 0 {
            return Err(DmrgError::BadConfig("max_sweeps must be positive".into()));
        }
        if !(self.energy_tol > 0.0) {
            return Err(DmrgError::BadConfig("energy_tol must be positive".into()));
        }
        if !(self.eig_tol > 0.0) {
            return Err(DmrgError::BadConfig("eig_tol must be positive".into()));
        }
        if self.svd_cutoff < 0.0 {
            return Err(DmrgError::BadConfig("svd_cutoff must be non-negative".into()));
        }
        Ok(())
    }
}

/// Outcome of a ground-state search.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub state: Mps,
    /// Expectation value of the Hamiltonian in the returned state.
    pub energy: f64,
    pub sweeps_used: usize,
    /// Whether the sweep-to-sweep energy change dropped below tolerance.
    pub converged: bool,
    /// Largest truncation weight discarded during the final sweep.
    pub max_discarded_weight: f64,
}

fn ones_env() -> Tensor {
    Tensor::new(vec![1, 1, 1], vec![1.0]).expect("static shape")
}

/// Grow a left environment `[a_bra, w, a_ket]` by one site.
fn update_left_env(env: &Tensor, site: &Tensor, w: &Tensor) -> Tensor {
    let t1 = contract(env, &[2], site, &[0]).expect("env*ket");
    let t2 = contract(&t1, &[1, 2], w, &[0, 3]).expect("mpo layer");
    let t3 = contract(&t2, &[0, 3], site, &[0, 1]).expect("bra layer");
    t3.permute(&[2, 1, 0]).expect("rank 3")
}

/// Grow a right environment `[b_bra, w, b_ket]` by one site.
fn update_right_env(env: &Tensor, site: &Tensor, w: &Tensor) -> Tensor {
    let t1 = contract(site, &[2], env, &[2]).expect("ket*env");
    let t2 = contract(&t1, &[1, 3], w, &[3, 1]).expect("mpo layer");
    let t3 = contract(&t2, &[1, 3], site, &[2, 1]).expect("bra layer");
    t3.permute(&[2, 1, 0]).expect("rank 3")
}

/// Environment-projected Hamiltonian on a two-site window.
struct BondOperator<'a> {
    left: &'a Tensor,
    w1: &'a Tensor,
    w2: &'a Tensor,
    right: &'a Tensor,
}

impl BondOperator<'_> {
    /// Apply to a window tensor `[a, s1, s2, b]`.
    fn apply(&self, theta: &Tensor) -> Tensor {
        let x1 = contract(self.left, &[2], theta, &[0]).expect("left env");
        let x2 = contract(&x1, &[1, 2], self.w1, &[0, 3]).expect("first mpo site");
        let x3 = contract(&x2, &[3, 1], self.w2, &[0, 3]).expect("second mpo site");
        contract(&x3, &[1, 3], self.right, &[2, 1]).expect("right env")
    }
}

/// Lowest eigenpair of the window Hamiltonian, warm-started from `theta0`.
/// When the iteration budget is exhausted the best candidate found is used
/// (it never raises the energy above the warm start's).
fn solve_bond(
    op: &BondOperator<'_>,
    theta0: &Tensor,
    opts: &LanczosOptions,
    site: usize,
) -> Result<(f64, Tensor), DmrgError> {
    let shape = theta0.shape().to_vec();
    let dim = theta0.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        let t = Tensor::new(shape.clone(), x.to_vec()).expect("sized window");
        out.copy_from_slice(op.apply(&t).data());
    };
    let (lambda, vec) = match lowest_eigenpair(dim, apply, theta0.data(), opts) {
        Ok(pair) => pair,
        Err(EigenError::NoConvergence {
            best: Some(pair), ..
        }) => pair,
        Err(source) => return Err(DmrgError::LocalSolve { site, source }),
    };
    Ok((lambda, Tensor::new(shape, vec)?))
}

/// Multiply the last axis of `[.., k]` by per-index factors.
fn scale_last_axis(t: &Tensor, factors: &[f64]) -> Tensor {
    let mut out = t.clone();
    let k = factors.len();
    for chunk in out.data_mut().chunks_mut(k) {
        for (x, &f) in chunk.iter_mut().zip(factors) {
            *x *= f;
        }
    }
    out
}

/// Multiply the first axis of `[k, ..]` by per-index factors.
fn scale_first_axis(t: &Tensor, factors: &[f64]) -> Tensor {
    let mut out = t.clone();
    let row = out.len() / factors.len();
    for (q, &f) in factors.iter().enumerate() {
        for x in &mut out.data_mut()[q * row..(q + 1) * row] {
            *x *= f;
        }
    }
    out
}

/// Variational ground-state search from a seeded random initial state.
///
/// Right-canonicalizes the start, then runs two-site sweeps until the
/// sweep energy changes by less than `energy_tol` or `max_sweeps` is
/// reached. Non-convergence is reported in the result, not as an error;
/// the returned state is always normalized with its canonical center on
/// site 0, and `energy` is the recomputed Hamiltonian expectation value
/// of that state.
pub fn ground_state(mpo: &Mpo, config: &DmrgConfig) -> Result<GroundStateResult, DmrgError> {
    config.validate()?;
    let n = mpo.n_sites();
    if n < 3 {
        return Err(DmrgError::ChainTooShort { n_sites: n });
    }

    let mut mps = Mps::random(n, config.chi.min(4), config.seed);
    mps.right_canonicalize()?;

    let w: Vec<Tensor> = (0..n).map(|i| mpo.site_tensor(i)).collect();

    let mut left_envs: Vec<Tensor> = vec![ones_env(); n];
    let mut right_envs: Vec<Tensor> = vec![ones_env(); n];
    for i in (0..n - 1).rev() {
        right_envs[i] = update_right_env(&right_envs[i + 1], mps.site(i + 1), &w[i + 1]);
    }

    let opts = LanczosOptions {
        tol: config.eig_tol,
        max_applies: 300,
        basis_size: 24,
    };

    let mut prev_energy = f64::INFINITY;
    let mut sweep_energy = f64::INFINITY;
    let mut converged = false;
    let mut sweeps_used = 0;
    let mut max_discarded = 0.0f64;

    for sweep in 1..=config.max_sweeps {
        let mut sweep_discarded = 0.0f64;

        // Left-to-right half sweep.
        for i in 0..n - 1 {
            let theta0 = contract(mps.site(i), &[2], mps.site(i + 1), &[0])?;
            let op = BondOperator {
                left: &left_envs[i],
                w1: &w[i],
                w2: &w[i + 1],
                right: &right_envs[i + 1],
            };
            let (lambda, theta) = solve_bond(&op, &theta0, &opts, i)?;
            sweep_energy = lambda;

            let (u, mut s, vt, report) = svd_truncate(&theta, 2, config.chi, config.svd_cutoff)?;
            sweep_discarded = sweep_discarded.max(report.discarded_weight);
            let snorm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut s {
                *x /= snorm;
            }
            mps.tensors[i] = u;
            mps.tensors[i + 1] = scale_first_axis(&vt, &s);
            left_envs[i + 1] = update_left_env(&left_envs[i], mps.site(i), &w[i]);
        }

        // Right-to-left half sweep.
        for i in (0..n - 1).rev() {
            let theta0 = contract(mps.site(i), &[2], mps.site(i + 1), &[0])?;
            let op = BondOperator {
                left: &left_envs[i],
                w1: &w[i],
                w2: &w[i + 1],
                right: &right_envs[i + 1],
            };
            let (lambda, theta) = solve_bond(&op, &theta0, &opts, i)?;
            sweep_energy = lambda;

            let (u, mut s, vt, report) = svd_truncate(&theta, 2, config.chi, config.svd_cutoff)?;
            sweep_discarded = sweep_discarded.max(report.discarded_weight);
            let snorm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut s {
                *x /= snorm;
            }
            mps.tensors[i] = scale_last_axis(&u, &s);
            mps.tensors[i + 1] = vt;
            right_envs[i] = update_right_env(&right_envs[i + 1], mps.site(i + 1), &w[i + 1]);
        }

        sweeps_used = sweep;
        max_discarded = sweep_discarded;
        if (sweep_energy - prev_energy).abs() < config.energy_tol {
            converged = true;
            break;
        }
        prev_energy = sweep_energy;
    }

    mps.canonical_center = Some(0);
    let energy = expectation(mpo, &mps)?;
    Ok(GroundStateResult {
        state: mps,
        energy,
        sweeps_used,
        converged,
        max_discarded_weight: max_discarded,
    })
}

/// Hamiltonian expectation value `<psi|H|psi>` via environment transfer.
pub fn expectation(mpo: &Mpo, mps: &Mps) -> Result<f64, DmrgError> {
    if mpo.n_sites() != mps.n_sites() {
        return Err(DmrgError::LengthMismatch {
            a: mpo.n_sites(),
            b: mps.n_sites(),
        });
    }
    let mut env = ones_env();
    for i in 0..mps.n_sites() {
        env = update_left_env(&env, mps.site(i), &mpo.site_tensor(i));
    }
    Ok(env.data()[0])
}

fn overlap_unchecked(a: &Mps, b: &Mps) -> f64 {
    let mut env = Tensor::new(vec![1, 1], vec![1.0]).expect("static shape");
    for i in 0..a.n_sites() {
        let t = contract(&env, &[0], a.site(i), &[0]).expect("transfer a");
        env = contract(&t, &[0, 1], b.site(i), &[0, 1]).expect("transfer b");
    }
    env.data()[0]
}

/// Inner product `<a|b>` via left-to-right transfer contraction.
pub fn overlap(a: &Mps, b: &Mps) -> Result<f64, DmrgError> {
    if a.n_sites() != b.n_sites() {
        return Err(DmrgError::LengthMismatch {
            a: a.n_sites(),
            b: b.n_sites(),
        });
    }
    Ok(overlap_unchecked(a, b))
}

/// Maximum chain length for dense amplitude extraction.
pub const DENSE_MAX_SITES: usize = 14;

/// Expand the state into its full `2^N` amplitude vector (site 0 is the
/// most significant bit). Test/oracle bridge only.
pub fn mps_to_dense(a: &Mps) -> Result<Vec<f64>, DmrgError> {
    let n = a.n_sites();
    if n > DENSE_MAX_SITES {
        return Err(DmrgError::TooLarge {
            n_sites: n,
            max: DENSE_MAX_SITES,
        });
    }
    let first = a.site(0);
    let mut v = first.reshape(vec![2, first.shape()[2]])?;
    for i in 1..n {
        let grown = contract(&v, &[1], a.site(i), &[0])?; // [m, 2, r]
        let m = grown.shape()[0] * 2;
        let r = grown.shape()[2];
        v = grown.into_reshaped(vec![m, r])?;
    }
    let len = v.shape()[0];
    Ok(v.into_reshaped(vec![len])?.into_data())
}

// ---------------------------------------------------------------------------
// Binary persistence
// ---------------------------------------------------------------------------

const STATE_MAGIC: &[u8; 4] = b"PMPS";
const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StateHeader {
    n_sites: usize,
    shapes: Vec<Vec<usize>>,
    canonical_center: Option<usize>,
    config: DmrgConfig,
    energy: f64,
    converged: bool,
    sweeps_used: usize,
    max_discarded_weight: f64,
    payload_sha256: String,
}

/// Serialize a ground-state result (with its producing configuration) into
/// a self-describing binary container.
pub fn save_ground_state(
    path: &Path,
    result: &GroundStateResult,
    config: &DmrgConfig,
) -> Result<(), DmrgError> {
    let mut payload = Vec::new();
    for t in &result.state.tensors {
        for &x in t.data() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = hex::encode(Sha256::digest(&payload));
    let header = StateHeader {
        n_sites: result.state.n_sites(),
        shapes: result
            .state
            .tensors
            .iter()
            .map(|t| t.shape().to_vec())
            .collect(),
        canonical_center: result.state.canonical_center,
        config: *config,
        energy: result.energy,
        converged: result.converged,
        sweeps_used: result.sweeps_used,
        max_discarded_weight: result.max_discarded_weight,
        payload_sha256: digest,
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| DmrgError::Corrupt(e.to_string()))?;

    let mut file = std::fs::File::create(path)?;
    file.write_all(STATE_MAGIC)?;
    file.write_all(&STATE_VERSION.to_le_bytes())?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    file.write_all(&payload)?;
    Ok(())
}

/// Load a state container written by [`save_ground_state`].
pub fn load_ground_state(path: &Path) -> Result<(GroundStateResult, DmrgConfig), DmrgError> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(DmrgError::Corrupt("bad magic bytes".into()));
    }
    let mut version = [0u8; 4];
    file.read_exact(&mut version)?;
    if u32::from_le_bytes(version) != STATE_VERSION {
        return Err(DmrgError::Corrupt(format!(
            "unsupported version {}",
            u32::from_le_bytes(version)
        )));
    }
    let mut len = [0u8; 8];
    file.read_exact(&mut len)?;
    let header_len = u64::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)?;
    let header: StateHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| DmrgError::Corrupt(e.to_string()))?;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if hex::encode(Sha256::digest(&payload)) != header.payload_sha256 {
        return Err(DmrgError::Corrupt("payload checksum mismatch".into()));
    }

    let mut offset = 0usize;
    let mut tensors = Vec::with_capacity(header.n_sites);
    for shape in &header.shapes {
        let count: usize = shape.iter().product();
        let bytes = count * 8;
        if offset + bytes > payload.len() {
            return Err(DmrgError::Corrupt("payload shorter than shapes imply".into()));
        }
        let data: Vec<f64> = payload[offset..offset + bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        offset += bytes;
        tensors.push(Tensor::new(shape.clone(), data)?);
    }
    if offset != payload.len() {
        return Err(DmrgError::Corrupt("trailing bytes in payload".into()));
    }
    let mut state = Mps::from_tensors(tensors)?;
    state.canonical_center = header.canonical_center;
    Ok((
        GroundStateResult {
            state,
            energy: header.energy,
            sweeps_used: header.sweeps_used,
            converged: header.converged,
            max_discarded_weight: header.max_discarded_weight,
        },
        header.config,
    ))
}
