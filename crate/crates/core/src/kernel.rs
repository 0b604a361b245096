//! Fidelity kernel over a family of ground states and the feature-space
//! distance it induces.
//!
//! The kernel entry for a pair of states is the squared overlap
//! `K_ij = <i|j>^2`, collected into a dense symmetric matrix with unit
//! diagonal. Distances derive from the kernel as `d_ij = sqrt(2 - 2 K_ij)`,
//! the Hilbert-Schmidt distance between the corresponding pure-state
//! density matrices, so cluster geometry downstream lives in the same
//! feature space the kernel measures.
//!
//! Kernels persist as plain CSV (with a JSON sidecar carrying provenance),
//! so externally estimated kernels — e.g. noisy hardware measurements —
//! can be injected and the clustering half of the pipeline used standalone.

use crate::dmrg::Mps;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("no states supplied")]
    Empty,

    #[error("state {index} is not normalized (norm {norm})")]
    Unnormalized { index: usize, norm: f64 },

    #[error("state {index} has {n_sites} sites, expected {expected}")]
    MixedLengths {
        index: usize,
        n_sites: usize,
        expected: usize,
    },

    #[error("kernel data invalid: {0}")]
    Invalid(String),

    #[error("kernel file malformed: {0}")]
    Format(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Provenance carried alongside a kernel matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelMeta {
    pub model: String,
    pub grid_digest: String,
    pub config_digest: String,
    pub chi: usize,
    pub seed: u64,
    /// Parameter grid the rows correspond to, when the kernel came from a
    /// grid sweep; lets downstream commands recover coordinates.
    pub grid: Option<crate::models::ParameterGrid>,
}

/// Dense symmetric similarity matrix with unit diagonal, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    size: usize,
    entries: Vec<f64>,
    pub meta: KernelMeta,
}

impl KernelMatrix {
    /// Validate and adopt raw row-major entries: symmetry within 1e-10,
    /// diagonal at 1 within 1e-9, values within [-1e-9, 1+1e-9]; values are
    /// clamped to [0, 1] on store.
    pub fn from_entries(size: usize, mut entries: Vec<f64>) -> Result<Self, KernelError> {
        if size == 0 {
            return Err(KernelError::Invalid("empty kernel".into()));
        }
        if entries.len() != size * size {
            return Err(KernelError::Invalid(format!(
                "expected {} entries for size {size}, got {}",
                size * size,
                entries.len()
            )));
        }
        for i in 0..size {
            let diag = entries[i * size + i];
            if (diag - 1.0).abs() > 1e-9 {
                return Err(KernelError::Invalid(format!(
                    "diagonal entry {i} is {diag}, expected 1"
                )));
            }
            for j in 0..size {
                let v = entries[i * size + j];
                if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(KernelError::Invalid(format!(
                        "entry ({i},{j}) = {v} outside [0, 1]"
                    )));
                }
                let w = entries[j * size + i];
                if (v - w).abs() > 1e-10 {
                    return Err(KernelError::Invalid(format!(
                        "asymmetric at ({i},{j}): {v} vs {w}"
                    )));
                }
            }
        }
        for v in &mut entries {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            size,
            entries,
            meta: KernelMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: KernelMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Adopt raw row-major entries: must be square, symmetric within 1e-10,
    /// non-negative, with zero diagonal.
    pub fn from_entries(size: usize, entries: Vec<f64>) -> Result<Self, KernelError> {
        if size == 0 || entries.len() != size * size {
            return Err(KernelError::Invalid(format!(
                "expected {} entries for size {size}, got {}",
                size * size,
                entries.len()
            )));
        }
        for i in 0..size {
            if entries[i * size + i] != 0.0 {
                return Err(KernelError::Invalid(format!(
                    "distance diagonal entry {i} is nonzero"
                )));
            }
            for j in 0..size {
                let v = entries[i * size + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(KernelError::Invalid(format!(
                        "distance entry ({i},{j}) = {v} invalid"
                    )));
                }
                if (v - entries[j * size + i]).abs() > 1e-10 {
                    return Err(KernelError::Invalid(format!(
                        "distance asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Squared-overlap kernel over all state pairs.
///
/// Only the upper triangle is computed (pairs are independent and run in
/// parallel); the matrix is mirrored and the diagonal forced to exactly 1.
pub fn compute_kernel(states: &[Mps]) -> Result<KernelMatrix, KernelError> {
    if states.is_empty() {
        return Err(KernelError::Empty);
    }
    let expected = states[0].n_sites();
    for (index, s) in states.iter().enumerate() {
        if s.n_sites() != expected {
            return Err(KernelError::MixedLengths {
                index,
                n_sites: s.n_sites(),
                expected,
            });
        }
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(KernelError::Unnormalized { index, norm });
        }
    }

    let d = states.len();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let o = crate::dmrg::overlap(&states[i], &states[j]).expect("lengths checked");
            (o * o).clamp(0.0, 1.0)
        })
        .collect();

    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        entries[i * d + i] = 1.0;
    }
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        entries[i * d + j] = v;
        entries[j * d + i] = v;
    }
    Ok(KernelMatrix {
        size: d,
        entries,
        meta: KernelMeta::default(),
    })
}

/// Hilbert-Schmidt distance between pure-state features:
/// `d_ij = sqrt(max(0, 2 - 2 K_ij))`, zero diagonal, symmetric.
pub fn kernel_distance(k: &KernelMatrix) -> DistanceMatrix {
    let d = k.size;
    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                entries[i * d + j] = (2.0 - 2.0 * k.get(i, j)).max(0.0).sqrt();
            }
        }
    }
    DistanceMatrix { size: d, entries }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Write the kernel as CSV — one line holding the size, then one line per
/// row with comma-separated entries at 17 significant digits (enough to
/// round-trip every f64 bit-exactly) — plus a JSON sidecar with the
/// provenance metadata.
pub fn save_kernel_csv(path: &Path, k: &KernelMatrix) -> Result<(), KernelError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", k.size)?;
    for i in 0..k.size {
        let row: Vec<String> = (0..k.size)
            .map(|j| format!("{:.16e}", k.get(i, j)))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    let manifest = serde_json::to_string_pretty(&k.meta)
        .map_err(|e| KernelError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), manifest)?;
    Ok(())
}

/// Load a kernel written by [`save_kernel_csv`] (or supplied externally in
/// the same format). A missing sidecar yields default metadata.
pub fn load_kernel_csv(path: &Path) -> Result<KernelMatrix, KernelError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| KernelError::Format("empty file".into()))??;
    let size: usize = header
        .trim()
        .parse()
        .map_err(|_| KernelError::Format(format!("bad size line {header:?}")))?;
    let mut entries = Vec::with_capacity(size * size);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if idx >= size {
            return Err(KernelError::Format(format!(
                "more than {size} data rows"
            )));
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| KernelError::Format(format!("row {idx}: {e}")))?;
        if row.len() != size {
            return Err(KernelError::Format(format!(
                "row {idx} has {} entries, expected {size}",
                row.len()
            )));
        }
        entries.extend(row);
    }
    if entries.len() != size * size {
        return Err(KernelError::Format(format!(
            "expected {size} rows, found {}",
            entries.len() / size.max(1)
        )));
    }
    let mut k = KernelMatrix::from_entries(size, entries)?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let raw = std::fs::read_to_string(sidecar)?;
        k.meta = serde_json::from_str(&raw).map_err(|e| KernelError::Format(e.to_string()))?;
    }
    Ok(k)
}
