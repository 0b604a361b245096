//! End-to-end orchestration: parameter grid → ground states (disk-cached)
//! → fidelity kernel → cluster-count selection → final clustering →
//! artifact files (CSV / JSON / SVG) plus a run manifest.
//!
//! Everything is deterministic given the resolved [`RunConfig`]: per-point
//! solver seeds are derived by hashing the global seed with the point
//! index, so execution order and parallelism cannot affect any output.

use crate::dmrg::{
    ground_state, load_ground_state, save_ground_state, DmrgConfig, DmrgError, GroundStateResult,
    Mps,
};
use crate::kernel::{
    compute_kernel, kernel_distance, save_kernel_csv, KernelError, KernelMatrix, KernelMeta,
};
use crate::models::{
    make_grid, parse_grid_spec, AxisRange, Model, ModelError, ParameterGrid, ParameterPoint,
};
use crate::mpo::{automaton_to_mpo, build_automaton, HamiltonianSpec, MpoError};
use crate::render::{render_heatmap_with_overlay, render_silhouette_svg, RenderError};
use crate::selection::{
    embedding_distance, select_c, silhouette, SelectionCurve, SelectionError, SilhouetteReport,
    SilhouetteSpace, KMEANS_MAX_ITER,
};
use crate::spectral::{build_graph, embed, kmeans, laplacian, ClusterAssignment, SpectralError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Broad failure class, used to pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or malformed input; exit code 2.
    Validation,
    /// A solver or numerical consistency failure; exit code 3.
    Numerical,
    /// Filesystem trouble; exit code 2.
    Io,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse config file: {0}")]
    Toml(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Mpo(#[from] MpoError),

    #[error("ground-state solve failed: {0}")]
    Dmrg(#[from] DmrgError),

    #[error(transparent)]
    Kernel(#[from] KernelError),

    #[error(transparent)]
    Spectral(#[from] SpectralError),

    #[error(transparent)]
    Selection(#[from] SelectionError),

    #[error(transparent)]
    Render(#[from] RenderError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn spectral_kind(e: &SpectralError) -> ErrorKind {
    match e {
        SpectralError::NotNegativeSemidefinite(_) => ErrorKind::Numerical,
        _ => ErrorKind::Validation,
    }
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PipelineError::Config(_)
            | PipelineError::Toml(_)
            | PipelineError::Model(_)
            | PipelineError::Mpo(_)
            | PipelineError::Render(_) => ErrorKind::Validation,
            PipelineError::Dmrg(e) => match e {
                DmrgError::Io(_) => ErrorKind::Io,
                DmrgError::BadConfig(_)
                | DmrgError::ChainTooShort { .. }
                | DmrgError::TooLarge { .. }
                | DmrgError::LengthMismatch { .. }
                | DmrgError::Corrupt(_) => ErrorKind::Validation,
                _ => ErrorKind::Numerical,
            },
            PipelineError::Kernel(e) => match e {
                KernelError::Io(_) => ErrorKind::Io,
                KernelError::Unnormalized { .. } => ErrorKind::Numerical,
                _ => ErrorKind::Validation,
            },
            PipelineError::Spectral(e) => spectral_kind(e),
            PipelineError::Selection(e) => match e {
                SelectionError::Spectral(inner) => spectral_kind(inner),
                _ => ErrorKind::Validation,
            },
            PipelineError::Io(_) => ErrorKind::Io,
        }
    }

    /// Process exit code: 0 success, 2 validation/input, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Validation | ErrorKind::Io => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

/// Fully resolved run parameters. Serializable so the manifest can embed
/// a copy that reproduces the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Model,
    pub grid: Vec<AxisRange>,
    pub n_sites: usize,
    pub dmrg: DmrgConfig,
    /// Similarity threshold for graph edges, in (0, 1).
    pub tau: f64,
    pub c_min: usize,
    pub c_max: usize,
    /// Skip cluster-count selection and use this count directly.
    pub fixed_c: Option<usize>,
    /// Global seed; per-point solver seeds and k-means seeding derive
    /// from it deterministically.
    pub seed: u64,
    pub restarts: usize,
    pub silhouette_space: SilhouetteSpace,
    /// Rescale embedding rows to unit norm before k-means (off in the
    /// standard procedure).
    pub row_normalize: bool,
    pub out_dir: PathBuf,
    /// Ground-state cache directory. When absent, the PHASEMAP_CACHE_DIR
    /// environment variable is consulted, then `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Worker thread count (defaults to all cores).
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = Model::Annni;
        RunConfig {
            model,
            grid: model.default_ranges(15),
            n_sites: 20,
            dmrg: DmrgConfig::default(),
            tau: 0.5,
            c_min: 2,
            c_max: 8,
            fixed_c: None,
            seed: 7,
            restarts: 8,
            silhouette_space: SilhouetteSpace::Kernel,
            row_normalize: false,
            out_dir: PathBuf::from("phasemap-out"),
            cache_dir: None,
            jobs: None,
        }
    }
}

impl RunConfig {
    /// Hex SHA-256 identifying the scientific configuration; stamps every
    /// artifact. Plumbing fields (output/cache locations, thread count)
    /// are excluded so the same experiment hashes identically anywhere.
    pub fn digest(&self) -> String {
        let normalized = RunConfig {
            out_dir: PathBuf::new(),
            cache_dir: None,
            jobs: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&normalized).expect("config is serializable");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(PipelineError::Config(format!(
                "tau must lie strictly between 0 and 1, got {}",
                self.tau
            )));
        }
        if self.grid.is_empty() {
            return Err(PipelineError::Config("grid has no axes".into()));
        }
        match self.fixed_c {
            Some(0) => {
                return Err(PipelineError::Config("fixed_c must be at least 1".into()));
            }
            Some(_) => {}
            None => {
                if self.c_min < 2 {
                    return Err(PipelineError::Config(format!(
                        "c_min must be at least 2 for selection, got {}",
                        self.c_min
                    )));
                }
                if self.c_min > self.c_max {
                    return Err(PipelineError::Config(format!(
                        "c_min {} exceeds c_max {}",
                        self.c_min, self.c_max
                    )));
                }
            }
        }
        if self.restarts == 0 {
            return Err(PipelineError::Config("restarts must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        self.dmrg.validate().map_err(PipelineError::Dmrg)?;
        Ok(())
    }
}

/// Config-file / CLI-flag layer: every field optional so sources can be
/// stacked (defaults < file < flags) before resolving.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartialDmrgConfig {
    pub chi: Option<usize>,
    pub max_sweeps: Option<usize>,
    pub energy_tol: Option<f64>,
    pub svd_cutoff: Option<f64>,
    pub eig_tol: Option<f64>,
}

impl PartialDmrgConfig {
    pub fn merge(base: Self, over: Self) -> Self {
        PartialDmrgConfig {
            chi: over.chi.or(base.chi),
            max_sweeps: over.max_sweeps.or(base.max_sweeps),
            energy_tol: over.energy_tol.or(base.energy_tol),
            svd_cutoff: over.svd_cutoff.or(base.svd_cutoff),
            eig_tol: over.eig_tol.or(base.eig_tol),
        }
    }

    fn resolve(self) -> DmrgConfig {
        let d = DmrgConfig::default();
        DmrgConfig {
            chi: self.chi.unwrap_or(d.chi),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            energy_tol: self.energy_tol.unwrap_or(d.energy_tol),
            svd_cutoff: self.svd_cutoff.unwrap_or(d.svd_cutoff),
            seed: 0, // superseded per point
            eig_tol: self.eig_tol.unwrap_or(d.eig_tol),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartialRunConfig {
    pub model: Option<String>,
    /// Explicit axis list; exclusive with `grid_spec` and `grid_count`.
    pub grid: Option<Vec<AxisRange>>,
    /// Compact axis syntax, e.g. "k=0:1:15,h=0:2:15".
    pub grid_spec: Option<String>,
    /// Square sweep over the model's default box with this many samples
    /// per axis.
    pub grid_count: Option<usize>,
    pub n_sites: Option<usize>,
    pub dmrg: Option<PartialDmrgConfig>,
    pub tau: Option<f64>,
    pub c_min: Option<usize>,
    pub c_max: Option<usize>,
    pub fixed_c: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub silhouette_space: Option<SilhouetteSpace>,
    pub row_normalize: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl PartialRunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Toml(e.to_string()))
    }

    /// Field-wise overlay: values in `over` win.
    pub fn merge(base: Self, over: Self) -> Self {
        PartialRunConfig {
            model: over.model.or(base.model),
            grid: over.grid.or(base.grid),
            grid_spec: over.grid_spec.or(base.grid_spec),
            grid_count: over.grid_count.or(base.grid_count),
            n_sites: over.n_sites.or(base.n_sites),
            dmrg: match (base.dmrg, over.dmrg) {
                (Some(b), Some(o)) => Some(PartialDmrgConfig::merge(b, o)),
                (b, o) => o.or(b),
            },
            tau: over.tau.or(base.tau),
            c_min: over.c_min.or(base.c_min),
            c_max: over.c_max.or(base.c_max),
            fixed_c: over.fixed_c.or(base.fixed_c),
            seed: over.seed.or(base.seed),
            restarts: over.restarts.or(base.restarts),
            silhouette_space: over.silhouette_space.or(base.silhouette_space),
            row_normalize: over.row_normalize.or(base.row_normalize),
            out_dir: over.out_dir.or(base.out_dir),
            cache_dir: over.cache_dir.or(base.cache_dir),
            jobs: over.jobs.or(base.jobs),
        }
    }

    /// Fill gaps with defaults and validate the result.
    pub fn resolve(self) -> Result<RunConfig, PipelineError> {
        let d = RunConfig::default();
        let model = match &self.model {
            Some(name) => Model::parse(name)?,
            None => d.model,
        };
        let grid_sources =
            self.grid.is_some() as u8 + self.grid_spec.is_some() as u8 + self.grid_count.is_some() as u8;
        if grid_sources > 1 {
            return Err(PipelineError::Config(
                "set at most one of grid, grid_spec, grid_count".into(),
            ));
        }
        let grid = if let Some(g) = self.grid {
            g
        } else if let Some(s) = &self.grid_spec {
            parse_grid_spec(s)?
        } else if let Some(n) = self.grid_count {
            model.default_ranges(n)
        } else {
            model.default_ranges(15)
        };
        let config = RunConfig {
            model,
            grid,
            n_sites: self.n_sites.unwrap_or(d.n_sites),
            dmrg: self.dmrg.unwrap_or_default().resolve(),
            tau: self.tau.unwrap_or(d.tau),
            c_min: self.c_min.unwrap_or(d.c_min),
            c_max: self.c_max.unwrap_or(d.c_max),
            fixed_c: self.fixed_c,
            seed: self.seed.unwrap_or(d.seed),
            restarts: self.restarts.unwrap_or(d.restarts),
            silhouette_space: self.silhouette_space.unwrap_or(d.silhouette_space),
            row_normalize: self.row_normalize.unwrap_or(d.row_normalize),
            out_dir: self.out_dir.unwrap_or(d.out_dir),
            cache_dir: self.cache_dir,
            jobs: self.jobs,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Resolve the ground-state cache directory: explicit setting, then the
/// PHASEMAP_CACHE_DIR environment variable, then `<out_dir>/cache`.
pub fn cache_root(cache_dir: Option<&Path>, out_dir: &Path) -> PathBuf {
    if let Some(d) = cache_dir {
        return d.to_path_buf();
    }
    if let Some(d) = std::env::var_os("PHASEMAP_CACHE_DIR") {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    out_dir.join("cache")
}

/// Per-point solver seed: hash of the global seed with the grid-point
/// index. Every point gets an independent, reproducible initialization,
/// so execution order and parallelism cannot affect any output.
pub fn point_seed(global: u64, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().expect("digest has 32 bytes"))
}

/// Cache key for one grid point: hash of the solver settings (per-point
/// seed included) and the Hamiltonian digest (model, couplings, length).
/// A rerun of the same configuration reproduces every key, while any
/// change to the model, point, length, or solver settings invalidates
/// exactly the affected entries.
fn cache_key(dmrg: &DmrgConfig, spec_digest: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(dmrg).expect("config is serializable"));
    h.update(spec_digest.as_bytes());
    hex::encode(h.finalize())
}

/// Solve one grid point, consulting the cache first. Writes results via a
/// temporary file + rename so concurrent writers cannot leave a torn file.
fn solve_point(
    spec: &HamiltonianSpec,
    dmrg: &DmrgConfig,
    cache: &Path,
    key: &str,
) -> Result<(GroundStateResult, bool), PipelineError> {
    let path = cache.join(format!("{key}.mps"));
    if path.is_file() {
        if let Ok((result, _)) = load_ground_state(&path) {
            if result.state.n_sites() == spec.n_sites {
                return Ok((result, true));
            }
        }
        // Unreadable or stale entry: fall through and recompute.
    }
    let graph = build_automaton(spec)?;
    let mpo = automaton_to_mpo(&graph, spec.n_sites)?;
    let result = ground_state(&mpo, dmrg)?;
    let tmp = cache.join(format!("{key}.tmp-{}", std::process::id()));
    save_ground_state(&tmp, &result, dmrg)?;
    fs::rename(&tmp, &path)?;
    Ok((result, false))
}

fn grid_digest(grid: &ParameterGrid) -> String {
    let bytes = serde_json::to_vec(grid).expect("grid is serializable");
    hex::encode(Sha256::digest(bytes))
}

/// One labeled grid point of the finished diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub index: usize,
    pub coords: Vec<f64>,
    pub label: usize,
    /// Per-point silhouette width (0 when only one cluster exists).
    pub silhouette: f64,
}

/// The assembled phase diagram plus the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub grid: ParameterGrid,
    pub points: Vec<DiagramPoint>,
    pub chosen_c: usize,
    /// Present when the cluster count was selected by scanning.
    pub selection: Option<SelectionCurve>,
    pub silhouette_report: Option<SilhouetteReport>,
    /// Digest of the manifest that records this run.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

/// `manifest.json` contents: everything needed to audit or re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub config_digest: String,
    pub grid_digest: String,
    pub chosen_c: usize,
    /// Grid indices whose solver stopped at the sweep limit without
    /// meeting the energy tolerance (results still used).
    pub unconverged: Vec<usize>,
    pub cache: CacheStats,
    pub artifacts: Vec<ArtifactRecord>,
}

/// `selection.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub config_digest: String,
    /// "selected" when the count came from the scan, "fixed" otherwise.
    pub mode: String,
    pub chosen_c: usize,
    pub curve: Option<SelectionCurve>,
}

/// Result of a full pipeline run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub diagram: PhaseDiagram,
    pub manifest: RunManifest,
    /// Hex SHA-256 of manifest.json as written.
    pub provenance: String,
    pub out_dir: PathBuf,
}

/// Spectral-cluster a kernel matrix at a fixed cluster count.
pub fn cluster_kernel(
    k: &KernelMatrix,
    tau: f64,
    c: usize,
    seed: u64,
    restarts: usize,
    row_normalize: bool,
) -> Result<ClusterAssignment, PipelineError> {
    let l = laplacian(&build_graph(k, tau)?);
    let mut emb = embed(&l, c)?;
    if row_normalize {
        emb = emb.row_normalized();
    }
    Ok(kmeans(&emb, c, seed, restarts, KMEANS_MAX_ITER)?)
}

fn clustering_stage(
    config: &RunConfig,
    kernel: &KernelMatrix,
) -> Result<
    (
        usize,
        Option<SelectionCurve>,
        Vec<usize>,
        Option<SilhouetteReport>,
    ),
    PipelineError,
> {
    let (chosen_c, selection) = match config.fixed_c {
        Some(c) => (c, None),
        None => {
            let curve = select_c(
                kernel,
                config.tau,
                config.c_min..=config.c_max,
                config.seed,
                config.restarts,
                config.silhouette_space,
                config.row_normalize,
            )?;
            (curve.chosen_c, Some(curve))
        }
    };
    let l = laplacian(&build_graph(kernel, config.tau)?);
    let mut emb = embed(&l, chosen_c)?;
    if config.row_normalize {
        emb = emb.row_normalized();
    }
    let clustering = kmeans(&emb, chosen_c, config.seed, config.restarts, KMEANS_MAX_ITER)?;
    let report = if chosen_c >= 2 {
        let dist = match config.silhouette_space {
            SilhouetteSpace::Kernel => kernel_distance(kernel),
            SilhouetteSpace::Embedding => embedding_distance(&emb),
        };
        Some(silhouette(&dist, &clustering.labels)?)
    } else {
        None
    };
    Ok((chosen_c, selection, clustering.labels, report))
}

fn format_labels_csv(
    grid: &ParameterGrid,
    labels: &[usize],
    report: Option<&SilhouetteReport>,
    config_digest: &str,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config {config_digest}");
    let _ = writeln!(out, "index,{},label,silhouette", grid.axis_names.join(","));
    for p in &grid.points {
        let coords: Vec<String> = p.coords.iter().map(|v| format!("{v:.16e}")).collect();
        let s = report.map_or(0.0, |r| r.per_point[p.index].s);
        let _ = writeln!(
            out,
            "{},{},{},{:.16e}",
            p.index,
            coords.join(","),
            labels[p.index],
            s
        );
    }
    out
}

/// Parse a labels.csv written by the pipeline: returns the config digest,
/// the axis names, and the point rows.
pub fn read_labels_csv(
    path: &Path,
) -> Result<(String, Vec<String>, Vec<DiagramPoint>), PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let digest = lines
        .next()
        .and_then(|l| l.strip_prefix("# config "))
        .ok_or_else(|| PipelineError::Config("labels file lacks a '# config' line".into()))?
        .to_string();
    let header = lines
        .next()
        .ok_or_else(|| PipelineError::Config("labels file lacks a header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "index" || cols[cols.len() - 2] != "label" {
        return Err(PipelineError::Config(format!(
            "unexpected labels header '{header}'"
        )));
    }
    let axis_names: Vec<String> = cols[1..cols.len() - 2].iter().map(|s| s.to_string()).collect();
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(PipelineError::Config(format!(
                "labels row {} has {} fields, expected {}",
                i + 3,
                fields.len(),
                cols.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64, PipelineError> {
            s.parse()
                .map_err(|_| PipelineError::Config(format!("bad number '{s}' in labels file")))
        };
        let parse_u = |s: &str| -> Result<usize, PipelineError> {
            s.parse()
                .map_err(|_| PipelineError::Config(format!("bad integer '{s}' in labels file")))
        };
        let coords: Result<Vec<f64>, _> =
            fields[1..fields.len() - 2].iter().map(|s| parse_f(s)).collect();
        points.push(DiagramPoint {
            index: parse_u(fields[0])?,
            coords: coords?,
            label: parse_u(fields[fields.len() - 2])?,
            silhouette: parse_f(fields[fields.len() - 1])?,
        });
    }
    Ok((digest, axis_names, points))
}

/// Parse an overlay CSV of reference boundary lines: rows of `x,y`,
/// blank lines separating polylines, `#` comment lines ignored.
pub fn read_overlay_csv(path: &Path) -> Result<Vec<Vec<(f64, f64)>>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut lines_out: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                lines_out.push(std::mem::take(&mut current));
            }
            continue;
        }
        let mut parts = line.split(',');
        let (x, y) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a.trim(), b.trim()),
            _ => {
                return Err(PipelineError::Config(format!(
                    "overlay row '{line}' is not 'x,y'"
                )))
            }
        };
        let parse = |s: &str| -> Result<f64, PipelineError> {
            s.parse()
                .map_err(|_| PipelineError::Config(format!("bad number '{s}' in overlay file")))
        };
        current.push((parse(x)?, parse(y)?));
    }
    if !current.is_empty() {
        lines_out.push(current);
    }
    Ok(lines_out)
}

fn hash_file(path: &Path) -> Result<String, PipelineError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Run the whole procedure and write all artifacts into the output
/// directory: kernel.csv (+ provenance sidecar), labels.csv,
/// selection.json, diagram.svg, silhouette.svg (when defined), and
/// manifest.json.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    run_pipeline_with_overlay(config, &[])
}

/// Output of the ground-state + kernel stages.
#[derive(Debug, Clone)]
pub struct KernelStage {
    pub grid: ParameterGrid,
    pub kernel: KernelMatrix,
    pub cache: CacheStats,
    /// Grid indices whose solver hit the sweep limit (still included).
    pub unconverged: Vec<usize>,
}

/// Stages 1–2 only: solve every grid point (cache-aware, parallel) and
/// assemble the fidelity kernel with full provenance metadata.
pub fn compute_grid_kernel(config: &RunConfig) -> Result<KernelStage, PipelineError> {
    config.validate()?;
    let grid = make_grid(&config.grid)?;
    let cache = cache_root(config.cache_dir.as_deref(), &config.out_dir);
    fs::create_dir_all(&cache)?;

    // Stage 1: ground states. Every grid point is solved independently
    // (parallel, cache-aware); the solver seed for point i is derived by
    // hashing the global seed with i, so points are decoupled and the
    // results do not depend on execution order.
    let solve_one =
        |(index, point): (usize, &ParameterPoint)| -> Result<(GroundStateResult, bool), PipelineError> {
            let spec = config.model.spec_at(&point.coords, config.n_sites)?;
            let mut dmrg = config.dmrg;
            dmrg.seed = point_seed(config.seed, index);
            let key = cache_key(&dmrg, &spec.digest());
            solve_point(&spec, &dmrg, &cache, &key)
        };
    let solve_all = || -> Result<Vec<(GroundStateResult, bool)>, PipelineError> {
        grid.points
            .par_iter()
            .enumerate()
            .map(solve_one)
            .collect::<Result<_, _>>()
    };
    let results = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::Config(format!("cannot build thread pool: {e}")))?
            .install(solve_all),
        None => solve_all(),
    }?;
    let hits = results.iter().filter(|(_, hit)| *hit).count();
    let misses = results.len() - hits;
    let unconverged: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (r, _))| !r.converged)
        .map(|(i, _)| i)
        .collect();
    let states: Vec<Mps> = results.into_iter().map(|(r, _)| r.state).collect();

    // Stage 2: fidelity kernel.
    let mut kernel = compute_kernel(&states)?;
    kernel.meta = KernelMeta {
        model: config.model.name().into(),
        grid_digest: grid_digest(&grid),
        config_digest: config.digest(),
        chi: config.dmrg.chi,
        seed: config.seed,
        grid: Some(grid.clone()),
    };
    Ok(KernelStage {
        grid,
        kernel,
        cache: CacheStats { hits, misses },
        unconverged,
    })
}

/// [`run_pipeline`] with reference boundary polylines (parameter-space
/// coordinates) drawn on the diagram.
pub fn run_pipeline_with_overlay(
    config: &RunConfig,
    overlay: &[Vec<(f64, f64)>],
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let d: usize = config.grid.iter().map(|a| a.count).product();
    let scan_max = config.fixed_c.unwrap_or(config.c_max);
    if scan_max > d {
        return Err(PipelineError::Config(format!(
            "cluster count {scan_max} exceeds the {d}-point grid"
        )));
    }
    let config_digest = config.digest();
    fs::create_dir_all(&config.out_dir)?;

    let stage = compute_grid_kernel(config)?;
    let KernelStage {
        grid,
        kernel,
        cache: cache_stats,
        unconverged,
    } = stage;
    let gdigest = kernel.meta.grid_digest.clone();
    let kernel_path = config.out_dir.join("kernel.csv");
    save_kernel_csv(&kernel_path, &kernel)?;

    // Stages 3–4: cluster-count selection and final clustering.
    let (chosen_c, selection, labels, report) = clustering_stage(config, &kernel)?;

    let labels_path = config.out_dir.join("labels.csv");
    fs::write(
        &labels_path,
        format_labels_csv(&grid, &labels, report.as_ref(), &config_digest),
    )?;

    let selection_artifact = SelectionArtifact {
        config_digest: config_digest.clone(),
        mode: if config.fixed_c.is_some() {
            "fixed".into()
        } else {
            "selected".into()
        },
        chosen_c,
        curve: selection.clone(),
    };
    let selection_path = config.out_dir.join("selection.json");
    let mut selection_json = serde_json::to_string_pretty(&selection_artifact)
        .expect("selection artifact is serializable");
    selection_json.push('\n');
    fs::write(&selection_path, selection_json)?;

    let mut diagram = PhaseDiagram {
        points: grid
            .points
            .iter()
            .map(|p| DiagramPoint {
                index: p.index,
                coords: p.coords.clone(),
                label: labels[p.index],
                silhouette: report.as_ref().map_or(0.0, |r| r.per_point[p.index].s),
            })
            .collect(),
        grid,
        chosen_c,
        selection,
        silhouette_report: report,
        provenance: config_digest.clone(),
    };

    let diagram_path = config.out_dir.join("diagram.svg");
    fs::write(&diagram_path, render_heatmap_with_overlay(&diagram, overlay)?)?;

    let mut artifact_paths = vec![
        ("kernel.csv", kernel_path.clone()),
        (
            "kernel.csv.manifest.json",
            config.out_dir.join("kernel.csv.manifest.json"),
        ),
        ("labels.csv", labels_path),
        ("selection.json", selection_path),
        ("diagram.svg", diagram_path),
    ];
    if let Some(r) = &diagram.silhouette_report {
        let sil_path = config.out_dir.join("silhouette.svg");
        fs::write(
            &sil_path,
            format!("<!-- config {config_digest} -->\n{}", render_silhouette_svg(r)),
        )?;
        artifact_paths.push(("silhouette.svg", sil_path));
    }

    let mut artifacts = Vec::new();
    for (name, path) in &artifact_paths {
        artifacts.push(ArtifactRecord {
            name: (*name).to_string(),
            sha256: hash_file(path)?,
        });
    }

    let manifest = RunManifest {
        format_version: 1,
        config: config.clone(),
        config_digest,
        grid_digest: gdigest,
        chosen_c,
        unconverged,
        cache: cache_stats,
        artifacts,
    };
    let mut manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    manifest_json.push('\n');
    fs::write(config.out_dir.join("manifest.json"), &manifest_json)?;
    let provenance = hex::encode(Sha256::digest(manifest_json.as_bytes()));
    diagram.provenance = provenance.clone();

    Ok(RunSummary {
        diagram,
        manifest,
        provenance,
        out_dir: config.out_dir.clone(),
    })
}
