//! `phasemap` — map quantum phase diagrams of spin-½ chains without labels:
//! DMRG ground states on a parameter grid, a fidelity kernel between them,
//! spectral clustering, and automatic cluster-count selection.

use clap::{Args, Parser, Subcommand};
use phasemap_core::dmrg::{ground_state, DmrgConfig};
use phasemap_core::ed::{exact_ground_state, EdError};
use phasemap_core::kernel::load_kernel_csv;
use phasemap_core::models::{make_grid, Model};
use phasemap_core::mpo::{automaton_to_mpo, build_automaton, HamiltonianSpec};
use phasemap_core::pipeline::{
    cache_root, cluster_kernel, compute_grid_kernel, read_labels_csv,
    read_overlay_csv, run_pipeline_with_overlay, PartialDmrgConfig, PartialRunConfig,
    PhaseDiagram, PipelineError, RunManifest, SelectionArtifact,
};
use phasemap_core::render::{render_heatmap_with_overlay, render_silhouette_svg};
use phasemap_core::selection::{select_c, SilhouettePoint, SilhouetteReport, SilhouetteSpace};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "phasemap",
    version,
    about = "Unsupervised phase diagrams of spin-1/2 chains via fidelity-kernel clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ground states -> kernel -> selection ->
    /// clustering -> artifacts.
    Run(RunArgs),
    /// Compute ground states and write the fidelity kernel only.
    Kernel(KernelArgs),
    /// Cluster an existing kernel at a fixed cluster count.
    Cluster(ClusterArgs),
    /// Scan cluster counts on an existing kernel and report the best.
    #[command(name = "select-c")]
    SelectC(SelectCArgs),
    /// Re-render the SVG plots of a completed run directory.
    Diagram(DiagramArgs),
    /// Exact-diagonalization cross-check of one parameter point.
    Oracle(OracleArgs),
    /// Inspect or evict the ground-state cache.
    Cache(CacheArgs),
}

/// Flags shared by every command that resolves a full run configuration.
/// Precedence: built-in defaults < config file < flags.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file mirroring the run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model family: annni | cluster-ising.
    #[arg(long)]
    model: Option<String>,
    /// Compact grid syntax, e.g. "k=0:1:15,h=0:2:15".
    #[arg(long)]
    grid_spec: Option<String>,
    /// Square sweep of the model's default box with this many samples per axis.
    #[arg(long)]
    grid_count: Option<usize>,
    /// Chain length.
    #[arg(long)]
    n_sites: Option<usize>,
    /// Bond dimension ceiling.
    #[arg(long)]
    chi: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    energy_tol: Option<f64>,
    #[arg(long)]
    svd_cutoff: Option<f64>,
    #[arg(long)]
    eig_tol: Option<f64>,
    /// Similarity threshold in (0,1) for graph edges.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    c_min: Option<usize>,
    #[arg(long)]
    c_max: Option<usize>,
    /// Skip selection and cluster at this fixed count.
    #[arg(long)]
    fixed_c: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// k-means restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Distance space for silhouettes: kernel | embedding.
    #[arg(long, value_parser = parse_space)]
    silhouette_space: Option<SilhouetteSpace>,
    /// Rescale embedding rows to unit norm before k-means.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    row_normalize: Option<bool>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Ground-state cache directory (falls back to PHASEMAP_CACHE_DIR,
    /// then <out_dir>/cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_space(s: &str) -> Result<SilhouetteSpace, String> {
    match s {
        "kernel" => Ok(SilhouetteSpace::Kernel),
        "embedding" => Ok(SilhouetteSpace::Embedding),
        other => Err(format!("unknown space '{other}' (kernel | embedding)")),
    }
}

impl ConfigArgs {
    fn flag_layer(&self) -> PartialRunConfig {
        let dmrg = PartialDmrgConfig {
            chi: self.chi,
            max_sweeps: self.max_sweeps,
            energy_tol: self.energy_tol,
            svd_cutoff: self.svd_cutoff,
            eig_tol: self.eig_tol,
        };
        PartialRunConfig {
            model: self.model.clone(),
            grid: None,
            grid_spec: self.grid_spec.clone(),
            grid_count: self.grid_count,
            n_sites: self.n_sites,
            dmrg: (dmrg != PartialDmrgConfig::default()).then_some(dmrg),
            tau: self.tau,
            c_min: self.c_min,
            c_max: self.c_max,
            fixed_c: self.fixed_c,
            seed: self.seed,
            restarts: self.restarts,
            silhouette_space: self.silhouette_space,
            row_normalize: self.row_normalize,
            out_dir: self.out_dir.clone(),
            cache_dir: self.cache_dir.clone(),
            jobs: self.jobs,
        }
    }

    fn resolve(&self) -> Result<phasemap_core::pipeline::RunConfig, CliError> {
        let file_layer = match &self.config {
            Some(path) => PartialRunConfig::from_toml_str(&fs::read_to_string(path)?)?,
            None => PartialRunConfig::default(),
        };
        Ok(PartialRunConfig::merge(file_layer, self.flag_layer()).resolve()?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV of reference boundary polylines (x,y rows; blank line between
    /// lines) drawn atop the diagram.
    #[arg(long)]
    overlay: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Kernel CSV destination (default: <out_dir>/kernel.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Kernel CSV produced by `run` or `kernel`.
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Cluster count.
    #[arg(long)]
    c: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    row_normalize: Option<bool>,
    /// Labels CSV destination.
    #[arg(long, default_value = "labels.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SelectCArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 2)]
    c_min: usize,
    #[arg(long, default_value_t = 10)]
    c_max: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, value_parser = parse_space, default_value = "kernel")]
    silhouette_space: SilhouetteSpace,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    row_normalize: Option<bool>,
    /// Selection JSON destination.
    #[arg(long, default_value = "selection.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagramArgs {
    /// Completed run directory holding manifest.json and labels.csv.
    #[arg(long)]
    run_dir: PathBuf,
    /// Heatmap destination (default: <run_dir>/diagram.svg).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Silhouette plot destination (default: <run_dir>/silhouette.svg).
    #[arg(long)]
    silhouette_out: Option<PathBuf>,
    #[arg(long)]
    overlay: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Model family (with --point); exclusive with --model-file.
    #[arg(long)]
    model: Option<String>,
    /// Parameter coordinates, e.g. "0.4,0.9".
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 10)]
    n_sites: usize,
    /// TOML file describing an arbitrary interaction Hamiltonian.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Also solve variationally and report the energy difference.
    #[arg(long)]
    compare_dmrg: bool,
    #[arg(long, default_value_t = 16)]
    chi: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct CacheArgs {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// List cached ground states.
    List {
        /// Cache directory (falls back to PHASEMAP_CACHE_DIR, then
        /// <out_dir>/cache).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value = "phasemap-out")]
        out_dir: PathBuf,
    },
    /// Delete every cached ground state.
    Clear {
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value = "phasemap-out")]
        out_dir: PathBuf,
    },
}

enum CliError {
    Pipeline(PipelineError),
    Ed(EdError),
    Io(std::io::Error),
    Usage(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}
impl From<EdError> for CliError {
    fn from(e: EdError) -> Self {
        CliError::Ed(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
impl From<phasemap_core::mpo::MpoError> for CliError {
    fn from(e: phasemap_core::mpo::MpoError) -> Self {
        CliError::Pipeline(PipelineError::Mpo(e))
    }
}
impl From<phasemap_core::models::ModelError> for CliError {
    fn from(e: phasemap_core::models::ModelError) -> Self {
        CliError::Pipeline(PipelineError::Model(e))
    }
}
impl From<phasemap_core::dmrg::DmrgError> for CliError {
    fn from(e: phasemap_core::dmrg::DmrgError) -> Self {
        CliError::Pipeline(PipelineError::Dmrg(e))
    }
}
impl From<phasemap_core::kernel::KernelError> for CliError {
    fn from(e: phasemap_core::kernel::KernelError) -> Self {
        CliError::Pipeline(PipelineError::Kernel(e))
    }
}
impl From<phasemap_core::selection::SelectionError> for CliError {
    fn from(e: phasemap_core::selection::SelectionError) -> Self {
        CliError::Pipeline(PipelineError::Selection(e))
    }
}
impl From<phasemap_core::render::RenderError> for CliError {
    fn from(e: phasemap_core::render::RenderError) -> Self {
        CliError::Pipeline(PipelineError::Render(e))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::Ed(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Ed(EdError::TooLarge { .. }) => 2,
            CliError::Ed(EdError::Solve(_)) => 3,
            CliError::Io(_) => 2,
            CliError::Usage(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::SelectC(args) => cmd_select_c(args),
        Command::Diagram(args) => cmd_diagram(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Cache(args) => cmd_cache(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let overlay = match &args.overlay {
        Some(path) => read_overlay_csv(path)?,
        None => Vec::new(),
    };
    let summary = run_pipeline_with_overlay(&config, &overlay)?;
    println!(
        "solved {} grid points ({} cached, {} computed, {} unconverged)",
        summary.diagram.points.len(),
        summary.manifest.cache.hits,
        summary.manifest.cache.misses,
        summary.manifest.unconverged.len(),
    );
    match &summary.diagram.selection {
        Some(curve) => println!(
            "chosen c = {} (silhouette scan); elbow suggests c = {}{}",
            summary.diagram.chosen_c,
            curve.elbow_c,
            if curve.elbow_flat { " [flat]" } else { "" }
        ),
        None => println!("fixed c = {}", summary.diagram.chosen_c),
    }
    println!("artifacts in {}", summary.out_dir.display());
    println!("config digest {}", summary.manifest.config_digest);
    println!("run provenance {}", summary.provenance);
    Ok(())
}

fn cmd_kernel(args: KernelArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let stage = compute_grid_kernel(&config)?;
    let out = args.out.unwrap_or_else(|| config.out_dir.join("kernel.csv"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    phasemap_core::kernel::save_kernel_csv(&out, &stage.kernel)?;
    println!(
        "kernel {}x{} written to {} ({} cached, {} computed, {} unconverged)",
        stage.kernel.size(),
        stage.kernel.size(),
        out.display(),
        stage.cache.hits,
        stage.cache.misses,
        stage.unconverged.len(),
    );
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), CliError> {
    let kernel = load_kernel_csv(&args.kernel)?;
    let assignment = cluster_kernel(
        &kernel,
        args.tau,
        args.c,
        args.seed,
        args.restarts,
        args.row_normalize.unwrap_or(false),
    )?;
    let meta_grid = kernel
        .meta
        .grid
        .as_ref()
        .filter(|g| g.points.len() == kernel.size());

    let mut out = String::new();
    let digest = if kernel.meta.config_digest.is_empty() {
        "unknown"
    } else {
        &kernel.meta.config_digest
    };
    let _ = writeln!(out, "# config {digest}");
    match meta_grid {
        Some(grid) => {
            let _ = writeln!(out, "index,{},label", grid.axis_names.join(","));
            for p in &grid.points {
                let coords: Vec<String> = p.coords.iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    p.index,
                    coords.join(","),
                    assignment.labels[p.index]
                );
            }
        }
        None => {
            let _ = writeln!(out, "index,label");
            for (i, label) in assignment.labels.iter().enumerate() {
                let _ = writeln!(out, "{i},{label}");
            }
        }
    }
    fs::write(&args.out, out)?;
    println!(
        "{} points into {} clusters (wcss {:.6e}) -> {}",
        kernel.size(),
        assignment.cluster_count(),
        assignment.wcss,
        args.out.display()
    );
    Ok(())
}

fn cmd_select_c(args: SelectCArgs) -> Result<(), CliError> {
    let kernel = load_kernel_csv(&args.kernel)?;
    let curve = select_c(
        &kernel,
        args.tau,
        args.c_min..=args.c_max.min(kernel.size()),
        args.seed,
        args.restarts,
        args.silhouette_space,
        args.row_normalize.unwrap_or(false),
    )?;
    let artifact = SelectionArtifact {
        config_digest: if kernel.meta.config_digest.is_empty() {
            "unknown".into()
        } else {
            kernel.meta.config_digest.clone()
        },
        mode: "selected".into(),
        chosen_c: curve.chosen_c,
        curve: Some(curve.clone()),
    };
    let mut json = serde_json::to_string_pretty(&artifact).expect("artifact is serializable");
    json.push('\n');
    fs::write(&args.out, json)?;
    println!(
        "chosen c = {} (silhouette scan over {}..={}); elbow suggests c = {}{}",
        curve.chosen_c,
        args.c_min,
        args.c_max.min(kernel.size()),
        curve.elbow_c,
        if curve.elbow_flat { " [flat]" } else { "" }
    );
    println!("selection written to {}", args.out.display());
    Ok(())
}

fn cmd_diagram(args: DiagramArgs) -> Result<(), CliError> {
    let manifest_path = args.run_dir.join("manifest.json");
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| {
            CliError::Usage(format!(
                "cannot parse {}: {e}",
                manifest_path.display()
            ))
        })?;
    let grid = make_grid(&manifest.config.grid)?;
    let (digest, _axis_names, rows) = read_labels_csv(&args.run_dir.join("labels.csv"))?;
    if rows.len() != grid.len() {
        return Err(CliError::Usage(format!(
            "labels.csv has {} rows but the manifest grid has {} points",
            rows.len(),
            grid.len()
        )));
    }
    let distinct: std::collections::BTreeSet<usize> = rows.iter().map(|p| p.label).collect();
    let average =
        rows.iter().map(|p| p.silhouette).sum::<f64>() / rows.len().max(1) as f64;
    let report = (distinct.len() >= 2).then(|| SilhouetteReport {
        per_point: rows
            .iter()
            .map(|p| SilhouettePoint {
                a: 0.0,
                b: 0.0,
                s: p.silhouette,
                cluster: p.label,
            })
            .collect(),
        average,
        c: distinct.len(),
    });
    let diagram = PhaseDiagram {
        grid,
        points: rows,
        chosen_c: manifest.chosen_c,
        selection: None,
        silhouette_report: report.clone(),
        provenance: digest.clone(),
    };
    let overlay = match &args.overlay {
        Some(path) => read_overlay_csv(path)?,
        None => Vec::new(),
    };
    let out = args.out.unwrap_or_else(|| args.run_dir.join("diagram.svg"));
    fs::write(&out, render_heatmap_with_overlay(&diagram, &overlay)?)?;
    println!("diagram written to {}", out.display());
    if let Some(r) = &report {
        let sil_out = args
            .silhouette_out
            .unwrap_or_else(|| args.run_dir.join("silhouette.svg"));
        fs::write(
            &sil_out,
            format!("<!-- config {digest} -->\n{}", render_silhouette_svg(r)),
        )?;
        println!("silhouette plot written to {}", sil_out.display());
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let spec: HamiltonianSpec = match (&args.model_file, &args.point) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "set either --model-file or --model/--point, not both".into(),
            ))
        }
        (Some(path), None) => HamiltonianSpec::from_toml_str(&fs::read_to_string(path)?)?,
        (None, Some(point)) => {
            let coords: Result<Vec<f64>, _> =
                point.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let coords = coords
                .map_err(|_| CliError::Usage(format!("cannot parse point '{point}'")))?;
            let model = Model::parse(args.model.as_deref().unwrap_or("annni"))?;
            model.spec_at(&coords, args.n_sites)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "oracle needs --point (with --model) or --model-file".into(),
            ))
        }
    };

    let exact = exact_ground_state(&spec)?;
    println!("hamiltonian: {}", spec.description);
    println!("n_sites: {}", spec.n_sites);
    println!("exact ground energy: {:.12}", exact.ground_energy);
    println!("spectral gap: {:.12}", exact.gap);
    println!("degenerate: {}", exact.degenerate);

    if args.compare_dmrg {
        let mpo = automaton_to_mpo(&build_automaton(&spec)?, spec.n_sites)?;
        let dmrg_config = DmrgConfig {
            chi: args.chi,
            seed: args.seed,
            ..DmrgConfig::default()
        };
        let result = ground_state(&mpo, &dmrg_config)?;
        let diff = (result.energy - exact.ground_energy).abs();
        println!(
            "variational energy (chi={}): {:.12}",
            args.chi, result.energy
        );
        println!("absolute difference: {:.3e}", diff);
        println!(
            "converged: {} after {} sweeps",
            result.converged, result.sweeps_used
        );
    }
    Ok(())
}

fn cmd_cache(args: CacheArgs) -> Result<(), CliError> {
    match args.action {
        CacheAction::List { dir, out_dir } => {
            let root = cache_root(dir.as_deref(), &out_dir);
            let entries = cache_entries(&root)?;
            for (name, bytes) in &entries {
                println!("{name}  {bytes} B");
            }
            let total: u64 = entries.iter().map(|(_, b)| b).sum();
            println!(
                "{} entries, {} bytes in {}",
                entries.len(),
                total,
                root.display()
            );
        }
        CacheAction::Clear { dir, out_dir } => {
            let root = cache_root(dir.as_deref(), &out_dir);
            let entries = cache_entries(&root)?;
            for (name, _) in &entries {
                fs::remove_file(root.join(name))?;
            }
            println!("removed {} entries from {}", entries.len(), root.display());
        }
    }
    Ok(())
}

/// Sorted `(file name, size)` list of the `.mps` entries in a cache
/// directory; a missing directory counts as empty.
fn cache_entries(root: &Path) -> Result<Vec<(String, u64)>, CliError> {
    let mut entries = Vec::new();
    let dir = match fs::read_dir(root) {
        Ok(d) => d,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(entries),
        Err(e) => return Err(e.into()),
    };
    for entry in dir {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".mps") {
            entries.push((name, entry.metadata()?.len()));
        }
    }
    entries.sort();
    Ok(entries)
}
