//! Acceptance gate: ten end-to-end checks at fixed tolerances, from the
//! structure of the assembled operator matrices up to desk-scale phase
//! diagrams of both model families. Each check is a single test, so the
//! harness prints one pass/fail line per criterion.

mod support;

use phasemap_core::dmrg::{ground_state, DmrgConfig};
use phasemap_core::ed::exact_ground_state;
use phasemap_core::kernel::{compute_kernel, load_kernel_csv, DistanceMatrix, KernelMatrix};
use phasemap_core::models::{annni_spec, cluster_ising_spec, Model};
use phasemap_core::mpo::{
    automaton_to_mpo, build_automaton, HamiltonianSpec, InteractionTerm, Mpo, SiteOperator,
    WEntry,
};
use phasemap_core::pipeline::{cluster_kernel, run_pipeline, PhaseDiagram, RunConfig};
use phasemap_core::selection::{select_c, silhouette, SilhouetteSpace};
use std::sync::OnceLock;
use std::time::{Duration, Instant};
use support::{block_kernel, canonical_labels, TestRng};

fn mpo_for(spec: &HamiltonianSpec) -> Mpo {
    automaton_to_mpo(&build_automaton(spec).unwrap(), spec.n_sites).unwrap()
}

/// Assert that a 5x5 bulk matrix holds exactly the given entries
/// (operator and coefficient, bitwise) and nothing anywhere else.
fn assert_bulk_matrix(mpo: &Mpo, expected: &[(usize, usize, SiteOperator, f64)], context: &str) {
    assert_eq!(mpo.node_count(), 5, "{context}: bond dimension");
    for row in 0..5 {
        for col in 0..5 {
            let want = expected
                .iter()
                .find(|(r, c, _, _)| *r == row && *c == col)
                .map(|(_, _, op, coefficient)| WEntry {
                    op: op.clone(),
                    coefficient: *coefficient,
                });
            match (mpo.entry(row, col), &want) {
                (None, None) => {}
                (Some(got), Some(want)) => {
                    assert_eq!(got.op, want.op, "{context}: operator at ({row}, {col})");
                    assert!(
                        got.coefficient == want.coefficient,
                        "{context}: coefficient at ({row}, {col}): {} vs {}",
                        got.coefficient,
                        want.coefficient
                    );
                }
                (got, _) => panic!(
                    "{context}: entry ({row}, {col}) is {got:?}, expected {want:?}"
                ),
            }
        }
    }
}

/// Criterion 1 — the automaton reproduces the known 5x5 operator-valued
/// matrices of both families for arbitrary couplings, and the node count
/// follows d(d+1)/2 + 2.
#[test]
fn a01_operator_matrices_have_the_reference_form() {
    let started = Instant::now();
    let i = SiteOperator::identity;
    let x = SiteOperator::sigma_x;
    let z = SiteOperator::sigma_z;

    let mut rng = TestRng::new(101);
    for _ in 0..8 {
        let (k, h) = (rng.range(0.0, 1.0), rng.range(0.0, 2.0));
        let mpo = mpo_for(&annni_spec(k, h, 6).unwrap());
        let expected = [
            (0, 0, i(), 1.0),
            (0, 1, x(), 1.0),
            (0, 2, x(), 1.0),
            (0, 4, z(), -h),
            (1, 4, x(), -1.0),
            (2, 3, i(), 1.0),
            (3, 4, x(), k),
            (4, 4, i(), 1.0),
        ];
        assert_bulk_matrix(&mpo, &expected, &format!("annni k={k} h={h}"));
    }

    for _ in 0..8 {
        let (h1, h2) = (rng.range(0.0, 1.6), rng.range(-1.6, 1.6));
        let mpo = mpo_for(&cluster_ising_spec(h1, h2, 6).unwrap());
        let expected = [
            (0, 0, i(), 1.0),
            (0, 1, x(), 1.0),
            (0, 2, z(), 1.0),
            (0, 4, x(), -h1),
            (1, 4, x(), -h2),
            (2, 3, x(), 1.0),
            (3, 4, z(), -1.0),
            (4, 4, i(), 1.0),
        ];
        assert_bulk_matrix(&mpo, &expected, &format!("cluster-ising h1={h1} h2={h2}"));
    }

    // One term of every range 0..=d gives sum(p) + 2 = d(d+1)/2 + 2 nodes.
    for d in 0..=4usize {
        let terms: Vec<InteractionTerm> = (0..=d)
            .map(|p| InteractionTerm {
                p,
                coefficient: 1.0,
                ops: vec![SiteOperator::sigma_x(); p + 1],
            })
            .collect();
        let spec = HamiltonianSpec::new(d, 6, format!("range ladder d={d}"), terms).unwrap();
        let graph = build_automaton(&spec).unwrap();
        assert_eq!(graph.node_count, d * (d + 1) / 2 + 2, "d = {d}");
    }

    assert!(started.elapsed() < Duration::from_secs(1), "criterion budget");
}

/// One model family at one chain length: energies against the exact
/// diagonalizer, then the full squared-overlap kernel against exact
/// ground vectors (skipping pairs with a near-degenerate ground space).
fn check_against_dense_oracle(model: Model, points: &[(f64, f64)], n_sites: usize, chi: usize) {
    let mut states = Vec::with_capacity(points.len());
    let mut vectors = Vec::with_capacity(points.len());
    let mut gaps = Vec::with_capacity(points.len());

    for (idx, &(a, b)) in points.iter().enumerate() {
        let spec = model.spec_at(&[a, b], n_sites).unwrap();
        let exact = exact_ground_state(&spec).unwrap();
        let config = DmrgConfig {
            chi,
            seed: 1000 + idx as u64,
            ..DmrgConfig::default()
        };
        let result = ground_state(&mpo_for(&spec), &config).unwrap();

        let rel = (result.energy - exact.ground_energy).abs() / exact.ground_energy.abs();
        assert!(
            rel < 1e-8,
            "{} ({a:.4}, {b:.4}) N={n_sites}: relative energy error {rel:.3e}",
            model.name()
        );
        states.push(result.state);
        vectors.push(exact.ground_vector);
        gaps.push(exact.gap);
    }

    let kernel = compute_kernel(&states).unwrap();
    let mut worst = 0.0f64;
    for i in 0..points.len() {
        for j in 0..points.len() {
            if gaps[i] < 1e-8 || gaps[j] < 1e-8 {
                continue; // ground space effectively degenerate: not comparable
            }
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(p, q)| p * q).sum();
            worst = worst.max((kernel.get(i, j) - dot * dot).abs());
        }
    }
    assert!(
        worst <= 1e-6,
        "{} N={n_sites}: worst kernel deviation {worst:.3e}",
        model.name()
    );
}

/// Criterion 2 — 25 random points per family, chains of 8 and 10 sites:
/// variational energies within 1e-8 relative and kernel entries within
/// 1e-6 of the dense oracle.
#[test]
fn a02_solver_and_kernel_match_the_dense_oracle() {
    let started = Instant::now();
    let mut rng = TestRng::new(72024);
    let annni_points: Vec<(f64, f64)> = (0..25)
        .map(|_| (rng.range(0.0, 1.0), rng.range(0.0, 2.0)))
        .collect();
    let cluster_points: Vec<(f64, f64)> = (0..25)
        .map(|_| (rng.range(0.0, 1.6), rng.range(-1.6, 1.6)))
        .collect();

    for n_sites in [8usize, 10] {
        check_against_dense_oracle(Model::Annni, &annni_points, n_sites, 16);
        // At ten sites the mid-chain Schmidt rank is 32, and the three-site
        // coupling produces slowly decaying Schmidt spectra: the best
        // rank-16 state sits ~2e-6 relative above the true ground energy
        // over much of the sampled domain (measured), so the ten-site
        // comparison runs at the full rank 32. This keeps the check about
        // solver correctness instead of truncation physics.
        let chi = if n_sites > 8 { 32 } else { 16 };
        check_against_dense_oracle(Model::ClusterIsing, &cluster_points, n_sites, chi);
    }
    assert!(started.elapsed() < Duration::from_secs(300), "criterion budget");
}

/// Criterion 3 — near the order-disorder boundary, the variational error
/// never grows when the bond dimension is raised.
#[test]
fn a03_accuracy_improves_with_bond_dimension() {
    let started = Instant::now();
    let points = [(0.00, 1.00), (0.10, 0.90), (0.20, 0.80), (0.30, 0.65), (0.40, 0.45)];
    for (idx, &(k, h)) in points.iter().enumerate() {
        let spec = annni_spec(k, h, 10).unwrap();
        let exact = exact_ground_state(&spec).unwrap().ground_energy;
        let mpo = mpo_for(&spec);
        let mut prev = f64::INFINITY;
        for chi in [2usize, 4, 8, 16] {
            let config = DmrgConfig {
                chi,
                seed: 300 + idx as u64,
                ..DmrgConfig::default()
            };
            let err = ground_state(&mpo, &config).unwrap().energy - exact;
            assert!(err > -1e-10, "(k={k}, h={h}) chi={chi}: below exact by {err:.3e}");
            assert!(
                err <= prev + 1e-10,
                "(k={k}, h={h}) chi={chi}: error {err:.3e} worse than {prev:.3e}"
            );
            prev = err;
        }
    }
    assert!(started.elapsed() < Duration::from_secs(120), "criterion budget");
}

/// Criterion 4 — twelve-site chains with closed-form ground energies:
/// the zero-field chain reaches the aligned-configuration value
/// -(N-1) + k(N-2) = -9, and the pure three-site-coupling chain reaches
/// one unit per coupling, -(N-2) = -10.
#[test]
fn a04_closed_form_energies_are_reproduced() {
    let started = Instant::now();

    let spec = annni_spec(0.2, 0.0, 12).unwrap();
    let result = ground_state(&mpo_for(&spec), &DmrgConfig::default()).unwrap();
    assert!(
        (result.energy - (-9.0)).abs() < 1e-8,
        "zero-field chain: {} vs -9",
        result.energy
    );
    let exact = exact_ground_state(&spec).unwrap();
    assert!((exact.ground_energy - (-9.0)).abs() < 1e-8);

    let spec = cluster_ising_spec(0.0, 0.0, 12).unwrap();
    let result = ground_state(&mpo_for(&spec), &DmrgConfig::default()).unwrap();
    assert!(
        (result.energy - (-10.0)).abs() < 1e-8,
        "pure cluster chain: {} vs -10",
        result.energy
    );
    let exact = exact_ground_state(&spec).unwrap();
    assert!((exact.ground_energy - (-10.0)).abs() < 1e-8);

    assert!(started.elapsed() < Duration::from_secs(60), "criterion budget");
}

/// Criterion 5 — 200 randomized kernels with planted blocks: the planted
/// partition is recovered exactly at the true count, where the average
/// silhouette is 1 and maximal over the whole scan.
#[test]
fn a05_separable_kernels_are_recovered_exactly() {
    let started = Instant::now();
    let mut rng = TestRng::new(505);
    for trial in 0..200u64 {
        let n_blocks = 2 + rng.below(5); // 2..=6
        let mut sizes: Vec<usize> = (0..n_blocks).map(|_| 2 + rng.below(9)).collect();
        while sizes.iter().sum::<usize>() < 8 {
            sizes[0] += 1; // the scan reaches c = 8, so provide 8 points
        }
        assert!(sizes.iter().sum::<usize>() <= 64);
        let (kernel, truth) = block_kernel(&sizes, &mut rng);

        let selection =
            select_c(&kernel, 0.5, 2..=8, 5000 + trial, 8, SilhouetteSpace::default(), false)
                .unwrap();
        assert_eq!(selection.chosen_c, n_blocks, "trial {trial}: sizes {sizes:?}");
        let idx = selection
            .c_values
            .iter()
            .position(|&c| c == n_blocks)
            .unwrap();
        let at_true = selection.silhouette_avgs[idx];
        assert!(
            (at_true - 1.0).abs() <= 1e-12,
            "trial {trial}: silhouette {at_true} at the true count"
        );
        for (i, &avg) in selection.silhouette_avgs.iter().enumerate() {
            assert!(
                avg <= at_true + 1e-12,
                "trial {trial}: c={} beats the true count",
                selection.c_values[i]
            );
        }

        let assignment = cluster_kernel(&kernel, 0.5, n_blocks, 6000 + trial, 8, false).unwrap();
        assert_eq!(
            canonical_labels(&assignment.labels),
            canonical_labels(&truth),
            "trial {trial}: sizes {sizes:?}"
        );
    }
    assert!(started.elapsed() < Duration::from_secs(60), "criterion budget");
}

/// Criterion 6 — the worked three-point silhouette: collinear points at
/// 0, 1, 10 with the close pair clustered together.
#[test]
fn a06_silhouette_reproduces_the_hand_worked_case() {
    let started = Instant::now();
    let entries = vec![
        0.0, 1.0, 10.0, //
        1.0, 0.0, 9.0, //
        10.0, 9.0, 0.0,
    ];
    let dist = DistanceMatrix::from_entries(3, entries).unwrap();
    let report = silhouette(&dist, &[0, 0, 1]).unwrap();

    let expected = [0.9, 0.8889, 0.0];
    for (point, want) in report.per_point.iter().zip(expected) {
        assert!(
            (point.s - want).abs() < 1e-4,
            "silhouette {} vs {want}",
            point.s
        );
    }
    assert!(
        (report.average - 0.5963).abs() < 1e-4,
        "average {}",
        report.average
    );
    assert!(started.elapsed() < Duration::from_secs(1), "criterion budget");
}

/// The twenty-site ANNNI sweep shared by criteria 7, 9, and 10: run the
/// full pipeline twice (cold, then warm from the same ground-state cache)
/// and keep everything the three checks need.
struct DeskAnnni {
    chosen_c: usize,
    /// Labels along the zero-coupling column, ascending field.
    column_labels: Vec<usize>,
    /// Field values along that column.
    h_values: Vec<f64>,
    kernel: KernelMatrix,
    labels_first: Vec<u8>,
    labels_second: Vec<u8>,
    first_run: Duration,
    _dir: tempfile::TempDir,
}

static DESK_ANNNI: OnceLock<DeskAnnni> = OnceLock::new();

fn desk_annni() -> &'static DeskAnnni {
    DESK_ANNNI.get_or_init(|| {
        let dir = tempfile::tempdir().expect("scratch dir");
        // The default configuration IS the desk-scale sweep: 15x15 over
        // k in [0,1] x h in [0,2], N = 20, chi = 16, tau = 0.5, seed 7.
        let config = RunConfig {
            out_dir: dir.path().join("one"),
            cache_dir: Some(dir.path().join("cache")),
            ..RunConfig::default()
        };
        assert_eq!(config.n_sites, 20);
        assert_eq!(config.dmrg.chi, 16);
        assert_eq!(config.tau, 0.5);

        let t0 = Instant::now();
        let first = run_pipeline(&config).expect("desk-scale sweep");
        let first_run = t0.elapsed();

        let rerun_config = RunConfig {
            out_dir: dir.path().join("two"),
            ..config.clone()
        };
        let second = run_pipeline(&rerun_config).expect("desk-scale repeat");

        let labels_first =
            std::fs::read(first.out_dir.join("labels.csv")).expect("labels artifact");
        let labels_second =
            std::fs::read(second.out_dir.join("labels.csv")).expect("labels artifact");
        let kernel = load_kernel_csv(&first.out_dir.join("kernel.csv")).expect("kernel artifact");

        // Axes are (k, h) with h fastest, so the first 15 points are k = 0.
        let column = &first.diagram.points[..15];
        DeskAnnni {
            chosen_c: first.diagram.chosen_c,
            column_labels: column.iter().map(|p| p.label).collect(),
            h_values: column.iter().map(|p| p.coords[1]).collect(),
            kernel,
            labels_first,
            labels_second,
            first_run,
            _dir: dir,
        }
    })
}

/// Criterion 7 — the desk-scale ANNNI sweep selects four phases, and along
/// the zero-coupling column (a transverse-field Ising chain) the label
/// boundary sits at the known transition field h = 1 within finite-size
/// tolerance.
#[test]
fn a07_desk_scale_annni_finds_four_phases() {
    let desk = desk_annni();
    assert_eq!(desk.chosen_c, 4, "chosen cluster count");

    let first = desk.column_labels[0];
    let change = desk
        .column_labels
        .iter()
        .position(|&l| l != first)
        .expect("a label change along the zero-coupling column");
    let boundary = 0.5 * (desk.h_values[change - 1] + desk.h_values[change]);
    assert!(
        (boundary - 1.0).abs() <= 0.25,
        "order-disorder boundary at h = {boundary}"
    );
    assert!(desk.first_run < Duration::from_secs(1800), "criterion budget");
}

/// Criterion 8 — the desk-scale Cluster-Ising sweep selects three phases,
/// and the points nearest (0.1, 0) and (1.5, 0) carry different labels
/// (three-site-dominated vs field-polarized regions).
#[test]
fn a08_desk_scale_cluster_ising_finds_three_phases() {
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("scratch dir");
    let config = RunConfig {
        model: Model::ClusterIsing,
        grid: Model::ClusterIsing.default_ranges(15),
        dmrg: DmrgConfig {
            chi: 24,
            ..DmrgConfig::default()
        },
        out_dir: dir.path().join("out"),
        cache_dir: Some(dir.path().join("cache")),
        ..RunConfig::default()
    };
    let summary = run_pipeline(&config).expect("desk-scale sweep");
    assert_eq!(summary.diagram.chosen_c, 3, "chosen cluster count");

    let a = nearest_index(&summary.diagram, &[0.1, 0.0]);
    let b = nearest_index(&summary.diagram, &[1.5, 0.0]);
    assert_ne!(
        summary.diagram.points[a].label, summary.diagram.points[b].label,
        "points {:?} and {:?} fell in one phase",
        summary.diagram.points[a].coords, summary.diagram.points[b].coords
    );
    assert!(started.elapsed() < Duration::from_secs(2700), "criterion budget");
}

fn nearest_index(diagram: &PhaseDiagram, target: &[f64]) -> usize {
    diagram
        .points
        .iter()
        .min_by(|p, q| {
            let dp: f64 = p.coords.iter().zip(target).map(|(x, t)| (x - t) * (x - t)).sum();
            let dq: f64 = q.coords.iter().zip(target).map(|(x, t)| (x - t) * (x - t)).sum();
            dp.total_cmp(&dq)
        })
        .expect("non-empty diagram")
        .index
}

/// Criterion 9 — the selected cluster count of the desk-scale ANNNI kernel
/// does not depend on the similarity threshold across 0.3..=0.8.
#[test]
fn a09_cluster_count_is_stable_across_thresholds() {
    let desk = desk_annni();
    let started = Instant::now();
    for tau in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8] {
        let selection =
            select_c(&desk.kernel, tau, 2..=8, 7, 8, SilhouetteSpace::default(), false).unwrap();
        assert_eq!(selection.chosen_c, 4, "tau = {tau}");
    }
    assert!(started.elapsed() < Duration::from_secs(120), "criterion budget");
}

/// Criterion 10 — rerunning the desk-scale sweep with the same seed yields
/// a byte-identical label table.
#[test]
fn a10_identical_configuration_reproduces_labels_byte_for_byte() {
    let desk = desk_annni();
    assert!(
        desk.labels_first == desk.labels_second,
        "label artifacts differ between identical runs"
    );
}
