//! Validates the automaton-assembled operator matrices by materializing
//! them and comparing against an explicit Kronecker-product construction
//! of the same Hamiltonians.

mod support;

use phasemap_core::models::{annni_spec, cluster_ising_spec};
use phasemap_core::mpo::{
    automaton_to_mpo, build_automaton, mpo_to_dense, HamiltonianSpec, InteractionTerm,
    SiteOperator,
};
use phasemap_core::tensor::Tensor;
use support::{kron_hamiltonian, TestRng};

fn dense_from_spec(spec: &HamiltonianSpec) -> Tensor {
    let graph = build_automaton(spec).unwrap();
    let mpo = automaton_to_mpo(&graph, spec.n_sites).unwrap();
    mpo_to_dense(&mpo).unwrap()
}

fn assert_matrix_matches(fast: &Tensor, slow: &[f64], dim: usize, tol: f64, context: &str) {
    assert_eq!(fast.shape(), &[dim, dim], "{context}: wrong shape");
    for (idx, (x, y)) in fast.data().iter().zip(slow).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "{context}: entry {idx} differs: {x} vs {y}"
        );
    }
}

#[test]
fn annni_matrix_matches_kronecker_construction() {
    let cases = [
        (0.0, 0.0, 3usize),
        (0.5, 1.0, 3),
        (0.3, 0.7, 6),
        (1.0, 2.0, 6),
        (0.25, 1.4, 8),
        (0.8, 0.1, 10),
    ];
    for (k, h, n) in cases {
        let spec = annni_spec(k, h, n).unwrap();
        let fast = dense_from_spec(&spec);
        let slow = kron_hamiltonian(&spec);
        assert_matrix_matches(&fast, &slow, 1 << n, 1e-12, &format!("annni k={k} h={h} n={n}"));
    }
}

#[test]
fn cluster_ising_matrix_matches_kronecker_construction() {
    let cases = [
        (0.0, 0.0, 3usize),
        (0.9, -1.2, 3),
        (0.4, 0.4, 6),
        (1.6, 1.6, 6),
        (0.7, -0.3, 9),
    ];
    for (h1, h2, n) in cases {
        let spec = cluster_ising_spec(h1, h2, n).unwrap();
        let fast = dense_from_spec(&spec);
        let slow = kron_hamiltonian(&spec);
        assert_matrix_matches(
            &fast,
            &slow,
            1 << n,
            1e-12,
            &format!("cluster-ising h1={h1} h2={h2} n={n}"),
        );
    }
}

#[test]
fn matrix_is_affine_in_couplings() {
    // H(k, h) = H(0, 0) + k [H(1, 0) - H(0, 0)] + h [H(0, 1) - H(0, 0)]
    // because each coupling enters a single term linearly.
    let n = 6;
    let base = dense_from_spec(&annni_spec(0.0, 0.0, n).unwrap());
    let k_unit = dense_from_spec(&annni_spec(1.0, 0.0, n).unwrap());
    let h_unit = dense_from_spec(&annni_spec(0.0, 1.0, n).unwrap());
    let (k, h) = (0.73, 1.31);
    let probe = dense_from_spec(&annni_spec(k, h, n).unwrap());

    for i in 0..base.len() {
        let b = base.data()[i];
        let expected = b + k * (k_unit.data()[i] - b) + h * (h_unit.data()[i] - b);
        assert!(
            (probe.data()[i] - expected).abs() < 1e-12,
            "entry {i} breaks affine reconstruction"
        );
    }
}

#[test]
fn random_generic_spec_matches_kronecker_construction() {
    let mut rng = TestRng::new(97);
    let op_pool = [
        SiteOperator::identity(),
        SiteOperator::sigma_x(),
        SiteOperator::sigma_z(),
    ];
    for trial in 0..5 {
        let n = 7;
        let d = 3;
        let mut terms = Vec::new();
        for p in 0..=d {
            let ops: Vec<SiteOperator> =
                (0..=p).map(|_| op_pool[rng.below(3)].clone()).collect();
            terms.push(InteractionTerm {
                p,
                coefficient: rng.range(-2.0, 2.0),
                ops,
            });
        }
        let spec = HamiltonianSpec::new(d, n, format!("random trial {trial}"), terms).unwrap();
        let fast = dense_from_spec(&spec);
        let slow = kron_hamiltonian(&spec);
        assert_matrix_matches(&fast, &slow, 1 << n, 1e-12, &format!("trial {trial}"));
    }
}

#[test]
fn chain_shorter_than_longest_term_is_rejected() {
    // A range-2 interaction spans 3 sites, so a 2-site chain cannot host it.
    let spec = annni_spec(0.5, 0.5, 6).unwrap();
    let graph = build_automaton(&spec).unwrap();
    assert_eq!(graph.interaction_distance(), 2);
    assert!(automaton_to_mpo(&graph, 2).is_err());
    assert!(automaton_to_mpo(&graph, 3).is_ok());
}

#[test]
fn dense_materialization_refuses_long_chains() {
    let spec = annni_spec(0.5, 0.5, 15).unwrap();
    let graph = build_automaton(&spec).unwrap();
    let mpo = automaton_to_mpo(&graph, 15).unwrap();
    assert!(mpo_to_dense(&mpo).is_err());
}

#[test]
fn boundary_sites_use_first_row_and_last_column() {
    let spec = cluster_ising_spec(0.5, -0.5, 5).unwrap();
    let graph = build_automaton(&spec).unwrap();
    let mpo = automaton_to_mpo(&graph, 5).unwrap();
    let d = mpo.node_count();

    let first = mpo.site_tensor(0);
    assert_eq!(first.shape(), &[1, d, 2, 2]);
    let bulk = mpo.site_tensor(2);
    assert_eq!(bulk.shape(), &[d, d, 2, 2]);
    let last = mpo.site_tensor(4);
    assert_eq!(last.shape(), &[d, 1, 2, 2]);

    // The trimmed tensors are literal slices of the bulk matrix.
    for m in 0..d {
        for s_out in 0..2 {
            for s_in in 0..2 {
                assert_eq!(
                    first.get(&[0, m, s_out, s_in]),
                    bulk.get(&[0, m, s_out, s_in])
                );
                assert_eq!(
                    last.get(&[m, 0, s_out, s_in]),
                    bulk.get(&[m, d - 1, s_out, s_in])
                );
            }
        }
    }
}
