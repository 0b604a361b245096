//! Matrix product operators built from a finite-state automaton.
//!
//! A spin-chain Hamiltonian given as a sum of local terms
//! `H_j = sum_p coeff_p * h_{j} ⊗ h_{j+1} ⊗ ... ⊗ h_{j+p}` is translated
//! into a directed graph: every term becomes a path from the start node to
//! the final node, emitting one single-site operator per edge. Reading the
//! graph's adjacency structure as an operator-valued matrix `W` gives the
//! bulk MPO tensor, and the full operator is the boundary product
//! `H = l_1 W_2 W_3 ... W_{N-1} r_N`, where `l` is the first row of `W` and
//! `r` its last column.
//!
//! Node numbering: the start node is 1, each term's intermediate nodes are
//! allocated consecutively with terms ordered by ascending range `p`, and
//! the final node is last. For a spec with one term per range `p = 0..d`
//! this yields `d(d+1)/2 + 2` nodes. Each term's scalar coefficient sits on
//! the last edge of its path (the one entering the final node).

use crate::tensor::Tensor;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpoError {
    #[error("term {index} has range p={p} exceeding declared interaction distance d={d}")]
    RangeExceedsDistance { index: usize, p: usize, d: usize },

    #[error("term list is empty")]
    EmptyTerms,

    #[error("no term reaches the declared interaction distance d={d}")]
    DistanceNotReached { d: usize },

    #[error("term {index} with range p={p} must list exactly {expected} operators, got {got}")]
    WrongOperatorCount {
        index: usize,
        p: usize,
        expected: usize,
        got: usize,
    },

    #[error("chain of {n_sites} sites is too short for interaction distance d={d} (need at least {min})")]
    ChainTooShort { n_sites: usize, d: usize, min: usize },

    #[error("two edges between the same node pair ({from}, {to})")]
    DuplicateEdge { from: usize, to: usize },

    #[error("operator matrix for '{0}' is not 2x2")]
    NotTwoByTwo(String),

    #[error("unknown operator label '{0}' (known: I, Sx, Sz)")]
    UnknownLabel(String),

    #[error("dense materialization limited to {max} sites, got {n_sites}")]
    DenseTooLarge { n_sites: usize, max: usize },

    #[error("failed to parse model file: {0}")]
    ModelFileParse(String),
}

/// A labeled single-site operator (2x2 real matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperator {
    label: String,
    matrix: Tensor,
}

impl SiteOperator {
    pub fn new(label: impl Into<String>, matrix: Tensor) -> Result<Self, MpoError> {
        let label = label.into();
        if matrix.shape() != [2, 2] {
            return Err(MpoError::NotTwoByTwo(label));
        }
        Ok(Self { label, matrix })
    }

    /// Identity.
    pub fn identity() -> Self {
        Self {
            label: "I".into(),
            matrix: Tensor::from_2x2([[1.0, 0.0], [0.0, 1.0]]),
        }
    }

    /// Pauli x.
    pub fn sigma_x() -> Self {
        Self {
            label: "Sx".into(),
            matrix: Tensor::from_2x2([[0.0, 1.0], [1.0, 0.0]]),
        }
    }

    /// Pauli z.
    pub fn sigma_z() -> Self {
        Self {
            label: "Sz".into(),
            matrix: Tensor::from_2x2([[1.0, 0.0], [0.0, -1.0]]),
        }
    }

    /// Look up one of the built-in operators by its label.
    pub fn from_label(label: &str) -> Result<Self, MpoError> {
        match label {
            "I" => Ok(Self::identity()),
            "Sx" => Ok(Self::sigma_x()),
            "Sz" => Ok(Self::sigma_z()),
            other => Err(MpoError::UnknownLabel(other.into())),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }
}

/// One product term of the local Hamiltonian: `coefficient * ops[0]_j ⊗ ... ⊗ ops[p]_{j+p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    pub p: usize,
    pub coefficient: f64,
    pub ops: Vec<SiteOperator>,
}

/// A chain Hamiltonian as a translation-invariant sum of local terms.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub d: usize,
    pub n_sites: usize,
    pub description: String,
    pub terms: Vec<InteractionTerm>,
}

impl HamiltonianSpec {
    pub fn new(
        d: usize,
        n_sites: usize,
        description: impl Into<String>,
        terms: Vec<InteractionTerm>,
    ) -> Result<Self, MpoError> {
        let spec = Self {
            d,
            n_sites,
            description: description.into(),
            terms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MpoError> {
        if self.terms.is_empty() {
            return Err(MpoError::EmptyTerms);
        }
        for (index, term) in self.terms.iter().enumerate() {
            if term.p > self.d {
                return Err(MpoError::RangeExceedsDistance {
                    index,
                    p: term.p,
                    d: self.d,
                });
            }
            if term.ops.len() != term.p + 1 {
                return Err(MpoError::WrongOperatorCount {
                    index,
                    p: term.p,
                    expected: term.p + 1,
                    got: term.ops.len(),
                });
            }
        }
        if !self.terms.iter().any(|t| t.p == self.d) {
            return Err(MpoError::DistanceNotReached { d: self.d });
        }
        if self.n_sites < self.d + 1 {
            return Err(MpoError::ChainTooShort {
                n_sites: self.n_sites,
                d: self.d,
                min: self.d + 1,
            });
        }
        Ok(())
    }

    /// Stable content digest (hex) over distance, size, and all terms.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.d.to_le_bytes());
        hasher.update(self.n_sites.to_le_bytes());
        for term in &self.terms {
            hasher.update(term.p.to_le_bytes());
            hasher.update(term.coefficient.to_le_bytes());
            for op in &term.ops {
                hasher.update(op.label().as_bytes());
                hasher.update([0u8]);
                for &x in op.matrix().data() {
                    hasher.update(x.to_le_bytes());
                }
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Parse the structured-text model format:
    ///
    /// ```toml
    /// d = 2
    /// n_sites = 12
    /// description = "..."
    ///
    /// [[terms]]
    /// p = 0
    /// coefficient = -0.5
    /// ops = ["Sz"]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, MpoError> {
        #[derive(Deserialize)]
        struct FileTerm {
            p: usize,
            coefficient: f64,
            ops: Vec<String>,
        }
        #[derive(Deserialize)]
        struct FileSpec {
            d: usize,
            n_sites: usize,
            #[serde(default)]
            description: String,
            terms: Vec<FileTerm>,
        }
        let raw: FileSpec =
            toml::from_str(text).map_err(|e| MpoError::ModelFileParse(e.to_string()))?;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            let ops = t
                .ops
                .iter()
                .map(|l| SiteOperator::from_label(l))
                .collect::<Result<Vec<_>, _>>()?;
            terms.push(InteractionTerm {
                p: t.p,
                coefficient: t.coefficient,
                ops,
            });
        }
        HamiltonianSpec::new(raw.d, raw.n_sites, raw.description, terms)
    }
}

/// One edge of the automaton: emit `op` (scaled by `coefficient`) while
/// moving from node `from` to node `to`. Nodes are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonEdge {
    pub from: usize,
    pub to: usize,
    pub p: usize,
    pub lambda: usize,
    pub op: SiteOperator,
    pub coefficient: f64,
}

/// The term-path graph: node 1 is the start, node `node_count` the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonGraph {
    pub node_count: usize,
    pub edges: Vec<AutomatonEdge>,
}

impl AutomatonGraph {
    /// Largest term range present in the graph.
    pub fn interaction_distance(&self) -> usize {
        self.edges.iter().map(|e| e.p).max().unwrap_or(0)
    }
}

/// Build the term-path automaton for a Hamiltonian.
///
/// Terms are laid out in ascending order of range `p`; a term of range `p`
/// contributes `p` fresh intermediate nodes and `p + 1` edges, with its
/// scalar coefficient attached to the final edge (`lambda = p`). Identity
/// self-loops on the start and sink nodes are implicit and added when the
/// graph is turned into an MPO.
pub fn build_automaton(spec: &HamiltonianSpec) -> Result<AutomatonGraph, MpoError> {
    spec.validate()?;

    let total_intermediates: usize = spec.terms.iter().map(|t| t.p).sum();
    let node_count = total_intermediates + 2;
    let final_node = node_count;

    let mut order: Vec<usize> = (0..spec.terms.len()).collect();
    order.sort_by_key(|&i| spec.terms[i].p);

    let mut edges = Vec::new();
    let mut next_node = 2;
    for &ti in &order {
        let term = &spec.terms[ti];
        let p = term.p;
        let mut prev = 1;
        for (lambda, op) in term.ops.iter().enumerate() {
            let to = if lambda == p {
                final_node
            } else {
                let n = next_node;
                next_node += 1;
                n
            };
            let coefficient = if lambda == p { term.coefficient } else { 1.0 };
            edges.push(AutomatonEdge {
                from: prev,
                to,
                p,
                lambda,
                op: op.clone(),
                coefficient,
            });
            prev = to;
        }
    }

    Ok(AutomatonGraph { node_count, edges })
}

/// One operator-valued entry of the bulk matrix `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WEntry {
    pub op: SiteOperator,
    pub coefficient: f64,
}

/// A matrix product operator for an open chain.
///
/// `w` is the bulk operator-valued square matrix (row-major over
/// `node_count x node_count`, `None` marking structural zeros); the first
/// site uses only the first row of `w` and the last site only its last
/// column.
#[derive(Debug, Clone)]
pub struct Mpo {
    node_count: usize,
    w: Vec<Option<WEntry>>,
    n_sites: usize,
}

impl Mpo {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Bulk matrix entry at (row, col), zero-based.
    pub fn entry(&self, row: usize, col: usize) -> Option<&WEntry> {
        self.w[row * self.node_count + col].as_ref()
    }

    /// First row of `W`: the left boundary operator vector.
    pub fn left_boundary(&self) -> Vec<Option<&WEntry>> {
        (0..self.node_count).map(|c| self.entry(0, c)).collect()
    }

    /// Last column of `W`: the right boundary operator vector.
    pub fn right_boundary(&self) -> Vec<Option<&WEntry>> {
        (0..self.node_count)
            .map(|r| self.entry(r, self.node_count - 1))
            .collect()
    }

    /// Dense numeric tensor for one site, laid out as
    /// `[bond_left, bond_right, phys_out, phys_in]`. The first site has
    /// left bond dimension 1 (first row), the last site right bond
    /// dimension 1 (last column).
    pub fn site_tensor(&self, site: usize) -> Tensor {
        let d = self.node_count;
        let rows: Vec<usize> = if site == 0 { vec![0] } else { (0..d).collect() };
        let cols: Vec<usize> = if site + 1 == self.n_sites {
            vec![d - 1]
        } else {
            (0..d).collect()
        };
        let mut t = Tensor::zeros(vec![rows.len(), cols.len(), 2, 2]);
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                if let Some(e) = self.entry(r, c) {
                    for s_out in 0..2 {
                        for s_in in 0..2 {
                            t.set(
                                &[ri, ci, s_out, s_in],
                                e.coefficient * e.op.matrix().get(&[s_out, s_in]),
                            );
                        }
                    }
                }
            }
        }
        t
    }
}

/// Assemble the MPO from the automaton: each edge becomes the `W` entry at
/// (from, to), identity self-loops are placed at the start and sink corners,
/// and the boundary row/column are read off the same matrix.
pub fn automaton_to_mpo(graph: &AutomatonGraph, n_sites: usize) -> Result<Mpo, MpoError> {
    let d = graph.interaction_distance();
    if n_sites < d + 1 {
        return Err(MpoError::ChainTooShort {
            n_sites,
            d,
            min: d + 1,
        });
    }
    let dim = graph.node_count;
    let mut w: Vec<Option<WEntry>> = vec![None; dim * dim];
    w[0] = Some(WEntry {
        op: SiteOperator::identity(),
        coefficient: 1.0,
    });
    w[dim * dim - 1] = Some(WEntry {
        op: SiteOperator::identity(),
        coefficient: 1.0,
    });
    for edge in &graph.edges {
        let slot = &mut w[(edge.from - 1) * dim + (edge.to - 1)];
        if slot.is_some() {
            return Err(MpoError::DuplicateEdge {
                from: edge.from,
                to: edge.to,
            });
        }
        *slot = Some(WEntry {
            op: edge.op.clone(),
            coefficient: edge.coefficient,
        });
    }
    Ok(Mpo {
        node_count: dim,
        w,
        n_sites,
    })
}

/// Maximum chain length for dense materialization (2^14 x 2^14 matrix).
pub const DENSE_MAX_SITES: usize = 14;

/// Evaluate the boundary product literally, returning the full
/// `2^N x 2^N` Hamiltonian matrix as a rank-2 tensor. Test/oracle bridge
/// only; refuses chains longer than [`DENSE_MAX_SITES`].
pub fn mpo_to_dense(mpo: &Mpo) -> Result<Tensor, MpoError> {
    let n = mpo.n_sites();
    if n > DENSE_MAX_SITES {
        return Err(MpoError::DenseTooLarge {
            n_sites: n,
            max: DENSE_MAX_SITES,
        });
    }
    let dim = mpo.node_count();

    // Operator-valued row vector, advanced one site at a time:
    // state[m] = sum over paths reaching node m of the emitted operators.
    let mut state: Vec<Option<Tensor>> = vec![None; dim];
    let first = mpo.site_tensor(0);
    for m in 0..dim {
        let mut block = Tensor::zeros(vec![2, 2]);
        let mut nonzero = false;
        for s_out in 0..2 {
            for s_in in 0..2 {
                let v = first.get(&[0, m, s_out, s_in]);
                if v != 0.0 {
                    nonzero = true;
                }
                block.set(&[s_out, s_in], v);
            }
        }
        state[m] = nonzero.then_some(block);
    }

    for site in 1..n {
        let wt = mpo.site_tensor(site);
        let cols = wt.shape()[1];
        let mut next: Vec<Option<Tensor>> = vec![None; cols];
        for (l, st) in state.iter().enumerate() {
            let Some(st) = st else { continue };
            for m in 0..cols {
                let mut block = Tensor::zeros(vec![2, 2]);
                let mut nonzero = false;
                for s_out in 0..2 {
                    for s_in in 0..2 {
                        let v = wt.get(&[l, m, s_out, s_in]);
                        if v != 0.0 {
                            nonzero = true;
                        }
                        block.set(&[s_out, s_in], v);
                    }
                }
                if !nonzero {
                    continue;
                }
                let grown = kron(st, &block);
                match &mut next[m] {
                    Some(acc) => acc
                        .add_scaled(&grown, 1.0)
                        .expect("kron outputs share shape"),
                    slot @ None => *slot = Some(grown),
                }
            }
        }
        state = next;
    }

    Ok(state
        .pop()
        .flatten()
        .expect("sink node is always reachable"))
}

/// Kronecker product of square matrices given as rank-2 tensors.
fn kron(a: &Tensor, b: &Tensor) -> Tensor {
    let (ar, ac) = (a.shape()[0], a.shape()[1]);
    let (br, bc) = (b.shape()[0], b.shape()[1]);
    let mut out = Tensor::zeros(vec![ar * br, ac * bc]);
    for i in 0..ar {
        for j in 0..ac {
            let av = a.get(&[i, j]);
            if av == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    let bv = b.get(&[k, l]);
                    if bv != 0.0 {
                        out.set(&[i * br + k, j * bc + l], av * bv);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_field_spec(h: f64, n: usize) -> HamiltonianSpec {
        HamiltonianSpec::new(
            0,
            n,
            "on-site z field",
            vec![InteractionTerm {
                p: 0,
                coefficient: h,
                ops: vec![SiteOperator::sigma_z()],
            }],
        )
        .unwrap()
    }

    fn generic_spec(d: usize, n: usize) -> HamiltonianSpec {
        let terms = (0..=d)
            .map(|p| InteractionTerm {
                p,
                coefficient: 1.0 + p as f64,
                ops: (0..=p)
                    .map(|l| {
                        if l % 2 == 0 {
                            SiteOperator::sigma_x()
                        } else {
                            SiteOperator::identity()
                        }
                    })
                    .collect(),
            })
            .collect();
        HamiltonianSpec::new(d, n, "generic", terms).unwrap()
    }

    #[test]
    fn node_count_rule() {
        for d in 0..=4 {
            let graph = build_automaton(&generic_spec(d, d + 2)).unwrap();
            assert_eq!(graph.node_count, d * (d + 1) / 2 + 2, "d={d}");
        }
    }

    #[test]
    fn d3_generic_has_ten_edges() {
        let graph = build_automaton(&generic_spec(3, 6)).unwrap();
        assert_eq!(graph.node_count, 8);
        assert_eq!(graph.edges.len(), 10);
    }

    #[test]
    fn d0_single_term() {
        let graph = build_automaton(&single_field_spec(0.7, 4)).unwrap();
        assert_eq!(graph.node_count, 2);
        assert_eq!(graph.edges.len(), 1);
        let e = &graph.edges[0];
        assert_eq!((e.from, e.to, e.p, e.lambda), (1, 2, 0, 0));
        assert_eq!(e.coefficient, 0.7);
    }

    #[test]
    fn d0_w_matrix() {
        let spec = single_field_spec(0.7, 4);
        let mpo = automaton_to_mpo(&build_automaton(&spec).unwrap(), 4).unwrap();
        assert_eq!(mpo.node_count(), 2);
        let e00 = mpo.entry(0, 0).unwrap();
        assert_eq!(e00.op.label(), "I");
        let e01 = mpo.entry(0, 1).unwrap();
        assert_eq!(e01.op.label(), "Sz");
        assert_eq!(e01.coefficient, 0.7);
        assert!(mpo.entry(1, 0).is_none());
        let e11 = mpo.entry(1, 1).unwrap();
        assert_eq!(e11.op.label(), "I");
        assert_eq!(e11.coefficient, 1.0);
    }

    #[test]
    fn path_edges_start_and_end_correctly() {
        let graph = build_automaton(&generic_spec(3, 6)).unwrap();
        for p in 0..=3 {
            let path: Vec<_> = graph.edges.iter().filter(|e| e.p == p).collect();
            assert_eq!(path.len(), p + 1);
            assert_eq!(path[0].from, 1);
            assert_eq!(path[0].lambda, 0);
            assert_eq!(path[p].to, graph.node_count);
            assert_eq!(path[p].lambda, p);
            // Coefficient rides the final edge only.
            for e in &path[..p] {
                assert_eq!(e.coefficient, 1.0);
            }
            assert_eq!(path[p].coefficient, 1.0 + p as f64);
        }
    }

    #[test]
    fn duplicate_onsite_terms_rejected() {
        let spec = HamiltonianSpec::new(
            0,
            4,
            "two on-site terms",
            vec![
                InteractionTerm {
                    p: 0,
                    coefficient: 1.0,
                    ops: vec![SiteOperator::sigma_z()],
                },
                InteractionTerm {
                    p: 0,
                    coefficient: 2.0,
                    ops: vec![SiteOperator::sigma_x()],
                },
            ],
        )
        .unwrap();
        let graph = build_automaton(&spec).unwrap();
        let err = automaton_to_mpo(&graph, 4).unwrap_err();
        assert!(matches!(err, MpoError::DuplicateEdge { from: 1, to: 2 }));
    }

    #[test]
    fn nn_ising_dense_two_sites() {
        // Single nearest-neighbour term: H = -Sx Sx on two sites.
        let spec = HamiltonianSpec::new(
            1,
            2,
            "NN Ising",
            vec![InteractionTerm {
                p: 1,
                coefficient: -1.0,
                ops: vec![SiteOperator::sigma_x(), SiteOperator::sigma_x()],
            }],
        )
        .unwrap();
        let mpo = automaton_to_mpo(&build_automaton(&spec).unwrap(), 2).unwrap();
        let dense = mpo_to_dense(&mpo).unwrap();
        // -Sx⊗Sx has -1 on the anti-diagonal.
        let expect = [
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((dense.get(&[i, j]) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_site_cluster_term_dense() {
        // H = -Sz Sx Sz on exactly three sites.
        let spec = HamiltonianSpec::new(
            2,
            3,
            "cluster term",
            vec![InteractionTerm {
                p: 2,
                coefficient: -1.0,
                ops: vec![
                    SiteOperator::sigma_z(),
                    SiteOperator::sigma_x(),
                    SiteOperator::sigma_z(),
                ],
            }],
        )
        .unwrap();
        let mpo = automaton_to_mpo(&build_automaton(&spec).unwrap(), 3).unwrap();
        let dense = mpo_to_dense(&mpo).unwrap();
        // Compare against the Kronecker product computed in place.
        let sz = [1.0_f64, -1.0];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for bp in 0..2 {
                        let row = (a << 2) | (b << 1) | c;
                        let col = (a << 2) | ((1 - b) << 1) | c;
                        let expect = -sz[a] * sz[c];
                        let _ = bp;
                        assert!((dense.get(&[row, col]) - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_guard() {
        let spec = single_field_spec(1.0, 15);
        let mpo = automaton_to_mpo(&build_automaton(&spec).unwrap(), 15).unwrap();
        assert!(matches!(
            mpo_to_dense(&mpo),
            Err(MpoError::DenseTooLarge { .. })
        ));
    }

    #[test]
    fn spec_validation_errors() {
        assert!(matches!(
            HamiltonianSpec::new(0, 4, "", vec![]),
            Err(MpoError::EmptyTerms)
        ));
        let err = HamiltonianSpec::new(
            0,
            4,
            "",
            vec![InteractionTerm {
                p: 1,
                coefficient: 1.0,
                ops: vec![SiteOperator::sigma_x(), SiteOperator::sigma_x()],
            }],
        )
        .unwrap_err();
        assert!(matches!(err, MpoError::RangeExceedsDistance { .. }));
    }

    #[test]
    fn model_file_roundtrip() {
        let text = r#"
d = 1
n_sites = 6
description = "toy"

[[terms]]
p = 0
coefficient = -0.25
ops = ["Sz"]

[[terms]]
p = 1
coefficient = -1.0
ops = ["Sx", "Sx"]
"#;
        let spec = HamiltonianSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.d, 1);
        assert_eq!(spec.n_sites, 6);
        assert_eq!(spec.terms.len(), 2);
        assert_eq!(spec.terms[0].ops[0].label(), "Sz");
        assert_eq!(spec.terms[1].coefficient, -1.0);
        // Digest is stable across identical builds.
        assert_eq!(spec.digest(), HamiltonianSpec::from_toml_str(text).unwrap().digest());
    }

    #[test]
    fn unknown_label_rejected() {
        assert!(matches!(
            SiteOperator::from_label("Sy"),
            Err(MpoError::UnknownLabel(_))
        ));
    }
}
