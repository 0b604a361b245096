//! Concrete spin-chain Hamiltonian families and parameter-space sampling.
//!
//! Two models are built in, both with interaction distance d = 2 and the
//! overall exchange scale fixed to 1:
//!
//! * ANNNI chain: nearest-neighbour ferromagnetic x-coupling, frustrating
//!   next-nearest-neighbour x-coupling of strength `k`, transverse field `h`.
//! * Cluster-Ising chain: three-site `Sz Sx Sz` cluster interaction,
//!   two-site Ising coupling `h2`, on-site field `h1` along x.
//!
//! Parameter sets are swept over deterministic Cartesian grids (inclusive
//! linspace per axis, row-major enumeration) or, optionally, sampled
//! uniformly at random with a fixed seed.

use crate::mpo::{HamiltonianSpec, InteractionTerm, MpoError, SiteOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model '{model}' needs at least {min} sites, got {n_sites}")]
    TooFewSites {
        model: &'static str,
        n_sites: usize,
        min: usize,
    },

    #[error("unknown model '{0}' (known: annni, cluster-ising)")]
    UnknownModel(String),

    #[error("axis '{axis}' has zero sample count")]
    ZeroCount { axis: String },

    #[error("axis '{axis}' has min {min} > max {max}")]
    InvalidRange { axis: String, min: f64, max: f64 },

    #[error("grid has no axes")]
    NoAxes,

    #[error("model expects {expected} parameters, got {got}")]
    WrongArity { expected: usize, got: usize },

    #[error("cannot parse grid spec '{text}': {reason}")]
    GridParse { text: String, reason: String },

    #[error(transparent)]
    Spec(#[from] MpoError),
}

/// One point of parameter space, with its position in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub coords: Vec<f64>,
    pub index: usize,
}

/// Inclusive sampling range for one parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(name: impl Into<String>, min: f64, max: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            count,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.count == 0 {
            return Err(ModelError::ZeroCount {
                axis: self.name.clone(),
            });
        }
        if self.min > self.max {
            return Err(ModelError::InvalidRange {
                axis: self.name.clone(),
                min: self.min,
                max: self.max,
            });
        }
        Ok(())
    }

    /// Inclusive evenly spaced samples; a single-sample axis sits at `min`.
    fn linspace(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|j| self.min + step * j as f64).collect()
    }
}

/// An ordered collection of parameter points with its generating axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub points: Vec<ParameterPoint>,
    pub axis_names: Vec<String>,
    pub axis_ranges: Vec<AxisRange>,
}

impl ParameterGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.axis_names.len()
    }
}

/// Cartesian-product grid: per-axis inclusive linspace, points enumerated
/// in row-major axis order (last axis fastest).
pub fn make_grid(axis_ranges: &[AxisRange]) -> Result<ParameterGrid, ModelError> {
    if axis_ranges.is_empty() {
        return Err(ModelError::NoAxes);
    }
    for r in axis_ranges {
        r.validate()?;
    }
    let axes: Vec<Vec<f64>> = axis_ranges.iter().map(|r| r.linspace()).collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for index in 0..total {
        let coords: Vec<f64> = idx.iter().zip(&axes).map(|(&i, axis)| axis[i]).collect();
        points.push(ParameterPoint { coords, index });
        for ax in (0..axes.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < axes[ax].len() {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(ParameterGrid {
        points,
        axis_names: axis_ranges.iter().map(|r| r.name.clone()).collect(),
        axis_ranges: axis_ranges.to_vec(),
    })
}

/// Seeded uniform sampling of `n_points` parameter sets within the axis
/// boxes — the "wandering" alternative to a regular grid.
pub fn random_grid(
    axis_ranges: &[AxisRange],
    n_points: usize,
    seed: u64,
) -> Result<ParameterGrid, ModelError> {
    if axis_ranges.is_empty() {
        return Err(ModelError::NoAxes);
    }
    for r in axis_ranges {
        r.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    for index in 0..n_points {
        let coords = axis_ranges
            .iter()
            .map(|r| {
                if r.max > r.min {
                    rng.gen_range(r.min..r.max)
                } else {
                    r.min
                }
            })
            .collect();
        points.push(ParameterPoint { coords, index });
    }
    Ok(ParameterGrid {
        points,
        axis_names: axis_ranges.iter().map(|r| r.name.clone()).collect(),
        axis_ranges: axis_ranges.to_vec(),
    })
}

/// Parse the CLI grid syntax `k=0:1:30,h=0:2:30` (axis=min:max:count).
pub fn parse_grid_spec(text: &str) -> Result<Vec<AxisRange>, ModelError> {
    let fail = |reason: &str| ModelError::GridParse {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let mut ranges = Vec::new();
    for part in text.split(',') {
        let (name, rest) = part
            .split_once('=')
            .ok_or_else(|| fail("expected axis=min:max:count"))?;
        let fields: Vec<&str> = rest.split(':').collect();
        if fields.len() != 3 {
            return Err(fail("expected three colon-separated values"));
        }
        let min: f64 = fields[0].parse().map_err(|_| fail("bad min value"))?;
        let max: f64 = fields[1].parse().map_err(|_| fail("bad max value"))?;
        let count: usize = fields[2].parse().map_err(|_| fail("bad count value"))?;
        let range = AxisRange::new(name.trim(), min, max, count);
        range.validate()?;
        ranges.push(range);
    }
    if ranges.is_empty() {
        return Err(ModelError::NoAxes);
    }
    Ok(ranges)
}

/// ANNNI chain on `n_sites` spins:
/// `H = -sum Sx_j Sx_{j+1} + k sum Sx_j Sx_{j+2} - h sum Sz_j`.
pub fn annni_spec(k: f64, h: f64, n_sites: usize) -> Result<HamiltonianSpec, ModelError> {
    if n_sites < 3 {
        return Err(ModelError::TooFewSites {
            model: "annni",
            n_sites,
            min: 3,
        });
    }
    Ok(HamiltonianSpec::new(
        2,
        n_sites,
        format!("ANNNI chain, k={k}, h={h}"),
        vec![
            InteractionTerm {
                p: 0,
                coefficient: -h,
                ops: vec![SiteOperator::sigma_z()],
            },
            InteractionTerm {
                p: 1,
                coefficient: -1.0,
                ops: vec![SiteOperator::sigma_x(), SiteOperator::sigma_x()],
            },
            InteractionTerm {
                p: 2,
                coefficient: k,
                ops: vec![
                    SiteOperator::sigma_x(),
                    SiteOperator::identity(),
                    SiteOperator::sigma_x(),
                ],
            },
        ],
    )?)
}

/// Cluster-Ising chain on `n_sites` spins:
/// `H = -sum Sz_j Sx_{j+1} Sz_{j+2} - h2 sum Sx_j Sx_{j+1} - h1 sum Sx_j`.
pub fn cluster_ising_spec(h1: f64, h2: f64, n_sites: usize) -> Result<HamiltonianSpec, ModelError> {
    if n_sites < 3 {
        return Err(ModelError::TooFewSites {
            model: "cluster-ising",
            n_sites,
            min: 3,
        });
    }
    Ok(HamiltonianSpec::new(
        2,
        n_sites,
        format!("Cluster-Ising chain, h1={h1}, h2={h2}"),
        vec![
            InteractionTerm {
                p: 0,
                coefficient: -h1,
                ops: vec![SiteOperator::sigma_x()],
            },
            InteractionTerm {
                p: 1,
                coefficient: -h2,
                ops: vec![SiteOperator::sigma_x(), SiteOperator::sigma_x()],
            },
            InteractionTerm {
                p: 2,
                coefficient: -1.0,
                ops: vec![
                    SiteOperator::sigma_z(),
                    SiteOperator::sigma_x(),
                    SiteOperator::sigma_z(),
                ],
            },
        ],
    )?)
}

/// The built-in model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "annni")]
    Annni,
    #[serde(rename = "cluster-ising")]
    ClusterIsing,
}

impl Model {
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name {
            "annni" => Ok(Model::Annni),
            "cluster-ising" => Ok(Model::ClusterIsing),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Annni => "annni",
            Model::ClusterIsing => "cluster-ising",
        }
    }

    pub fn axis_names(&self) -> [&'static str; 2] {
        match self {
            Model::Annni => ["k", "h"],
            Model::ClusterIsing => ["h1", "h2"],
        }
    }

    /// Default sweep box: wide enough to contain every named phase of the
    /// family, and overridable from the CLI.
    pub fn default_ranges(&self, count: usize) -> Vec<AxisRange> {
        match self {
            Model::Annni => vec![
                AxisRange::new("k", 0.0, 1.0, count),
                AxisRange::new("h", 0.0, 2.0, count),
            ],
            Model::ClusterIsing => vec![
                AxisRange::new("h1", 0.0, 1.6, count),
                AxisRange::new("h2", -1.6, 1.6, count),
            ],
        }
    }

    /// Hamiltonian at one parameter point (both families take 2 coordinates).
    pub fn spec_at(&self, coords: &[f64], n_sites: usize) -> Result<HamiltonianSpec, ModelError> {
        if coords.len() != 2 {
            return Err(ModelError::WrongArity {
                expected: 2,
                got: coords.len(),
            });
        }
        match self {
            Model::Annni => annni_spec(coords[0], coords[1], n_sites),
            Model::ClusterIsing => cluster_ising_spec(coords[0], coords[1], n_sites),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annni_term_structure() {
        let spec = annni_spec(0.3, 0.7, 8).unwrap();
        assert_eq!(spec.d, 2);
        assert_eq!(spec.terms.len(), 3);
        let labels: Vec<Vec<&str>> = spec
            .terms
            .iter()
            .map(|t| t.ops.iter().map(|o| o.label()).collect())
            .collect();
        assert_eq!(labels, vec![vec!["Sz"], vec!["Sx", "Sx"], vec!["Sx", "I", "Sx"]]);
        assert_eq!(spec.terms[0].coefficient, -0.7);
        assert_eq!(spec.terms[1].coefficient, -1.0);
        assert_eq!(spec.terms[2].coefficient, 0.3);
    }

    #[test]
    fn cluster_ising_term_structure() {
        let spec = cluster_ising_spec(0.4, -0.9, 8).unwrap();
        assert_eq!(spec.d, 2);
        let labels: Vec<Vec<&str>> = spec
            .terms
            .iter()
            .map(|t| t.ops.iter().map(|o| o.label()).collect())
            .collect();
        assert_eq!(labels, vec![vec!["Sx"], vec!["Sx", "Sx"], vec!["Sz", "Sx", "Sz"]]);
        assert_eq!(spec.terms[0].coefficient, -0.4);
        assert_eq!(spec.terms[1].coefficient, 0.9);
        assert_eq!(spec.terms[2].coefficient, -1.0);
    }

    #[test]
    fn short_chains_rejected() {
        assert!(matches!(
            annni_spec(0.0, 0.0, 2),
            Err(ModelError::TooFewSites { .. })
        ));
        assert!(matches!(
            cluster_ising_spec(0.0, 0.0, 2),
            Err(ModelError::TooFewSites { .. })
        ));
    }

    #[test]
    fn grid_paper_scale_count() {
        let grid = make_grid(&[
            AxisRange::new("k", 0.0, 1.0, 30),
            AxisRange::new("h", 0.0, 2.0, 30),
        ])
        .unwrap();
        assert_eq!(grid.len(), 900);
    }

    #[test]
    fn grid_single_point() {
        let grid = make_grid(&[
            AxisRange::new("a", 0.0, 0.0, 1),
            AxisRange::new("b", 5.0, 5.0, 1),
        ])
        .unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.points[0].coords, vec![0.0, 5.0]);
    }

    #[test]
    fn grid_linspace_three() {
        let grid = make_grid(&[AxisRange::new("x", 0.0, 1.0, 3)]).unwrap();
        let coords: Vec<f64> = grid.points.iter().map(|p| p.coords[0]).collect();
        assert_eq!(coords, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_row_major_order() {
        let grid = make_grid(&[
            AxisRange::new("a", 0.0, 1.0, 2),
            AxisRange::new("b", 0.0, 2.0, 3),
        ])
        .unwrap();
        let coords: Vec<Vec<f64>> = grid.points.iter().map(|p| p.coords.clone()).collect();
        assert_eq!(
            coords,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 2.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![1.0, 2.0],
            ]
        );
        // Index fields match enumeration order.
        for (i, p) in grid.points.iter().enumerate() {
            assert_eq!(p.index, i);
        }
    }

    #[test]
    fn grid_determinism_bit_exact() {
        let ranges = [
            AxisRange::new("k", 0.0, 1.0, 7),
            AxisRange::new("h", 0.0, 2.0, 5),
        ];
        let g1 = make_grid(&ranges).unwrap();
        let g2 = make_grid(&ranges).unwrap();
        for (p, q) in g1.points.iter().zip(&g2.points) {
            for (a, b) in p.coords.iter().zip(&q.coords) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            make_grid(&[AxisRange::new("x", 0.0, 1.0, 0)]),
            Err(ModelError::ZeroCount { .. })
        ));
        assert!(matches!(
            make_grid(&[AxisRange::new("x", 2.0, 1.0, 3)]),
            Err(ModelError::InvalidRange { .. })
        ));
        assert!(matches!(make_grid(&[]), Err(ModelError::NoAxes)));
    }

    #[test]
    fn parse_grid_syntax() {
        let ranges = parse_grid_spec("k=0:1:30,h=0:2:30").unwrap();
        assert_eq!(ranges.len(), 2);
        assert_eq!(ranges[0].name, "k");
        assert_eq!(ranges[0].count, 30);
        assert_eq!(ranges[1].max, 2.0);
        assert!(parse_grid_spec("k=0:1").is_err());
        assert!(parse_grid_spec("k=a:b:c").is_err());
        assert!(parse_grid_spec("").is_err());
    }

    #[test]
    fn random_grid_seeded() {
        let ranges = [
            AxisRange::new("k", 0.0, 1.0, 1),
            AxisRange::new("h", 0.0, 2.0, 1),
        ];
        let a = random_grid(&ranges, 10, 42).unwrap();
        let b = random_grid(&ranges, 10, 42).unwrap();
        assert_eq!(a, b);
        for p in &a.points {
            assert!((0.0..1.0).contains(&p.coords[0]));
            assert!((0.0..2.0).contains(&p.coords[1]));
        }
    }

    #[test]
    fn model_selector() {
        assert_eq!(Model::parse("annni").unwrap(), Model::Annni);
        assert_eq!(Model::parse("cluster-ising").unwrap(), Model::ClusterIsing);
        assert!(Model::parse("xy").is_err());
        assert_eq!(Model::Annni.axis_names(), ["k", "h"]);
    }
}
