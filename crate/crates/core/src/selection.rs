//! Choosing the number of clusters: silhouette widths over the
//! kernel-induced metric, the within-cluster-sum-of-squares curve, and an
//! elbow locator — plus the data ordering for silhouette plots.
//!
//! The selected cluster count is the silhouette argmax; the elbow is
//! reported alongside as a cross-check, not a decider. Silhouette
//! distances default to the kernel-induced feature-space metric; a switch
//! to embedding-space Euclidean distances exists for comparison.

use crate::kernel::{kernel_distance, DistanceMatrix, KernelMatrix};
use crate::spectral::{build_graph, embed, kmeans, laplacian, SpectralError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use thiserror::Error;

/// Lloyd-iteration ceiling used by the curve evaluators.
pub const KMEANS_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("silhouette requires c ≥ 2")]
    SingleCluster,

    #[error("labels length {labels} does not match distance matrix size {size}")]
    LabelMismatch { labels: usize, size: usize },

    #[error("elbow detection needs at least 3 curve points, got {0}")]
    TooFewPoints(usize),

    #[error("curve lengths differ: {wcss} WCSS values vs {c} cluster counts")]
    CurveMismatch { wcss: usize, c: usize },

    #[error("cluster range {lo}..={hi} invalid for {d} data points")]
    BadRange { lo: usize, hi: usize, d: usize },

    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Per-point silhouette decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouettePoint {
    /// Mean distance to the other members of the own cluster (0 for a
    /// singleton).
    pub a: f64,
    /// Smallest mean distance to any other cluster.
    pub b: f64,
    /// Silhouette width: (b - a) / max(a, b); 0 for singletons and for
    /// a = b = 0.
    pub s: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_point: Vec<SilhouettePoint>,
    pub average: f64,
    /// Number of distinct clusters present in the labeling.
    pub c: usize,
}

/// Silhouette widths of a labeling under a precomputed distance matrix.
///
/// Singleton clusters score 0 by convention.
pub fn silhouette(
    dist: &DistanceMatrix,
    labels: &[usize],
) -> Result<SilhouetteReport, SelectionError> {
    let d = dist.size();
    if labels.len() != d {
        return Err(SelectionError::LabelMismatch {
            labels: labels.len(),
            size: d,
        });
    }
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(SelectionError::SingleCluster);
    }

    let count_of = |lab: usize| labels.iter().filter(|&&l| l == lab).count();
    let counts: Vec<(usize, usize)> = clusters.iter().map(|&l| (l, count_of(l))).collect();

    let per_point: Vec<SilhouettePoint> = (0..d)
        .map(|i| {
            let own = labels[i];
            let mut own_sum = 0.0;
            let mut other_sums: Vec<(usize, f64)> =
                clusters.iter().map(|&l| (l, 0.0)).collect();
            for j in 0..d {
                if j == i {
                    continue;
                }
                let dij = dist.get(i, j);
                if labels[j] == own {
                    own_sum += dij;
                } else {
                    let slot = other_sums
                        .iter_mut()
                        .find(|(l, _)| *l == labels[j])
                        .expect("label catalogued");
                    slot.1 += dij;
                }
            }
            let own_count = counts.iter().find(|(l, _)| *l == own).expect("catalog").1;
            let b = other_sums
                .iter()
                .filter(|(l, _)| *l != own)
                .map(|(l, sum)| {
                    let n = counts.iter().find(|(cl, _)| cl == l).expect("catalog").1;
                    sum / n as f64
                })
                .fold(f64::INFINITY, f64::min);
            if own_count == 1 {
                return SilhouettePoint {
                    a: 0.0,
                    b,
                    s: 0.0,
                    cluster: own,
                };
            }
            let a = own_sum / (own_count - 1) as f64;
            let m = a.max(b);
            let s = if m > 0.0 { (b - a) / m } else { 0.0 };
            SilhouettePoint { a, b, s, cluster: own }
        })
        .collect();

    let average = per_point.iter().map(|p| p.s).sum::<f64>() / d as f64;
    Ok(SilhouetteReport {
        per_point,
        average,
        c: clusters.len(),
    })
}

/// WCSS at each candidate cluster count; the embedding is re-derived per c
/// with dimension equal to c, so each value is the k-means objective in
/// its own c-dimensional space. `row_normalize` rescales embedding rows to
/// unit norm before clustering (off in the standard procedure).
pub fn wcss_curve(
    k: &KernelMatrix,
    tau: f64,
    c_range: RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
    row_normalize: bool,
) -> Result<Vec<f64>, SelectionError> {
    let (lo, hi) = (*c_range.start(), *c_range.end());
    if lo == 0 || lo > hi || hi > k.size() {
        return Err(SelectionError::BadRange {
            lo,
            hi,
            d: k.size(),
        });
    }
    let l = laplacian(&build_graph(k, tau)?);
    let values: Result<Vec<f64>, SelectionError> = (lo..=hi)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&c| {
            let mut emb = embed(&l, c)?;
            if row_normalize {
                emb = emb.row_normalized();
            }
            Ok(kmeans(&emb, c, seed, restarts, KMEANS_MAX_ITER)?.wcss)
        })
        .collect();
    values
}

/// Elbow location plus degeneracy diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowOutcome {
    pub c: usize,
    /// Raised when the curve carries no usable bend: overall range below
    /// 1e-12, or the best chord distance itself is numerically zero.
    pub flat: bool,
    /// Perpendicular chord distance at the chosen point (normalized curve).
    pub score: f64,
}

/// Locate the bend of a WCSS curve: normalize both axes to [0,1], draw the
/// chord between the first and last points, and return the interior point
/// farthest from the chord (ties to the lowest c).
pub fn elbow_detect(wcss: &[f64], c_values: &[usize]) -> Result<ElbowOutcome, SelectionError> {
    if wcss.len() != c_values.len() {
        return Err(SelectionError::CurveMismatch {
            wcss: wcss.len(),
            c: c_values.len(),
        });
    }
    if wcss.len() < 3 {
        return Err(SelectionError::TooFewPoints(wcss.len()));
    }
    let w_min = wcss.iter().copied().fold(f64::INFINITY, f64::min);
    let w_max = wcss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = w_max - w_min;
    if range < 1e-12 {
        return Ok(ElbowOutcome {
            c: c_values[0],
            flat: true,
            score: 0.0,
        });
    }
    let n = wcss.len();
    let c0 = c_values[0] as f64;
    let c1 = c_values[n - 1] as f64;
    let xs: Vec<f64> = c_values.iter().map(|&c| (c as f64 - c0) / (c1 - c0)).collect();
    let ys: Vec<f64> = wcss.iter().map(|&w| (w - w_min) / range).collect();
    // Perpendicular distance to the chord through (x0,y0) and (xn,yn).
    let (x0, y0) = (xs[0], ys[0]);
    let (xn, yn) = (xs[n - 1], ys[n - 1]);
    let len = ((xn - x0).powi(2) + (yn - y0).powi(2)).sqrt();
    let mut best_idx = 1usize;
    let mut best_score = -1.0f64;
    for i in 1..n - 1 {
        let score = ((yn - y0) * xs[i] - (xn - x0) * ys[i] + xn * y0 - yn * x0).abs() / len;
        if score > best_score {
            best_score = score;
            best_idx = i;
        }
    }
    Ok(ElbowOutcome {
        c: c_values[best_idx],
        flat: best_score < 1e-9,
        score: best_score,
    })
}

/// Which metric silhouette scores are computed in.
///
/// All distances are evaluated starting from the similarity data itself,
/// so the default is the feature-space metric d_ij = sqrt(2 − 2·K_ij).
/// Euclidean distances between embedding rows (the quantity k-means
/// itself optimizes) remain available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SilhouetteSpace {
    /// Feature-space distances derived from the kernel (default).
    #[default]
    Kernel,
    /// Euclidean distances between per-c embedding rows.
    Embedding,
}

/// Full model-selection sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCurve {
    pub c_values: Vec<usize>,
    pub silhouette_avgs: Vec<f64>,
    pub wcss: Vec<f64>,
    /// Silhouette argmax (lowest c on ties) — the selected cluster count.
    pub chosen_c: usize,
    /// Advisory elbow location from the WCSS curve.
    pub elbow_c: usize,
    /// True when the WCSS curve had no usable bend.
    pub elbow_flat: bool,
}

/// Scan candidate cluster counts: for each c, re-embed, cluster, and score;
/// choose the silhouette argmax and report the elbow as a cross-check.
pub fn select_c(
    k: &KernelMatrix,
    tau: f64,
    c_range: RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
    space: SilhouetteSpace,
    row_normalize: bool,
) -> Result<SelectionCurve, SelectionError> {
    let (lo, hi) = (*c_range.start(), *c_range.end());
    if lo < 2 || lo > hi || hi > k.size() {
        return Err(SelectionError::BadRange {
            lo,
            hi,
            d: k.size(),
        });
    }
    let l = laplacian(&build_graph(k, tau)?);
    let kernel_metric = kernel_distance(k);

    let per_c: Result<Vec<(f64, f64)>, SelectionError> = (lo..=hi)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&c| {
            let mut emb = embed(&l, c)?;
            if row_normalize {
                emb = emb.row_normalized();
            }
            let clustering = kmeans(&emb, c, seed, restarts, KMEANS_MAX_ITER)?;
            let dist = match space {
                SilhouetteSpace::Kernel => kernel_metric.clone(),
                SilhouetteSpace::Embedding => embedding_distance(&emb),
            };
            let sil = silhouette(&dist, &clustering.labels)?;
            Ok((sil.average, clustering.wcss))
        })
        .collect();
    let per_c = per_c?;

    let c_values: Vec<usize> = (lo..=hi).collect();
    let silhouette_avgs: Vec<f64> = per_c.iter().map(|(s, _)| *s).collect();
    let wcss: Vec<f64> = per_c.iter().map(|(_, w)| *w).collect();

    let mut chosen_c = c_values[0];
    let mut best = f64::NEG_INFINITY;
    for (&c, &s) in c_values.iter().zip(&silhouette_avgs) {
        if s > best {
            best = s;
            chosen_c = c;
        }
    }

    let elbow = if c_values.len() >= 3 {
        elbow_detect(&wcss, &c_values)?
    } else {
        ElbowOutcome {
            c: c_values[0],
            flat: true,
            score: 0.0,
        }
    };

    Ok(SelectionCurve {
        c_values,
        silhouette_avgs,
        wcss,
        chosen_c,
        elbow_c: elbow.c,
        elbow_flat: elbow.flat,
    })
}

/// Euclidean distances between embedding rows.
pub fn embedding_distance(emb: &crate::spectral::SpectralEmbedding) -> DistanceMatrix {
    let d = emb.size();
    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        for j in i + 1..d {
            let dist: f64 = emb
                .row(i)
                .iter()
                .zip(emb.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            entries[i * d + j] = dist;
            entries[j * d + i] = dist;
        }
    }
    DistanceMatrix::from_entries(d, entries).expect("constructed symmetric")
}

/// One plot band: a cluster's silhouette values, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteBand {
    pub cluster: usize,
    pub bars: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouettePlotData {
    /// Bands in ascending cluster order, bars ascending within each band.
    pub bands: Vec<SilhouetteBand>,
    pub average: f64,
}

/// Arrange a silhouette report for horizontal-bar plotting: bands ordered
/// by ascending cluster label, bar lengths ascending within each band,
/// negative values preserved.
pub fn silhouette_plot_data(report: &SilhouetteReport) -> SilhouettePlotData {
    let mut clusters: Vec<usize> = report.per_point.iter().map(|p| p.cluster).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let bands = clusters
        .into_iter()
        .map(|cluster| {
            let mut bars: Vec<f64> = report
                .per_point
                .iter()
                .filter(|p| p.cluster == cluster)
                .map(|p| p.s)
                .collect();
            bars.sort_by(f64::total_cmp);
            SilhouetteBand { cluster, bars }
        })
        .collect();
    SilhouettePlotData {
        bands,
        average: report.average,
    }
}
