//! Thresholded-SVD topic recovery.
//!
//! The pipeline: split the corpus columns in half, learn a per-word count
//! threshold on the first half, threshold the second half into a sparse
//! matrix `B` with entries in {0, √ζ_i}, cluster `B`'s columns by k-means
//! in its rank-k singular subspace followed by full-dimensional Lloyd
//! refinement, identify each cluster's catchwords through per-cluster
//! order statistics, and average the documents that carry the most
//! catchword mass into recovered topic vectors.

mod kmeans;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::linalg::{self, LinalgError, SparseMatrix};
use crate::stream_rng;
use crate::synth::TopicMatrix;

/// RNG streams for k-means restarts count downward from here.
const STREAM_KMEANS_BASE: u64 = u64::MAX - 16;
/// Lloyd cap for the projected-space clustering phase.
const PROJECTED_LLOYD_MAX_ITERS: usize = 100;
/// Randomized-SVD defaults.
const SVD_OVERSAMPLING: usize = 10;
const SVD_POWER_ITERS: usize = 2;

#[derive(Debug, Error)]
pub enum TsvdError {
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("no topic produced a non-empty catchword set")]
    RecoveryFailed,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<TsvdError>,
    },
}

impl TsvdError {
    /// Name of the pipeline stage this error was raised in, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            TsvdError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// How the threshold floor (minimum ζ a word must reach to survive
/// thresholding) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorMode {
    /// 8·ln(20/(ε·w0)).
    PaperFormula,
    /// No floor: every word with a valid threshold participates.
    Off,
    Explicit(f64),
}

/// How the absolute catchword cutoff in the g-ratio test is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// (4/(m·δ²))·ln(20/(ε·w0)).
    PaperFormula,
    /// Cutoff 0: only the cross-topic ratio test applies.
    Off,
    Explicit(f64),
}

/// All algorithm parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsvdConfig {
    pub k: usize,
    /// Minimum dominant-topic probability; the threshold conditions count
    /// against (w0/2)·s and 3·ε·w0·s documents.
    pub w0: f64,
    pub epsilon: f64,
    /// Fraction of near-pure documents; ⌊ε0·w0·s/2⌋ sets the order
    /// statistic rank used in catchword identification and recovery.
    pub epsilon0: f64,
    pub delta: f64,
    /// Cross-topic dominance ratio required of a catchword's g values.
    pub gamma: f64,
    /// Count grid resolution; `None` resolves to the median document
    /// length of the corpus being processed.
    pub nominal_m: Option<usize>,
    pub threshold_floor_mode: FloorMode,
    pub catchword_cutoff_mode: CutoffMode,
    pub kmeans_restarts: usize,
    pub lloyd_max_iters: usize,
    pub seed: u64,
}

impl TsvdConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            w0: 1.0 / k.max(1) as f64,
            epsilon: 1.0 / 6.0,
            epsilon0: 1.0 / 3.0,
            delta: 0.05,
            gamma: 1.1,
            nominal_m: None,
            threshold_floor_mode: FloorMode::Off,
            catchword_cutoff_mode: CutoffMode::Off,
            kmeans_restarts: 10,
            lloyd_max_iters: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TsvdError> {
        if self.k == 0 {
            return Err(TsvdError::Config("k must be at least 1".into()));
        }
        if !(self.w0 > 0.0 && self.w0 <= 1.0) {
            return Err(TsvdError::Config(format!("w0={} not in (0,1]", self.w0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(TsvdError::Config(format!(
                "epsilon={} not in (0,1)",
                self.epsilon
            )));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 <= 1.0) {
            return Err(TsvdError::Config(format!(
                "epsilon0={} not in (0,1]",
                self.epsilon0
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(TsvdError::Config(format!(
                "gamma={} must be positive",
                self.gamma
            )));
        }
        if self.nominal_m == Some(0) {
            return Err(TsvdError::Config("nominal_m must be at least 1".into()));
        }
        if self.kmeans_restarts == 0 || self.lloyd_max_iters == 0 {
            return Err(TsvdError::Config(
                "kmeans_restarts and lloyd_max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The nominal document length: the configured value or the median
    /// length of `corpus`.
    pub fn resolve_nominal_m(&self, corpus: &Corpus) -> Result<usize, TsvdError> {
        match self.nominal_m {
            Some(m) => Ok(m),
            None => {
                let mut lengths: Vec<u64> = corpus.doc_lengths().to_vec();
                if lengths.is_empty() {
                    return Err(TsvdError::Config("empty corpus".into()));
                }
                lengths.sort_unstable();
                let median = lengths[(lengths.len() - 1) / 2];
                if median == 0 {
                    return Err(TsvdError::Config(
                        "median document length is zero; set nominal_m explicitly".into(),
                    ));
                }
                Ok(median as usize)
            }
        }
    }
}

/// Threshold floor 8·ln(20/(ε·w0)).
pub fn paper_threshold_floor(epsilon: f64, w0: f64) -> f64 {
    8.0 * (20.0 / (epsilon * w0)).ln()
}

/// Catchword cutoff (4/(m·δ²))·ln(20/(ε·w0)).
pub fn paper_catchword_cutoff(m: usize, delta: f64, epsilon: f64, w0: f64) -> f64 {
    4.0 / (m as f64 * delta * delta) * (20.0 / (epsilon * w0)).ln()
}

/// γ = (1−2δ)/((1+δ)(β+ρ)), the ratio the model constraints imply.
pub fn gamma_from_constraints(delta: f64, beta: f64, rho: f64) -> f64 {
    (1.0 - 2.0 * delta) / ((1.0 + delta) * (beta + rho))
}

/// Per-word thresholds ζ_i plus qualification flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdVector {
    /// Highest count level satisfying both threshold conditions; 0 when no
    /// level qualifies (see `found`).
    pub zeta: Vec<u32>,
    /// Whether the word participates in thresholding: a level was found
    /// and it clears the configured floor.
    pub qualified: Vec<bool>,
    /// Whether any level satisfied the two counting conditions at all.
    pub found: Vec<bool>,
}

/// The thresholded matrix `B`: entry (i,j) is √ζ_i where document j's
/// frequency of word i exceeds ζ_i/m and word i is qualified, else 0.
#[derive(Debug, Clone)]
pub struct ThresholdedMatrix {
    pub b: SparseMatrix,
    pub thresholds: ThresholdVector,
}

/// A k-clustering of document columns with full-dimensional centers.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub assignment: Vec<u32>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances from each column of `B` to its center.
    pub cost: f64,
}

impl Clustering {
    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0usize; k];
        for &a in &self.assignment {
            sizes[a as usize] += 1;
        }
        sizes
    }
}

/// Per-stage wall-clock timings in milliseconds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub split_ms: f64,
    pub compute_thresholds_ms: f64,
    pub apply_thresholds_ms: f64,
    pub project_and_cluster_ms: f64,
    pub lloyds_ms: f64,
    pub compute_g_ms: f64,
    pub identify_catchwords_ms: f64,
    pub recover_topics_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub timings: Timings,
    pub cluster_sizes: Vec<usize>,
    pub unrecovered_topics: Vec<u32>,
    pub first_half_docs: usize,
    pub second_half_docs: usize,
    pub nominal_m: usize,
}

/// Everything the pipeline produced.
#[derive(Debug, Clone)]
pub struct TsvdModel {
    pub m_hat: TopicMatrix,
    pub catchwords: Vec<Vec<u32>>,
    pub thresholds: ThresholdVector,
    pub clustering: Clustering,
    /// g[l][i]: the ⌊ε0·w0·s/2⌋-th highest frequency of word i in cluster l.
    pub g_matrix: Vec<Vec<f64>>,
    pub config: TsvdConfig,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct SidecarJson<'a> {
    schema: u32,
    thresholds: &'a [u32],
    qualified: &'a [bool],
    catchwords: &'a [Vec<u32>],
    cluster_sizes: &'a [usize],
    unrecovered_topics: &'a [u32],
    config: &'a TsvdConfig,
    timings_ms: &'a Timings,
}

impl TsvdModel {
    /// JSON sidecar with thresholds, catchword sets, cluster sizes,
    /// unrecovered topics, the resolved config and stage timings.
    pub fn write_sidecar_json<W: Write>(&self, w: W) -> Result<(), TsvdError> {
        let sidecar = SidecarJson {
            schema: 1,
            thresholds: &self.thresholds.zeta,
            qualified: &self.thresholds.qualified,
            catchwords: &self.catchwords,
            cluster_sizes: &self.diagnostics.cluster_sizes,
            unrecovered_topics: &self.diagnostics.unrecovered_topics,
            config: &self.config,
            timings_ms: &self.diagnostics.timings,
        };
        serde_json::to_writer_pretty(w, &sidecar)
            .map_err(|e| TsvdError::Config(format!("sidecar serialization: {e}")))
    }
}

/// Compares a document's stored count against the grid point ζ/m in exact
/// integer arithmetic: count/len > ζ/m ⟺ count·m > ζ·len.
#[inline]
fn count_above(count: u32, len: u64, zeta: u64, m: u64) -> bool {
    (count as u128) * (m as u128) > (zeta as u128) * (len as u128)
}

/// For each word, the highest ζ ∈ {0,…,m} with at least (w0/2)·s documents
/// strictly above ζ/m and at most 3·ε·w0·s documents exactly at ζ/m,
/// counted over the given (first) half. Words where no level qualifies get
/// the sentinel ζ=0 with `found=false`. The floor mode decides which found
/// words are `qualified`.
pub fn compute_thresholds(
    first: &Corpus,
    config: &TsvdConfig,
) -> Result<ThresholdVector, TsvdError> {
    config.validate()?;
    let s1 = first.num_docs();
    if s1 == 0 {
        return Err(TsvdError::Config("first half has no documents".into()));
    }
    let m = config.resolve_nominal_m(first)? as u64;
    let q_need = config.w0 / 2.0 * s1 as f64;
    let e_max = 3.0 * config.epsilon * config.w0 * s1 as f64;
    let q_int = q_need.ceil() as usize;

    let rows = first.rows();
    let lengths = first.doc_lengths();

    let per_word: Vec<(u32, bool)> = rows
        .par_iter()
        .map(|entries| {
            let nnz = entries.len();
            if q_int > nnz {
                return (0u32, false);
            }
            // Highest zeta satisfying the "enough documents above" count:
            // one below the q-th largest frequency on the count grid.
            let zeta_cap = if q_int == 0 {
                m
            } else {
                let mut vals: Vec<(u32, u64)> = entries
                    .iter()
                    .map(|&(doc, c)| (c, lengths[doc as usize]))
                    .collect();
                vals.select_nth_unstable_by(q_int - 1, |a, b| {
                    // descending by c/len, exact rational comparison
                    let left = (b.0 as u128) * (a.1 as u128);
                    let right = (a.0 as u128) * (b.1 as u128);
                    left.cmp(&right)
                });
                let (c, len) = vals[q_int - 1];
                let cap = ((c as u128 * m as u128 - 1) / len as u128) as u64;
                cap.min(m)
            };
            // Exact-equality histogram: count/len == z/m has solutions only
            // at integer grid points dividing count·m.
            let mut eq = std::collections::HashMap::new();
            for &(doc, c) in entries {
                let len = lengths[doc as usize] as u128;
                let t = c as u128 * m as u128;
                if t % len == 0 {
                    let z = (t / len) as u64;
                    *eq.entry(z).or_insert(0usize) += 1;
                }
            }
            let absent = s1 - nnz;
            let mut zeta = zeta_cap as i64;
            while zeta >= 0 {
                let at_level = if zeta == 0 {
                    absent + eq.get(&0).copied().unwrap_or(0)
                } else {
                    eq.get(&(zeta as u64)).copied().unwrap_or(0)
                };
                if at_level as f64 <= e_max {
                    return (zeta as u32, true);
                }
                zeta -= 1;
            }
            (0u32, false)
        })
        .collect();

    let floor = match config.threshold_floor_mode {
        FloorMode::PaperFormula => Some(paper_threshold_floor(config.epsilon, config.w0)),
        FloorMode::Off => None,
        FloorMode::Explicit(v) => Some(v),
    };
    let zeta: Vec<u32> = per_word.iter().map(|&(z, _)| z).collect();
    let found: Vec<bool> = per_word.iter().map(|&(_, f)| f).collect();
    let qualified: Vec<bool> = per_word
        .iter()
        .map(|&(z, f)| f && floor.is_none_or(|fl| z as f64 >= fl))
        .collect();
    Ok(ThresholdVector {
        zeta,
        qualified,
        found,
    })
}

/// Thresholds the (second) half: B_ij = √ζ_i exactly when word i is
/// qualified and document j's frequency strictly exceeds ζ_i/m.
/// ζ_i = 0 rows stay structurally empty (√0 contributes nothing).
pub fn apply_thresholds(
    second: &Corpus,
    thresholds: &ThresholdVector,
    config: &TsvdConfig,
) -> Result<ThresholdedMatrix, TsvdError> {
    config.validate()?;
    if thresholds.zeta.len() != second.num_words() {
        return Err(TsvdError::Config(format!(
            "thresholds for {} words applied to corpus with {} words",
            thresholds.zeta.len(),
            second.num_words()
        )));
    }
    let m = config.resolve_nominal_m(second)? as u64;
    let columns: Vec<Vec<(u32, f64)>> = (0..second.num_docs())
        .into_par_iter()
        .map(|j| {
            let len = second.doc_length(j);
            second
                .column(j)
                .iter()
                .filter_map(|&(w, c)| {
                    let zeta = thresholds.zeta[w as usize];
                    (thresholds.qualified[w as usize]
                        && zeta > 0
                        && count_above(c, len, zeta as u64, m))
                    .then(|| (w, (zeta as f64).sqrt()))
                })
                .collect()
        })
        .collect();
    let b = SparseMatrix::from_columns(second.num_words(), &columns)?;
    Ok(ThresholdedMatrix {
        b,
        thresholds: thresholds.clone(),
    })
}

fn kmeans_restart_stream(r: usize) -> u64 {
    STREAM_KMEANS_BASE - r as u64
}

/// Projects B's columns onto its top-k left singular subspace and clusters
/// them there: k-means++ plus Lloyd, `kmeans_restarts` seeded restarts,
/// keeping the restart with the lowest projected-space cost. Centers are
/// lifted back to word space as means of the assigned B columns; the
/// reported cost is measured in word space.
pub fn project_and_cluster(
    bm: &ThresholdedMatrix,
    config: &TsvdConfig,
) -> Result<Clustering, TsvdError> {
    config.validate()?;
    let b = &bm.b;
    let k = config.k;
    let s2 = b.ncols();
    if s2 < k {
        return Err(TsvdError::DegenerateGeometry(format!(
            "{s2} columns cannot form {k} clusters"
        )));
    }
    let rank = k.min(b.nrows()).min(s2);
    let factors = linalg::truncated_svd(b, rank, config.seed, SVD_OVERSAMPLING, SVD_POWER_ITERS)?;
    let proj = linalg::project_columns(b, &factors)?;
    let points: Vec<Vec<f64>> = (0..s2)
        .map(|j| (0..rank).map(|t| proj[(t, j)]).collect())
        .collect();

    let mut distinct = points.clone();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < k {
        return Err(TsvdError::DegenerateGeometry(format!(
            "only {} distinct projected columns for k={k}",
            distinct.len()
        )));
    }

    let outcomes: Vec<kmeans::KMeansOutcome> = (0..config.kmeans_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, kmeans_restart_stream(r));
            kmeans::kmeans(&points, k, &mut rng, PROJECTED_LLOYD_MAX_ITERS)
        })
        .collect();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.cost.total_cmp(&b.cost).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one restart");

    let assignment = best.assignment.clone();
    let centers = lift_centers(b, &assignment, k);
    let cost = full_space_cost(b, &assignment, &centers);
    Ok(Clustering {
        assignment,
        centers,
        cost,
    })
}

/// Means of the assigned B columns in word space. Empty clusters get a
/// zero center (callers repair them during Lloyd refinement).
fn lift_centers(b: &SparseMatrix, assignment: &[u32], k: usize) -> Vec<Vec<f64>> {
    let d = b.nrows();
    let mut centers = vec![vec![0.0f64; d]; k];
    let mut counts = vec![0usize; k];
    for (j, &a) in assignment.iter().enumerate() {
        counts[a as usize] += 1;
        for (r, v) in b.column(j) {
            centers[a as usize][r as usize] += v;
        }
    }
    for l in 0..k {
        if counts[l] > 0 {
            let inv = 1.0 / counts[l] as f64;
            centers[l].iter_mut().for_each(|x| *x *= inv);
        }
    }
    centers
}

fn column_center_dist_sq(
    b: &SparseMatrix,
    j: usize,
    bnorm_sq: f64,
    center: &[f64],
    center_norm_sq: f64,
) -> f64 {
    let mut dot = 0.0;
    for (r, v) in b.column(j) {
        dot += v * center[r as usize];
    }
    (bnorm_sq - 2.0 * dot + center_norm_sq).max(0.0)
}

fn full_space_cost(b: &SparseMatrix, assignment: &[u32], centers: &[Vec<f64>]) -> f64 {
    let center_norms: Vec<f64> = centers
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum())
        .collect();
    let dists: Vec<f64> = (0..b.ncols())
        .into_par_iter()
        .map(|j| {
            let l = assignment[j] as usize;
            column_center_dist_sq(b, j, b.column_norm_sq(j), &centers[l], center_norms[l])
        })
        .collect();
    dists.iter().sum()
}

/// Lloyd refinement on the full-dimensional columns of B (not the rank-k
/// projection), starting from `init`. Assignment ties go to the lowest
/// cluster id; empty clusters are reseeded with the column farthest from
/// its assigned center. Stops when assignments repeat or after
/// `lloyd_max_iters` rounds. Cost is non-increasing across iterations.
pub fn lloyds_on_b(
    bm: &ThresholdedMatrix,
    init: &Clustering,
    config: &TsvdConfig,
) -> Result<Clustering, TsvdError> {
    config.validate()?;
    let b = &bm.b;
    let k = config.k;
    if init.centers.len() != k {
        return Err(TsvdError::Config(format!(
            "init has {} centers, config wants k={k}",
            init.centers.len()
        )));
    }
    if init.centers.iter().any(|c| c.len() != b.nrows()) {
        return Err(TsvdError::Config(
            "init centers do not match B's row count".into(),
        ));
    }
    let s2 = b.ncols();
    let bnorms: Vec<f64> = (0..s2).map(|j| b.column_norm_sq(j)).collect();
    let mut centers = init.centers.clone();
    let mut assignment: Vec<u32> = vec![u32::MAX; s2];
    let mut prev_cost = f64::INFINITY;

    for _ in 0..config.lloyd_max_iters {
        let center_norms: Vec<f64> = centers
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum())
            .collect();
        let assigned: Vec<(u32, f64)> = (0..s2)
            .into_par_iter()
            .map(|j| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for l in 0..k {
                    let d = column_center_dist_sq(b, j, bnorms[j], &centers[l], center_norms[l]);
                    if d < best_d {
                        best_d = d;
                        best = l as u32;
                    }
                }
                (best, best_d)
            })
            .collect();
        let new_assignment: Vec<u32> = assigned.iter().map(|&(a, _)| a).collect();
        let cost: f64 = assigned.iter().map(|&(_, d)| d).sum();
        debug_assert!(
            cost <= prev_cost * (1.0 + 1e-9) + 1e-9,
            "lloyd cost increased: {cost} > {prev_cost}"
        );
        let converged = new_assignment == assignment;
        assignment = new_assignment;
        prev_cost = cost;
        if converged {
            break;
        }
        centers = lift_centers(b, &assignment, k);
        let sizes = {
            let mut s = vec![0usize; k];
            for &a in &assignment {
                s[a as usize] += 1;
            }
            s
        };
        if sizes.iter().any(|&c| c == 0) {
            let center_norms: Vec<f64> = centers
                .iter()
                .map(|c| c.iter().map(|x| x * x).sum())
                .collect();
            let dists: Vec<f64> = (0..s2)
                .into_par_iter()
                .map(|j| {
                    let l = assignment[j] as usize;
                    column_center_dist_sq(b, j, bnorms[j], &centers[l], center_norms[l])
                })
                .collect();
            let mut stolen = vec![false; s2];
            for l in 0..k {
                if sizes[l] > 0 {
                    continue;
                }
                let mut far_j = 0usize;
                let mut far_d = -1.0f64;
                for (j, &d) in dists.iter().enumerate() {
                    if !stolen[j] && d > far_d {
                        far_d = d;
                        far_j = j;
                    }
                }
                let mut c = vec![0.0f64; b.nrows()];
                for (r, v) in b.column(far_j) {
                    c[r as usize] = v;
                }
                centers[l] = c;
                assignment[far_j] = l as u32;
                stolen[far_j] = true;
            }
        }
    }

    let cost = full_space_cost(b, &assignment, &centers);
    Ok(Clustering {
        assignment,
        centers,
        cost,
    })
}

/// The order-statistic rank r = ⌊ε0·w0·s/2⌋ shared by the catchword and
/// recovery stages (s is the processed half's document count).
pub fn order_statistic_rank(config: &TsvdConfig, num_docs: usize) -> Result<usize, TsvdError> {
    let r = (config.epsilon0 * config.w0 * num_docs as f64 / 2.0).floor() as usize;
    if r < 1 {
        return Err(TsvdError::Config(format!(
            "epsilon0*w0*s/2 = {} gives an order-statistic rank below 1",
            config.epsilon0 * config.w0 * num_docs as f64 / 2.0
        )));
    }
    Ok(r)
}

/// g(i,l): the r-th highest frequency of word i among the documents of
/// cluster l, counting absent words as 0; 0 when the cluster has fewer
/// than r documents.
pub fn compute_g(
    second: &Corpus,
    clustering: &Clustering,
    config: &TsvdConfig,
) -> Result<Vec<Vec<f64>>, TsvdError> {
    compute_g_for_assignment(second, &clustering.assignment, config)
}

/// [`compute_g`] on an arbitrary document labeling (used both by the
/// pipeline and by assumption checks on ground-truth labels).
pub fn compute_g_for_assignment(
    corpus: &Corpus,
    assignment: &[u32],
    config: &TsvdConfig,
) -> Result<Vec<Vec<f64>>, TsvdError> {
    config.validate()?;
    if assignment.len() != corpus.num_docs() {
        return Err(TsvdError::Config(format!(
            "{} assignments for {} documents",
            assignment.len(),
            corpus.num_docs()
        )));
    }
    let k = config.k;
    if let Some(&bad) = assignment.iter().find(|&&a| (a as usize) >= k) {
        return Err(TsvdError::Config(format!(
            "cluster id {bad} out of range (k={k})"
        )));
    }
    let r = order_statistic_rank(config, corpus.num_docs())?;
    let d = corpus.num_words();

    let members: Vec<Vec<u32>> = {
        let mut m = vec![Vec::new(); k];
        for (j, &a) in assignment.iter().enumerate() {
            m[a as usize].push(j as u32);
        }
        m
    };

    let g: Vec<Vec<f64>> = members
        .par_iter()
        .map(|docs| {
            let mut lists: Vec<Vec<f64>> = vec![Vec::new(); d];
            for &j in docs {
                let len = corpus.doc_length(j as usize);
                if len == 0 {
                    continue;
                }
                for &(w, c) in corpus.column(j as usize) {
                    lists[w as usize].push(c as f64 / len as f64);
                }
            }
            lists
                .into_iter()
                .map(|mut vals| {
                    if docs.len() < r || vals.len() < r {
                        // fewer than r nonzero frequencies: the r-th
                        // highest is zero (or undefined for tiny clusters)
                        0.0
                    } else {
                        *vals
                            .select_nth_unstable_by(r - 1, |a, b| b.total_cmp(a))
                            .1
                    }
                })
                .collect()
        })
        .collect();
    Ok(g)
}

/// J_l = { i : g(i,l) > max(cutoff, γ·max_{l'≠l} g(i,l')) }. The sets are
/// pairwise disjoint; if γ < 1 lets a word qualify for several topics it
/// goes to the topic with the largest g (ties to the lowest id).
pub fn identify_catchwords(
    g: &[Vec<f64>],
    config: &TsvdConfig,
) -> Result<Vec<Vec<u32>>, TsvdError> {
    config.validate()?;
    let k = config.k;
    if g.len() != k {
        return Err(TsvdError::Config(format!(
            "g has {} rows, config wants k={k}",
            g.len()
        )));
    }
    let d = g.first().map_or(0, Vec::len);
    let cutoff = match config.catchword_cutoff_mode {
        CutoffMode::PaperFormula => {
            let m = config.nominal_m.ok_or_else(|| {
                TsvdError::Config("paper-formula cutoff requires nominal_m".into())
            })?;
            paper_catchword_cutoff(m, config.delta, config.epsilon, config.w0)
        }
        CutoffMode::Off => 0.0,
        CutoffMode::Explicit(v) => v,
    };

    let mut sets: Vec<Vec<u32>> = vec![Vec::new(); k];
    for i in 0..d {
        let mut best: Option<usize> = None;
        for l in 0..k {
            let gi = g[l][i];
            let other_max = (0..k)
                .filter(|&l2| l2 != l)
                .map(|l2| g[l2][i])
                .fold(0.0f64, f64::max);
            if gi > cutoff && gi > config.gamma * other_max {
                best = match best {
                    None => Some(l),
                    Some(b) if g[l][i] > g[b][i] => Some(l),
                    b => b,
                };
            }
        }
        if let Some(l) = best {
            sets[l].push(i as u32);
        }
    }
    Ok(sets)
}

/// For each topic, ranks documents by their total frequency over J_l
/// (ties to the lower doc id), averages the frequency columns of the top
/// r = ⌊ε0·w0·s/2⌋, and renormalizes. Topics with an empty J_l come back
/// flagged with a uniform column; if every J_l is empty the whole recovery
/// fails.
pub fn recover_topics(
    second: &Corpus,
    catchwords: &[Vec<u32>],
    config: &TsvdConfig,
) -> Result<(TopicMatrix, Vec<u32>), TsvdError> {
    config.validate()?;
    let k = config.k;
    if catchwords.len() != k {
        return Err(TsvdError::Config(format!(
            "{} catchword sets, config wants k={k}",
            catchwords.len()
        )));
    }
    if catchwords.iter().all(Vec::is_empty) {
        return Err(TsvdError::RecoveryFailed);
    }
    let d = corpus_word_check(second, catchwords)?;
    let s2 = second.num_docs();
    // Unlike the g stage, averaging stays well-defined down to one
    // document, so the rank is clamped to 1 instead of erroring.
    let r = ((config.epsilon0 * config.w0 * s2 as f64 / 2.0).floor() as usize).max(1);

    let mut word_topic = vec![u32::MAX; d];
    for (l, set) in catchwords.iter().enumerate() {
        for &i in set {
            word_topic[i as usize] = l as u32;
        }
    }
    // score[l][j] = sum of document j's frequencies over J_l
    let per_doc: Vec<Vec<(u32, f64)>> = (0..s2)
        .into_par_iter()
        .map(|j| {
            let len = second.doc_length(j);
            if len == 0 {
                return Vec::new();
            }
            let mut acc: Vec<(u32, f64)> = Vec::new();
            for &(w, c) in second.column(j) {
                let l = word_topic[w as usize];
                if l != u32::MAX {
                    match acc.iter_mut().find(|(t, _)| *t == l) {
                        Some((_, v)) => *v += c as f64 / len as f64,
                        None => acc.push((l, c as f64 / len as f64)),
                    }
                }
            }
            acc
        })
        .collect();
    let mut scores = vec![vec![0.0f64; s2]; k];
    for (j, entries) in per_doc.iter().enumerate() {
        for &(l, v) in entries {
            scores[l as usize][j] = v;
        }
    }

    let mut columns = Vec::with_capacity(k);
    let mut unrecovered = Vec::new();
    for l in 0..k {
        if catchwords[l].is_empty() {
            columns.push(vec![1.0 / d as f64; d]);
            unrecovered.push(l as u32);
            continue;
        }
        let mut candidates: Vec<u32> = (0..s2 as u32)
            .filter(|&j| second.doc_length(j as usize) > 0)
            .collect();
        if candidates.is_empty() {
            columns.push(vec![1.0 / d as f64; d]);
            unrecovered.push(l as u32);
            continue;
        }
        let take = r.min(candidates.len());
        let score = &scores[l];
        candidates.select_nth_unstable_by(take - 1, |&a, &b| {
            score[b as usize]
                .total_cmp(&score[a as usize])
                .then(a.cmp(&b))
        });
        let top = &candidates[..take];
        let mut acc = vec![0.0f64; d];
        for &j in top {
            let len = second.doc_length(j as usize) as f64;
            for &(w, c) in second.column(j as usize) {
                acc[w as usize] += c as f64 / len;
            }
        }
        let sum: f64 = acc.iter().sum();
        if sum <= 0.0 {
            columns.push(vec![1.0 / d as f64; d]);
            unrecovered.push(l as u32);
            continue;
        }
        acc.iter_mut().for_each(|x| *x /= sum);
        columns.push(acc);
    }
    let m_hat = TopicMatrix::new(d, columns)
        .map_err(|e| TsvdError::Config(format!("recovered matrix invalid: {e}")))?;
    Ok((m_hat, unrecovered))
}

fn corpus_word_check(corpus: &Corpus, catchwords: &[Vec<u32>]) -> Result<usize, TsvdError> {
    let d = corpus.num_words();
    for (l, set) in catchwords.iter().enumerate() {
        if let Some(&bad) = set.iter().find(|&&i| (i as usize) >= d) {
            return Err(TsvdError::Config(format!(
                "catchword {bad} of topic {l} out of range (d={d})"
            )));
        }
    }
    Ok(d)
}

fn stage<T>(name: &'static str, r: Result<T, TsvdError>) -> Result<T, TsvdError> {
    r.map_err(|e| TsvdError::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Runs the whole pipeline on a seed-deterministic split of `corpus`.
pub fn run_tsvd(corpus: &Corpus, config: &TsvdConfig) -> Result<TsvdModel, TsvdError> {
    config.validate()?;
    if corpus.num_docs() < 2 * config.k {
        return Err(TsvdError::Config(format!(
            "need at least 2k = {} documents, corpus has {}",
            2 * config.k,
            corpus.num_docs()
        )));
    }
    let total_start = Instant::now();
    let mut cfg = config.clone();
    cfg.nominal_m = Some(cfg.resolve_nominal_m(corpus)?);
    let mut timings = Timings::default();

    let t = Instant::now();
    let split = stage("split", corpus.split_random(cfg.seed).map_err(Into::into))?;
    timings.split_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let thresholds = stage("compute_thresholds", compute_thresholds(&split.first, &cfg))?;
    timings.compute_thresholds_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let bm = stage(
        "apply_thresholds",
        apply_thresholds(&split.second, &thresholds, &cfg),
    )?;
    timings.apply_thresholds_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let initial = stage("project_and_cluster", project_and_cluster(&bm, &cfg))?;
    timings.project_and_cluster_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let clustering = stage("lloyds_on_b", lloyds_on_b(&bm, &initial, &cfg))?;
    timings.lloyds_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let g_matrix = stage("compute_g", compute_g(&split.second, &clustering, &cfg))?;
    timings.compute_g_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let catchwords = stage("identify_catchwords", identify_catchwords(&g_matrix, &cfg))?;
    timings.identify_catchwords_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let (m_hat, unrecovered) = stage(
        "recover_topics",
        recover_topics(&split.second, &catchwords, &cfg),
    )?;
    timings.recover_topics_ms = t.elapsed().as_secs_f64() * 1e3;
    timings.total_ms = total_start.elapsed().as_secs_f64() * 1e3;

    let cluster_sizes = clustering.cluster_sizes(cfg.k);
    let nominal_m = cfg.nominal_m.unwrap();
    Ok(TsvdModel {
        m_hat,
        catchwords,
        thresholds,
        clustering,
        g_matrix,
        diagnostics: Diagnostics {
            timings,
            cluster_sizes,
            unrecovered_topics: unrecovered,
            first_half_docs: split.first.num_docs(),
            second_half_docs: split.second.num_docs(),
            nominal_m,
        },
        config: cfg,
    })
}

/// For every (topic, word): the larger of the two fractions of the topic's
/// labeled documents falling strictly above / at-or-below ζ_i/m. Values
/// near 1 mean the threshold does not split that topic. Topics with no
/// documents report 1.0.
pub fn no_split_fractions(
    corpus: &Corpus,
    labels: &[u32],
    thresholds: &ThresholdVector,
    k: usize,
    nominal_m: usize,
) -> Vec<Vec<f64>> {
    let d = corpus.num_words();
    let m = nominal_m as u64;
    let mut above = vec![vec![0usize; d]; k];
    let mut sizes = vec![0usize; k];
    for j in 0..corpus.num_docs() {
        let l = labels[j] as usize;
        sizes[l] += 1;
        let len = corpus.doc_length(j);
        for &(w, c) in corpus.column(j) {
            if count_above(c, len, thresholds.zeta[w as usize] as u64, m) {
                above[l][w as usize] += 1;
            }
        }
    }
    // words with zeta = 0 count absent documents as "not above"; stored
    // counts handled above, absences contribute to the at-or-below side
    (0..k)
        .map(|l| {
            (0..d)
                .map(|i| {
                    if sizes[l] == 0 {
                        1.0
                    } else {
                        let frac_above = above[l][i] as f64 / sizes[l] as f64;
                        frac_above.max(1.0 - frac_above)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_with_m(k: usize, m: usize) -> TsvdConfig {
        let mut c = TsvdConfig::new(k);
        c.nominal_m = Some(m);
        c
    }

    /// Exhaustive scan over all levels, straight from the two conditions.
    fn threshold_oracle(corpus: &Corpus, config: &TsvdConfig) -> Vec<(u32, bool)> {
        let m = config.nominal_m.unwrap() as u64;
        let s1 = corpus.num_docs();
        let q_need = config.w0 / 2.0 * s1 as f64;
        let e_max = 3.0 * config.epsilon * config.w0 * s1 as f64;
        (0..corpus.num_words())
            .map(|i| {
                for zeta in (0..=m).rev() {
                    let mut above = 0usize;
                    let mut at = 0usize;
                    for j in 0..s1 {
                        let c = corpus.count(i as u32, j);
                        let len = corpus.doc_length(j);
                        if len == 0 {
                            if zeta == 0 {
                                at += 1;
                            }
                            continue;
                        }
                        let lhs = c as u128 * m as u128;
                        let rhs = zeta as u128 * len as u128;
                        if lhs > rhs {
                            above += 1;
                        } else if lhs == rhs {
                            at += 1;
                        }
                    }
                    if above as f64 >= q_need && at as f64 <= e_max {
                        return (zeta as u32, true);
                    }
                }
                (0, false)
            })
            .collect()
    }

    #[test]
    fn thresholds_match_worked_example() {
        // Need doc lengths 2 with word 0 count 1 in docs 0,1; docs 2,3 have
        // some other word so lengths stay 2.
        let corpus = Corpus::from_triples(
            2,
            4,
            [
                (0u32, 0u32, 1u32),
                (1, 0, 1),
                (0, 1, 1),
                (1, 1, 1),
                (1, 2, 2),
                (1, 3, 2),
            ],
        )
        .unwrap();
        let mut cfg = config_with_m(1, 2);
        cfg.w0 = 1.0;
        cfg.epsilon = 1.0 / 6.0;
        let t = compute_thresholds(&corpus, &cfg).unwrap();
        // word 0: zeta=0: |{A>0}| = 2 >= 2 and |{A=0}| = 2 <= 2; zeta=1:
        // |{A>1/2}| = 0 < 2.
        assert_eq!(t.zeta[0], 0);
        assert!(t.found[0]);
        assert!(t.qualified[0]);
    }

    #[test]
    fn absent_word_is_sentinel() {
        let corpus = Corpus::from_triples(2, 3, [(0u32, 0u32, 2u32), (0, 1, 1), (0, 2, 3)])
            .unwrap();
        let cfg = config_with_m(1, 3);
        let t = compute_thresholds(&corpus, &cfg).unwrap();
        assert_eq!(t.zeta[1], 0);
        assert!(!t.found[1]);
        assert!(!t.qualified[1]);
    }

    #[test]
    fn floor_boundary_qualification() {
        // 8·ln(20/((1/6)·(1/20))) = 8·ln(2400) ≈ 62.266
        let floor = paper_threshold_floor(1.0 / 6.0, 1.0 / 20.0);
        assert!((floor - 8.0 * 2400f64.ln()).abs() < 1e-12, "floor = {floor}");
        assert!((floor - 62.266).abs() < 1e-3);
        assert!(!(62.0 >= floor));
        assert!(63.0 >= floor);
    }

    #[test]
    fn thresholds_match_oracle_on_random_corpora() {
        use rand::Rng;
        for trial in 0..30 {
            let mut rng = stream_rng(900 + trial, 0);
            let d = rng.random_range(1..12);
            let s = rng.random_range(2..40);
            let m = rng.random_range(1..20);
            let mut triples = Vec::new();
            for j in 0..s as u32 {
                let mut remaining = m;
                for i in 0..d as u32 {
                    if remaining == 0 {
                        break;
                    }
                    if rng.random::<f64>() < 0.4 {
                        let c = rng.random_range(1..=remaining);
                        triples.push((i, j, c));
                        remaining -= c;
                    }
                }
            }
            let corpus = Corpus::from_triples(d, s, triples).unwrap();
            let mut cfg = config_with_m(2, m as usize);
            cfg.w0 = [0.05, 0.2, 0.5, 1.0][trial as usize % 4];
            cfg.epsilon = [0.05, 1.0 / 6.0, 0.4][trial as usize % 3];
            let got = compute_thresholds(&corpus, &cfg).unwrap();
            let want = threshold_oracle(&corpus, &cfg);
            for i in 0..d {
                assert_eq!(
                    (got.zeta[i], got.found[i]),
                    want[i],
                    "trial {trial} word {i} (d={d} s={s} m={m} w0={} eps={})",
                    cfg.w0,
                    cfg.epsilon
                );
            }
        }
    }

    fn make_thresholds(zeta: Vec<u32>, qualified: Vec<bool>) -> ThresholdVector {
        let found = qualified.clone();
        ThresholdVector {
            zeta,
            qualified,
            found,
        }
    }

    #[test]
    fn apply_thresholds_values() {
        // word 0: zeta=9 qualified; doc frequency 10/20 > 9/20 → sqrt(9)=3
        let corpus = Corpus::from_triples(
            2,
            2,
            [(0u32, 0u32, 10u32), (1, 0, 10), (0, 1, 4), (1, 1, 16)],
        )
        .unwrap();
        let t = make_thresholds(vec![9, 2], vec![true, false]);
        let cfg = config_with_m(1, 20);
        let bm = apply_thresholds(&corpus, &t, &cfg).unwrap();
        let col0: Vec<(u32, f64)> = bm.b.column(0).collect();
        assert_eq!(col0, vec![(0u32, 3.0)]);
        // unqualified word 1 stays zero everywhere; word 0 in doc 1 has
        // 4/20 < 9/20
        let col1: Vec<(u32, f64)> = bm.b.column(1).collect();
        assert!(col1.is_empty());
    }

    #[test]
    fn apply_thresholds_boundary_is_strict() {
        // frequency exactly zeta/m stays zero
        let corpus = Corpus::from_triples(1, 1, [(0u32, 0u32, 9u32)]).unwrap();
        // doc length 9, m = 18: frequency 9/9 = 1... use counts to land on
        // the grid: c=9, len=9, zeta=18, m=18: 9*18 == 18*9.
        let t = make_thresholds(vec![18], vec![true]);
        let cfg = config_with_m(1, 18);
        let bm = apply_thresholds(&corpus, &t, &cfg).unwrap();
        assert_eq!(bm.b.nnz(), 0);
    }

    #[test]
    fn b_rows_carry_sqrt_zeta() {
        let corpus = Corpus::from_triples(
            3,
            3,
            [
                (0u32, 0u32, 5u32),
                (1, 0, 1),
                (0, 1, 2),
                (1, 1, 4),
                (2, 2, 6),
            ],
        )
        .unwrap();
        let t = make_thresholds(vec![1, 2, 3], vec![true, true, true]);
        let cfg = config_with_m(1, 6);
        let bm = apply_thresholds(&corpus, &t, &cfg).unwrap();
        for j in 0..3 {
            for (w, v) in bm.b.column(j) {
                assert_eq!(v, (t.zeta[w as usize] as f64).sqrt());
            }
        }
    }

    fn planted_b(k: usize, per_cluster: usize) -> (ThresholdedMatrix, Vec<u32>) {
        // duplicate columns per cluster: cluster l lights up word l with
        // value sqrt(4)=2
        let d = k;
        let mut columns = Vec::new();
        let mut labels = Vec::new();
        for l in 0..k {
            for _ in 0..per_cluster {
                columns.push(vec![(l as u32, 2.0f64)]);
                labels.push(l as u32);
            }
        }
        let b = SparseMatrix::from_columns(d, &columns).unwrap();
        let t = make_thresholds(vec![4; d], vec![true; d]);
        (
            ThresholdedMatrix {
                b,
                thresholds: t,
            },
            labels,
        )
    }

    #[test]
    fn project_and_cluster_separated_duplicates() {
        let (bm, labels) = planted_b(3, 5);
        let mut cfg = config_with_m(3, 10);
        cfg.kmeans_restarts = 4;
        let clustering = project_and_cluster(&bm, &cfg).unwrap();
        // same label ⇒ same cluster, different label ⇒ different cluster
        for a in 0..labels.len() {
            for b in 0..labels.len() {
                assert_eq!(
                    labels[a] == labels[b],
                    clustering.assignment[a] == clustering.assignment[b]
                );
            }
        }
        assert!(clustering.cost < 1e-16);
    }

    #[test]
    fn project_and_cluster_k1() {
        let (bm, _) = planted_b(2, 3);
        let mut cfg = config_with_m(1, 10);
        cfg.k = 1;
        let clustering = project_and_cluster(&bm, &cfg).unwrap();
        assert!(clustering.assignment.iter().all(|&a| a == 0));
        // center = column mean
        let mut expect = vec![0.0f64; 2];
        for j in 0..bm.b.ncols() {
            for (r, v) in bm.b.column(j) {
                expect[r as usize] += v / bm.b.ncols() as f64;
            }
        }
        for (a, b) in clustering.centers[0].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_geometry_detected() {
        // all columns identical, k=2
        let columns: Vec<Vec<(u32, f64)>> = (0..4).map(|_| vec![(0u32, 2.0f64)]).collect();
        let b = SparseMatrix::from_columns(2, &columns).unwrap();
        let bm = ThresholdedMatrix {
            b,
            thresholds: make_thresholds(vec![4, 4], vec![true, true]),
        };
        let cfg = config_with_m(2, 10);
        assert!(matches!(
            project_and_cluster(&bm, &cfg),
            Err(TsvdError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn lloyds_on_b_hand_trace() {
        // 1-D columns {0,0,10,10}, init centers {1,9} → {0,10}, cost 0
        let columns = vec![
            Vec::new(),
            Vec::new(),
            vec![(0u32, 10.0f64)],
            vec![(0u32, 10.0f64)],
        ];
        let b = SparseMatrix::from_columns(1, &columns).unwrap();
        let bm = ThresholdedMatrix {
            b,
            thresholds: make_thresholds(vec![100], vec![true]),
        };
        let init = Clustering {
            assignment: vec![0, 0, 0, 0],
            centers: vec![vec![1.0], vec![9.0]],
            cost: f64::INFINITY,
        };
        let mut cfg = config_with_m(2, 100);
        cfg.k = 2;
        let out = lloyds_on_b(&bm, &init, &cfg).unwrap();
        assert_eq!(out.centers, vec![vec![0.0], vec![10.0]]);
        assert_eq!(out.assignment, vec![0, 0, 1, 1]);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn lloyds_fixed_point_unchanged() {
        let (bm, _) = planted_b(2, 3);
        let mut cfg = config_with_m(2, 10);
        cfg.k = 2;
        let init = Clustering {
            assignment: vec![0, 0, 0, 1, 1, 1],
            centers: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            cost: 0.0,
        };
        let out = lloyds_on_b(&bm, &init, &cfg).unwrap();
        assert_eq!(out.assignment, init.assignment);
        assert_eq!(out.centers, init.centers);
    }

    #[test]
    fn g_order_statistic_example() {
        // 6 docs in one cluster with word-0 frequencies
        // {0.5, 0.4, 0.3, 0.2, 0.1, 0}; r = 2 → 0.4
        let corpus = Corpus::from_triples(
            2,
            6,
            [
                (0u32, 0u32, 5u32),
                (1, 0, 5),
                (0, 1, 4),
                (1, 1, 6),
                (0, 2, 3),
                (1, 2, 7),
                (0, 3, 2),
                (1, 3, 8),
                (0, 4, 1),
                (1, 4, 9),
                (1, 5, 10),
            ],
        )
        .unwrap();
        let mut cfg = config_with_m(1, 10);
        cfg.epsilon0 = 1.0;
        cfg.w0 = 2.0 / 3.0; // r = floor(1 * 2/3 * 6 / 2) = 2
        let g = compute_g_for_assignment(&corpus, &[0, 0, 0, 0, 0, 0], &cfg).unwrap();
        assert_eq!(g[0][0], 0.4);
        // word 1 frequencies {0.5,0.6,0.7,0.8,0.9,1.0}: 2nd highest 0.9
        assert_eq!(g[0][1], 0.9);
    }

    #[test]
    fn g_absent_word_is_zero() {
        let corpus = Corpus::from_triples(2, 4, [(0u32, 0u32, 1u32), (0, 1, 1), (0, 2, 1), (0, 3, 1)])
            .unwrap();
        let mut cfg = config_with_m(1, 1);
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0; // r = 2
        let g = compute_g_for_assignment(&corpus, &[0, 0, 0, 0], &cfg).unwrap();
        assert_eq!(g[0][1], 0.0);
        assert_eq!(g[0][0], 1.0);
    }

    #[test]
    fn g_matches_sort_oracle() {
        use rand::Rng;
        let mut rng = stream_rng(77, 0);
        for _ in 0..20 {
            let d = rng.random_range(1..8);
            let s = rng.random_range(4..30);
            let k = rng.random_range(1..4usize);
            let mut triples = Vec::new();
            for j in 0..s as u32 {
                for i in 0..d as u32 {
                    if rng.random::<f64>() < 0.5 {
                        triples.push((i, j, rng.random_range(1..6u32)));
                    }
                }
            }
            let corpus = Corpus::from_triples(d, s, triples).unwrap();
            let assignment: Vec<u32> =
                (0..s).map(|_| rng.random_range(0..k) as u32).collect();
            let mut cfg = config_with_m(k, 6);
            cfg.epsilon0 = 1.0;
            cfg.w0 = 0.5;
            let r = order_statistic_rank(&cfg, s).unwrap();
            let g = compute_g_for_assignment(&corpus, &assignment, &cfg).unwrap();
            for l in 0..k {
                let docs: Vec<usize> =
                    (0..s).filter(|&j| assignment[j] == l as u32).collect();
                for i in 0..d {
                    let mut freqs: Vec<f64> = docs
                        .iter()
                        .map(|&j| {
                            let len = corpus.doc_length(j);
                            if len == 0 {
                                0.0
                            } else {
                                corpus.count(i as u32, j) as f64 / len as f64
                            }
                        })
                        .collect();
                    freqs.sort_by(|a, b| b.total_cmp(a));
                    let want = if docs.len() < r {
                        0.0
                    } else {
                        freqs[r - 1]
                    };
                    assert_eq!(g[l][i], want, "l={l} i={i}");
                }
            }
        }
    }

    #[test]
    fn catchword_ratio_test() {
        let mut cfg = config_with_m(2, 10);
        cfg.gamma = 1.1;
        cfg.catchword_cutoff_mode = CutoffMode::Off;
        // 0.5 > 1.1*0.4 → word to topic 0 only
        let g = vec![vec![0.5], vec![0.4]];
        let sets = identify_catchwords(&g, &cfg).unwrap();
        assert_eq!(sets, vec![vec![0], vec![]]);
        // equal positive g in both topics → neither set
        let g = vec![vec![0.4], vec![0.4]];
        let sets = identify_catchwords(&g, &cfg).unwrap();
        assert_eq!(sets, vec![Vec::<u32>::new(), Vec::new()]);
    }

    #[test]
    fn catchword_cutoff_arithmetic() {
        let cutoff = paper_catchword_cutoff(300, 0.05, 1.0 / 6.0, 1.0 / 20.0);
        assert!((cutoff - 41.5).abs() < 0.1, "cutoff = {cutoff}");
        // frequencies never exceed 1, so nothing can qualify
        let mut cfg = config_with_m(2, 300);
        cfg.epsilon = 1.0 / 6.0;
        cfg.w0 = 1.0 / 20.0;
        cfg.delta = 0.05;
        cfg.catchword_cutoff_mode = CutoffMode::PaperFormula;
        let g = vec![vec![1.0], vec![0.0]];
        let sets = identify_catchwords(&g, &cfg).unwrap();
        assert!(sets.iter().all(Vec::is_empty));
    }

    #[test]
    fn recover_single_doc_single_topic() {
        // one document, k=1: the recovered column is that document's
        // frequency vector
        let corpus = Corpus::from_triples(3, 1, [(0u32, 0u32, 3u32), (2, 0, 1)]).unwrap();
        let mut cfg = config_with_m(1, 4);
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0;
        let (m_hat, unrec) = recover_topics(&corpus, &[vec![0]], &cfg).unwrap();
        assert!(unrec.is_empty());
        assert_eq!(m_hat.column(0), &[0.75, 0.0, 0.25]);
    }

    #[test]
    fn recover_ranks_by_catchword_mass() {
        let corpus =
            Corpus::from_triples(3, 2, [(0u32, 0u32, 3u32), (2, 0, 1), (0, 1, 4)]).unwrap();
        let mut cfg = config_with_m(1, 4);
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0;
        // r = 1: top doc by word-0 frequency is doc 1 (freq 1.0)
        let (m_hat, _) = recover_topics(&corpus, &[vec![0]], &cfg).unwrap();
        assert_eq!(m_hat.column(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn recover_flags_empty_sets_and_fails_when_all_empty() {
        let corpus =
            Corpus::from_triples(2, 4, [(0u32, 0u32, 1u32), (0, 1, 1), (1, 2, 1), (1, 3, 1)])
                .unwrap();
        let mut cfg = config_with_m(2, 1);
        cfg.k = 2;
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0;
        let (m_hat, unrec) = recover_topics(&corpus, &[vec![0], vec![]], &cfg).unwrap();
        assert_eq!(unrec, vec![1]);
        assert_eq!(m_hat.column(1), &[0.5, 0.5]);
        assert!(matches!(
            recover_topics(&corpus, &[vec![], vec![]], &cfg),
            Err(TsvdError::RecoveryFailed)
        ));
    }

    #[test]
    fn recovered_columns_are_stochastic() {
        let corpus = Corpus::from_triples(
            3,
            4,
            [
                (0u32, 0u32, 3u32),
                (1, 0, 1),
                (0, 1, 2),
                (2, 1, 2),
                (1, 2, 4),
                (2, 3, 4),
            ],
        )
        .unwrap();
        let mut cfg = config_with_m(2, 4);
        cfg.k = 2;
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0;
        let (m_hat, _) = recover_topics(&corpus, &[vec![0], vec![2]], &cfg).unwrap();
        for l in 0..2 {
            let sum: f64 = m_hat.column(l).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(m_hat.column(l).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn rank_error_when_product_too_small() {
        let corpus = Corpus::from_triples(1, 2, [(0u32, 0u32, 1u32), (0, 1, 1)]).unwrap();
        let mut cfg = config_with_m(1, 1);
        cfg.epsilon0 = 0.01;
        cfg.w0 = 0.01;
        assert!(matches!(
            compute_g_for_assignment(&corpus, &[0, 0], &cfg),
            Err(TsvdError::Config(_))
        ));
    }

    #[test]
    fn gamma_helper_value() {
        let g = gamma_from_constraints(0.05, 0.3, 0.07);
        assert!((g - 0.9 / (1.05 * 0.37)).abs() < 1e-12);
    }
}
