//! Topic-matrix comparison and corpus-based topic quality metrics.
//!
//! Recovered topics come back in arbitrary order, so quantitative
//! comparison first aligns them to the reference by a minimum-L1-cost
//! bipartite matching; the reconstruction error is the matched L1 cost
//! averaged over topics. Topic coherence scores a topic by the log
//! co-document-frequency of its top words.

use std::io::Write;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::synth::TopicMatrix;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of aligning recovered topics to reference topics.
#[derive(Debug, Clone)]
pub struct MatchResult {
    /// `permutation[l]` is the recovered column matched to reference
    /// column `l`; a bijection on 0..k.
    pub permutation: Vec<usize>,
    /// Sum of the matched per-topic L1 distances.
    pub total_cost: f64,
    pub per_topic_l1: Vec<f64>,
}

/// Per-topic coherence scores over the top `d0` words of each topic.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<f64>,
    /// Mean and population standard deviation over topics with finite
    /// scores.
    pub mean: f64,
    pub stddev: f64,
    pub top_words: Vec<Vec<u32>>,
    /// Topics where some top word occurs in no document (score -inf).
    pub flagged: Vec<u32>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Neumaier-compensated sum: correctly rounded for the sums of matching
/// costs that arise here, so algebraically equal totals compare bitwise
/// equal no matter how the matching grouped them.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// O(n³) Hungarian algorithm (shortest augmenting paths with potentials)
/// on a square cost matrix. Returns the row→column assignment.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials; way[j] = previous column on the augmenting path
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row assigned to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Minimum-cost perfect matching, lexicographically smallest permutation
/// among the (compensated-sum) cost ties.
///
/// Row by row, every remaining column j is scored by the full-permutation
/// cost of taking j now and completing the rest optimally (Hungarian on
/// the residual matrix); the smallest column achieving the row's minimum
/// is locked. Compensated sums make algebraically tied candidates compare
/// exactly equal, so no tolerance is needed.
fn min_cost_matching(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    if k == 0 {
        return Vec::new();
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut used = vec![false; k];
    for i in 0..k {
        let mut best_j = usize::MAX;
        let mut best_total = f64::INFINITY;
        for j in 0..k {
            if used[j] {
                continue;
            }
            let rest_rows: Vec<usize> = (i + 1..k).collect();
            let rest_cols: Vec<usize> = (0..k).filter(|&c| !used[c] && c != j).collect();
            // entries of the completed permutation, in ascending row order
            let mut entries: Vec<f64> = chosen
                .iter()
                .enumerate()
                .map(|(r, &c)| cost[r][c])
                .collect();
            entries.push(cost[i][j]);
            if !rest_rows.is_empty() {
                let sub: Vec<Vec<f64>> = rest_rows
                    .iter()
                    .map(|&r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                    .collect();
                let tail = hungarian(&sub);
                for (r, &c) in tail.iter().enumerate() {
                    entries.push(sub[r][c]);
                }
            }
            let total = compensated_sum(entries);
            if total < best_total {
                best_total = total;
                best_j = j;
            }
        }
        chosen.push(best_j);
        used[best_j] = true;
    }
    chosen
}

/// Aligns recovered topic columns to reference columns by minimum total
/// L1 cost.
pub fn match_topics(
    reference: &TopicMatrix,
    recovered: &TopicMatrix,
) -> Result<MatchResult, EvalError> {
    if reference.num_words() != recovered.num_words()
        || reference.num_topics() != recovered.num_topics()
    {
        return Err(EvalError::Dimension(format!(
            "reference is {}x{}, recovered is {}x{}",
            reference.num_words(),
            reference.num_topics(),
            recovered.num_words(),
            recovered.num_topics()
        )));
    }
    let k = reference.num_topics();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| l1(reference.column(i), recovered.column(j)))
                .collect()
        })
        .collect();
    let permutation = min_cost_matching(&cost);
    let per_topic_l1: Vec<f64> = (0..k).map(|i| cost[i][permutation[i]]).collect();
    let total_cost = compensated_sum(per_topic_l1.iter().copied());
    Ok(MatchResult {
        permutation,
        total_cost,
        per_topic_l1,
    })
}

/// Δ(M, M̂): matched total L1 cost averaged over the k topics.
pub fn reconstruction_error(
    reference: &TopicMatrix,
    recovered: &TopicMatrix,
) -> Result<f64, EvalError> {
    let m = match_topics(reference, recovered)?;
    Ok(m.total_cost / reference.num_topics() as f64)
}

/// Topic coherence over the top `d0` words of each topic:
/// TC = Σ over word pairs of log((D(a,b)+e)/D(b)), where a is the
/// higher-ranked word of the pair, b the lower-ranked, D(w) the number of
/// documents containing w and D(a,b) the number containing both.
pub fn topic_coherence(
    corpus: &Corpus,
    topics: &TopicMatrix,
    d0: usize,
    e: f64,
) -> Result<CoherenceReport, EvalError> {
    if d0 < 2 {
        return Err(EvalError::Config(format!("d0={d0} must be at least 2")));
    }
    if d0 > topics.num_words() {
        return Err(EvalError::Config(format!(
            "d0={d0} exceeds vocabulary size {}",
            topics.num_words()
        )));
    }
    if corpus.num_words() != topics.num_words() {
        return Err(EvalError::Dimension(format!(
            "corpus has {} words, topic matrix has {}",
            corpus.num_words(),
            topics.num_words()
        )));
    }
    if !(e >= 0.0) {
        return Err(EvalError::Config(format!("e={e} must be nonnegative")));
    }
    let k = topics.num_topics();
    let d = topics.num_words();

    // top d0 words per topic, descending probability, ties to lower id
    let top_words: Vec<Vec<u32>> = (0..k)
        .map(|l| {
            let col = topics.column(l);
            let mut order: Vec<u32> = (0..d as u32).collect();
            order.sort_by(|&a, &b| {
                col[b as usize]
                    .total_cmp(&col[a as usize])
                    .then(a.cmp(&b))
            });
            order.truncate(d0);
            order
        })
        .collect();

    // document id lists for every needed word
    let mut needed: Vec<u32> = top_words.iter().flatten().copied().collect();
    needed.sort_unstable();
    needed.dedup();
    let mut doc_lists: std::collections::HashMap<u32, Vec<u32>> =
        needed.iter().map(|&w| (w, Vec::new())).collect();
    for j in 0..corpus.num_docs() {
        for &(w, _) in corpus.column(j) {
            if let Some(list) = doc_lists.get_mut(&w) {
                list.push(j as u32);
            }
        }
    }

    let co_count = |a: u32, b: u32| -> usize {
        let (la, lb) = (&doc_lists[&a], &doc_lists[&b]);
        let (mut x, mut y, mut n) = (0usize, 0usize, 0usize);
        while x < la.len() && y < lb.len() {
            match la[x].cmp(&lb[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        n
    };

    let mut per_topic = Vec::with_capacity(k);
    let mut flagged = Vec::new();
    for (l, words) in top_words.iter().enumerate() {
        let mut tc = 0.0f64;
        let mut bad = false;
        for hi in 0..words.len() {
            for lo in (hi + 1)..words.len() {
                let a = words[hi];
                let b = words[lo];
                let d_b = doc_lists[&b].len();
                if d_b == 0 {
                    bad = true;
                    continue;
                }
                let d_ab = co_count(a, b);
                tc += ((d_ab as f64 + e) / d_b as f64).ln();
            }
        }
        if bad {
            flagged.push(l as u32);
            per_topic.push(f64::NEG_INFINITY);
        } else {
            per_topic.push(tc);
        }
    }

    let finite: Vec<f64> = per_topic.iter().copied().filter(|x| x.is_finite()).collect();
    let (mean, stddev) = if finite.is_empty() {
        (f64::NEG_INFINITY, 0.0)
    } else {
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        let var =
            finite.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / finite.len() as f64;
        (mean, var.sqrt())
    };
    Ok(CoherenceReport {
        per_topic,
        mean,
        stddev,
        top_words,
        flagged,
    })
}

/// Equal-width histogram of the matched per-topic L1 errors over
/// [0, max error].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorHistogram {
    pub bin_low: Vec<f64>,
    pub bin_high: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn per_topic_error_histogram(match_result: &MatchResult, num_bins: usize) -> ErrorHistogram {
    let n = num_bins.max(1);
    let max = match_result
        .per_topic_l1
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let width = max / n as f64;
    let mut counts = vec![0usize; n];
    for &v in &match_result.per_topic_l1 {
        let idx = if width > 0.0 {
            ((v / width) as usize).min(n - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let bin_low = (0..n).map(|i| i as f64 * width).collect();
    let bin_high = (1..=n).map(|i| i as f64 * width).collect();
    ErrorHistogram {
        bin_low,
        bin_high,
        counts,
    }
}

impl ErrorHistogram {
    /// Plot-ready TSV: bin_low, bin_high, count.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), EvalError> {
        writeln!(w, "#bin_low\tbin_high\tcount")?;
        for i in 0..self.counts.len() {
            writeln!(w, "{}\t{}\t{}", self.bin_low[i], self.bin_high[i], self.counts[i])?;
        }
        Ok(())
    }
}
