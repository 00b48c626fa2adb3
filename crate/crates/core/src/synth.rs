//! Synthetic dominant-admixture corpora with planted catchwords, plus
//! checkers that measure how well a labeled corpus satisfies the model
//! assumptions (dominant topics, near-pure documents, catchwords,
//! no-local-minimum count profiles).

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::stream_rng;
use crate::tsvd::{self, TsvdConfig, TsvdError};

/// Stream id reserved for topic-matrix sampling; documents use streams
/// `0..s` (see `stream_rng`).
pub const STREAM_TOPIC_MATRIX: u64 = u64::MAX;

const MAX_REJECTION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config error: {0}")]
    Config(String),
    #[error("weight constraints too tight: {0}")]
    InfeasibleWeights(String),
    #[error("all documents must have the same length for count profiles (doc {doc} has length {len}, expected {expected})")]
    FixedLengthRequired { doc: usize, len: u64, expected: u64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tsvd(#[from] TsvdError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// d×k column-stochastic topic matrix: column `l` is the word distribution
/// of topic `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatrix {
    d: usize,
    columns: Vec<Vec<f64>>,
}

impl TopicMatrix {
    /// Validates that every column is a probability vector over `d` words
    /// (entries ≥ 0, sum within 1e-9 of 1).
    pub fn new(d: usize, columns: Vec<Vec<f64>>) -> Result<Self, SynthError> {
        for (l, col) in columns.iter().enumerate() {
            if col.len() != d {
                return Err(SynthError::Config(format!(
                    "topic {l} has {} entries, expected {d}",
                    col.len()
                )));
            }
            let mut sum = 0.0;
            for &x in col {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(SynthError::Config(format!(
                        "topic {l} has a negative or non-finite entry"
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SynthError::Config(format!(
                    "topic {l} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { d, columns })
    }

    pub fn num_words(&self) -> usize {
        self.d
    }

    pub fn num_topics(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, l: usize) -> &[f64] {
        &self.columns[l]
    }

    pub fn get(&self, word: usize, topic: usize) -> f64 {
        self.columns[topic][word]
    }

    /// TSV format: header `#topics k=<k> d=<d>`, then one row per word with
    /// k tab-separated probabilities.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), SynthError> {
        writeln!(w, "#topics k={} d={}", self.num_topics(), self.d)?;
        for i in 0..self.d {
            let mut line = String::new();
            for l in 0..self.num_topics() {
                if l > 0 {
                    line.push('\t');
                }
                line.push_str(&format!("{}", self.columns[l][i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, SynthError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(SynthError::Parse {
                line: 1,
                msg: "empty topic matrix file".into(),
            })??;
        let (k, d) = parse_topics_header(&header).ok_or(SynthError::Parse {
            line: 1,
            msg: format!("bad header {header:?}, expected '#topics k=<k> d=<d>'"),
        })?;
        let mut columns = vec![vec![0.0f64; d]; k];
        let mut row = 0usize;
        for (line_no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if row >= d {
                return Err(SynthError::Parse {
                    line: line_no + 2,
                    msg: format!("more than {d} rows"),
                });
            }
            let mut fields = 0usize;
            for (l, f) in line.split('\t').enumerate() {
                if l >= k {
                    return Err(SynthError::Parse {
                        line: line_no + 2,
                        msg: format!("more than {k} columns"),
                    });
                }
                columns[l][row] = f.trim().parse().map_err(|_| SynthError::Parse {
                    line: line_no + 2,
                    msg: format!("bad float {f:?}"),
                })?;
                fields += 1;
            }
            if fields != k {
                return Err(SynthError::Parse {
                    line: line_no + 2,
                    msg: format!("expected {k} columns, found {fields}"),
                });
            }
            row += 1;
        }
        if row != d {
            return Err(SynthError::Parse {
                line: row + 1,
                msg: format!("expected {d} rows, found {row}"),
            });
        }
        Self::new(d, columns)
    }
}

fn parse_topics_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix("#topics")?.trim();
    let mut k = None;
    let mut d = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("k=") {
            k = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("d=") {
            d = v.parse().ok();
        }
    }
    Some((k?, d?))
}

/// How per-document topic weights are drawn.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// One topic gets weight ≥ alpha, every other stays ≤ beta; a document
    /// is near-pure (dominant weight ≥ 1−delta) with probability epsilon0.
    Dominant,
    /// Symmetric Dirichlet draw; no dominance guarantees.
    Dirichlet { concentration: f64 },
}

/// Generator parameters for the planted dominant-admixture model.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GenConfig {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    /// Words per document (all documents have exactly this length).
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub rho: f64,
    /// Total topic mass planted on each topic's catchwords.
    pub p0: f64,
    /// Probability that a document is near-pure.
    pub epsilon0: f64,
    /// Minimum dominant-topic probability (uniform topics give 1/k).
    pub w0: f64,
    pub catchwords_per_topic: usize,
    pub weight_mode: WeightMode,
    /// Dominant-topic distribution; `None` means uniform.
    pub topic_probs: Option<Vec<f64>>,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(d: usize, k: usize, s: usize, m: usize) -> Self {
        Self {
            d,
            k,
            s,
            m,
            alpha: 0.4,
            beta: 0.3,
            delta: 0.05,
            rho: 0.07,
            p0: 0.2,
            epsilon0: 1.0 / 3.0,
            w0: 1.0 / k as f64,
            catchwords_per_topic: 10,
            weight_mode: WeightMode::Dominant,
            topic_probs: None,
            seed: 0,
        }
    }

    /// Hard validation plus regime warnings. Parameter-inequality
    /// violations (β+ρ ≤ (1−δ)α, α+2δ ≤ 0.5, δ ≤ 0.08) come back as
    /// warnings so callers may explore outside the guaranteed regime.
    pub fn validate(&self) -> Result<Vec<String>, SynthError> {
        if self.d == 0 || self.k == 0 || self.s == 0 || self.m == 0 {
            return Err(SynthError::Config(
                "d, k, s, m must all be positive".into(),
            ));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("rho", self.rho),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::Config(format!("{name}={v} not in [0,1]")));
            }
        }
        if self.catchwords_per_topic > 0 && !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(SynthError::Config(format!("p0={} not in (0,1]", self.p0)));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(SynthError::Config(format!(
                "epsilon0={} not in [0,1]",
                self.epsilon0
            )));
        }
        if !(self.w0 > 0.0 && self.w0 <= 1.0) {
            return Err(SynthError::Config(format!("w0={} not in (0,1]", self.w0)));
        }
        if self.catchwords_per_topic * self.k > self.d {
            return Err(SynthError::Config(format!(
                "{} catchwords per topic with k={} exceeds d={}",
                self.catchwords_per_topic, self.k, self.d
            )));
        }
        if let WeightMode::Dirichlet { concentration } = self.weight_mode {
            if !(concentration > 0.0) {
                return Err(SynthError::Config(format!(
                    "dirichlet concentration {concentration} must be positive"
                )));
            }
        }
        if let Some(probs) = &self.topic_probs {
            if probs.len() != self.k {
                return Err(SynthError::Config(format!(
                    "topic_probs has {} entries, expected k={}",
                    probs.len(),
                    self.k
                )));
            }
            if probs.iter().any(|&p| !(p >= 0.0)) || probs.iter().sum::<f64>() <= 0.0 {
                return Err(SynthError::Config(
                    "topic_probs must be nonnegative with positive sum".into(),
                ));
            }
        }
        let mut warnings = Vec::new();
        if self.beta + self.rho > (1.0 - self.delta) * self.alpha {
            warnings.push(format!(
                "beta+rho = {} exceeds (1-delta)*alpha = {}",
                self.beta + self.rho,
                (1.0 - self.delta) * self.alpha
            ));
        }
        if self.alpha + 2.0 * self.delta > 0.5 {
            warnings.push(format!(
                "alpha+2*delta = {} exceeds 0.5",
                self.alpha + 2.0 * self.delta
            ));
        }
        if self.delta > 0.08 {
            warnings.push(format!("delta = {} exceeds 0.08", self.delta));
        }
        Ok(warnings)
    }
}

/// Latent variables recorded by the generator.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `s` columns of `k` topic weights, each on the simplex.
    pub weights: Vec<Vec<f64>>,
    /// Dominant topic per document (`argmax` of the weight column).
    pub dominant_label: Vec<u32>,
    /// k pairwise-disjoint planted catchword sets (empty when the topic
    /// matrix was supplied externally).
    pub planted_catchwords: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn num_docs(&self) -> usize {
        self.weights.len()
    }

    pub fn num_topics(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// TSV: one row per document: doc_id, dominant_label, then the k topic
    /// weights. A `#`-prefixed header names the columns.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), SynthError> {
        let k = self.num_topics();
        let mut header = String::from("#doc_id\tdominant_label");
        for l in 0..k {
            header.push_str(&format!("\tw{l}"));
        }
        writeln!(w, "{header}")?;
        for (j, col) in self.weights.iter().enumerate() {
            let mut line = format!("{j}\t{}", self.dominant_label[j]);
            for &x in col {
                line.push_str(&format!("\t{x}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a ground-truth TSV. Planted catchwords are not part of the
    /// file; the returned sets are empty.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, SynthError> {
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        let mut k: Option<usize> = None;
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split('\t').collect();
            if fields.len() < 3 {
                return Err(SynthError::Parse {
                    line: line_no + 1,
                    msg: "expected doc_id, dominant_label and at least one weight".into(),
                });
            }
            let this_k = fields.len() - 2;
            if *k.get_or_insert(this_k) != this_k {
                return Err(SynthError::Parse {
                    line: line_no + 1,
                    msg: "inconsistent column count".into(),
                });
            }
            let doc: usize = fields[0].parse().map_err(|_| SynthError::Parse {
                line: line_no + 1,
                msg: format!("bad doc id {:?}", fields[0]),
            })?;
            if doc != weights.len() {
                return Err(SynthError::Parse {
                    line: line_no + 1,
                    msg: format!("doc ids must be dense and ordered, got {doc}"),
                });
            }
            let label: u32 = fields[1].parse().map_err(|_| SynthError::Parse {
                line: line_no + 1,
                msg: format!("bad label {:?}", fields[1]),
            })?;
            let mut col = Vec::with_capacity(this_k);
            for f in &fields[2..] {
                col.push(f.parse::<f64>().map_err(|_| SynthError::Parse {
                    line: line_no + 1,
                    msg: format!("bad weight {f:?}"),
                })?);
            }
            labels.push(label);
            weights.push(col);
        }
        let k = k.unwrap_or(0);
        Ok(Self {
            weights,
            dominant_label: labels,
            planted_catchwords: vec![Vec::new(); k],
        })
    }
}

pub fn write_catchwords_json<W: Write>(sets: &[Vec<u32>], w: W) -> Result<(), SynthError> {
    serde_json::to_writer(w, sets).map_err(|e| SynthError::Config(e.to_string()))
}

pub fn read_catchwords_json<R: std::io::Read>(r: R) -> Result<Vec<Vec<u32>>, SynthError> {
    serde_json::from_reader(r).map_err(|e| SynthError::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

/// Histogram of a word's per-document counts within one topic's documents:
/// `q[c] = |{j ∈ T_l : count(word, j) = c}| / s` for `c` in `0..=m`.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    pub word: u32,
    pub topic: u32,
    pub q: Vec<f64>,
}

/// Samples a topic matrix with planted catchwords.
///
/// Topic `l` reserves `catchwords_per_topic` word ids (block `l`), gives
/// them total mass `p0` uniformly, and gives every other topic's reserved
/// words mass at most `rho` times their owner's per-word mass. The
/// remaining mass goes to the unreserved words by a flat Dirichlet draw.
pub fn sample_topic_matrix<R: Rng>(
    config: &GenConfig,
    rng: &mut R,
) -> Result<(TopicMatrix, Vec<Vec<u32>>), SynthError> {
    config.validate()?;
    let d = config.d;
    let k = config.k;
    let cpt = config.catchwords_per_topic;
    let reserved = cpt * k;
    let sets: Vec<Vec<u32>> = (0..k)
        .map(|l| ((l * cpt) as u32..((l + 1) * cpt) as u32).collect())
        .collect();

    let mut columns = Vec::with_capacity(k);
    for l in 0..k {
        let mut col = vec![0.0f64; d];
        let own_mass = if cpt > 0 { config.p0 / cpt as f64 } else { 0.0 };
        for &i in &sets[l] {
            col[i as usize] = own_mass;
        }
        let mut foreign = 0.0;
        for (l2, set) in sets.iter().enumerate() {
            if l2 == l {
                continue;
            }
            for &i in set {
                let mass = rng.random::<f64>() * config.rho * own_mass;
                col[i as usize] = mass;
                foreign += mass;
            }
        }
        let planted_mass = if cpt > 0 { config.p0 } else { 0.0 };
        let remainder = 1.0 - planted_mass - foreign;
        if d > reserved {
            if remainder <= 0.0 {
                return Err(SynthError::Config(format!(
                    "catchword mass {} leaves no probability for other words",
                    planted_mass + foreign
                )));
            }
            // Flat Dirichlet over the unreserved words via normalized
            // exponentials.
            let mut draws = Vec::with_capacity(d - reserved);
            let mut sum = 0.0;
            for _ in reserved..d {
                let e = -(1.0 - rng.random::<f64>()).ln();
                draws.push(e);
                sum += e;
            }
            if sum <= 0.0 {
                let flat = 1.0 / draws.len() as f64;
                draws.iter_mut().for_each(|x| *x = flat);
                sum = 1.0;
            }
            for (i, e) in (reserved..d).zip(draws) {
                col[i] = remainder * e / sum;
            }
        }
        let total: f64 = col.iter().sum();
        if total <= 0.0 {
            return Err(SynthError::Config("topic column has zero mass".into()));
        }
        col.iter_mut().for_each(|x| *x /= total);
        columns.push(col);
    }
    Ok((TopicMatrix::new(d, columns)?, sets))
}

/// Draws one topic-weight column according to the configured mode.
pub fn sample_weight_column<R: Rng>(
    config: &GenConfig,
    rng: &mut R,
) -> Result<Vec<f64>, SynthError> {
    sample_weights_labeled(config, rng).map(|(w, _)| w)
}

/// Like [`sample_weight_column`] but also returns the dominant topic.
pub(crate) fn sample_weights_labeled<R: Rng>(
    config: &GenConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, u32), SynthError> {
    let k = config.k;
    match config.weight_mode {
        WeightMode::Dirichlet { concentration } => {
            let gamma = Gamma::new(concentration, 1.0)
                .map_err(|e| SynthError::Config(format!("gamma: {e}")))?;
            for _ in 0..MAX_REJECTION_ATTEMPTS {
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
                let sum: f64 = draws.iter().sum();
                if sum > 0.0 && sum.is_finite() {
                    let w: Vec<f64> = draws.iter().map(|&x| x / sum).collect();
                    let label = argmax(&w);
                    return Ok((w, label));
                }
            }
            Err(SynthError::InfeasibleWeights(
                "dirichlet draws kept underflowing to zero".into(),
            ))
        }
        WeightMode::Dominant => {
            if k == 1 {
                return Ok((vec![1.0], 0));
            }
            if (k - 1) as f64 * config.beta < 1.0 - config.alpha {
                return Err(SynthError::InfeasibleWeights(format!(
                    "beta*(k-1) = {} cannot absorb 1-alpha = {}",
                    config.beta * (k - 1) as f64,
                    1.0 - config.alpha
                )));
            }
            let dominant = match &config.topic_probs {
                None => rng.random_range(0..k),
                Some(probs) => {
                    let dist = rand::distr::weighted::WeightedIndex::new(probs)
                        .map_err(|e| SynthError::Config(format!("topic_probs: {e}")))?;
                    dist.sample(rng)
                }
            };
            let pure = rng.random::<f64>() < config.epsilon0;
            let w_dom = if pure {
                let lo = config.alpha.max(1.0 - config.delta);
                lo + (1.0 - lo) * rng.random::<f64>()
            } else {
                config.alpha + (1.0 - config.alpha) * rng.random::<f64>()
            };
            let rem = 1.0 - w_dom;
            // Split the remainder over the other k-1 topics by a flat
            // Dirichlet, conditioned (by rejection) on every share staying
            // ≤ beta and strictly below the dominant weight.
            for _ in 0..MAX_REJECTION_ATTEMPTS {
                let mut draws = Vec::with_capacity(k - 1);
                let mut sum = 0.0;
                for _ in 0..k - 1 {
                    let e = -(1.0 - rng.random::<f64>()).ln();
                    draws.push(e);
                    sum += e;
                }
                if sum <= 0.0 {
                    continue;
                }
                let shares: Vec<f64> = draws.iter().map(|&e| rem * e / sum).collect();
                if shares
                    .iter()
                    .all(|&x| x <= config.beta && x < w_dom)
                {
                    let mut w = Vec::with_capacity(k);
                    let mut it = shares.into_iter();
                    for l in 0..k {
                        if l == dominant {
                            w.push(w_dom);
                        } else {
                            w.push(it.next().unwrap());
                        }
                    }
                    return Ok((w, dominant as u32));
                }
            }
            Err(SynthError::InfeasibleWeights(format!(
                "no remainder split with shares <= beta={} found in {MAX_REJECTION_ATTEMPTS} attempts",
                config.beta
            )))
        }
    }
}

fn argmax(w: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &x) in w.iter().enumerate() {
        if x > w[best] {
            best = i;
        }
    }
    best as u32
}

/// Generates a corpus of `s` documents of exactly `m` words each: per
/// document, draw topic weights, mix the topic columns, then draw `m`
/// i.i.d. words. Documents use independent seed-derived RNG streams
/// (stream id = document index), so output is identical for any thread
/// count.
pub fn generate_corpus(
    topics: &TopicMatrix,
    config: &GenConfig,
    planted_catchwords: Vec<Vec<u32>>,
) -> Result<(Corpus, GroundTruth), SynthError> {
    config.validate()?;
    if topics.num_words() != config.d || topics.num_topics() != config.k {
        return Err(SynthError::Config(format!(
            "topic matrix is {}x{}, config wants {}x{}",
            topics.num_words(),
            topics.num_topics(),
            config.d,
            config.k
        )));
    }
    let d = config.d;
    let per_doc: Result<Vec<(Vec<(u32, u32)>, Vec<f64>, u32)>, SynthError> = (0..config.s)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(config.seed, j as u64);
            let (weights, label) = sample_weights_labeled(config, &mut rng)?;
            let mut cdf = Vec::with_capacity(d);
            let mut acc = 0.0;
            for i in 0..d {
                let mut p = 0.0;
                for (l, &wl) in weights.iter().enumerate() {
                    p += topics.get(i, l) * wl;
                }
                acc += p;
                cdf.push(acc);
            }
            let total = acc;
            if !(total > 0.0) {
                return Err(SynthError::Config(
                    "document distribution has zero mass".into(),
                ));
            }
            let mut counts = vec![0u32; d];
            for _ in 0..config.m {
                let u = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(d - 1);
                counts[idx] += 1;
            }
            let col: Vec<(u32, u32)> = counts
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(i, c)| (i as u32, c))
                .collect();
            Ok((col, weights, label))
        })
        .collect();
    let per_doc = per_doc?;

    let mut columns = Vec::with_capacity(config.s);
    let mut weights = Vec::with_capacity(config.s);
    let mut labels = Vec::with_capacity(config.s);
    for (col, w, label) in per_doc {
        columns.push(col);
        weights.push(w);
        labels.push(label);
    }
    let corpus = Corpus::from_columns(d, columns);
    let truth = GroundTruth {
        weights,
        dominant_label: labels,
        planted_catchwords,
    };
    Ok((corpus, truth))
}

/// Fraction of documents whose largest weight is ≥ alpha and whose
/// second-largest is ≤ beta.
pub fn check_dominant_fraction(truth: &GroundTruth, alpha: f64, beta: f64) -> f64 {
    if truth.weights.is_empty() {
        return 0.0;
    }
    let hits = truth
        .weights
        .iter()
        .filter(|col| {
            let mut max = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for &x in col.iter() {
                if x > max {
                    second = max;
                    max = x;
                } else if x > second {
                    second = x;
                }
            }
            if !second.is_finite() {
                second = 0.0;
            }
            max >= alpha && second <= beta
        })
        .count();
    hits as f64 / truth.weights.len() as f64
}

/// Fraction of documents whose largest weight is ≥ 1−delta.
pub fn check_pure_fraction(truth: &GroundTruth, delta: f64) -> f64 {
    if truth.weights.is_empty() {
        return 0.0;
    }
    let hits = truth
        .weights
        .iter()
        .filter(|col| col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= 1.0 - delta)
        .count();
    hits as f64 / truth.weights.len() as f64
}

/// Exact count histogram `q[c] = |{j ∈ T_l : count(word, j) = c}| / s`.
/// Requires every document to have length exactly `m`.
pub fn empirical_frequency_profile(
    corpus: &Corpus,
    labels: &[u32],
    word: u32,
    topic: u32,
    m: usize,
) -> Result<FrequencyProfile, SynthError> {
    if labels.len() != corpus.num_docs() {
        return Err(SynthError::Config(format!(
            "{} labels for {} documents",
            labels.len(),
            corpus.num_docs()
        )));
    }
    if (word as usize) >= corpus.num_words() {
        return Err(SynthError::Config(format!(
            "word {word} out of range (d={})",
            corpus.num_words()
        )));
    }
    for (j, &len) in corpus.doc_lengths().iter().enumerate() {
        if len != m as u64 {
            return Err(SynthError::FixedLengthRequired {
                doc: j,
                len,
                expected: m as u64,
            });
        }
    }
    let s = corpus.num_docs();
    let mut q = vec![0.0f64; m + 1];
    for j in 0..s {
        if labels[j] == topic {
            let c = corpus.count(word, j) as usize;
            q[c] += 1.0;
        }
    }
    q.iter_mut().for_each(|x| *x /= s as f64);
    Ok(FrequencyProfile { word, topic, q })
}

/// Interior indices where the (optionally smoothed) profile has a strict
/// local minimum: `q[z] < min(q[z-1], q[z+1])`. An empty result means the
/// no-local-minimum assumption holds empirically. `smoothing_window` is a
/// centered moving-average width; 1 means no smoothing, even widths round
/// down to the next odd width.
pub fn check_no_local_min(q: &[f64], smoothing_window: usize) -> Vec<usize> {
    let smoothed: Vec<f64> = if smoothing_window <= 1 {
        q.to_vec()
    } else {
        let half = smoothing_window / 2;
        (0..q.len())
            .map(|t| {
                let lo = t.saturating_sub(half);
                let hi = (t + half).min(q.len() - 1);
                q[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()
    };
    let mut out = Vec::new();
    for z in 1..smoothed.len().saturating_sub(1) {
        if smoothed[z] < smoothed[z - 1].min(smoothed[z + 1]) {
            out.push(z);
        }
    }
    out
}

/// Catchword sets recovered from a labeled partition, plus the mean
/// per-topic catchword frequency.
#[derive(Debug, Clone)]
pub struct ReferenceCatchwords {
    pub sets: Vec<Vec<u32>>,
    /// (1/k) Σ_l (1/|T_l|) Σ_{i ∈ S_l} Σ_{j ∈ T_l} count(i,j)/len(j).
    pub mean_frequency: f64,
    /// Topics whose document cluster is empty.
    pub empty_clusters: Vec<u32>,
}

/// Runs the catchword-identification stage on a label-induced partition
/// instead of a learned clustering: order statistics `g(i,l)` over each
/// labeled group followed by the ratio test.
pub fn find_catchwords_reference(
    corpus: &Corpus,
    labels: &[u32],
    config: &TsvdConfig,
) -> Result<ReferenceCatchwords, SynthError> {
    if labels.len() != corpus.num_docs() {
        return Err(SynthError::Config(format!(
            "{} labels for {} documents",
            labels.len(),
            corpus.num_docs()
        )));
    }
    let k = config.k;
    if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= k) {
        return Err(SynthError::Config(format!(
            "label {bad} out of range (k={k})"
        )));
    }
    let g = tsvd::compute_g_for_assignment(corpus, labels, config)?;
    let sets = tsvd::identify_catchwords(&g, config)?;

    let mut cluster_sizes = vec![0usize; k];
    for &l in labels {
        cluster_sizes[l as usize] += 1;
    }
    let empty_clusters: Vec<u32> = (0..k as u32)
        .filter(|&l| cluster_sizes[l as usize] == 0)
        .collect();

    // Mean per-topic catchword frequency over the labeled groups.
    let mut in_set = vec![u32::MAX; corpus.num_words()];
    for (l, set) in sets.iter().enumerate() {
        for &i in set {
            in_set[i as usize] = l as u32;
        }
    }
    let mut per_topic = vec![0.0f64; k];
    for j in 0..corpus.num_docs() {
        let l = labels[j] as usize;
        let len = corpus.doc_length(j);
        if len == 0 {
            continue;
        }
        for &(w, c) in corpus.column(j) {
            if in_set[w as usize] == labels[j] {
                per_topic[l] += c as f64 / len as f64;
            }
        }
    }
    let mut mean = 0.0;
    for l in 0..k {
        if cluster_sizes[l] > 0 {
            mean += per_topic[l] / cluster_sizes[l] as f64;
        }
    }
    mean /= k as f64;

    Ok(ReferenceCatchwords {
        sets,
        mean_frequency: mean,
        empty_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsvd::{CutoffMode, FloorMode};

    fn small_config() -> GenConfig {
        let mut c = GenConfig::new(40, 3, 200, 30);
        c.alpha = 0.8;
        c.beta = 0.1;
        c.delta = 0.05;
        c.rho = 0.05;
        c.p0 = 0.3;
        c.catchwords_per_topic = 3;
        c.seed = 11;
        c
    }

    #[test]
    fn topic_matrix_rho_zero_plants_exact_zeros() {
        let mut c = GenConfig::new(4, 2, 10, 5);
        c.catchwords_per_topic = 1;
        c.p0 = 0.5;
        c.rho = 0.0;
        let mut rng = stream_rng(1, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        assert_eq!(sets, vec![vec![0], vec![1]]);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn topic_matrix_columns_are_stochastic() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, _) = sample_topic_matrix(&c, &mut rng).unwrap();
        for l in 0..c.k {
            let sum: f64 = m.column(l).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(m.column(l).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn planted_catchwords_detectable_and_ratio_bounded() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        for (l, set) in sets.iter().enumerate() {
            for &i in set {
                for l2 in 0..c.k {
                    if l2 != l {
                        assert!(m.get(i as usize, l) > m.get(i as usize, l2));
                        assert!(m.get(i as usize, l2) <= c.rho * m.get(i as usize, l) + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn weights_single_topic() {
        let mut c = small_config();
        c.k = 1;
        c.catchwords_per_topic = 1;
        let mut rng = stream_rng(0, 0);
        assert_eq!(sample_weight_column(&c, &mut rng).unwrap(), vec![1.0]);
    }

    #[test]
    fn dominant_weights_respect_alpha_beta() {
        let c = small_config();
        let mut rng = stream_rng(5, 0);
        for _ in 0..500 {
            let w = sample_weight_column(&c, &mut rng).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(max >= c.alpha);
            let others = w.iter().filter(|&&x| x != max).count();
            assert_eq!(others, c.k - 1);
            for &x in &w {
                if x != max {
                    assert!(x <= c.beta + 1e-15);
                }
            }
        }
    }

    #[test]
    fn dirichlet_weights_on_simplex() {
        let mut c = GenConfig::new(60, 50, 10, 5);
        c.catchwords_per_topic = 1;
        c.weight_mode = WeightMode::Dirichlet {
            concentration: 0.01,
        };
        let mut rng = stream_rng(9, 0);
        for _ in 0..50 {
            let w = sample_weight_column(&c, &mut rng).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn infeasible_dominant_config_is_reported() {
        let mut c = small_config();
        // k=3: beta*(k-1) = 0.02 < 1-alpha = 0.2
        c.beta = 0.01;
        let mut rng = stream_rng(0, 0);
        assert!(matches!(
            sample_weight_column(&c, &mut rng),
            Err(SynthError::InfeasibleWeights(_))
        ));
    }

    #[test]
    fn degenerate_single_word_documents() {
        let mut c = GenConfig::new(5, 1, 6, 10);
        c.catchwords_per_topic = 0;
        c.seed = 3;
        let m = TopicMatrix::new(
            5,
            vec![vec![0.0, 0.0, 0.0, 1.0, 0.0]],
        )
        .unwrap();
        let (corpus, truth) = generate_corpus(&m, &c, vec![Vec::new()]).unwrap();
        for j in 0..corpus.num_docs() {
            assert_eq!(corpus.count(3, j), 10);
            assert_eq!(corpus.doc_length(j), 10);
        }
        assert_eq!(truth.dominant_label, vec![0; 6]);
    }

    #[test]
    fn corpus_frequencies_converge_to_mixture_mean() {
        // With symmetric generation E[W] is uniform, so corpus-wide word
        // frequencies converge to the topic-matrix row means.
        let mut c = GenConfig::new(50, 4, 10_000, 50);
        c.alpha = 0.6;
        c.beta = 0.3;
        c.p0 = 0.2;
        c.catchwords_per_topic = 4;
        c.rho = 0.1;
        c.seed = 17;
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (corpus, _) = generate_corpus(&m, &c, sets).unwrap();
        let totals = corpus.word_totals();
        let total_words: u64 = totals.iter().sum();
        for i in 0..c.d {
            let expected: f64 =
                (0..c.k).map(|l| m.get(i, l)).sum::<f64>() / c.k as f64;
            let observed = totals[i] as f64 / total_words as f64;
            assert!(
                (observed - expected).abs() < 0.01,
                "word {i}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn generated_lengths_equal_m() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (corpus, _) = generate_corpus(&m, &c, sets).unwrap();
        assert!(corpus.doc_lengths().iter().all(|&l| l == c.m as u64));
    }

    #[test]
    fn generation_deterministic() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (c1, t1) = generate_corpus(&m, &c, sets.clone()).unwrap();
        let (c2, t2) = generate_corpus(&m, &c, sets).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(t1.weights, t2.weights);
    }

    #[test]
    fn dominant_fraction_cases() {
        let pure = GroundTruth {
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            dominant_label: vec![0, 1],
            planted_catchwords: vec![vec![], vec![]],
        };
        assert_eq!(check_dominant_fraction(&pure, 0.9, 0.0), 1.0);

        let tied = GroundTruth {
            weights: vec![vec![0.5, 0.5]],
            dominant_label: vec![0],
            planted_catchwords: vec![vec![], vec![]],
        };
        assert_eq!(check_dominant_fraction(&tied, 0.4, 0.3), 0.0);
    }

    #[test]
    fn generated_dominant_fraction_is_one() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (_, truth) = generate_corpus(&m, &c, sets).unwrap();
        assert_eq!(check_dominant_fraction(&truth, c.alpha, c.beta), 1.0);
    }

    #[test]
    fn pure_fraction_cases() {
        let t = GroundTruth {
            weights: vec![vec![0.96, 0.04], vec![0.9, 0.1]],
            dominant_label: vec![0, 0],
            planted_catchwords: vec![vec![], vec![]],
        };
        assert_eq!(check_pure_fraction(&t, 0.05), 0.5);
        assert_eq!(check_pure_fraction(&t, 0.2), 1.0);
    }

    #[test]
    fn generated_pure_fraction_concentrates() {
        let mut c = small_config();
        c.s = 4000;
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (_, truth) = generate_corpus(&m, &c, sets).unwrap();
        let frac = check_pure_fraction(&truth, c.delta);
        let bound = c.epsilon0 * (1.0 - 3.0 / (c.epsilon0 * c.s as f64).sqrt());
        assert!(frac >= bound, "fraction {frac} below binomial bound {bound}");
    }

    #[test]
    fn profile_absent_word() {
        let corpus = Corpus::from_triples(3, 2, [(0u32, 0u32, 4u32), (1, 1, 4)]).unwrap();
        let p = empirical_frequency_profile(&corpus, &[0, 0], 2, 0, 4).unwrap();
        assert_eq!(p.q[0], 1.0); // both docs in T_0, word 2 absent
        assert!(p.q[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn profile_single_doc() {
        let corpus =
            Corpus::from_triples(2, 2, [(0u32, 0u32, 3u32), (1, 0, 1), (0, 1, 4)]).unwrap();
        let p = empirical_frequency_profile(&corpus, &[1, 0], 0, 1, 4).unwrap();
        assert_eq!(p.q[3], 0.5); // one of two docs
        let total: f64 = p.q.iter().sum();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_sums_to_group_share() {
        let c = small_config();
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (corpus, truth) = generate_corpus(&m, &c, sets).unwrap();
        let t0 = truth.dominant_label.iter().filter(|&&l| l == 0).count();
        let p = empirical_frequency_profile(&corpus, &truth.dominant_label, 0, 0, c.m).unwrap();
        let sum: f64 = p.q.iter().sum();
        assert!((sum - t0 as f64 / c.s as f64).abs() < 1e-12);
        // brute-force oracle
        let mut counts = vec![0usize; c.m + 1];
        for j in 0..c.s {
            if truth.dominant_label[j] == 0 {
                counts[corpus.count(0, j) as usize] += 1;
            }
        }
        let q: Vec<f64> = counts.iter().map(|&n| n as f64 / c.s as f64).collect();
        assert_eq!(p.q, q);
    }

    #[test]
    fn profile_requires_fixed_lengths() {
        let corpus = Corpus::from_triples(2, 2, [(0u32, 0u32, 3u32), (0, 1, 4)]).unwrap();
        assert!(matches!(
            empirical_frequency_profile(&corpus, &[0, 0], 0, 0, 3),
            Err(SynthError::FixedLengthRequired { doc: 1, .. })
        ));
    }

    #[test]
    fn no_local_min_cases() {
        assert!(check_no_local_min(&[5.0, 4.0, 3.0, 1.0], 1).is_empty());
        assert!(check_no_local_min(&[0.0, 2.0, 5.0, 3.0, 1.0], 1).is_empty());
        assert_eq!(check_no_local_min(&[5.0, 1.0, 4.0], 1), vec![1]);
    }

    #[test]
    fn no_local_min_on_sorted_sequences() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..100 {
            let n = rng.random_range(3..30);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(check_no_local_min(&v, 1).is_empty());
        }
    }

    #[test]
    fn smoothing_removes_single_dip() {
        let q = [5.0, 5.0, 0.0, 5.0, 5.0];
        assert_eq!(check_no_local_min(&q, 1), vec![2]);
        assert!(check_no_local_min(&q, 5).is_empty());
    }

    #[test]
    fn gamma_formula_matches_constraint_values() {
        let g = tsvd::gamma_from_constraints(0.05, 0.3, 0.07);
        assert!((g - 2.317).abs() < 0.001, "gamma = {g}");
    }

    #[test]
    fn reference_catchwords_capture_planted_sets() {
        let mut c = small_config();
        c.s = 600;
        let mut rng = stream_rng(c.seed, STREAM_TOPIC_MATRIX);
        let (m, sets) = sample_topic_matrix(&c, &mut rng).unwrap();
        let (corpus, truth) = generate_corpus(&m, &c, sets.clone()).unwrap();
        let mut cfg = TsvdConfig::new(c.k);
        cfg.nominal_m = Some(c.m);
        cfg.threshold_floor_mode = FloorMode::Off;
        cfg.catchword_cutoff_mode = CutoffMode::Off;
        let found = find_catchwords_reference(&corpus, &truth.dominant_label, &cfg).unwrap();
        for (l, planted) in sets.iter().enumerate() {
            for &i in planted {
                assert!(
                    found.sets[l].contains(&i),
                    "planted catchword {i} missing from topic {l}: {:?}",
                    found.sets[l]
                );
            }
        }
        assert!(found.empty_clusters.is_empty());
        assert!(found.mean_frequency > 0.0);
    }

    #[test]
    fn reference_catchwords_single_topic_mean() {
        // One topic: mean frequency = average over docs of the catchword
        // mass in each document.
        let corpus = Corpus::from_triples(
            3,
            2,
            [(0u32, 0u32, 2u32), (1, 0, 2), (0, 1, 3), (2, 1, 1)],
        )
        .unwrap();
        let labels = vec![0u32, 0];
        let mut cfg = TsvdConfig::new(1);
        cfg.nominal_m = Some(4);
        cfg.epsilon0 = 1.0;
        cfg.w0 = 1.0;
        cfg.catchword_cutoff_mode = CutoffMode::Off;
        cfg.threshold_floor_mode = FloorMode::Off;
        let found = find_catchwords_reference(&corpus, &labels, &cfg).unwrap();
        let mut expected = 0.0;
        for j in 0..2 {
            let len = corpus.doc_length(j) as f64;
            for &i in &found.sets[0] {
                expected += corpus.count(i, j) as f64 / len;
            }
        }
        expected /= 2.0;
        assert!((found.mean_frequency - expected).abs() < 1e-12);
    }

    #[test]
    fn topic_matrix_tsv_round_trip() {
        let m = TopicMatrix::new(
            3,
            vec![vec![0.25, 0.5, 0.25], vec![0.1, 0.2, 0.7]],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_tsv(&mut buf).unwrap();
        let back = TopicMatrix::read_tsv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn ground_truth_tsv_round_trip() {
        let t = GroundTruth {
            weights: vec![vec![0.9, 0.1], vec![0.25, 0.75]],
            dominant_label: vec![0, 1],
            planted_catchwords: vec![vec![], vec![]],
        };
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let back = GroundTruth::read_tsv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(t.weights, back.weights);
        assert_eq!(t.dominant_label, back.dominant_label);
    }

    #[test]
    fn regime_violations_warn_but_do_not_fail() {
        let mut c = small_config();
        c.alpha = 0.9;
        c.delta = 0.1;
        let warnings = c.validate().unwrap();
        assert!(!warnings.is_empty());
    }
}
