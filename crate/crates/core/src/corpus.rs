//! Bag-of-words corpora as sparse count matrices.
//!
//! A [`Corpus`] is the observed word×document count matrix: `d` words,
//! `s` documents, stored column-major with raw integer counts. Relative
//! frequencies are derived views, never stored, so nothing is rounded at
//! rest. All corpus values are immutable after construction and the
//! operations here are pure functions.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::stream_rng;

/// Stream id used by [`Corpus::split_random`] (see `stream_rng`).
const STREAM_SPLIT: u64 = u64::MAX - 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vocabulary has {got} entries, corpus declares {expected} words")]
    VocabMismatch { expected: usize, got: usize },
    #[error("no documents left after filtering")]
    EmptyCorpus,
    #[error("document {0} has zero length")]
    ZeroLengthDocument(usize),
    #[error("need at least 2 documents to split, corpus has {0}")]
    TooFewDocuments(usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Word list plus its inverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary, rejecting duplicate words.
    pub fn new(words: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::InvalidArgument(format!(
                    "duplicate vocabulary word {w:?}"
                )));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Sparse word×document count matrix.
///
/// Columns are documents; each column holds `(word_id, count)` pairs sorted
/// by word id with every count ≥ 1. `doc_lengths[j]` always equals the sum
/// of column `j`'s counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    num_words: usize,
    columns: Vec<Vec<(u32, u32)>>,
    doc_lengths: Vec<u64>,
    vocabulary: Option<Vocabulary>,
}

/// Result of a random column split: two corpora plus the original column
/// indices each side took.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub first: Corpus,
    pub second: Corpus,
    pub first_doc_ids: Vec<u32>,
    pub second_doc_ids: Vec<u32>,
}

impl Corpus {
    /// Builds a corpus from `(word_id, doc_id, count)` triples, 0-based.
    /// Duplicate `(word, doc)` pairs are summed.
    pub fn from_triples(
        num_words: usize,
        num_docs: usize,
        triples: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Result<Self, CorpusError> {
        let mut maps: Vec<HashMap<u32, u64>> = vec![HashMap::new(); num_docs];
        for (word, doc, count) in triples {
            if (word as usize) >= num_words {
                return Err(CorpusError::InvalidArgument(format!(
                    "word id {word} out of range (d={num_words})"
                )));
            }
            if (doc as usize) >= num_docs {
                return Err(CorpusError::InvalidArgument(format!(
                    "doc id {doc} out of range (s={num_docs})"
                )));
            }
            if count == 0 {
                return Err(CorpusError::InvalidArgument(
                    "zero count in triple".to_string(),
                ));
            }
            *maps[doc as usize].entry(word).or_insert(0) += count as u64;
        }
        let mut columns = Vec::with_capacity(num_docs);
        let mut doc_lengths = Vec::with_capacity(num_docs);
        for map in maps {
            let mut col: Vec<(u32, u32)> = Vec::with_capacity(map.len());
            for (w, c) in map {
                let c = u32::try_from(c).map_err(|_| {
                    CorpusError::InvalidArgument(format!("count overflow for word {w}"))
                })?;
                col.push((w, c));
            }
            col.sort_unstable_by_key(|&(w, _)| w);
            doc_lengths.push(col.iter().map(|&(_, c)| c as u64).sum());
            columns.push(col);
        }
        Ok(Self {
            num_words,
            columns,
            doc_lengths,
            vocabulary: None,
        })
    }

    /// Builds a corpus from per-document sorted `(word_id, count)` columns.
    /// Caller guarantees sortedness and uniqueness; lengths are recomputed.
    pub(crate) fn from_columns(num_words: usize, columns: Vec<Vec<(u32, u32)>>) -> Self {
        let doc_lengths = columns
            .iter()
            .map(|col| col.iter().map(|&(_, c)| c as u64).sum())
            .collect();
        Self {
            num_words,
            columns,
            doc_lengths,
            vocabulary: None,
        }
    }

    pub fn with_vocabulary(mut self, vocabulary: Vocabulary) -> Result<Self, CorpusError> {
        if vocabulary.len() != self.num_words {
            return Err(CorpusError::VocabMismatch {
                expected: self.num_words,
                got: vocabulary.len(),
            });
        }
        self.vocabulary = Some(vocabulary);
        Ok(self)
    }

    /// Number of words `d`.
    pub fn num_words(&self) -> usize {
        self.num_words
    }

    /// Number of documents `s`.
    pub fn num_docs(&self) -> usize {
        self.columns.len()
    }

    pub fn doc_length(&self, j: usize) -> u64 {
        self.doc_lengths[j]
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    /// Sorted `(word_id, count)` pairs of document `j`.
    pub fn column(&self, j: usize) -> &[(u32, u32)] {
        &self.columns[j]
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocabulary.as_ref()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Count of word `i` in document `j` (0 when absent).
    pub fn count(&self, word: u32, doc: usize) -> u32 {
        match self.columns[doc].binary_search_by_key(&word, |&(w, _)| w) {
            Ok(idx) => self.columns[doc][idx].1,
            Err(_) => 0,
        }
    }

    /// Row-major view: for each word, the `(doc_id, count)` pairs sorted by
    /// doc id. Built on demand in O(nnz).
    pub fn rows(&self) -> Vec<Vec<(u32, u32)>> {
        let mut rows = vec![Vec::new(); self.num_words];
        for (j, col) in self.columns.iter().enumerate() {
            for &(w, c) in col {
                rows[w as usize].push((j as u32, c));
            }
        }
        rows
    }

    /// Corpus-wide total count per word.
    pub fn word_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.num_words];
        for col in &self.columns {
            for &(w, c) in col {
                totals[w as usize] += c as u64;
            }
        }
        totals
    }

    /// Parses the UCI bag-of-words format: three integer header lines
    /// `D`, `W`, `NNZ`, then exactly `NNZ` lines of `docID wordID count`
    /// with 1-based ids. Duplicate `(doc, word)` triples are summed.
    /// An optional vocabulary stream supplies one word per line, `W` lines.
    pub fn parse_uci_bag_of_words<R: BufRead, V: BufRead>(
        reader: R,
        vocab: Option<V>,
    ) -> Result<Self, CorpusError> {
        let mut lines = reader.lines().enumerate();
        let mut header = [0usize; 3];
        for (slot, name) in ["D", "W", "NNZ"].iter().enumerate() {
            let (line_no, line) = lines.next().ok_or(CorpusError::Parse {
                line: slot + 1,
                msg: format!("missing header line {name}"),
            })?;
            let line = line?;
            header[slot] = line.trim().parse().map_err(|_| CorpusError::Parse {
                line: line_no + 1,
                msg: format!("header line {name} is not a non-negative integer: {line:?}"),
            })?;
        }
        let [num_docs, num_words, nnz] = header;

        let mut triples: Vec<(u32, u32, u32)> = Vec::with_capacity(nnz);
        let mut seen = 0usize;
        for (line_no, line) in &mut lines {
            let line = line?;
            let trimmed = line.trim();
            if seen == nnz {
                if trimmed.is_empty() {
                    continue;
                }
                return Err(CorpusError::Parse {
                    line: line_no + 1,
                    msg: format!("unexpected content after {nnz} triples: {trimmed:?}"),
                });
            }
            let mut fields = trimmed.split_whitespace();
            let mut next_int = |what: &str| -> Result<i64, CorpusError> {
                fields
                    .next()
                    .ok_or_else(|| CorpusError::Parse {
                        line: line_no + 1,
                        msg: format!("missing {what}"),
                    })?
                    .parse()
                    .map_err(|_| CorpusError::Parse {
                        line: line_no + 1,
                        msg: format!("{what} is not an integer"),
                    })
            };
            let doc = next_int("doc id")?;
            let word = next_int("word id")?;
            let count = next_int("count")?;
            if fields.next().is_some() {
                return Err(CorpusError::Parse {
                    line: line_no + 1,
                    msg: "more than three fields in triple".to_string(),
                });
            }
            if doc < 1 || doc as usize > num_docs {
                return Err(CorpusError::Parse {
                    line: line_no + 1,
                    msg: format!("doc id {doc} out of range 1..={num_docs}"),
                });
            }
            if word < 1 || word as usize > num_words {
                return Err(CorpusError::Parse {
                    line: line_no + 1,
                    msg: format!("word id {word} out of range 1..={num_words}"),
                });
            }
            if count <= 0 || count > u32::MAX as i64 {
                return Err(CorpusError::Parse {
                    line: line_no + 1,
                    msg: format!("count {count} must be a positive 32-bit integer"),
                });
            }
            triples.push((word as u32 - 1, doc as u32 - 1, count as u32));
            seen += 1;
        }
        if seen < nnz {
            return Err(CorpusError::Parse {
                line: 3 + seen + 1,
                msg: format!("expected {nnz} triples, found {seen}"),
            });
        }

        let mut corpus = Self::from_triples(num_words, num_docs, triples).map_err(|e| match e {
            CorpusError::InvalidArgument(msg) => CorpusError::Parse { line: 0, msg },
            other => other,
        })?;

        if let Some(vocab) = vocab {
            let mut words = Vec::with_capacity(num_words);
            for (line_no, line) in vocab.lines().enumerate() {
                let line = line?;
                let w = line.trim();
                if w.is_empty() {
                    return Err(CorpusError::Parse {
                        line: line_no + 1,
                        msg: "empty vocabulary line".to_string(),
                    });
                }
                words.push(w.to_string());
            }
            if words.len() != num_words {
                return Err(CorpusError::VocabMismatch {
                    expected: num_words,
                    got: words.len(),
                });
            }
            corpus = corpus.with_vocabulary(Vocabulary::new(words)?)?;
        }
        Ok(corpus)
    }

    /// Writes the corpus in UCI bag-of-words format, triples sorted by
    /// `(doc, word)`, 1-based ids.
    pub fn write_uci<W: Write>(&self, mut writer: W) -> Result<(), CorpusError> {
        writeln!(writer, "{}", self.num_docs())?;
        writeln!(writer, "{}", self.num_words)?;
        writeln!(writer, "{}", self.nnz())?;
        for (j, col) in self.columns.iter().enumerate() {
            for &(w, c) in col {
                writeln!(writer, "{} {} {}", j + 1, w + 1, c)?;
            }
        }
        Ok(())
    }

    /// Drops documents shorter than `min_length` words, preserving relative
    /// document order so downstream splits stay reproducible.
    pub fn filter_short_documents(&self, min_length: u64) -> Result<Self, CorpusError> {
        let keep: Vec<usize> = (0..self.num_docs())
            .filter(|&j| self.doc_lengths[j] >= min_length)
            .collect();
        if keep.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        let doc_lengths = keep.iter().map(|&j| self.doc_lengths[j]).collect();
        Ok(Self {
            num_words: self.num_words,
            columns,
            doc_lengths,
            vocabulary: self.vocabulary.clone(),
        })
    }

    /// Keeps the `target_size` words with the largest corpus-wide totals
    /// (ties broken toward the lower word id), reindexes the surviving words
    /// densely in original id order, and recomputes document lengths.
    pub fn truncate_vocabulary(&self, target_size: usize) -> Result<Self, CorpusError> {
        if target_size == 0 || target_size > self.num_words {
            return Err(CorpusError::InvalidArgument(format!(
                "target_size {target_size} not in 1..={}",
                self.num_words
            )));
        }
        let totals = self.word_totals();
        let mut order: Vec<u32> = (0..self.num_words as u32).collect();
        order.sort_by_key(|&w| (std::cmp::Reverse(totals[w as usize]), w));
        let mut kept: Vec<u32> = order[..target_size].to_vec();
        kept.sort_unstable();
        let mut remap = vec![u32::MAX; self.num_words];
        for (new_id, &old_id) in kept.iter().enumerate() {
            remap[old_id as usize] = new_id as u32;
        }
        let columns: Vec<Vec<(u32, u32)>> = self
            .columns
            .iter()
            .map(|col| {
                col.iter()
                    .filter_map(|&(w, c)| {
                        let nw = remap[w as usize];
                        (nw != u32::MAX).then_some((nw, c))
                    })
                    .collect()
            })
            .collect();
        let vocabulary = match &self.vocabulary {
            Some(v) => Some(Vocabulary::new(
                kept.iter()
                    .map(|&w| v.word(w as usize).unwrap().to_string())
                    .collect(),
            )?),
            None => None,
        };
        let mut out = Self::from_columns(target_size, columns);
        out.vocabulary = vocabulary;
        Ok(out)
    }

    /// Dense relative-frequency column: entry `i` is `count(i,j) / length(j)`.
    pub fn frequency_column(&self, j: usize) -> Result<Vec<f64>, CorpusError> {
        if j >= self.num_docs() {
            return Err(CorpusError::InvalidArgument(format!(
                "doc id {j} out of range (s={})",
                self.num_docs()
            )));
        }
        let len = self.doc_lengths[j];
        if len == 0 {
            return Err(CorpusError::ZeroLengthDocument(j));
        }
        let mut out = vec![0.0; self.num_words];
        for &(w, c) in &self.columns[j] {
            out[w as usize] = c as f64 / len as f64;
        }
        Ok(out)
    }

    /// Splits columns into two halves by a seed-deterministic uniformly
    /// random permutation: the first ⌈s/2⌉ permuted columns go to `first`.
    /// Identical `(corpus, seed)` gives identical output on every platform
    /// and thread count.
    pub fn split_random(&self, seed: u64) -> Result<CorpusSplit, CorpusError> {
        let s = self.num_docs();
        if s < 2 {
            return Err(CorpusError::TooFewDocuments(s));
        }
        let mut perm: Vec<u32> = (0..s as u32).collect();
        let mut rng = stream_rng(seed, STREAM_SPLIT);
        perm.shuffle(&mut rng);
        let half = s.div_ceil(2);
        let first_doc_ids = perm[..half].to_vec();
        let second_doc_ids = perm[half..].to_vec();
        let subcorpus = |ids: &[u32]| {
            let columns = ids
                .iter()
                .map(|&j| self.columns[j as usize].clone())
                .collect();
            let mut c = Self::from_columns(self.num_words, columns);
            c.vocabulary = self.vocabulary.clone();
            c
        };
        Ok(CorpusSplit {
            first: subcorpus(&first_doc_ids),
            second: subcorpus(&second_doc_ids),
            first_doc_ids,
            second_doc_ids,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Corpus, CorpusError> {
        Corpus::parse_uci_bag_of_words(Cursor::new(text), None::<Cursor<&str>>)
    }

    #[test]
    fn parse_basic() {
        let c = parse("3\n4\n2\n1 2 5\n3 4 1\n").unwrap();
        assert_eq!(c.num_docs(), 3);
        assert_eq!(c.num_words(), 4);
        assert_eq!(c.count(1, 0), 5);
        assert_eq!(c.count(3, 2), 1);
        assert_eq!(c.doc_lengths(), &[5, 0, 1]);
    }

    #[test]
    fn parse_minimal() {
        let c = parse("1\n1\n1\n1 1 1\n").unwrap();
        assert_eq!(c.num_docs(), 1);
        assert_eq!(c.num_words(), 1);
        assert_eq!(c.doc_lengths(), &[1]);
    }

    #[test]
    fn parse_word_out_of_range() {
        let err = parse("3\n4\n1\n1 9 2\n").unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_header_and_counts() {
        assert!(matches!(
            parse("x\n4\n1\n1 1 1\n"),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("3\n4\n1\n1 1 0\n"),
            Err(CorpusError::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse("3\n4\n2\n1 1 1\n"),
            Err(CorpusError::Parse { .. })
        ));
    }

    #[test]
    fn parse_sums_duplicate_triples() {
        let c = parse("2\n2\n3\n1 1 2\n1 1 3\n2 2 1\n").unwrap();
        assert_eq!(c.count(0, 0), 5);
        assert_eq!(c.doc_lengths(), &[5, 1]);
    }

    #[test]
    fn parse_with_vocabulary() {
        let c = Corpus::parse_uci_bag_of_words(
            Cursor::new("1\n2\n1\n1 2 4\n"),
            Some(Cursor::new("alpha\nbeta\n")),
        )
        .unwrap();
        let v = c.vocabulary().unwrap();
        assert_eq!(v.word(1), Some("beta"));
        assert_eq!(v.id("alpha"), Some(0));
    }

    #[test]
    fn vocab_line_count_mismatch() {
        let err = Corpus::parse_uci_bag_of_words(
            Cursor::new("1\n2\n0\n"),
            Some(Cursor::new("alpha\n")),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CorpusError::VocabMismatch {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn uci_round_trip() {
        let c = parse("4\n3\n5\n1 2 5\n2 1 1\n2 3 2\n4 2 7\n3 1 4\n").unwrap();
        let mut buf = Vec::new();
        c.write_uci(&mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn filter_short_documents_cases() {
        let c = Corpus::from_triples(
            1,
            4,
            [(0u32, 0u32, 5u32), (0, 1, 19), (0, 2, 20), (0, 3, 40)],
        )
        .unwrap();
        let f = c.filter_short_documents(20).unwrap();
        assert_eq!(f.doc_lengths(), &[20, 40]);
        assert_eq!(f.num_words(), 1);

        let id = c.filter_short_documents(0).unwrap();
        assert_eq!(id, c);

        assert!(matches!(
            c.filter_short_documents(100),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn truncate_vocabulary_by_totals() {
        // totals per word: [3, 9, 9, 1]
        let c = Corpus::from_triples(
            4,
            2,
            [
                (0u32, 0u32, 3u32),
                (1, 0, 4),
                (1, 1, 5),
                (2, 0, 9),
                (3, 1, 1),
            ],
        )
        .unwrap();
        let t = c.truncate_vocabulary(2).unwrap();
        // ids {1, 2} survive (tie at 9 broken toward lower id is moot here,
        // both kept); new ids follow original order.
        assert_eq!(t.num_words(), 2);
        assert_eq!(t.count(0, 0), 4); // old word 1
        assert_eq!(t.count(1, 0), 9); // old word 2
        assert_eq!(t.doc_lengths(), &[13, 5]);

        let full = c.truncate_vocabulary(4).unwrap();
        assert_eq!(full, c);

        let one = c.truncate_vocabulary(1).unwrap();
        // tie between words 1 and 2 at total 9 goes to the lower id 1
        assert_eq!(one.count(0, 0), 4);
        assert_eq!(one.count(0, 1), 5);
    }

    #[test]
    fn truncate_keeps_winner_totals_dominant() {
        let c = Corpus::from_triples(
            5,
            3,
            [
                (0u32, 0u32, 2u32),
                (1, 1, 8),
                (2, 2, 3),
                (3, 0, 8),
                (4, 1, 1),
            ],
        )
        .unwrap();
        let totals = c.word_totals();
        let t = c.truncate_vocabulary(2).unwrap();
        let kept_min = t.word_totals().iter().min().copied().unwrap();
        for (w, &tot) in totals.iter().enumerate() {
            if ![1usize, 3usize].contains(&w) {
                assert!(tot <= kept_min);
            }
        }
    }

    #[test]
    fn frequency_column_cases() {
        let c = Corpus::from_triples(4, 1, [(0u32, 0u32, 2u32), (3, 0, 2)]).unwrap();
        assert_eq!(c.frequency_column(0).unwrap(), vec![0.5, 0.0, 0.0, 0.5]);

        let unit = Corpus::from_triples(2, 1, [(1u32, 0u32, 7u32)]).unwrap();
        assert_eq!(unit.frequency_column(0).unwrap(), vec![0.0, 1.0]);

        let empty = parse("1\n1\n0\n").unwrap();
        assert!(matches!(
            empty.frequency_column(0),
            Err(CorpusError::ZeroLengthDocument(0))
        ));
    }

    #[test]
    fn frequency_column_sums_to_one() {
        let c = parse("4\n3\n5\n1 2 5\n2 1 1\n2 3 2\n4 2 7\n3 1 4\n").unwrap();
        for j in 0..c.num_docs() {
            let sum: f64 = c.frequency_column(j).unwrap().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_random_partitions() {
        let c = Corpus::from_triples(2, 4, [(0u32, 0u32, 1u32), (1, 3, 2)]).unwrap();
        let split = c.split_random(7).unwrap();
        assert_eq!(split.first.num_docs(), 2);
        assert_eq!(split.second.num_docs(), 2);
        let mut all: Vec<u32> = split
            .first_doc_ids
            .iter()
            .chain(&split.second_doc_ids)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn split_random_odd_sizes() {
        let c = Corpus::from_triples(1, 5, [(0u32, 0u32, 1u32)]).unwrap();
        let split = c.split_random(0).unwrap();
        assert_eq!(split.first.num_docs(), 3);
        assert_eq!(split.second.num_docs(), 2);
    }

    #[test]
    fn split_random_deterministic() {
        let c = Corpus::from_triples(1, 9, [(0u32, 2u32, 1u32)]).unwrap();
        let a = c.split_random(123).unwrap();
        let b = c.split_random(123).unwrap();
        assert_eq!(a.first_doc_ids, b.first_doc_ids);
        assert_eq!(a.second_doc_ids, b.second_doc_ids);
        let other = c.split_random(124).unwrap();
        assert!(a.first_doc_ids != other.first_doc_ids || a.second_doc_ids != other.second_doc_ids);
    }

    #[test]
    fn split_needs_two_docs() {
        let c = Corpus::from_triples(1, 1, [(0u32, 0u32, 1u32)]).unwrap();
        assert!(matches!(
            c.split_random(0),
            Err(CorpusError::TooFewDocuments(1))
        ));
    }
}
