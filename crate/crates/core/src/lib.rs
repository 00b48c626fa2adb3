//! Thresholded-SVD topic recovery for dominant-admixture corpora.
//!
//! The library has five parts:
//!
//! - [`corpus`]: sparse bag-of-words corpora (UCI format), filtering and
//!   deterministic random splitting;
//! - [`synth`]: a corpus generator that plants the dominant-admixture
//!   model with catchwords, plus assumption checkers;
//! - [`linalg`]: sparse matrices and truncated SVD;
//! - [`tsvd`]: the recovery pipeline itself;
//! - [`eval`]: matched L1 reconstruction error and topic coherence.
//!
//! Everything randomized is seeded through independent ChaCha streams, so
//! results are bit-identical across runs and thread counts.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod linalg;
pub mod synth;
pub mod tsvd;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An RNG stream keyed by (seed, stream id). Distinct stream ids give
/// statistically independent sequences under the same seed; consumers each
/// own a stream so parallel work never races on RNG state. Topic-matrix
/// sampling conventionally uses [`synth::STREAM_TOPIC_MATRIX`]; documents
/// use their index.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
