//! Dynamic subword vocabularies for drifting text streams.
//!
//! The crate covers the full loop: normalize a corpus, induce a WordPiece
//! vocabulary, measure how token usage shifts between epochs, update the
//! vocabulary at a fixed size, score documents for drift, mine hard examples
//! with weighted sampling, and watch a loss stream for deterioration.

pub mod cli;
pub mod corpus;
pub mod drift;
pub mod error;
pub mod pipeline;
pub mod sampler;
pub mod seeding;
pub mod signals;
pub mod synth;
pub mod tokenizer;
pub mod vocab_update;

pub use corpus::{ingest, normalize_text, Document};
pub use error::{Error, Result};
pub use tokenizer::{induce_vocabulary, HashtagMode, VocabConfig, Vocabulary};
