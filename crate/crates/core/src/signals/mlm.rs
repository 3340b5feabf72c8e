//! Smoothed-unigram surprisal as a stand-in for masked-LM loss.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::seeding::hash64;
use crate::tokenizer::Vocabulary;

/// Default cap on masked positions per document.
pub const DEFAULT_MAX_MASKS: usize = 5;

/// How mask positions are picked within a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskSelection {
    /// Pieces with the lowest reference frequency first, ties by position.
    #[default]
    RarestFirst,
    /// Uniformly random positions, seeded per document.
    Seeded(u64),
}

/// Add-one smoothed unigram model over the pieces of a reference corpus.
///
/// `p(piece) = (count(piece) + 1) / (N + V)` where `N` is the number of
/// reference pieces and `V` the vocabulary size.
#[derive(Debug, Clone)]
pub struct UnigramSurprisal {
    counts: HashMap<String, u64>,
    total: u64,
    vocab_size: usize,
}

impl UnigramSurprisal {
    pub fn fit(reference: &[Document], vocab: &Vocabulary) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts = HashMap::new();
        let mut total = 0;
        for doc in reference {
            for p in vocab.tokenize_document(doc, vocab.mode()).pieces {
                *counts.entry(p).or_insert(0) += 1;
                total += 1;
            }
        }
        Ok(UnigramSurprisal {
            counts,
            total,
            vocab_size: vocab.len().max(1),
        })
    }

    pub fn count(&self, piece: &str) -> u64 {
        self.counts.get(piece).copied().unwrap_or(0)
    }

    /// `-ln p(piece)`.
    pub fn surprisal(&self, piece: &str) -> f64 {
        let denom = (self.total + self.vocab_size as u64) as f64;
        -((self.count(piece) + 1) as f64 / denom).ln()
    }

    /// Mean surprisal over at most `max_masks` masked positions; 0 for an empty
    /// piece list.
    pub fn masked_loss(&self, doc_id: &str, pieces: &[String], max_masks: usize, selection: MaskSelection) -> f64 {
        let n = pieces.len();
        let m = max_masks.min(n);
        if m == 0 {
            return 0.0;
        }
        let positions: Vec<usize> = match selection {
            MaskSelection::RarestFirst => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by_key(|&i| (self.count(&pieces[i]), i));
                idx.truncate(m);
                idx
            }
            MaskSelection::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(hash64(seed, &[doc_id.as_bytes()]));
                rand::seq::index::sample(&mut rng, n, m).into_vec()
            }
        };
        positions.iter().map(|&i| self.surprisal(&pieces[i])).sum::<f64>() / m as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_pieces(&["a", "b", "c", "d", "z"]).unwrap()
    }

    #[test]
    fn smoothing_formula() {
        let reference = [Document::new("r", "a b c d", 0)];
        let m = UnigramSurprisal::fit(&reference, &vocab()).unwrap();
        // N = 4 pieces, V = 8 specials + 5 wordpieces
        let expected = -(2.0f64 / 17.0).ln();
        assert!((m.surprisal("a") - expected).abs() < 1e-12);
        assert!((m.surprisal("z") - 17f64.ln()).abs() < 1e-12);
        // the smoothed distribution sums to one over the vocabulary
        let v = vocab();
        let total: f64 = v.entries().map(|e| (-m.surprisal(&e.token)).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rarest_first_masking() {
        let reference = [Document::new("r", "a a a b", 0)];
        let m = UnigramSurprisal::fit(&reference, &vocab()).unwrap();
        let pieces: Vec<String> = ["a", "z", "b", "a"].iter().map(|s| s.to_string()).collect();
        // one mask picks the unseen piece
        assert_eq!(m.masked_loss("d", &pieces, 1, MaskSelection::RarestFirst), m.surprisal("z"));
        let two = (m.surprisal("z") + m.surprisal("b")) / 2.0;
        assert!((m.masked_loss("d", &pieces, 2, MaskSelection::RarestFirst) - two).abs() < 1e-12);
        assert_eq!(m.masked_loss("d", &[], 5, MaskSelection::RarestFirst), 0.0);
        let seeded = m.masked_loss("d", &pieces, 2, MaskSelection::Seeded(1));
        assert_eq!(seeded, m.masked_loss("d", &pieces, 2, MaskSelection::Seeded(1)));
        assert!(UnigramSurprisal::fit(&[], &vocab()).is_err());
    }
}
