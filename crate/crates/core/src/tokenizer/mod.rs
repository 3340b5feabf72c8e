//! WordPiece vocabularies: induction, greedy tokenization and coverage statistics.

mod induce;
mod vocab;

pub use induce::{induce_vocabulary, induce_wordpieces, VocabConfig};
pub use vocab::{
    HashtagMode, Section, VocabEntry, Vocabulary, CLS, CONTINUATION, MASK, PAD, SEP, SPECIALS, UNK,
};

pub(crate) use induce::{alphabet_size, regular_word_counts};
pub(crate) use vocab::{is_hashtag, rank_order};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizationResult {
    pub pieces: Vec<String>,
    pub oov_word_count: usize,
    pub word_count: usize,
}

/// Coverage of a vocabulary over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub words: usize,
    pub pieces: usize,
    pub oov_words: usize,
    pub oov_rate: f64,
    pub fertility: f64,
}

impl Vocabulary {
    /// Greedy longest-match-first segmentation of a single word.
    ///
    /// Non-initial pieces are looked up with the `##` prefix. If any position
    /// has no match the whole word becomes `[UNK]`.
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = bounds.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let max_len = self.max_piece_chars();
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < n {
            let mut end = n.min(start + max_len);
            let mut found = false;
            while end > start {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION);
                }
                candidate.push_str(&word[bounds[start]..bounds[end]]);
                if self.is_wordpiece(&candidate) {
                    found = true;
                    break;
                }
                end -= 1;
            }
            if !found {
                return vec![UNK.to_string()];
            }
            pieces.push(candidate.clone());
            start = end;
        }
        pieces
    }

    /// Tokenizes whitespace-separated normalized text.
    ///
    /// Specials pass through atomically. In whole-hashtag mode a hashtag held
    /// by the hashtag section is emitted intact; any other hashtag loses its
    /// `#` and is split like an ordinary word.
    pub fn tokenize_text(&self, text: &str, mode: HashtagMode) -> TokenizationResult {
        let mut out = TokenizationResult::default();
        for word in text.split_whitespace() {
            out.word_count += 1;
            match self.section_of(word) {
                Some(Section::Special) => {
                    out.pieces.push(word.to_string());
                    continue;
                }
                Some(Section::Hashtag) if mode == HashtagMode::WholeHashtags => {
                    out.pieces.push(word.to_string());
                    continue;
                }
                _ => {}
            }
            let body = if is_hashtag(word) { &word[1..] } else { word };
            let pieces = self.tokenize_word(body);
            if pieces.len() == 1 && pieces[0] == UNK {
                out.oov_word_count += 1;
            }
            out.pieces.extend(pieces);
        }
        out
    }

    pub fn tokenize_document(&self, doc: &Document, mode: HashtagMode) -> TokenizationResult {
        self.tokenize_text(&doc.text, mode)
    }

    /// Number of pieces `doc` produces under this vocabulary's own mode.
    pub fn piece_count(&self, doc: &Document) -> usize {
        self.tokenize_text(&doc.text, self.mode()).pieces.len()
    }

    /// OOV rate (UNK-mapped words over words) and fertility (pieces over words).
    pub fn coverage(&self, docs: &[Document]) -> Result<CoverageStats> {
        oov_and_fertility_stats(self, docs)
    }
}

/// OOV rate and mean pieces per word of `vocab` over `docs`, using the
/// vocabulary's hashtag mode.
pub fn oov_and_fertility_stats(vocab: &Vocabulary, docs: &[Document]) -> Result<CoverageStats> {
    use rayon::prelude::*;

    let (words, pieces, oov_words) = docs
        .par_iter()
        .map(|d| {
            let r = vocab.tokenize_document(d, vocab.mode());
            (r.word_count, r.pieces.len(), r.oov_word_count)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if words == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(CoverageStats {
        words,
        pieces,
        oov_words,
        oov_rate: oov_words as f64 / words as f64,
        fertility: pieces as f64 / words as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strip(piece: &str) -> &str {
        piece.strip_prefix(CONTINUATION).unwrap_or(piece)
    }

    #[test]
    fn greedy_examples() {
        let v = Vocabulary::from_pieces(&["gr", "##ie", "##zman", "##n", "g", "##r"]).unwrap();
        assert_eq!(v.tokenize_word("griezmann"), ["gr", "##ie", "##zman", "##n"]);
        let v = Vocabulary::from_pieces(&["hello", "he"]).unwrap();
        assert_eq!(v.tokenize_word("hello"), ["hello"]);
        assert_eq!(v.tokenize_word("xyz"), [UNK]);
        // a partial match that dead-ends still maps the whole word to UNK
        assert_eq!(v.tokenize_word("hex"), [UNK]);
    }

    #[test]
    fn document_tokenization_modes() {
        let whole = Vocabulary::new(
            HashtagMode::WholeHashtags,
            4,
            1,
            [("go".into(), 1), ("us".into(), 1), ("##a".into(), 1), ("hi".into(), 1)],
            [("#usa".into(), 3)],
        )
        .unwrap();
        let r = whole.tokenize_text("go #usa", HashtagMode::WholeHashtags);
        assert_eq!(r.pieces, ["go", "#usa"]);
        let r = whole.tokenize_text("go #usa", HashtagMode::BreakDown);
        assert_eq!(r.pieces, ["go", "us", "##a"]);
        let r = whole.tokenize_text("@USER hi", HashtagMode::WholeHashtags);
        assert_eq!(r.pieces, ["@USER", "hi"]);
        assert_eq!((r.word_count, r.oov_word_count), (2, 0));
        // unknown hashtag falls back to stripped splitting
        let r = whole.tokenize_text("#usx", HashtagMode::WholeHashtags);
        assert_eq!(r.pieces, [UNK]);
        assert_eq!(r.oov_word_count, 1);
    }

    #[test]
    fn coverage_examples() {
        let docs = [Document::new("d", "ab cd", 0)];
        let v = Vocabulary::from_pieces(&["a", "##b", "c"]).unwrap();
        let s = oov_and_fertility_stats(&v, &docs).unwrap();
        assert_eq!(s.oov_rate, 0.5);
        assert_eq!(s.fertility, 1.5);

        let full = Vocabulary::from_pieces(&["ab", "cd"]).unwrap();
        let s = full.coverage(&docs).unwrap();
        assert_eq!((s.oov_rate, s.fertility), (0.0, 1.0));

        let none = Vocabulary::from_pieces::<&str>(&[]).unwrap();
        assert_eq!(none.coverage(&docs).unwrap().oov_rate, 1.0);

        assert!(matches!(v.coverage(&[]), Err(Error::EmptyCorpus)));
    }

    fn pieces_strategy() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::btree_set(
            prop_oneof!["[abc]{1,3}", "[abc]{1,3}".prop_map(|s| format!("##{s}"))],
            0..14,
        )
        .prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn reassembly_is_lossless(pieces in pieces_strategy(), word in "[abcd]{1,8}") {
            let v = Vocabulary::from_pieces(&pieces).unwrap();
            let out = v.tokenize_word(&word);
            if out != [UNK] {
                let joined: String = out.iter().map(|p| strip(p)).collect();
                prop_assert_eq!(joined, word);
                for (i, p) in out.iter().enumerate() {
                    prop_assert_eq!(i > 0, p.starts_with(CONTINUATION));
                }
            }
        }
    }
}
