//! Vocabulary shift between epochs and co-occurrence based semantic shift.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenizer::{
    alphabet_size, induce_wordpieces, is_hashtag, rank_order, regular_word_counts, Vocabulary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    NaturalWord,
    Wordpiece,
    Hashtag,
}

impl TokenKind {
    pub const ALL: [TokenKind; 3] = [TokenKind::NaturalWord, TokenKind::Wordpiece, TokenKind::Hashtag];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::NaturalWord => "word",
            TokenKind::Wordpiece => "wordpiece",
            TokenKind::Hashtag => "hashtag",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" | "natural_word" => Ok(TokenKind::NaturalWord),
            "wordpiece" => Ok(TokenKind::Wordpiece),
            "hashtag" => Ok(TokenKind::Hashtag),
            other => Err(Error::invalid(format!("unknown token kind `{other}`"))),
        }
    }
}

/// The `k` most frequent tokens of one kind in one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKVocab {
    pub epoch: i64,
    pub kind: TokenKind,
    pub k: usize,
    /// Tokens in rank order (descending count, ties lexicographic).
    pub ranked: Vec<(String, u64)>,
}

impl TopKVocab {
    pub fn tokens(&self) -> BTreeSet<&str> {
        self.ranked.iter().map(|(t, _)| t.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }
}

/// `1 - |a ∩ b| / |a ∪ b|` over two token sets.
pub fn jaccard_shift<S: AsRef<str> + Eq + std::hash::Hash>(a: &HashSet<S>, b: &HashSet<S>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let inter = a.iter().filter(|t| b.contains(*t)).count();
    let union = a.len() + b.len() - inter;
    Ok(1.0 - inter as f64 / union as f64)
}

/// Shift between two top-k vocabularies of the same kind.
pub fn vocab_shift(v1: &TopKVocab, v2: &TopKVocab) -> Result<f64> {
    if v1.kind != v2.kind {
        return Err(Error::invalid(format!(
            "cannot compare {} with {} vocabularies",
            v1.kind, v2.kind
        )));
    }
    let a: HashSet<&str> = v1.ranked.iter().map(|(t, _)| t.as_str()).collect();
    let b: HashSet<&str> = v2.ranked.iter().map(|(t, _)| t.as_str()).collect();
    jaccard_shift(&a, &b)
}

fn top_k(counts: impl IntoIterator<Item = (String, u64)>, k: usize) -> Vec<(String, u64)> {
    let mut ranked: Vec<_> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
    ranked.sort_by(rank_order);
    ranked.truncate(k);
    ranked
}

/// Token counts of one kind.
///
/// Natural words are whitespace tokens that are not hashtags. Wordpieces come
/// from a vocabulary induced on the same documents (non-hashtag words only),
/// with at least `k` slots.
pub fn kind_counts(docs: &[Document], kind: TokenKind, k: usize) -> Result<BTreeMap<String, u64>> {
    let mut counts = BTreeMap::new();
    match kind {
        TokenKind::NaturalWord => {
            for w in docs.iter().flat_map(|d| d.words()).filter(|w| !is_hashtag(w)) {
                *counts.entry(w.to_string()).or_insert(0) += 1;
            }
        }
        TokenKind::Hashtag => {
            for w in docs.iter().flat_map(|d| d.words()).filter(|w| is_hashtag(w)) {
                *counts.entry(w.to_string()).or_insert(0) += 1;
            }
        }
        TokenKind::Wordpiece => {
            let words = regular_word_counts(docs);
            let capacity = k.max(alphabet_size(&words, 1)).max(1);
            let pieces = induce_wordpieces(&words, capacity, 1)?;
            let vocab = Vocabulary::from_pieces(&pieces.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>())?;
            for (w, c) in &words {
                for p in vocab.tokenize_word(w) {
                    *counts.entry(p).or_insert(0) += c;
                }
            }
        }
    }
    Ok(counts)
}

/// The `k` highest-count tokens of `kind` in `docs`, ties lexicographic.
pub fn top_k_vocab(docs: &[Document], kind: TokenKind, k: usize) -> Result<TopKVocab> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let ranked = top_k(kind_counts(docs, kind, k)?, k);
    if ranked.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(TopKVocab {
        epoch: crate::corpus::dominant_epoch(docs).unwrap_or_default(),
        kind,
        k,
        ranked,
    })
}

/// Words that co-occur most often with an anchor token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooccurrenceProfile {
    pub anchor: String,
    pub epoch: i64,
    pub top_words: Vec<String>,
}

/// Top `m` words sharing a document with `anchor`.
///
/// Each document contributes at most one count per word; the anchor is
/// excluded from its own profile.
pub fn cooccurrence_profile(docs: &[Document], anchor: &str, m: usize) -> Result<CooccurrenceProfile> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut found = false;
    for doc in docs {
        let words: BTreeSet<&str> = doc.words().collect();
        if !words.contains(anchor) {
            continue;
        }
        found = true;
        for w in words.into_iter().filter(|w| *w != anchor) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    if !found {
        return Err(Error::AnchorAbsent(anchor.to_string()));
    }
    let ranked = top_k(counts.into_iter().map(|(w, c)| (w.to_string(), c)), m);
    Ok(CooccurrenceProfile {
        anchor: anchor.to_string(),
        epoch: crate::corpus::dominant_epoch(docs).unwrap_or_default(),
        top_words: ranked.into_iter().map(|(w, _)| w).collect(),
    })
}

/// `1 - |p1 ∩ p2| / M` for two equal-size profiles of the same anchor.
pub fn semantic_shift_rate(p1: &CooccurrenceProfile, p2: &CooccurrenceProfile) -> Result<f64> {
    if p1.anchor != p2.anchor {
        return Err(Error::ProfileMismatch(format!(
            "anchors `{}` and `{}` differ",
            p1.anchor, p2.anchor
        )));
    }
    let m = p1.top_words.len();
    if m != p2.top_words.len() {
        return Err(Error::ProfileMismatch(format!(
            "profile sizes {} and {} differ",
            m,
            p2.top_words.len()
        )));
    }
    if m == 0 {
        return Err(Error::EmptySet);
    }
    let a: HashSet<&String> = p1.top_words.iter().collect();
    let overlap = p2.top_words.iter().filter(|w| a.contains(w)).count();
    Ok(1.0 - overlap as f64 / m as f64)
}

/// One row of a shift report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub kind: TokenKind,
    pub epoch_a: i64,
    pub epoch_b: i64,
    pub k: usize,
    pub shift: f64,
}

/// Shift rows for each kind between two corpora. Kinds with no tokens in
/// either corpus are skipped.
pub fn shift_report(a: &[Document], b: &[Document], kinds: &[TokenKind], k: usize) -> Result<Vec<ShiftRow>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        let (va, vb) = match (top_k_vocab(a, kind, k), top_k_vocab(b, kind, k)) {
            (Ok(va), Ok(vb)) => (va, vb),
            (Err(Error::EmptySet), _) | (_, Err(Error::EmptySet)) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        rows.push(ShiftRow {
            kind,
            epoch_a: va.epoch,
            epoch_b: vb.epoch,
            k,
            shift: vocab_shift(&va, &vb)?,
        });
    }
    Ok(rows)
}

/// Writes rows as CSV with header `kind,epoch_a,epoch_b,k,shift`.
pub fn write_shift_csv<W: Write>(mut w: W, rows: &[ShiftRow]) -> std::io::Result<()> {
    writeln!(w, "kind,epoch_a,epoch_b,k,shift")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{:.6}", r.kind, r.epoch_a, r.epoch_b, r.k, r.shift)?;
    }
    Ok(())
}
