//! Per-document drift signals for hard-example sampling.
//!
//! Every scorer produces a raw per-document value and maps it to `w_s` in
//! `[0, 1]` by dividing by the pool maximum. `w_t` is the document length in
//! pieces, normalized by [`normalize_length`].

mod embedding;
mod mlm;

pub use embedding::{cosine_distance, EmbeddingSnapshot, SentenceEmbeddingSet};
pub use mlm::{MaskSelection, UnigramSurprisal, DEFAULT_MAX_MASKS};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    TokenShift,
    SentenceShift,
    MlmLoss,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::TokenShift => "token",
            SignalKind::SentenceShift => "sentence",
            SignalKind::MlmLoss => "mlm",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" | "token_shift" => Ok(SignalKind::TokenShift),
            "sentence" | "sentence_shift" => Ok(SignalKind::SentenceShift),
            "mlm" | "mlm_loss" => Ok(SignalKind::MlmLoss),
            other => Err(Error::invalid(format!("unknown signal `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalScore {
    pub doc_id: String,
    /// Drift signal in `[0, 1]`.
    pub w_s: f64,
    /// Normalized length in `[0, 1]`.
    pub w_t: f64,
    pub signal_kind: SignalKind,
}

/// `min(1, pieces / 10)`.
pub fn normalize_length(piece_count: usize) -> f64 {
    (piece_count as f64 / 10.0).min(1.0)
}

/// Divides each raw score by the pool maximum; all zeros if the maximum is 0.
pub fn normalize_pool(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = raw.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::invalid(format!("raw signal {bad} is not a finite non-negative number")));
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|r| r / max).collect())
}

/// Builds scores from raw values, sorted by document id.
fn build_scores(
    docs: &[Document],
    raw: Vec<f64>,
    lengths: Vec<usize>,
    kind: SignalKind,
) -> Result<Vec<SignalScore>> {
    let w_s = normalize_pool(&raw)?;
    let mut scores: Vec<SignalScore> = docs
        .iter()
        .zip(w_s)
        .zip(lengths)
        .map(|((d, w_s), len)| SignalScore {
            doc_id: d.id.clone(),
            w_s,
            w_t: normalize_length(len),
            signal_kind: kind,
        })
        .collect();
    scores.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(scores)
}

fn tokenized(docs: &[Document], vocab: &Vocabulary) -> Vec<Vec<String>> {
    docs.par_iter()
        .map(|d| vocab.tokenize_document(d, vocab.mode()).pieces)
        .collect()
}

/// Per-token shift weights.
///
/// With both checkpoints, the `top_x` tokens with the largest cosine distance
/// between `prev` and `curr` keep their distance (ties lexicographic) and all
/// others score 0. Without a preceding checkpoint every token in `new_tokens`
/// scores 1.
pub fn token_shift_scores(
    prev: Option<&EmbeddingSnapshot>,
    curr: Option<&EmbeddingSnapshot>,
    top_x: usize,
    new_tokens: &BTreeSet<String>,
) -> Result<BTreeMap<String, f64>> {
    if top_x == 0 {
        return Err(Error::invalid("top_x must be at least 1"));
    }
    let (prev, curr) = match (prev, curr) {
        (None, _) => return Ok(new_tokens.iter().map(|t| (t.clone(), 1.0)).collect()),
        (Some(_), None) => return Err(Error::invalid("a preceding checkpoint needs a current one")),
        (Some(p), Some(c)) => (p, c),
    };
    if prev.dim() != curr.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            actual: curr.dim(),
        });
    }
    let shared: Vec<(&str, &[f64], &[f64])> = prev
        .iter()
        .filter_map(|(t, u)| curr.get(t).map(|v| (t, u, v)))
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut distances = shared
        .par_iter()
        .map(|(t, u, v)| {
            cosine_distance(u, v)
                .map(|d| (t.to_string(), d))
                .map_err(|e| match e {
                    Error::ZeroVector(_) => Error::ZeroVector(t.to_string()),
                    other => other,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    distances.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    distances.truncate(top_x);
    Ok(distances.into_iter().collect())
}

/// Default `top_x`: 5% of the tokens shared by two checkpoints, at least 1.
pub fn default_top_x(prev: &EmbeddingSnapshot, curr: &EmbeddingSnapshot) -> usize {
    let shared = prev.iter().filter(|(t, _)| curr.get(t).is_some()).count();
    (shared / 20).max(1)
}

/// Scores documents by the summed shift weight of their pieces.
pub fn score_documents_token(
    docs: &[Document],
    token_scores: &BTreeMap<String, f64>,
    vocab: &Vocabulary,
) -> Result<Vec<SignalScore>> {
    let pieces = tokenized(docs, vocab);
    let raw = pieces
        .iter()
        .map(|ps| ps.iter().filter_map(|p| token_scores.get(p)).sum())
        .collect();
    let lengths = pieces.iter().map(Vec::len).collect();
    build_scores(docs, raw, lengths, SignalKind::TokenShift)
}

/// Scores documents by the cosine distance of their sentence embeddings
/// between two checkpoints. Without a preceding checkpoint every `w_s` is 0
/// and sampling is driven by length alone.
pub fn score_documents_sentence(
    prev: Option<&SentenceEmbeddingSet>,
    curr: Option<&SentenceEmbeddingSet>,
    docs: &[Document],
    vocab: &Vocabulary,
) -> Result<Vec<SignalScore>> {
    let lengths: Vec<usize> = docs.par_iter().map(|d| vocab.piece_count(d)).collect();
    let raw = match (prev, curr) {
        (None, _) => vec![0.0; docs.len()],
        (Some(_), None) => return Err(Error::invalid("a preceding checkpoint needs a current one")),
        (Some(p), Some(c)) => docs
            .iter()
            .map(|d| {
                let u = p.get(&d.id).ok_or_else(|| Error::MissingDocId(d.id.clone()))?;
                let v = c.get(&d.id).ok_or_else(|| Error::MissingDocId(d.id.clone()))?;
                cosine_distance(u, v).map_err(|e| match e {
                    Error::ZeroVector(_) => Error::ZeroVector(d.id.clone()),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    build_scores(docs, raw, lengths, SignalKind::SentenceShift)
}

/// Mean-of-piece-vectors sentence embeddings derived from a token snapshot.
///
/// Documents with no embedded piece get the first unit vector, so they show no
/// shift between two derived sets.
pub fn sentence_embeddings_from_tokens(
    snapshot: &EmbeddingSnapshot,
    docs: &[Document],
    vocab: &Vocabulary,
) -> Result<SentenceEmbeddingSet> {
    let dim = snapshot.dim();
    let mut out = EmbeddingSnapshot::new(dim, format!("{}-sentences", snapshot.label))?;
    for (doc, pieces) in docs.iter().zip(tokenized(docs, vocab)) {
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        for v in pieces.iter().filter_map(|p| snapshot.get(p)) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
        if n == 0 || sum.iter().all(|x| *x == 0.0) {
            sum = vec![0.0; dim];
            sum[0] = 1.0;
        } else {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        out.insert(doc.id.clone(), sum)?;
    }
    Ok(out)
}

/// Surrogate masked-LM loss: smoothed-unigram surprisal of the rarest pieces
/// of each document against `reference_docs`.
pub fn surrogate_mlm_loss(
    docs: &[Document],
    reference_docs: &[Document],
    vocab: &Vocabulary,
    max_masks: usize,
    selection: MaskSelection,
) -> Result<Vec<SignalScore>> {
    if max_masks == 0 {
        return Err(Error::invalid("max_masks must be at least 1"));
    }
    let model = UnigramSurprisal::fit(reference_docs, vocab)?;
    let pieces = tokenized(docs, vocab);
    let raw = docs
        .par_iter()
        .zip(&pieces)
        .map(|(d, ps)| model.masked_loss(&d.id, ps, max_masks, selection))
        .collect();
    let lengths = pieces.iter().map(Vec::len).collect();
    build_scores(docs, raw, lengths, SignalKind::MlmLoss)
}

/// Normalizes externally computed raw scores (for example real masked-LM
/// losses) over `docs`.
pub fn external_scores(
    docs: &[Document],
    raw: &BTreeMap<String, f64>,
    kind: SignalKind,
    vocab: &Vocabulary,
) -> Result<Vec<SignalScore>> {
    let values = docs
        .iter()
        .map(|d| raw.get(&d.id).copied().ok_or_else(|| Error::MissingDocId(d.id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let lengths = docs.par_iter().map(|d| vocab.piece_count(d)).collect();
    build_scores(docs, values, lengths, kind)
}

/// Reads `doc_id<TAB>raw_score` lines.
pub fn read_raw_scores<R: BufRead>(r: R) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(id, v)| v.trim().parse::<f64>().ok().map(|v| (id.to_string(), v)));
        let Some((id, v)) = parsed else {
            return Err(Error::Parse {
                line: lineno,
                message: "expected doc_id<TAB>raw_score".into(),
            });
        };
        if out.insert(id.clone(), v).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}

pub fn load_raw_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_scores(BufReader::new(file))
}

const SCORES_HEADER: &str = "doc_id\tw_s\tw_t\tsignal";

/// Writes scores as TSV with header `doc_id  w_s  w_t  signal`.
pub fn write_scores<W: Write>(mut w: W, scores: &[SignalScore]) -> std::io::Result<()> {
    writeln!(w, "{SCORES_HEADER}")?;
    for s in scores {
        writeln!(w, "{}\t{}\t{}\t{}", s.doc_id, s.w_s, s.w_t, s.signal_kind)?;
    }
    Ok(())
}

pub fn save_scores(path: impl AsRef<Path>, scores: &[SignalScore]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scores(&mut w, scores)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_scores<R: BufRead>(r: R) -> Result<Vec<SignalScore>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.is_empty() || (lineno == 1 && line == SCORES_HEADER) {
            continue;
        }
        let err = |m: &str| Error::Parse {
            line: lineno,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(err("expected doc_id<TAB>w_s<TAB>w_t<TAB>signal"));
        }
        let unit = |s: &str| s.parse::<f64>().ok().filter(|v| (0.0..=1.0).contains(v));
        let w_s = unit(f[1]).ok_or_else(|| err("w_s must be a number in [0, 1]"))?;
        let w_t = unit(f[2]).ok_or_else(|| err("w_t must be a number in [0, 1]"))?;
        let signal_kind = f[3].parse().map_err(|e: Error| err(&e.to_string()))?;
        out.push(SignalScore {
            doc_id: f[0].to_string(),
            w_s,
            w_t,
            signal_kind,
        });
    }
    Ok(out)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<SignalScore>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores(BufReader::new(file))
}
