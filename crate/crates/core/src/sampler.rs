//! Weighted sampling without replacement and the iterative hard-example loop.
//!
//! Each document gets the key `u^(1/cw)` where `u` is uniform on `(0, 1)` and
//! `cw = clamp(α·w_s + (1-α)·w_t, min_weight, 1)`. Taking the `k` largest keys
//! is weighted sampling without replacement. `u` is derived by hashing
//! `(seed, iteration, doc_id)`, so results do not depend on evaluation order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::seeding::uniform_open;
use crate::signals::{
    score_documents_sentence, score_documents_token, sentence_embeddings_from_tokens,
    surrogate_mlm_loss, token_shift_scores, default_top_x, external_scores, EmbeddingSnapshot,
    MaskSelection, SentenceEmbeddingSet, SignalKind, SignalScore, DEFAULT_MAX_MASKS,
};
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Weight of the drift signal against normalized length.
    pub alpha: f64,
    /// Floor for the combined weight.
    pub min_weight: f64,
    pub seed: u64,
    pub iteration_sizes: Vec<usize>,
    /// Shifted tokens kept per iteration; `None` means 5% of the shared tokens.
    pub top_x: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            alpha: 0.5,
            min_weight: 1e-6,
            seed: 0,
            iteration_sizes: Vec::new(),
            top_x: None,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} is outside [0, 1]", self.alpha)));
        }
        if !(self.min_weight > 0.0 && self.min_weight <= 1.0) {
            return Err(Error::invalid(format!("min_weight {} is outside (0, 1]", self.min_weight)));
        }
        if self.iteration_sizes.contains(&0) {
            return Err(Error::invalid("iteration sizes must be positive"));
        }
        if self.top_x == Some(0) {
            return Err(Error::invalid("top_x must be positive"));
        }
        Ok(())
    }
}

/// Splits `budget` into three iterations in the ratio 10 : 8 : 6.
pub fn ratio_sizes(budget: usize) -> Vec<usize> {
    let a = (budget as f64 * 10.0 / 24.0).round() as usize;
    let b = (budget as f64 * 8.0 / 24.0).round() as usize;
    vec![a, b, budget.saturating_sub(a + b)]
}

/// Parses `a,b,c` or the preset `paper-ratio:<budget>`.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    if let Some(budget) = spec.strip_prefix("paper-ratio:") {
        let budget: usize = budget
            .parse()
            .map_err(|_| Error::invalid(format!("bad budget `{budget}`")))?;
        return Ok(ratio_sizes(budget));
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::invalid(format!("bad iteration size `{s}`")))
        })
        .collect()
}

/// `clamp(α·w_s + (1-α)·w_t, min_weight, 1)`.
pub fn combined_weight(w_s: f64, w_t: f64, cfg: &SamplingConfig) -> f64 {
    (cfg.alpha * w_s + (1.0 - cfg.alpha) * w_t).clamp(cfg.min_weight, 1.0)
}

/// `u^(1/cw)`.
pub fn sampling_key(u: f64, w_s: f64, w_t: f64, cfg: &SamplingConfig) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!("u = {u} is outside (0, 1)")));
    }
    Ok(u.powf(1.0 / combined_weight(w_s, w_t, cfg)))
}

/// `ln(u) / cw`: same order as [`sampling_key`] without underflow.
fn log_key(u: f64, cw: f64) -> f64 {
    u.ln() / cw
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub iteration: usize,
    pub doc_ids: Vec<String>,
    pub seed: u64,
    pub signal_kind: SignalKind,
}

impl SampleManifest {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# iteration={}", self.iteration)?;
        writeln!(w, "# signal={}", self.signal_kind)?;
        for id in &self.doc_ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut doc_ids = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: "expected `# key=value`".into(),
                })?;
                header.insert(k.to_string(), (lineno, v.to_string()));
            } else if !line.is_empty() {
                doc_ids.push(line);
            }
        }
        let field = |k: &str| {
            header.get(k).cloned().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing `# {k}=` header"),
            })
        };
        let bad = |(line, v): (usize, String)| Error::Parse {
            line,
            message: format!("bad header value `{v}`"),
        };
        let (l, v) = field("seed")?;
        let seed = v.parse().map_err(|_| bad((l, v)))?;
        let (l, v) = field("iteration")?;
        let iteration = v.parse().map_err(|_| bad((l, v)))?;
        let (l, v) = field("signal")?;
        let signal_kind = v.parse().map_err(|_| bad((l, v)))?;
        Ok(SampleManifest {
            iteration,
            doc_ids,
            seed,
            signal_kind,
        })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let mut buf = Vec::new();
        self.write(&mut buf).expect("write to Vec");
        fs::write(&tmp, buf).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

/// File name of one iteration's manifest inside a run directory.
pub fn manifest_file_name(iteration: usize) -> String {
    format!("iteration_{iteration:03}.txt")
}

pub fn save_manifests(dir: impl AsRef<Path>, manifests: &[SampleManifest]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifests
        .iter()
        .map(|m| {
            let path = dir.join(manifest_file_name(m.iteration));
            m.save(&path).map(|_| path)
        })
        .collect()
}

/// Loads every `iteration_*.txt` manifest in `dir`, ordered by iteration.
pub fn load_manifests(dir: impl AsRef<Path>) -> Result<Vec<SampleManifest>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("iteration_") && n.ends_with(".txt"))
        })
        .collect();
    paths.sort();
    let mut manifests = paths
        .iter()
        .map(SampleManifest::load)
        .collect::<Result<Vec<_>>>()?;
    manifests.sort_by_key(|m| m.iteration);
    Ok(manifests)
}

/// Samples `k` documents at a given iteration.
pub fn weighted_sample_at(
    pool: &[SignalScore],
    k: usize,
    cfg: &SamplingConfig,
    iteration: usize,
) -> Result<SampleManifest> {
    cfg.validate()?;
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "sample size {k} must be between 1 and the pool size {}",
            pool.len()
        )));
    }
    let mut seen = HashSet::with_capacity(pool.len());
    if let Some(dup) = pool.iter().find(|s| !seen.insert(s.doc_id.as_str())) {
        return Err(Error::DuplicateId(dup.doc_id.clone()));
    }
    let mut keyed: Vec<(f64, &str)> = pool
        .par_iter()
        .map(|s| {
            let u = uniform_open(cfg.seed, iteration, &s.doc_id);
            (log_key(u, combined_weight(s.w_s, s.w_t, cfg)), s.doc_id.as_str())
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let signal_kind = pool[0].signal_kind;
    Ok(SampleManifest {
        iteration,
        doc_ids: keyed[..k].iter().map(|(_, id)| id.to_string()).collect(),
        seed: cfg.seed,
        signal_kind,
    })
}

/// Samples `k` documents (iteration 1).
pub fn weighted_sample(pool: &[SignalScore], k: usize, cfg: &SamplingConfig) -> Result<SampleManifest> {
    weighted_sample_at(pool, k, cfg, 1)
}

/// Supplies per-iteration scores for the documents still in the pool.
///
/// Iteration 1 uses the first-iteration rule of each signal; later iterations
/// compare the latest pair of checkpoints.
pub trait SignalProvider {
    fn kind(&self) -> SignalKind;
    fn scores(&mut self, iteration: usize, docs: &[Document]) -> Result<Vec<SignalScore>>;
}

/// Checkpoint pair for an iteration: `(k-2, k-1)`, clamped to the last pair.
fn checkpoint_pair<T>(checkpoints: &[T], iteration: usize) -> Option<(&T, &T)> {
    if iteration < 2 || checkpoints.len() < 2 {
        return None;
    }
    let hi = (iteration - 1).min(checkpoints.len() - 1);
    Some((&checkpoints[hi - 1], &checkpoints[hi]))
}

/// Token embedding shift. Iteration 1 weights documents by their count of new
/// tokens.
#[derive(Debug, Clone)]
pub struct TokenShiftSignal {
    pub vocab: Vocabulary,
    pub new_tokens: BTreeSet<String>,
    /// Token snapshots: base model first, then one per trained iteration.
    pub checkpoints: Vec<EmbeddingSnapshot>,
    pub top_x: Option<usize>,
}

impl SignalProvider for TokenShiftSignal {
    fn kind(&self) -> SignalKind {
        SignalKind::TokenShift
    }

    fn scores(&mut self, iteration: usize, docs: &[Document]) -> Result<Vec<SignalScore>> {
        let token_scores = match checkpoint_pair(&self.checkpoints, iteration) {
            None => token_shift_scores(None, None, 1, &self.new_tokens)?,
            Some((prev, curr)) => {
                let top_x = self.top_x.unwrap_or_else(|| default_top_x(prev, curr));
                token_shift_scores(Some(prev), Some(curr), top_x, &self.new_tokens)?
            }
        };
        score_documents_token(docs, &token_scores, &self.vocab)
    }
}

/// Sentence embedding shift. Iteration 1 weights by length alone.
#[derive(Debug, Clone)]
pub struct SentenceShiftSignal {
    pub vocab: Vocabulary,
    pub checkpoints: Vec<SentenceEmbeddingSet>,
}

impl SentenceShiftSignal {
    /// Derives sentence sets from token snapshots by averaging piece vectors.
    pub fn from_token_checkpoints(
        vocab: Vocabulary,
        token_checkpoints: &[EmbeddingSnapshot],
        docs: &[Document],
    ) -> Result<Self> {
        let checkpoints = token_checkpoints
            .iter()
            .map(|s| sentence_embeddings_from_tokens(s, docs, &vocab))
            .collect::<Result<Vec<_>>>()?;
        Ok(SentenceShiftSignal { vocab, checkpoints })
    }
}

impl SignalProvider for SentenceShiftSignal {
    fn kind(&self) -> SignalKind {
        SignalKind::SentenceShift
    }

    fn scores(&mut self, iteration: usize, docs: &[Document]) -> Result<Vec<SignalScore>> {
        match checkpoint_pair(&self.checkpoints, iteration) {
            None => score_documents_sentence(None, None, docs, &self.vocab),
            Some((p, c)) => score_documents_sentence(Some(p), Some(c), docs, &self.vocab),
        }
    }
}

/// Masked-LM loss, either supplied externally or from the unigram surrogate.
#[derive(Debug, Clone)]
pub struct MlmLossSignal {
    pub vocab: Vocabulary,
    pub reference: Vec<Document>,
    pub max_masks: usize,
    pub selection: MaskSelection,
    pub external: Option<BTreeMap<String, f64>>,
}

impl MlmLossSignal {
    pub fn surrogate(vocab: Vocabulary, reference: Vec<Document>) -> Self {
        MlmLossSignal {
            vocab,
            reference,
            max_masks: DEFAULT_MAX_MASKS,
            selection: MaskSelection::RarestFirst,
            external: None,
        }
    }
}

impl SignalProvider for MlmLossSignal {
    fn kind(&self) -> SignalKind {
        SignalKind::MlmLoss
    }

    fn scores(&mut self, _iteration: usize, docs: &[Document]) -> Result<Vec<SignalScore>> {
        match &self.external {
            Some(raw) => external_scores(docs, raw, SignalKind::MlmLoss, &self.vocab),
            None => surrogate_mlm_loss(docs, &self.reference, &self.vocab, self.max_masks, self.selection),
        }
    }
}

/// Runs one sampling round per entry of `cfg.iteration_sizes`.
///
/// Each round rescores the documents not yet selected and samples the next
/// size from them, so no id appears twice across the run.
pub fn run_iterative_sampling(
    pool_docs: &[Document],
    provider: &mut dyn SignalProvider,
    cfg: &SamplingConfig,
) -> Result<Vec<SampleManifest>> {
    cfg.validate()?;
    if cfg.iteration_sizes.is_empty() {
        return Err(Error::invalid("no iteration sizes given"));
    }
    let mut selected: HashSet<String> = HashSet::new();
    let mut manifests = Vec::with_capacity(cfg.iteration_sizes.len());
    for (i, &size) in cfg.iteration_sizes.iter().enumerate() {
        let iteration = i + 1;
        let remaining: Vec<Document> = pool_docs
            .iter()
            .filter(|d| !selected.contains(&d.id))
            .cloned()
            .collect();
        if remaining.len() < size {
            return Err(Error::PoolExhausted {
                iteration,
                needed: size,
                available: remaining.len(),
            });
        }
        let scores = provider.scores(iteration, &remaining)?;
        let manifest = weighted_sample_at(&scores, size, cfg, iteration)?;
        for id in &manifest.doc_ids {
            if !selected.insert(id.clone()) {
                return Err(Error::Invariant(format!("`{id}` sampled twice")));
            }
        }
        manifests.push(manifest);
    }
    Ok(manifests)
}
