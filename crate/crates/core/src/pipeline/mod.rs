//! The incremental loop: watch the loss stream, and when it deteriorates update
//! the vocabulary, mine hard examples and hand the manifests to training.
//!
//! A run directory holds:
//!
//! | file | content |
//! |---|---|
//! | `vocab.tsv` | updated vocabulary |
//! | `plan.json` | kept / removed / added per section |
//! | `epoch.json` | signal, seed and trigger window |
//! | `manifests/iteration_NNN.txt` | one sample manifest per iteration |
//! | `shift.csv` | vocabulary shift per token kind |
//! | `stats.csv` | OOV rate and fertility before and after the update |
//! | `monitor.csv` | monitor trace (may have no rows) |
//!
//! [`emit_report`] adds `summary.json` and `manifest_sizes.csv`.

mod monitor;

pub use monitor::{
    monitor_means, monitor_step, monitor_stream, read_monitor_csv, window_losses, write_monitor_csv,
    MonitorRecord, MonitorState,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::drift::{shift_report, write_shift_csv, ShiftRow, TokenKind};
use crate::error::{Error, Result, StageExt};
use crate::sampler::{
    load_manifests, run_iterative_sampling, save_manifests, MlmLossSignal, SampleManifest,
    SamplingConfig, SentenceShiftSignal, SignalProvider, TokenShiftSignal,
};
use crate::signals::{EmbeddingSnapshot, SignalKind};
use crate::tokenizer::{CoverageStats, Vocabulary};
use crate::vocab_update::{update_vocabulary, VocabUpdate};

/// Environment variable that overrides every seed given on the command line.
pub const SEED_ENV: &str = "VOCABDRIFT_SEED";

/// Default top-K for shift reports.
pub const DEFAULT_SHIFT_K: usize = 1000;

/// Applies [`SEED_ENV`] when set.
pub fn resolve_seed(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(seed),
    }
}

#[derive(Debug, Clone)]
pub struct EpochConfig {
    pub signal: SignalKind,
    pub sampling: SamplingConfig,
    pub min_count: u64,
    pub shift_k: usize,
    /// Token snapshots, oldest first, for the shift signals.
    pub checkpoints: Vec<EmbeddingSnapshot>,
    /// Externally computed raw losses for the `mlm` signal.
    pub external_scores: Option<BTreeMap<String, f64>>,
    /// Window that triggered this epoch; `None` for a manual run.
    pub trigger_window: Option<usize>,
    pub monitor_trace: Vec<MonitorRecord>,
}

impl Default for EpochConfig {
    fn default() -> Self {
        EpochConfig {
            signal: SignalKind::TokenShift,
            sampling: SamplingConfig::default(),
            min_count: 1,
            shift_k: DEFAULT_SHIFT_K,
            checkpoints: Vec::new(),
            external_scores: None,
            trigger_window: None,
            monitor_trace: Vec::new(),
        }
    }
}

/// What one incremental epoch hands to training.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub vocab_plan: VocabUpdate,
    pub manifests: Vec<SampleManifest>,
    pub trigger_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub vocab: String,
    #[serde(flatten)]
    pub stats: CoverageStats,
}

/// Everything an epoch produces, before it is written out.
#[derive(Debug, Clone)]
pub struct EpochRun {
    pub plan: EpochPlan,
    pub vocab: Vocabulary,
    pub shift: Vec<ShiftRow>,
    pub coverage: Vec<CoverageRow>,
    pub monitor: Vec<MonitorRecord>,
    pub signal: SignalKind,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Serialize)]
struct EpochMeta<'a> {
    signal: SignalKind,
    seed: u64,
    alpha: f64,
    iteration_sizes: &'a [usize],
    trigger_window: Option<usize>,
}

fn provider(
    signal: SignalKind,
    vocab: &Vocabulary,
    update: &VocabUpdate,
    old: &[Document],
    new: &[Document],
    cfg: &EpochConfig,
) -> Result<Box<dyn SignalProvider>> {
    Ok(match signal {
        SignalKind::TokenShift => Box::new(TokenShiftSignal {
            vocab: vocab.clone(),
            new_tokens: update.added_tokens().map(str::to_string).collect::<BTreeSet<_>>(),
            checkpoints: cfg.checkpoints.clone(),
            top_x: cfg.sampling.top_x,
        }),
        SignalKind::SentenceShift => Box::new(SentenceShiftSignal::from_token_checkpoints(
            vocab.clone(),
            &cfg.checkpoints,
            new,
        )?),
        SignalKind::MlmLoss => Box::new(MlmLossSignal {
            external: cfg.external_scores.clone(),
            ..MlmLossSignal::surrogate(vocab.clone(), old.to_vec())
        }),
    })
}

/// Updates the vocabulary against `new_corpus`, mines hard examples from it
/// and measures the shift from `old_corpus`.
pub fn run_epoch(
    current_vocab: &Vocabulary,
    old_corpus: &[Document],
    new_corpus: &[Document],
    cfg: &EpochConfig,
) -> Result<EpochRun> {
    if old_corpus.is_empty() || new_corpus.is_empty() {
        return Err(Error::EmptyCorpus).stage("pipeline");
    }
    cfg.sampling.validate().stage("sampler")?;
    let (vocab, update) = update_vocabulary(current_vocab, new_corpus, cfg.min_count).stage("vocab_update")?;

    let mut signal = provider(cfg.signal, &vocab, &update, old_corpus, new_corpus, cfg).stage("signals")?;
    let manifests = run_iterative_sampling(new_corpus, signal.as_mut(), &cfg.sampling).stage("sampler")?;

    let shift = shift_report(old_corpus, new_corpus, &TokenKind::ALL, cfg.shift_k).stage("drift")?;
    let coverage = vec![
        CoverageRow {
            vocab: "current".into(),
            stats: current_vocab.coverage(new_corpus).stage("tokenizer")?,
        },
        CoverageRow {
            vocab: "updated".into(),
            stats: vocab.coverage(new_corpus).stage("tokenizer")?,
        },
    ];
    Ok(EpochRun {
        plan: EpochPlan {
            vocab_plan: update,
            manifests,
            trigger_window: cfg.trigger_window,
        },
        vocab,
        shift,
        coverage,
        monitor: cfg.monitor_trace.clone(),
        signal: cfg.signal,
        sampling: cfg.sampling.clone(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_stats_csv<W: Write>(mut w: W, rows: &[CoverageRow]) -> std::io::Result<()> {
    writeln!(w, "vocab,words,pieces,oov_words,oov_rate,fertility")?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6}",
            r.vocab, s.words, s.pieces, s.oov_words, s.oov_rate, s.fertility
        )?;
    }
    Ok(())
}

impl EpochRun {
    /// Writes the run directory. Same run, same bytes.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.vocab.save(dir.join("vocab.tsv"))?;
        self.plan.vocab_plan.save(dir.join("plan.json"))?;
        let meta = EpochMeta {
            signal: self.signal,
            seed: self.sampling.seed,
            alpha: self.sampling.alpha,
            iteration_sizes: &self.sampling.iteration_sizes,
            trigger_window: self.plan.trigger_window,
        };
        write_file(&dir.join("epoch.json"), (serde_json::to_string_pretty(&meta)? + "\n").as_bytes())?;
        save_manifests(dir.join("manifests"), &self.plan.manifests)?;

        let mut buf = Vec::new();
        write_shift_csv(&mut buf, &self.shift).expect("write to Vec");
        write_file(&dir.join("shift.csv"), &buf)?;
        buf.clear();
        write_stats_csv(&mut buf, &self.coverage).expect("write to Vec");
        write_file(&dir.join("stats.csv"), &buf)?;
        buf.clear();
        write_monitor_csv(&mut buf, &self.monitor).expect("write to Vec");
        write_file(&dir.join("monitor.csv"), &buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestSize {
    pub iteration: usize,
    pub size: usize,
}

/// Tables collected from a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub shift: Vec<ShiftRow>,
    pub coverage: Vec<CoverageRow>,
    pub manifest_sizes: Vec<ManifestSize>,
    pub monitor: Vec<MonitorRecord>,
}

fn csv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.is_empty() {
            rows.push((idx + 1, line.split(',').map(str::to_string).collect()));
        }
    }
    Ok(rows)
}

fn bad_row(path: &Path, line: usize) -> Error {
    Error::Parse {
        line,
        message: format!("malformed row in {}", path.display()),
    }
}

fn read_shift(path: &Path) -> Result<Vec<ShiftRow>> {
    csv_rows(path)?
        .into_iter()
        .map(|(line, f)| {
            let row = (|| {
                if f.len() != 5 {
                    return None;
                }
                Some(ShiftRow {
                    kind: f[0].parse().ok()?,
                    epoch_a: f[1].parse().ok()?,
                    epoch_b: f[2].parse().ok()?,
                    k: f[3].parse().ok()?,
                    shift: f[4].parse().ok()?,
                })
            })();
            row.ok_or_else(|| bad_row(path, line))
        })
        .collect()
}

fn read_stats(path: &Path) -> Result<Vec<CoverageRow>> {
    csv_rows(path)?
        .into_iter()
        .map(|(line, f)| {
            let row = (|| {
                if f.len() != 6 {
                    return None;
                }
                Some(CoverageRow {
                    vocab: f[0].clone(),
                    stats: CoverageStats {
                        words: f[1].parse().ok()?,
                        pieces: f[2].parse().ok()?,
                        oov_words: f[3].parse().ok()?,
                        oov_rate: f[4].parse().ok()?,
                        fertility: f[5].parse().ok()?,
                    },
                })
            })();
            row.ok_or_else(|| bad_row(path, line))
        })
        .collect()
}

/// Collects a run directory into one report and writes `summary.json` and
/// `manifest_sizes.csv` next to the inputs.
pub fn emit_report(run_dir: impl AsRef<Path>) -> Result<RunReport> {
    let dir = run_dir.as_ref();
    let required = ["shift.csv", "stats.csv", "manifests", "monitor.csv"];
    let missing: Vec<String> = required
        .iter()
        .filter(|name| !dir.join(name).exists())
        .map(|name| name.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let manifests = load_manifests(dir.join("manifests"))?;
    if manifests.is_empty() {
        return Err(Error::MissingArtifacts(vec!["manifests".into()]));
    }
    let monitor_path = dir.join("monitor.csv");
    let monitor_file = fs::File::open(&monitor_path).map_err(|e| Error::io(&monitor_path, e))?;
    let report = RunReport {
        shift: read_shift(&dir.join("shift.csv"))?,
        coverage: read_stats(&dir.join("stats.csv"))?,
        manifest_sizes: manifests
            .iter()
            .map(|m| ManifestSize {
                iteration: m.iteration,
                size: m.doc_ids.len(),
            })
            .collect(),
        monitor: read_monitor_csv(BufReader::new(monitor_file))?,
    };

    let mut sizes = String::from("iteration,size\n");
    for m in &report.manifest_sizes {
        sizes.push_str(&format!("{},{}\n", m.iteration, m.size));
    }
    write_file(&dir.join("manifest_sizes.csv"), sizes.as_bytes())?;
    write_file(
        &dir.join("summary.json"),
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    Ok(report)
}
