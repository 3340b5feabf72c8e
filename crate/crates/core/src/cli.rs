//! Command-line front end. Exit codes: 0 ok, 1 input error, 2 invariant violation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::corpus::{ingest, write_documents_to, Document};
use crate::drift::{cooccurrence_profile, semantic_shift_rate, shift_report, write_shift_csv, TokenKind};
use crate::error::{Error, Result};
use crate::pipeline::{
    emit_report, monitor_stream, resolve_seed, run_epoch, write_monitor_csv, EpochConfig, MonitorState,
    DEFAULT_SHIFT_K,
};
use crate::sampler::{
    parse_sizes, run_iterative_sampling, save_manifests, weighted_sample_at, MlmLossSignal, SamplingConfig,
    SentenceShiftSignal, SignalProvider, TokenShiftSignal,
};
use crate::signals::{
    default_top_x, external_scores, load_raw_scores, load_scores, save_scores, score_documents_sentence,
    score_documents_token, surrogate_mlm_loss, token_shift_scores, EmbeddingSnapshot, MaskSelection,
    SignalKind, DEFAULT_MAX_MASKS,
};
use crate::tokenizer::{induce_vocabulary, HashtagMode, VocabConfig, Vocabulary};
use crate::vocab_update::{update_vocabulary, VocabUpdate};

#[derive(Debug, Parser)]
#[command(name = "vocabdrift", version, about = "Dynamic vocabularies and hard-example mining for drifting text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a JSONL corpus.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep only records from this year.
        #[arg(long)]
        year: Option<i64>,
    },
    /// Induce a WordPiece vocabulary from a normalized corpus.
    BuildVocab {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = VocabConfig::default().wordpiece_capacity)]
        wp_cap: usize,
        #[arg(long, default_value_t = VocabConfig::default().hashtag_capacity)]
        ht_cap: usize,
        /// `whole` or `break`.
        #[arg(long, default_value = "whole")]
        mode: HashtagMode,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokenize a corpus into JSONL `{id, pieces}` records.
    Tokenize {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print OOV rate and fertility as JSON.
    Stats {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Top-K vocabulary shift between two corpora.
    ShiftReport {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Repeatable; all kinds when omitted.
        #[arg(long)]
        kind: Vec<TokenKind>,
        #[arg(long, default_value_t = DEFAULT_SHIFT_K)]
        k: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semantic shift of one token via its top co-occurring words.
    CoocShift {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        anchor: String,
        #[arg(long, default_value_t = 100)]
        m: usize,
    },
    /// Fixed-size vocabulary update against a new corpus.
    UpdateVocab {
        #[arg(long)]
        current: PathBuf,
        #[arg(long)]
        new: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Score documents with a drift signal.
    Score {
        #[arg(long)]
        signal: SignalKind,
        #[arg(long)]
        docs: PathBuf,
        /// Vocabulary for piece counts; induced from the documents when omitted.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        prev: Option<PathBuf>,
        #[arg(long)]
        curr: Option<PathBuf>,
        #[arg(long)]
        top_x: Option<usize>,
        /// Reference corpus for the surrogate masked-LM loss.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// External raw scores, `doc_id<TAB>raw`.
        #[arg(long)]
        ext: Option<PathBuf>,
        /// Update plan whose added tokens are new for the token signal.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted sample of `k` documents from a score file.
    Sample {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        iteration: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterative hard-example mining.
    Mine {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        signal: SignalKind,
        /// `a,b,c` or `paper-ratio:<budget>`.
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Token snapshots, oldest first.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        top_x: Option<usize>,
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long)]
        ext: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// One full incremental epoch into a run directory.
    Pipeline {
        #[arg(long)]
        old: PathBuf,
        #[arg(long)]
        new: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value = "token")]
        signal: SignalKind,
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long, default_value_t = DEFAULT_SHIFT_K)]
        k: usize,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        top_x: Option<usize>,
        #[arg(long)]
        ext: Option<PathBuf>,
        /// Monitor the old-then-new stream with this window size.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        patience: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Windowed loss monitor over a document stream.
    Monitor {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        patience: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run directory into summary.json and manifest_sizes.csv.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_or_stdout(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            f(&mut w).map_err(|e| Error::io(path, e))?;
            finish(w, path)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_vocab_or_induce(vocab: Option<&Path>, docs: &[Document]) -> Result<Vocabulary> {
    match vocab {
        Some(p) => Vocabulary::load(p),
        None => induce_vocabulary(docs, &VocabConfig::default()),
    }
}

fn load_plan_tokens(plan: Option<&Path>) -> Result<BTreeSet<String>> {
    let Some(path) = plan else {
        return Ok(BTreeSet::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let update: VocabUpdate = serde_json::from_str(&text)?;
    Ok(update.added_tokens().map(str::to_string).collect())
}

fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<EmbeddingSnapshot>> {
    paths.iter().map(EmbeddingSnapshot::load).collect()
}

fn load_ext(path: Option<&Path>) -> Result<Option<BTreeMap<String, f64>>> {
    path.map(load_raw_scores).transpose()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { input, out, year } => {
            let docs = ingest(&input, year)?;
            write_documents_to(&out, &docs)?;
            eprintln!("{} documents", docs.len());
        }
        Command::BuildVocab {
            input,
            wp_cap,
            ht_cap,
            mode,
            min_count,
            out,
        } => {
            let docs = ingest(&input, None)?;
            let cfg = VocabConfig {
                wordpiece_capacity: wp_cap,
                hashtag_capacity: if mode == HashtagMode::BreakDown { 0 } else { ht_cap },
                mode,
                min_count,
            };
            let vocab = induce_vocabulary(&docs, &cfg)?;
            vocab.save(&out)?;
            eprintln!(
                "{} wordpieces, {} hashtags",
                vocab.wordpieces().len(),
                vocab.hashtags().len()
            );
        }
        Command::Tokenize { vocab, input, out } => {
            let vocab = Vocabulary::load(&vocab)?;
            let docs = ingest(&input, None)?;
            let mut w = create(&out)?;
            for d in &docs {
                let pieces = vocab.tokenize_document(d, vocab.mode()).pieces;
                let line = serde_json::json!({ "id": d.id, "pieces": pieces });
                writeln!(w, "{line}").map_err(|e| Error::io(&out, e))?;
            }
            finish(w, &out)?;
        }
        Command::Stats { vocab, input } => {
            let vocab = Vocabulary::load(&vocab)?;
            let docs = ingest(&input, None)?;
            println!("{}", serde_json::to_string_pretty(&vocab.coverage(&docs)?)?);
        }
        Command::ShiftReport { a, b, kind, k, out } => {
            let (a, b) = (ingest(&a, None)?, ingest(&b, None)?);
            let kinds = if kind.is_empty() { TokenKind::ALL.to_vec() } else { kind };
            let rows = shift_report(&a, &b, &kinds, k)?;
            write_or_stdout(out.as_deref(), |w| write_shift_csv(w, &rows))?;
        }
        Command::CoocShift { a, b, anchor, m } => {
            let (a, b) = (ingest(&a, None)?, ingest(&b, None)?);
            let pa = cooccurrence_profile(&a, &anchor, m)?;
            let pb = cooccurrence_profile(&b, &anchor, m)?;
            println!("{:.6}", semantic_shift_rate(&pa, &pb)?);
        }
        Command::UpdateVocab {
            current,
            new,
            min_count,
            out,
            plan,
        } => {
            let current = Vocabulary::load(&current)?;
            let docs = ingest(&new, None)?;
            let (updated, update) = update_vocabulary(&current, &docs, min_count)?;
            updated.save(&out)?;
            update.save(&plan)?;
            eprintln!(
                "wordpieces: {} removed, {} added; hashtags: {} removed, {} added",
                update.wordpiece.removed.len(),
                update.wordpiece.added.len(),
                update.hashtag.removed.len(),
                update.hashtag.added.len()
            );
        }
        Command::Score {
            signal,
            docs,
            vocab,
            prev,
            curr,
            top_x,
            reference,
            ext,
            plan,
            out,
        } => {
            let docs = ingest(&docs, None)?;
            let vocab = load_vocab_or_induce(vocab.as_deref(), &docs)?;
            let prev = prev.map(EmbeddingSnapshot::load).transpose()?;
            let curr = curr.map(EmbeddingSnapshot::load).transpose()?;
            let scores = match (signal, load_ext(ext.as_deref())?) {
                (kind, Some(raw)) => external_scores(&docs, &raw, kind, &vocab)?,
                (SignalKind::TokenShift, None) => {
                    let new_tokens = load_plan_tokens(plan.as_deref())?;
                    let top_x = match (&prev, &curr, top_x) {
                        (_, _, Some(x)) => x,
                        (Some(p), Some(c), None) => default_top_x(p, c),
                        _ => 1,
                    };
                    let token_scores = token_shift_scores(prev.as_ref(), curr.as_ref(), top_x, &new_tokens)?;
                    score_documents_token(&docs, &token_scores, &vocab)?
                }
                (SignalKind::SentenceShift, None) => {
                    score_documents_sentence(prev.as_ref(), curr.as_ref(), &docs, &vocab)?
                }
                (SignalKind::MlmLoss, None) => {
                    let reference = match reference {
                        Some(p) => ingest(&p, None)?,
                        None => docs.clone(),
                    };
                    surrogate_mlm_loss(&docs, &reference, &vocab, DEFAULT_MAX_MASKS, MaskSelection::RarestFirst)?
                }
            };
            save_scores(&out, &scores)?;
        }
        Command::Sample {
            scores,
            k,
            alpha,
            seed,
            iteration,
            out,
        } => {
            let pool = load_scores(&scores)?;
            let cfg = SamplingConfig {
                alpha,
                seed: resolve_seed(seed)?,
                ..Default::default()
            };
            weighted_sample_at(&pool, k, &cfg, iteration)?.save(&out)?;
        }
        Command::Mine {
            docs,
            signal,
            sizes,
            seed,
            alpha,
            vocab,
            checkpoints,
            top_x,
            reference,
            ext,
            plan,
            out_dir,
        } => {
            let docs = ingest(&docs, None)?;
            let vocab = load_vocab_or_induce(vocab.as_deref(), &docs)?;
            let checkpoints = load_checkpoints(&checkpoints)?;
            let cfg = SamplingConfig {
                alpha,
                seed: resolve_seed(seed)?,
                iteration_sizes: parse_sizes(&sizes)?,
                top_x,
                ..Default::default()
            };
            let mut provider: Box<dyn SignalProvider> = match signal {
                SignalKind::TokenShift => Box::new(TokenShiftSignal {
                    vocab,
                    new_tokens: load_plan_tokens(plan.as_deref())?,
                    checkpoints,
                    top_x,
                }),
                SignalKind::SentenceShift => {
                    Box::new(SentenceShiftSignal::from_token_checkpoints(vocab, &checkpoints, &docs)?)
                }
                SignalKind::MlmLoss => {
                    let reference = match reference {
                        Some(p) => ingest(&p, None)?,
                        None => docs.clone(),
                    };
                    Box::new(MlmLossSignal {
                        external: load_ext(ext.as_deref())?,
                        ..MlmLossSignal::surrogate(vocab, reference)
                    })
                }
            };
            let manifests = run_iterative_sampling(&docs, provider.as_mut(), &cfg)?;
            for path in save_manifests(&out_dir, &manifests)? {
                eprintln!("{}", path.display());
            }
        }
        Command::Pipeline {
            old,
            new,
            vocab,
            signal,
            sizes,
            alpha,
            seed,
            min_count,
            k,
            checkpoints,
            top_x,
            ext,
            window,
            delta,
            patience,
            out,
        } => {
            let old = ingest(&old, None)?;
            let new = ingest(&new, None)?;
            let current = Vocabulary::load(&vocab)?;
            let (monitor_trace, trigger_window) = match window {
                Some(window) => {
                    let stream: Vec<Document> = old.iter().chain(&new).cloned().collect();
                    let trace = monitor_stream(&stream, &current, &MonitorState::new(window, delta, patience)?)?;
                    let trigger = trace.iter().find(|r| r.triggered).map(|r| r.window);
                    (trace, trigger)
                }
                None => (Vec::new(), None),
            };
            let cfg = EpochConfig {
                signal,
                sampling: SamplingConfig {
                    alpha,
                    seed: resolve_seed(seed)?,
                    iteration_sizes: parse_sizes(&sizes)?,
                    top_x,
                    ..Default::default()
                },
                min_count,
                shift_k: k,
                checkpoints: load_checkpoints(&checkpoints)?,
                external_scores: load_ext(ext.as_deref())?,
                trigger_window,
                monitor_trace,
            };
            let run = run_epoch(&current, &old, &new, &cfg)?;
            run.write(&out)?;
            emit_report(&out)?;
            eprintln!("run written to {}", out.display());
        }
        Command::Monitor {
            stream,
            vocab,
            window,
            delta,
            patience,
            out,
        } => {
            let stream = ingest(&stream, None)?;
            let vocab = Vocabulary::load(&vocab)?;
            let trace = monitor_stream(&stream, &vocab, &MonitorState::new(window, delta, patience)?)?;
            write_or_stdout(out.as_deref(), |w| write_monitor_csv(w, &trace))?;
        }
        Command::Report { run_dir } => {
            let report = emit_report(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
