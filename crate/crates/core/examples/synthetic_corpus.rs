//! Write two synthetic epochs as JSONL, ready for the command-line tool.
//!
//!     cargo run --example synthetic_corpus -- data/
//!     vocabdrift build-vocab --in data/old.jsonl --out data/vocab.tsv

use std::path::PathBuf;

use vocabdrift::corpus::write_documents_to;
use vocabdrift::synth::{generate, SynthConfig};

fn main() -> vocabdrift::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    std::fs::create_dir_all(&dir).map_err(|e| vocabdrift::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let corpus = generate(&SynthConfig::default())?;
    write_documents_to(dir.join("old.jsonl"), &corpus.old)?;
    write_documents_to(dir.join("new.jsonl"), &corpus.new)?;
    println!(
        "{} + {} documents in {}; injected: {}",
        corpus.old.len(),
        corpus.new.len(),
        dir.display(),
        corpus.injected.join(" ")
    );
    Ok(())
}
