//! Corpus ingestion and text normalization.
//!
//! Records arrive as line-delimited JSON objects with `id`, `text` and `year`
//! keys. Normalization lowercases the text, collapses whitespace and replaces
//! URLs, user mentions and email addresses with the entity tokens [`URL`],
//! [`USER`] and [`EMAIL`]. Entity tokens stay uppercase so they survive
//! lowercasing and remain atomic downstream.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const URL: &str = "URL";
pub const USER: &str = "@USER";
pub const EMAIL: &str = "EMAIL";

/// The three entity tokens emitted by [`normalize_text`].
pub const ENTITY_TOKENS: [&str; 3] = [URL, USER, EMAIL];

/// One line of an input corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    #[serde(rename = "year")]
    pub epoch: i64,
}

/// A normalized record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub epoch: i64,
    /// Number of whitespace-separated tokens in `text`.
    pub token_count: usize,
}

impl Document {
    /// Builds a document from already-normalized text.
    pub fn new(id: impl Into<String>, text: impl Into<String>, epoch: i64) -> Self {
        let text = text.into();
        let token_count = text.split_whitespace().count();
        Document {
            id: id.into(),
            text,
            epoch,
            token_count,
        }
    }

    /// Normalizes a raw record.
    pub fn from_raw(raw: RawRecord) -> Self {
        Document::new(raw.id, normalize_text(&raw.text), raw.epoch)
    }

    pub fn words(&self) -> std::str::SplitWhitespace<'_> {
        self.text.split_whitespace()
    }

    fn to_record(&self) -> RawRecord {
        RawRecord {
            id: self.id.clone(),
            text: self.text.clone(),
            epoch: self.epoch,
        }
    }
}

fn entity_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"(?P<email>\b[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}\b)",
            r"|(?P<url>\b(?:(?i:https?://)|(?i:t\.co/))\S*)",
            // `\B` before `@` means the previous character is not a word character.
            r"|(?P<mention>\B@\w+)",
            r"|(?P<canon>\b(?:URL|EMAIL)\b)",
        ))
        .expect("entity regex")
    })
}

/// Lowercases `raw`, replaces URLs, mentions and emails with entity tokens,
/// and collapses runs of whitespace into single spaces.
///
/// The function is idempotent.
pub fn normalize_text(raw: &str) -> String {
    let re = entity_regex();
    let mut out = String::with_capacity(raw.len());
    for (i, word) in raw.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut last = 0;
        for caps in re.captures_iter(word) {
            let m = caps.get(0).expect("whole match");
            out.extend(word[last..m.start()].chars().flat_map(char::to_lowercase));
            let replacement = if caps.name("email").is_some() {
                EMAIL
            } else if caps.name("url").is_some() {
                URL
            } else if caps.name("mention").is_some() {
                USER
            } else {
                m.as_str()
            };
            out.push_str(replacement);
            last = m.end();
        }
        out.extend(word[last..].chars().flat_map(char::to_lowercase));
    }
    out
}

/// Parses a JSONL corpus from a reader. Blank lines are skipped.
///
/// Duplicate ids are rejected; the first occurrence wins the error report.
pub fn read_documents<R: BufRead>(reader: R, epoch_filter: Option<i64>) -> Result<Vec<Document>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty id".into(),
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        if epoch_filter.is_some_and(|e| e != raw.epoch) {
            continue;
        }
        docs.push(Document::from_raw(raw));
    }
    Ok(docs)
}

/// Reads and normalizes a JSONL corpus file, optionally keeping one epoch.
pub fn ingest(path: impl AsRef<Path>, epoch_filter: Option<i64>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_documents(BufReader::new(file), epoch_filter)
}

/// Writes documents in the input schema (`id`, `text`, `year`).
pub fn write_documents<W: Write>(mut writer: W, docs: &[Document]) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut writer, &doc.to_record())?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_documents_to(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_documents(&mut w, docs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// The most common epoch label in `docs`, smallest label on ties.
pub fn dominant_epoch(docs: &[Document]) -> Option<i64> {
    let mut counts = std::collections::BTreeMap::new();
    for d in docs {
        *counts.entry(d.epoch).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(e, _)| e)
}
