use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Key → vector table from one model checkpoint.
///
/// Keys are tokens for token snapshots and document ids for sentence sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSnapshot {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    pub label: String,
}

/// Per-document sentence embeddings share the snapshot layout, keyed by doc id.
pub type SentenceEmbeddingSet = EmbeddingSnapshot;

impl EmbeddingSnapshot {
    pub fn new(dim: usize, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingSnapshot {
            dim,
            vectors: BTreeMap::new(),
            label: label.into(),
        })
    }

    pub fn from_vectors(
        label: impl Into<String>,
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut iter = vectors.into_iter().peekable();
        let dim = iter
            .peek()
            .map(|(_, v)| v.len())
            .ok_or_else(|| Error::invalid("empty embedding table"))?;
        let mut snap = Self::new(dim, label)?;
        for (k, v) in iter {
            snap.insert(k, v)?;
        }
        Ok(snap)
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.vectors.contains_key(&key) {
            return Err(Error::invalid(format!("duplicate embedding key `{key}`")));
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses `dim<TAB>D` followed by `key<TAB>v1 v2 … vD` lines.
    pub fn read_tsv<R: BufRead>(r: R, label: impl Into<String>) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let dim = match lines.next() {
            Some((_, Ok(header))) => {
                let mut f = header.split('\t');
                match (f.next(), f.next()) {
                    (Some("dim"), Some(d)) => d
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| parse_err(1, format!("bad dimension `{d}`")))?,
                    _ => return Err(parse_err(1, "expected `dim<TAB>D` header".into())),
                }
            }
            Some((_, Err(e))) => return Err(parse_err(1, e.to_string())),
            None => return Err(parse_err(1, "empty embedding file".into())),
        };
        let mut snap = Self::new(dim, label)?;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno, "expected key<TAB>values".into()))?;
            let vector = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| parse_err(lineno, "non-numeric vector component".into()))?;
            snap.insert(key, vector)
                .map_err(|e| parse_err(lineno, e.to_string()))?;
        }
        Ok(snap)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), label)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dim\t{}", self.dim)?;
        for (k, v) in &self.vectors {
            let values: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{k}\t{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_tsv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// `1 - u·v / (|u| |v|)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroVector("left operand".into()));
    }
    if nv == 0.0 {
        return Err(Error::ZeroVector("right operand".into()));
    }
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}
