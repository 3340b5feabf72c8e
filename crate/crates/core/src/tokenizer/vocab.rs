use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{EMAIL, URL, USER};
use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// Reserved tokens, in rank order. They head every vocabulary and are never evicted.
pub const SPECIALS: [&str; 8] = [PAD, UNK, CLS, SEP, MASK, URL, USER, EMAIL];

/// Continuation marker for non-initial wordpieces.
pub const CONTINUATION: &str = "##";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Special,
    Wordpiece,
    Hashtag,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::Special => "special",
            Section::Wordpiece => "wordpiece",
            Section::Hashtag => "hashtag",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "special" => Ok(Section::Special),
            "wordpiece" => Ok(Section::Wordpiece),
            "hashtag" => Ok(Section::Hashtag),
            other => Err(Error::invalid(format!("unknown section `{other}`"))),
        }
    }
}

/// How hashtags are composed into the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashtagMode {
    /// Popular hashtags are kept intact in a dedicated section; rarer ones
    /// are stripped of `#` and split like ordinary words.
    #[default]
    WholeHashtags,
    /// Every hashtag is stripped of `#` and split like an ordinary word.
    BreakDown,
}

impl fmt::Display for HashtagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HashtagMode::WholeHashtags => "whole",
            HashtagMode::BreakDown => "break",
        })
    }
}

impl FromStr for HashtagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" | "whole_hashtags" => Ok(HashtagMode::WholeHashtags),
            "break" | "break_down" => Ok(HashtagMode::BreakDown),
            other => Err(Error::invalid(format!("unknown hashtag mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub count: u64,
    pub section: Section,
}

/// An immutable, sectioned subword vocabulary.
///
/// Entries within a section are ordered by descending count with ties broken
/// lexicographically. Specials always come first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    specials: Vec<String>,
    wordpieces: Vec<(String, u64)>,
    hashtags: Vec<(String, u64)>,
    wordpiece_capacity: usize,
    hashtag_capacity: usize,
    mode: HashtagMode,
    index: HashMap<String, Section>,
    max_piece_chars: usize,
}

pub(crate) fn rank_order(a: &(String, u64), b: &(String, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

pub(crate) fn is_hashtag(word: &str) -> bool {
    word.len() > 1 && word.starts_with('#') && !word[1..].starts_with('#')
}

impl Vocabulary {
    /// Builds a vocabulary with the default specials, validating every invariant.
    pub fn new(
        mode: HashtagMode,
        wordpiece_capacity: usize,
        hashtag_capacity: usize,
        wordpieces: impl IntoIterator<Item = (String, u64)>,
        hashtags: impl IntoIterator<Item = (String, u64)>,
    ) -> Result<Self> {
        Self::with_specials(
            SPECIALS.iter().map(|s| s.to_string()).collect(),
            mode,
            wordpiece_capacity,
            hashtag_capacity,
            wordpieces,
            hashtags,
        )
    }

    pub fn with_specials(
        specials: Vec<String>,
        mode: HashtagMode,
        wordpiece_capacity: usize,
        hashtag_capacity: usize,
        wordpieces: impl IntoIterator<Item = (String, u64)>,
        hashtags: impl IntoIterator<Item = (String, u64)>,
    ) -> Result<Self> {
        let mut wordpieces: Vec<_> = wordpieces.into_iter().collect();
        let mut hashtags: Vec<_> = hashtags.into_iter().collect();
        wordpieces.sort_by(rank_order);
        hashtags.sort_by(rank_order);

        if !specials.iter().any(|s| s == UNK) {
            return Err(Error::invalid("specials must include [UNK]"));
        }
        if wordpieces.len() > wordpiece_capacity {
            return Err(Error::invalid(format!(
                "{} wordpieces exceed capacity {wordpiece_capacity}",
                wordpieces.len()
            )));
        }
        if hashtags.len() > hashtag_capacity {
            return Err(Error::invalid(format!(
                "{} hashtags exceed capacity {hashtag_capacity}",
                hashtags.len()
            )));
        }
        if mode == HashtagMode::BreakDown && !hashtags.is_empty() {
            return Err(Error::invalid("break_down vocabulary cannot hold whole hashtags"));
        }

        let mut index = HashMap::new();
        let mut max_piece_chars = 0;
        for s in &specials {
            if index.insert(s.clone(), Section::Special).is_some() {
                return Err(Error::invalid(format!("duplicate token `{s}`")));
            }
        }
        for (t, _) in &wordpieces {
            if t.is_empty() || t == CONTINUATION || t.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("malformed wordpiece `{t}`")));
            }
            if index.insert(t.clone(), Section::Wordpiece).is_some() {
                return Err(Error::invalid(format!("duplicate token `{t}`")));
            }
            max_piece_chars = max_piece_chars.max(t.chars().count());
        }
        for (t, _) in &hashtags {
            if !is_hashtag(t) || t.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("malformed hashtag `{t}`")));
            }
            if index.insert(t.clone(), Section::Hashtag).is_some() {
                return Err(Error::invalid(format!("duplicate token `{t}`")));
            }
        }

        Ok(Vocabulary {
            specials,
            wordpieces,
            hashtags,
            wordpiece_capacity,
            hashtag_capacity,
            mode,
            index,
            max_piece_chars,
        })
    }

    /// A break-down vocabulary holding exactly `pieces` (count 0) as wordpieces.
    pub fn from_pieces<S: AsRef<str>>(pieces: &[S]) -> Result<Self> {
        let wp: Vec<_> = pieces.iter().map(|p| (p.as_ref().to_string(), 0)).collect();
        let cap = wp.len();
        Self::new(HashtagMode::BreakDown, cap, 0, wp, [])
    }

    pub fn mode(&self) -> HashtagMode {
        self.mode
    }

    pub fn wordpiece_capacity(&self) -> usize {
        self.wordpiece_capacity
    }

    pub fn hashtag_capacity(&self) -> usize {
        self.hashtag_capacity
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn wordpieces(&self) -> &[(String, u64)] {
        &self.wordpieces
    }

    pub fn hashtags(&self) -> &[(String, u64)] {
        &self.hashtags
    }

    pub fn section_entries(&self, section: Section) -> Vec<(String, u64)> {
        match section {
            Section::Special => self.specials.iter().map(|s| (s.clone(), 0)).collect(),
            Section::Wordpiece => self.wordpieces.clone(),
            Section::Hashtag => self.hashtags.clone(),
        }
    }

    /// Total number of entries, specials included.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn section_of(&self, token: &str) -> Option<Section> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub(crate) fn is_wordpiece(&self, token: &str) -> bool {
        self.index.get(token) == Some(&Section::Wordpiece)
    }

    pub(crate) fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }

    /// Entries in rank order: specials, then wordpieces, then hashtags.
    pub fn entries(&self) -> impl Iterator<Item = VocabEntry> + '_ {
        let specials = self.specials.iter().map(|s| VocabEntry {
            token: s.clone(),
            count: 0,
            section: Section::Special,
        });
        let wp = self.wordpieces.iter().map(|(t, c)| VocabEntry {
            token: t.clone(),
            count: *c,
            section: Section::Wordpiece,
        });
        let ht = self.hashtags.iter().map(|(t, c)| VocabEntry {
            token: t.clone(),
            count: *c,
            section: Section::Hashtag,
        });
        specials.chain(wp).chain(ht)
    }

    /// Serializes as `token<TAB>count<TAB>section` lines in rank order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in self.entries() {
            writeln!(w, "{}\t{}\t{}", e.token, e.count, e.section)?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("utf-8 tokens")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_tsv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Parses the TSV form. Capacities are taken from the section sizes and the
    /// hashtag mode is whole-hashtags iff the file has a hashtag section.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut specials = Vec::new();
        let mut wordpieces = Vec::new();
        let mut hashtags = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(token), Some(count), Some(section), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected token<TAB>count<TAB>section".into(),
                });
            };
            let count: u64 = count.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad count `{count}`"),
            })?;
            let section: Section = section.parse().map_err(|e: Error| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            match section {
                Section::Special => specials.push(token.to_string()),
                Section::Wordpiece => wordpieces.push((token.to_string(), count)),
                Section::Hashtag => hashtags.push((token.to_string(), count)),
            }
        }
        let mode = if hashtags.is_empty() {
            HashtagMode::BreakDown
        } else {
            HashtagMode::WholeHashtags
        };
        let (wc, hc) = (wordpieces.len(), hashtags.len());
        Self::with_specials(specials, mode, wc, hc, wordpieces, hashtags)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file))
    }
}
