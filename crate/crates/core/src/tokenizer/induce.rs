//! Frequency-greedy pair-merge induction with WordPiece surface forms.
//!
//! Words start as one symbol per character, the first bare and the rest with
//! the `##` prefix. Each round merges the adjacent pair with the highest
//! weighted count; ties go to the lexicographically smallest merged string.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::vocab::{is_hashtag, rank_order, HashtagMode, Section, Vocabulary, CONTINUATION};
use crate::corpus::Document;
use crate::error::{Error, Result};

/// Parameters for [`induce_vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub wordpiece_capacity: usize,
    pub hashtag_capacity: usize,
    pub mode: HashtagMode,
    pub min_count: u64,
}

impl Default for VocabConfig {
    /// Desk-scale defaults: 2,000 wordpieces and 500 whole hashtags.
    fn default() -> Self {
        VocabConfig {
            wordpiece_capacity: 2_000,
            hashtag_capacity: 500,
            mode: HashtagMode::WholeHashtags,
            min_count: 1,
        }
    }
}

impl VocabConfig {
    /// 50K wordpieces plus 15K whole hashtags (a 65K vocabulary).
    pub fn full_scale() -> Self {
        VocabConfig {
            wordpiece_capacity: 50_000,
            hashtag_capacity: 15_000,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" | "default" => Ok(Self::default()),
            "full" => Ok(Self::full_scale()),
            other => Err(Error::invalid(format!("unknown vocabulary preset `{other}`"))),
        }
    }
}

/// Splits corpus words into (non-hashtag word counts, hashtag counts), skipping specials.
fn split_streams(
    docs: &[Document],
    specials: &HashSet<&str>,
) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let mut words = BTreeMap::new();
    let mut hashtags = BTreeMap::new();
    for word in docs.iter().flat_map(|d| d.words()) {
        if specials.contains(word) {
            continue;
        }
        if is_hashtag(word) {
            *hashtags.entry(word.to_string()).or_insert(0) += 1;
        } else {
            *words.entry(word.to_string()).or_insert(0) += 1;
        }
    }
    (words, hashtags)
}

/// Counts of non-hashtag, non-special words.
pub(crate) fn regular_word_counts(docs: &[Document]) -> BTreeMap<String, u64> {
    let specials: HashSet<&str> = super::SPECIALS.iter().copied().collect();
    split_streams(docs, &specials).0
}

fn initial_symbols(word: &str) -> impl Iterator<Item = String> + '_ {
    word.chars().enumerate().map(|(i, c)| {
        if i == 0 {
            c.to_string()
        } else {
            format!("{CONTINUATION}{c}")
        }
    })
}

fn alphabet_counts(word_counts: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let mut alphabet = BTreeMap::new();
    for (w, &c) in word_counts {
        for s in initial_symbols(w) {
            *alphabet.entry(s).or_insert(0) += c;
        }
    }
    alphabet
}

/// Number of initial symbols seen at least `min_count` times.
pub(crate) fn alphabet_size(word_counts: &BTreeMap<String, u64>, min_count: u64) -> usize {
    alphabet_counts(word_counts)
        .values()
        .filter(|&&c| c >= min_count)
        .count()
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    merged: String,
    left: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    // Max-heap: highest count, then smallest merged string, then smallest left symbol.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.merged.cmp(&self.merged))
            .then_with(|| other.left.cmp(&self.left))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Merger {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
    allowed: Vec<bool>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), u64>,
    pair_words: HashMap<(u32, u32), HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl Merger {
    fn intern(&mut self, s: String, allowed: bool) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.ids.insert(s.clone(), id);
        self.strings.push(s);
        self.allowed.push(allowed);
        id
    }

    fn merged_string(&self, (l, r): (u32, u32)) -> String {
        let right = &self.strings[r as usize];
        let mut s = self.strings[l as usize].clone();
        s.push_str(right.strip_prefix(CONTINUATION).unwrap_or(right));
        s
    }

    fn pairs(&self, word: &[u32]) -> Vec<(u32, u32)> {
        word.windows(2)
            .filter(|w| self.allowed[w[0] as usize] && self.allowed[w[1] as usize])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    fn push(&mut self, pair: (u32, u32)) {
        let count = self.pair_counts.get(&pair).copied().unwrap_or(0);
        if count > 0 {
            let merged = self.merged_string(pair);
            let left = self.strings[pair.0 as usize].clone();
            self.heap.push(Candidate {
                count,
                merged,
                left,
                pair,
            });
        }
    }

    fn pop_best(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.pop() {
            if self.pair_counts.get(&c.pair).copied().unwrap_or(0) == c.count {
                return Some(c);
            }
        }
        None
    }

    fn apply(&mut self, pair: (u32, u32), merged: u32) {
        let Some(affected) = self.pair_words.remove(&pair) else {
            return;
        };
        let mut affected: Vec<usize> = affected.into_iter().collect();
        affected.sort_unstable();
        let mut touched = HashSet::new();
        for idx in affected {
            let (old, count) = {
                let (w, c) = &self.words[idx];
                (w.clone(), *c)
            };
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && old[i] == pair.0 && old[i + 1] == pair.1 {
                    new.push(merged);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            for p in self.pairs(&old) {
                let c = self.pair_counts.get_mut(&p).expect("counted pair");
                *c -= count;
                if let Some(set) = self.pair_words.get_mut(&p) {
                    set.remove(&idx);
                }
                touched.insert(p);
            }
            for p in self.pairs(&new) {
                *self.pair_counts.entry(p).or_insert(0) += count;
                self.pair_words.entry(p).or_default().insert(idx);
                touched.insert(p);
            }
            self.words[idx].0 = new;
        }
        let mut touched: Vec<_> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if p != pair {
                self.push(p);
            }
        }
        self.pair_counts.remove(&pair);
    }
}

/// Learns up to `capacity` wordpieces from weighted words.
///
/// Every initial symbol seen at least `min_count` times enters first; merges
/// follow until the capacity is reached or no pair reaches `min_count`.
/// Entry counts are the symbol frequency for alphabet entries and the pair
/// count at merge time for merged entries.
pub fn induce_wordpieces(
    word_counts: &BTreeMap<String, u64>,
    capacity: usize,
    min_count: u64,
) -> Result<Vec<(String, u64)>> {
    let min_count = min_count.max(1);
    let alphabet = alphabet_counts(word_counts);
    let kept: Vec<(String, u64)> = alphabet
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(s, &c)| (s.clone(), c))
        .collect();
    if kept.len() > capacity {
        return Err(Error::CapacityTooSmall {
            capacity,
            alphabet: kept.len(),
        });
    }

    let mut m = Merger {
        strings: Vec::new(),
        ids: HashMap::new(),
        allowed: Vec::new(),
        words: Vec::with_capacity(word_counts.len()),
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
        heap: BinaryHeap::new(),
    };
    for (s, &c) in &alphabet {
        m.intern(s.clone(), c >= min_count);
    }
    for (w, &c) in word_counts {
        let syms: Vec<u32> = initial_symbols(w).map(|s| m.ids[&s]).collect();
        m.words.push((syms, c));
    }
    for idx in 0..m.words.len() {
        let pairs = m.pairs(&m.words[idx].0);
        let c = m.words[idx].1;
        for p in pairs {
            *m.pair_counts.entry(p).or_insert(0) += c;
            m.pair_words.entry(p).or_default().insert(idx);
        }
    }
    let mut initial: Vec<_> = m.pair_counts.keys().copied().collect();
    initial.sort_unstable();
    for p in initial {
        m.push(p);
    }

    let mut vocab = kept;
    let mut in_vocab: HashSet<String> = vocab.iter().map(|(s, _)| s.clone()).collect();
    while vocab.len() < capacity {
        let Some(best) = m.pop_best() else { break };
        if best.count < min_count {
            break;
        }
        let id = m.intern(best.merged.clone(), true);
        m.apply(best.pair, id);
        // specials and the bare marker are reserved even when a word merges into one
        let reserved = best.merged == super::CONTINUATION || super::SPECIALS.contains(&best.merged.as_str());
        if !reserved && in_vocab.insert(best.merged.clone()) {
            vocab.push((best.merged, best.count));
        }
    }
    vocab.sort_by(rank_order);
    Ok(vocab)
}

/// Induces a vocabulary from one epoch of normalized documents.
///
/// In whole-hashtag mode the top `hashtag_capacity` hashtags by count form the
/// hashtag section and the remaining hashtags join the word stream stripped of
/// `#`. In break-down mode every hashtag is stripped.
pub fn induce_vocabulary(docs: &[Document], cfg: &VocabConfig) -> Result<Vocabulary> {
    if cfg.wordpiece_capacity == 0 {
        return Err(Error::invalid("wordpiece capacity must be positive"));
    }
    if cfg.mode == HashtagMode::WholeHashtags && cfg.hashtag_capacity == 0 {
        return Err(Error::invalid(
            "hashtag capacity must be positive in whole-hashtag mode",
        ));
    }
    let specials: HashSet<&str> = super::SPECIALS.iter().copied().collect();
    let (mut words, hashtags) = split_streams(docs, &specials);
    if words.is_empty() && hashtags.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let min_count = cfg.min_count.max(1);

    let mut ranked: Vec<(String, u64)> = hashtags.into_iter().collect();
    ranked.sort_by(rank_order);
    let (whole, ht_cap) = match cfg.mode {
        HashtagMode::WholeHashtags => {
            let take = ranked
                .iter()
                .take_while(|(_, c)| *c >= min_count)
                .count()
                .min(cfg.hashtag_capacity);
            let rest = ranked.split_off(take);
            for (tag, c) in rest {
                *words.entry(tag[1..].to_string()).or_insert(0) += c;
            }
            (ranked, cfg.hashtag_capacity)
        }
        HashtagMode::BreakDown => {
            for (tag, c) in ranked {
                *words.entry(tag[1..].to_string()).or_insert(0) += c;
            }
            (Vec::new(), 0)
        }
    };

    let wordpieces = induce_wordpieces(&words, cfg.wordpiece_capacity, min_count)?;
    let vocab = Vocabulary::new(cfg.mode, cfg.wordpiece_capacity, ht_cap, wordpieces, whole)?;
    debug_assert!(vocab
        .hashtags()
        .iter()
        .all(|(t, _)| vocab.section_of(t) == Some(Section::Hashtag)));
    Ok(vocab)
}
