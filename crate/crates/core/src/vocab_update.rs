//! Fixed-size vocabulary updates.
//!
//! For each section, tokens that still appear among the new epoch's candidates
//! survive, the rest are evicted, and the same number of the most frequent new
//! candidates are admitted. Specials are never touched.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenizer::{
    induce_vocabulary, is_hashtag, rank_order, HashtagMode, Section, VocabConfig, Vocabulary,
};

/// Outcome of updating one vocabulary section.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdatePlan {
    /// Current tokens that are still candidates, sorted.
    pub kept: Vec<String>,
    /// Evicted tokens, in their old rank order.
    pub removed: Vec<String>,
    /// Admitted tokens, in candidate rank order.
    pub added: Vec<String>,
    /// Outdated tokens kept only because candidates ran out, best first.
    #[serde(default)]
    pub retained: Vec<String>,
}

impl UpdatePlan {
    pub fn is_noop(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

/// Per-section plans for one vocabulary update.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VocabUpdate {
    pub wordpiece: UpdatePlan,
    pub hashtag: UpdatePlan,
}

impl VocabUpdate {
    pub fn section(&self, section: Section) -> Option<&UpdatePlan> {
        match section {
            Section::Wordpiece => Some(&self.wordpiece),
            Section::Hashtag => Some(&self.hashtag),
            Section::Special => None,
        }
    }

    /// Every admitted token across sections.
    pub fn added_tokens(&self) -> impl Iterator<Item = &str> {
        self.wordpiece
            .added
            .iter()
            .chain(&self.hashtag.added)
            .map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_json()?.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Plans one section update from the section's current tokens and the new
/// epoch's observed counts.
///
/// Returns the plan and the section's new entries (token, new-epoch count).
/// The entry count always equals `current.len()`.
pub fn plan_section_update(
    current: &[String],
    observed: &BTreeMap<String, u64>,
    min_count: u64,
) -> (UpdatePlan, Vec<(String, u64)>) {
    let count_of = |t: &str| observed.get(t).copied().unwrap_or(0);
    let mut candidates: Vec<(String, u64)> = observed
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    candidates.sort_by(rank_order);
    let candidate_set: HashSet<&str> = candidates.iter().map(|(t, _)| t.as_str()).collect();
    let current_set: HashSet<&str> = current.iter().map(String::as_str).collect();

    let mut kept: Vec<String> = current
        .iter()
        .filter(|t| candidate_set.contains(t.as_str()))
        .cloned()
        .collect();
    kept.sort();
    let outdated: Vec<&String> = current
        .iter()
        .filter(|t| !candidate_set.contains(t.as_str()))
        .collect();

    let added: Vec<String> = candidates
        .iter()
        .filter(|(t, _)| !current_set.contains(t.as_str()))
        .take(outdated.len())
        .map(|(t, _)| t.clone())
        .collect();

    // Shortage: keep the outdated tokens with the highest new-epoch counts.
    let shortage = outdated.len() - added.len();
    let mut by_relevance: Vec<(String, u64)> = outdated
        .iter()
        .map(|t| ((*t).clone(), count_of(t)))
        .collect();
    by_relevance.sort_by(rank_order);
    let retained: Vec<String> = by_relevance
        .into_iter()
        .take(shortage)
        .map(|(t, _)| t)
        .collect();
    let retained_set: HashSet<&str> = retained.iter().map(String::as_str).collect();
    let removed: Vec<String> = outdated
        .into_iter()
        .filter(|t| !retained_set.contains(t.as_str()))
        .cloned()
        .collect();

    let entries: Vec<(String, u64)> = kept
        .iter()
        .chain(&added)
        .chain(&retained)
        .map(|t| (t.clone(), count_of(t)))
        .collect();
    debug_assert_eq!(entries.len(), current.len());

    (
        UpdatePlan {
            kept,
            removed,
            added,
            retained,
        },
        entries,
    )
}

/// Candidate counts for both sections of a new epoch.
///
/// Wordpiece counts come from tokenizing `new_docs` with a vocabulary freshly
/// induced from them under the current vocabulary's mode and capacities.
/// Hashtag counts are raw whole-hashtag frequencies.
pub fn epoch_candidates(
    current: &Vocabulary,
    new_docs: &[Document],
    min_count: u64,
) -> Result<(BTreeMap<String, u64>, BTreeMap<String, u64>)> {
    if new_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mode = current.mode();
    let mut cfg = VocabConfig {
        wordpiece_capacity: current.wordpiece_capacity().max(1),
        hashtag_capacity: match mode {
            HashtagMode::WholeHashtags => current.hashtag_capacity().max(1),
            HashtagMode::BreakDown => 0,
        },
        mode,
        min_count,
    };
    let fresh = match induce_vocabulary(new_docs, &cfg) {
        Err(Error::CapacityTooSmall { alphabet, .. }) => {
            cfg.wordpiece_capacity = alphabet;
            induce_vocabulary(new_docs, &cfg)?
        }
        other => other?,
    };

    let mut pieces = BTreeMap::new();
    let mut hashtags = BTreeMap::new();
    for doc in new_docs {
        for p in fresh.tokenize_document(doc, mode).pieces {
            if fresh.section_of(&p) == Some(Section::Wordpiece) {
                *pieces.entry(p).or_insert(0) += 1;
            }
        }
        if mode == HashtagMode::WholeHashtags {
            for w in doc.words().filter(|w| is_hashtag(w)) {
                *hashtags.entry(w.to_string()).or_insert(0) += 1;
            }
        }
    }
    Ok((pieces, hashtags))
}

/// Updates `current` against a new epoch, preserving every section's size.
pub fn update_vocabulary(
    current: &Vocabulary,
    new_docs: &[Document],
    min_count: u64,
) -> Result<(Vocabulary, VocabUpdate)> {
    let (pieces, hashtags) = epoch_candidates(current, new_docs, min_count)?;
    let min_count = min_count.max(1);

    let names = |s: &[(String, u64)]| s.iter().map(|(t, _)| t.clone()).collect::<Vec<_>>();
    let (wp_plan, wp_entries) = plan_section_update(&names(current.wordpieces()), &pieces, min_count);
    let (ht_plan, ht_entries) = match current.mode() {
        HashtagMode::WholeHashtags => {
            plan_section_update(&names(current.hashtags()), &hashtags, min_count)
        }
        HashtagMode::BreakDown => (UpdatePlan::default(), Vec::new()),
    };

    let updated = Vocabulary::with_specials(
        current.specials().to_vec(),
        current.mode(),
        current.wordpiece_capacity(),
        current.hashtag_capacity(),
        wp_entries,
        ht_entries,
    )?;
    check_update(current, &updated)?;
    Ok((
        updated,
        VocabUpdate {
            wordpiece: wp_plan,
            hashtag: ht_plan,
        },
    ))
}

fn check_update(current: &Vocabulary, updated: &Vocabulary) -> Result<()> {
    let sizes = |v: &Vocabulary| {
        let mut m = HashMap::new();
        for e in v.entries() {
            *m.entry(e.section).or_insert(0usize) += 1;
        }
        m
    };
    if sizes(current) != sizes(updated) {
        return Err(Error::Invariant("vocabulary update changed a section size".into()));
    }
    Ok(())
}
