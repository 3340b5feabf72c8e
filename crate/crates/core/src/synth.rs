//! Seeded synthetic two-epoch corpora with known drift.
//!
//! The old epoch mixes a Zipf-distributed background vocabulary with topic
//! block A. The new epoch swaps block A for block B and plants one injected
//! token into a fixed fraction of its documents.

use std::collections::{BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::signals::EmbeddingSnapshot;

const CONSONANTS: &[u8] = b"bdfgklmnprstv";
const VOWELS: &[u8] = b"aeiou";
const RARE: &[u8] = b"qxz";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs_per_epoch: usize,
    pub background_words: usize,
    pub topic_words: usize,
    /// Share of word slots drawn from the epoch's topic block.
    pub topic_share: f64,
    pub injected: usize,
    /// Share of new-epoch documents carrying one injected token.
    pub drift_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub hashtags: usize,
    pub hashtag_rate: f64,
    pub old_epoch: i64,
    pub new_epoch: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs_per_epoch: 2000,
            background_words: 300,
            topic_words: 40,
            topic_share: 0.3,
            injected: 10,
            drift_fraction: 0.1,
            min_words: 3,
            max_words: 12,
            hashtags: 20,
            hashtag_rate: 0.2,
            old_epoch: 2019,
            new_epoch: 2020,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub old: Vec<Document>,
    pub new: Vec<Document>,
    pub injected: Vec<String>,
    /// Ids of new-epoch documents holding an injected token.
    pub drifted: BTreeSet<String>,
    pub topic_old: Vec<String>,
    pub topic_new: Vec<String>,
}

fn pseudo_word(rng: &mut ChaCha8Rng, consonants: &[u8], syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [
                consonants[rng.gen_range(0..consonants.len())] as char,
                VOWELS[rng.gen_range(0..VOWELS.len())] as char,
            ]
        })
        .collect()
}

fn distinct_words(
    rng: &mut ChaCha8Rng,
    n: usize,
    consonants: &[u8],
    syllables: std::ops::RangeInclusive<usize>,
    taken: &mut HashSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = rng.gen_range(syllables.clone());
        let w = pseudo_word(rng, consonants, s);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Generates both epochs. Identical configs give identical corpora.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.docs_per_epoch == 0 || cfg.background_words == 0 || cfg.topic_words == 0 {
        return Err(Error::invalid("synthetic corpus sizes must be positive"));
    }
    if cfg.min_words == 0 || cfg.min_words > cfg.max_words {
        return Err(Error::invalid("need 1 <= min_words <= max_words"));
    }
    for (name, v) in [
        ("topic_share", cfg.topic_share),
        ("drift_fraction", cfg.drift_fraction),
        ("hashtag_rate", cfg.hashtag_rate),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} {v} is outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taken = HashSet::new();
    let background = distinct_words(&mut rng, cfg.background_words, CONSONANTS, 2..=3, &mut taken);
    let topic_old = distinct_words(&mut rng, cfg.topic_words, CONSONANTS, 3..=4, &mut taken);
    let topic_new = distinct_words(&mut rng, cfg.topic_words, CONSONANTS, 3..=4, &mut taken);
    let injected = distinct_words(&mut rng, cfg.injected, RARE, 3..=3, &mut taken);
    let tags: Vec<String> = distinct_words(&mut rng, cfg.hashtags, CONSONANTS, 2..=3, &mut taken)
        .into_iter()
        .map(|w| format!("#{w}"))
        .collect();
    let zipf = WeightedIndex::new((0..background.len()).map(|r| 1.0 / (r as f64 + 1.0)))
        .expect("positive weights");

    let epoch = |epoch: i64, topic: &[String], tags: &[String], rng: &mut ChaCha8Rng| {
        (0..cfg.docs_per_epoch)
            .map(|i| {
                let n = rng.gen_range(cfg.min_words..=cfg.max_words);
                let mut words: Vec<&str> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(cfg.topic_share) {
                            topic[rng.gen_range(0..topic.len())].as_str()
                        } else {
                            background[zipf.sample(rng)].as_str()
                        }
                    })
                    .collect();
                if !tags.is_empty() && rng.gen_bool(cfg.hashtag_rate) {
                    words.push(&tags[rng.gen_range(0..tags.len())]);
                }
                Document::new(format!("e{epoch}-{i:05}"), words.join(" "), epoch)
            })
            .collect::<Vec<_>>()
    };
    // half of the hashtags stay popular across epochs
    let half = tags.len() / 2;
    let old = epoch(cfg.old_epoch, &topic_old, &tags[..tags.len() - half / 2], &mut rng);
    let mut new = epoch(cfg.new_epoch, &topic_new, &tags[half / 2..], &mut rng);

    let mut drifted = BTreeSet::new();
    if !injected.is_empty() {
        let n_drift = (cfg.drift_fraction * new.len() as f64).round() as usize;
        let picks = rand::seq::index::sample(&mut rng, new.len(), n_drift).into_vec();
        for (j, idx) in picks.into_iter().enumerate() {
            let doc = &mut new[idx];
            let mut words: Vec<&str> = doc.text.split(' ').collect();
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, &injected[j % injected.len()]);
            *doc = Document::new(doc.id.clone(), words.join(" "), doc.epoch);
            drifted.insert(doc.id.clone());
        }
    }
    Ok(SynthCorpus {
        old,
        new,
        injected,
        drifted,
        topic_old,
        topic_new,
    })
}

/// A chain of `n` token snapshots in which `drifting` tokens rotate away from
/// their starting direction much faster than every other token.
///
/// Each token turns by a fixed angle per step inside a plane of its own, so
/// all drifting tokens move the same cosine distance between neighbours.
pub fn drifting_checkpoints<S: AsRef<str>>(
    tokens: &[S],
    drifting: &BTreeSet<String>,
    n: usize,
    dim: usize,
    seed: u64,
) -> Result<Vec<EmbeddingSnapshot>> {
    if dim < 2 {
        return Err(Error::invalid("need at least two dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng, against: Option<&[f64]>| loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(a) = against {
            let dot: f64 = v.iter().zip(a).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(a).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    };
    let base: Vec<(String, Vec<f64>, Vec<f64>)> = tokens
        .iter()
        .map(|t| {
            let a = unit(&mut rng, None);
            let b = unit(&mut rng, Some(&a));
            (t.as_ref().to_string(), a, b)
        })
        .collect();
    (0..n)
        .map(|step| {
            let vectors = base.iter().map(|(t, a, b)| {
                let rate = if drifting.contains(t) { 0.6 } else { 0.02 };
                let theta = rate * step as f64;
                let v = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x * theta.cos() + y * theta.sin())
                    .collect();
                (t.clone(), v)
            });
            EmbeddingSnapshot::from_vectors(format!("ckpt{step}"), vectors)
        })
        .collect()
}
