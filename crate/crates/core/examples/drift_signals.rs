//! The three per-document drift signals on a synthetic new epoch.
//!
//!     cargo run --example drift_signals

use std::collections::BTreeSet;

use vocabdrift::signals::{
    score_documents_sentence, score_documents_token, sentence_embeddings_from_tokens, surrogate_mlm_loss,
    token_shift_scores, MaskSelection, SignalScore, DEFAULT_MAX_MASKS,
};
use vocabdrift::synth::{drifting_checkpoints, generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, VocabConfig};
use vocabdrift::vocab_update::update_vocabulary;

fn mean_ws(scores: &[SignalScore], drifted: &BTreeSet<String>) -> (f64, f64) {
    let (mut d, mut nd, mut c, mut nc) = (0.0, 0, 0.0, 0);
    for s in scores {
        if drifted.contains(&s.doc_id) {
            d += s.w_s;
            nd += 1;
        } else {
            c += s.w_s;
            nc += 1;
        }
    }
    (d / nd.max(1) as f64, c / nc.max(1) as f64)
}

fn main() -> vocabdrift::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let current = induce_vocabulary(&corpus.old, &VocabConfig::default())?;
    let (vocab, update) = update_vocabulary(&current, &corpus.new, 2)?;
    let added: BTreeSet<String> = update.added_tokens().map(str::to_string).collect();

    // first iteration: new tokens weigh 1
    let first = token_shift_scores(None, None, 1, &added)?;
    let scores = score_documents_token(&corpus.new, &first, &vocab)?;
    let (d, c) = mean_ws(&scores, &corpus.drifted);
    println!("token shift (new tokens):  drifted {d:.3}  clean {c:.3}");

    // later iterations: compare two checkpoints
    let tokens: Vec<String> = vocab.entries().map(|e| e.token).collect();
    let drifting: BTreeSet<String> = corpus.injected.iter().cloned().collect();
    let ckpts = drifting_checkpoints(&tokens, &drifting, 2, 16, 1)?;
    let shifted = token_shift_scores(Some(&ckpts[0]), Some(&ckpts[1]), 20, &added)?;
    let scores = score_documents_token(&corpus.new, &shifted, &vocab)?;
    let (d, c) = mean_ws(&scores, &corpus.drifted);
    println!("token shift (checkpoints): drifted {d:.3}  clean {c:.3}");

    let prev = sentence_embeddings_from_tokens(&ckpts[0], &corpus.new, &vocab)?;
    let curr = sentence_embeddings_from_tokens(&ckpts[1], &corpus.new, &vocab)?;
    let scores = score_documents_sentence(Some(&prev), Some(&curr), &corpus.new, &vocab)?;
    let (d, c) = mean_ws(&scores, &corpus.drifted);
    println!("sentence shift:            drifted {d:.3}  clean {c:.3}");

    let scores = surrogate_mlm_loss(&corpus.new, &corpus.old, &vocab, DEFAULT_MAX_MASKS, MaskSelection::RarestFirst)?;
    let (d, c) = mean_ws(&scores, &corpus.drifted);
    println!("surrogate MLM loss:        drifted {d:.3}  clean {c:.3}");

    let s = &scores[0];
    println!("\n{}: w_s {:.3}, w_t {:.1} ({})", s.doc_id, s.w_s, s.w_t, s.signal_kind);
    Ok(())
}
