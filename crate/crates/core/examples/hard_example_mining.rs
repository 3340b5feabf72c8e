//! Iterative weighted sampling of hard examples across three iterations.
//!
//!     cargo run --example hard_example_mining

use std::collections::BTreeSet;

use vocabdrift::sampler::{ratio_sizes, run_iterative_sampling, SamplingConfig, TokenShiftSignal};
use vocabdrift::synth::{drifting_checkpoints, generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, VocabConfig};
use vocabdrift::vocab_update::update_vocabulary;

fn main() -> vocabdrift::Result<()> {
    let corpus = generate(&SynthConfig {
        docs_per_epoch: 5000,
        ..Default::default()
    })?;
    let current = induce_vocabulary(&corpus.old, &VocabConfig::default())?;
    let (vocab, update) = update_vocabulary(&current, &corpus.new, 2)?;

    let tokens: Vec<String> = vocab.entries().map(|e| e.token).collect();
    let drifting: BTreeSet<String> = corpus.injected.iter().cloned().collect();
    let mut signal = TokenShiftSignal {
        vocab,
        new_tokens: update.added_tokens().map(str::to_string).collect(),
        checkpoints: drifting_checkpoints(&tokens, &drifting, 3, 16, 11)?,
        top_x: Some(25),
    };
    let cfg = SamplingConfig {
        seed: 2024,
        iteration_sizes: ratio_sizes(600),
        ..Default::default()
    };
    let manifests = run_iterative_sampling(&corpus.new, &mut signal, &cfg)?;

    let base = corpus.drifted.len() as f64 / corpus.new.len() as f64;
    println!("drifted share of the pool: {:.1}%", 100.0 * base);
    for m in &manifests {
        let hits = m.doc_ids.iter().filter(|id| corpus.drifted.contains(*id)).count();
        println!(
            "iteration {}: {} docs, {:.1}% drifted",
            m.iteration,
            m.doc_ids.len(),
            100.0 * hits as f64 / m.doc_ids.len() as f64
        );
    }
    let mut buf = Vec::new();
    manifests[0].write(&mut buf).expect("write to Vec");
    let text = String::from_utf8_lossy(&buf);
    println!("\nmanifest head:\n{}", text.lines().take(6).collect::<Vec<_>>().join("\n"));
    Ok(())
}
