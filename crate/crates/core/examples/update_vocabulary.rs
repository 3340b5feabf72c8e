//! Fixed-size vocabulary update: evict what vanished, admit what emerged.
//!
//!     cargo run --example update_vocabulary

use vocabdrift::synth::{generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, VocabConfig};
use vocabdrift::vocab_update::update_vocabulary;

fn main() -> vocabdrift::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let current = induce_vocabulary(&corpus.old, &VocabConfig::default())?;
    let (updated, update) = update_vocabulary(&current, &corpus.new, 2)?;

    println!("sizes: {} -> {}", current.len(), updated.len());
    for (name, plan) in [("wordpiece", &update.wordpiece), ("hashtag", &update.hashtag)] {
        println!(
            "{name}: kept {}, removed {}, added {}, retained {}",
            plan.kept.len(),
            plan.removed.len(),
            plan.added.len(),
            plan.retained.len()
        );
        println!("  first added: {:?}", &plan.added[..plan.added.len().min(8)]);
    }
    let admitted = corpus
        .injected
        .iter()
        .filter(|t| update.wordpiece.added.contains(t))
        .count();
    println!("injected tokens admitted: {admitted}/{}", corpus.injected.len());

    let before = current.coverage(&corpus.new)?;
    let after = updated.coverage(&corpus.new)?;
    println!("new-epoch fertility: {:.3} -> {:.3}", before.fertility, after.fertility);
    let json = update.to_json()?;
    println!("\nplan.json ({} lines), head:", json.lines().count());
    for line in json.lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
