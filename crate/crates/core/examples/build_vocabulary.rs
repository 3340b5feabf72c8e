//! Induce WordPiece vocabularies in both hashtag modes and compare coverage.
//!
//!     cargo run --example build_vocabulary

use vocabdrift::synth::{generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, HashtagMode, VocabConfig, Vocabulary};

fn main() -> vocabdrift::Result<()> {
    // a hand-made vocabulary and the greedy longest-match segmentation
    let v = Vocabulary::from_pieces(&["gr", "##ie", "##zman", "##n", "##z", "##i"])?;
    println!("griezmann -> {:?}", v.tokenize_word("griezmann"));
    println!("grx       -> {:?}", v.tokenize_word("grx"));

    let corpus = generate(&SynthConfig::default())?;
    for mode in [HashtagMode::WholeHashtags, HashtagMode::BreakDown] {
        let cfg = VocabConfig {
            wordpiece_capacity: 1500,
            hashtag_capacity: if mode == HashtagMode::WholeHashtags { 16 } else { 0 },
            mode,
            min_count: 2,
        };
        let vocab = induce_vocabulary(&corpus.old, &cfg)?;
        let old = vocab.coverage(&corpus.old)?;
        let new = vocab.coverage(&corpus.new)?;
        println!(
            "\n{mode}: {} wordpieces, {} hashtags",
            vocab.wordpieces().len(),
            vocab.hashtags().len()
        );
        println!("  old epoch: oov {:.4}, fertility {:.3}", old.oov_rate, old.fertility);
        println!("  new epoch: oov {:.4}, fertility {:.3}", new.oov_rate, new.fertility);
        let sample = &corpus.new[0];
        println!("  {:?}\n  -> {:?}", sample.text, vocab.tokenize_document(sample, mode).pieces);
    }
    Ok(())
}
