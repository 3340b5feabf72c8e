//! Top-K vocabulary shift per token kind, plus co-occurrence shift of one token.
//!
//!     cargo run --example vocabulary_shift

use vocabdrift::drift::{cooccurrence_profile, semantic_shift_rate, shift_report, write_shift_csv, TokenKind};
use vocabdrift::synth::{generate, SynthConfig};

fn main() -> vocabdrift::Result<()> {
    let corpus = generate(&SynthConfig::default())?;

    for k in [50, 100, 500] {
        let rows = shift_report(&corpus.old, &corpus.new, &TokenKind::ALL, k)?;
        println!("k = {k}");
        write_shift_csv(std::io::stdout().lock(), &rows).expect("stdout");
    }

    let same = shift_report(&corpus.old, &corpus.old, &TokenKind::ALL, 100)?;
    println!("\nold vs old: {:?}", same.iter().map(|r| r.shift).collect::<Vec<_>>());

    // a background word keeps its name but changes company
    let anchor = corpus.new[0]
        .words()
        .find(|w| corpus.old.iter().any(|d| d.words().any(|x| x == *w)))
        .expect("a shared word")
        .to_string();
    let a = cooccurrence_profile(&corpus.old, &anchor, 20)?;
    let b = cooccurrence_profile(&corpus.new, &anchor, 20)?;
    println!("\nco-occurrence shift of `{anchor}` (m = 20): {:.3}", semantic_shift_rate(&a, &b)?);
    Ok(())
}
