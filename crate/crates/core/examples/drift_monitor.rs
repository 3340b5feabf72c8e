//! Watch a loss stream, trigger on deterioration, then run one epoch into a
//! run directory and summarize it.
//!
//!     cargo run --example drift_monitor [-- <run-dir>]

use vocabdrift::pipeline::{emit_report, monitor_stream, run_epoch, EpochConfig, MonitorState};
use vocabdrift::sampler::{ratio_sizes, SamplingConfig};
use vocabdrift::synth::{generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, VocabConfig};
use vocabdrift::Document;

fn main() -> vocabdrift::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/drift_monitor_run".into());
    let corpus = generate(&SynthConfig::default())?;
    let current = induce_vocabulary(&corpus.old, &VocabConfig::default())?;

    let stream: Vec<Document> = corpus.old.iter().chain(&corpus.new).cloned().collect();
    let state = MonitorState::new(250, 0.05, 2)?;
    let trace = monitor_stream(&stream, &current, &state)?;
    for r in &trace {
        println!(
            "window {:>2}: loss {:.3} baseline {:.3}{}",
            r.window,
            r.mean_loss,
            r.baseline,
            if r.triggered { "  <- trigger" } else { "" }
        );
    }
    let trigger = trace.iter().find(|r| r.triggered).map(|r| r.window);

    let cfg = EpochConfig {
        sampling: SamplingConfig {
            seed: 1,
            iteration_sizes: ratio_sizes(240),
            ..Default::default()
        },
        shift_k: 100,
        trigger_window: trigger,
        monitor_trace: trace,
        ..Default::default()
    };
    let run = run_epoch(&current, &corpus.old, &corpus.new, &cfg)?;
    run.write(&out)?;
    let report = emit_report(&out)?;
    println!("\nrun directory: {out}");
    for row in &report.shift {
        println!("  shift {:<9} {:.3}", row.kind.as_str(), row.shift);
    }
    for m in &report.manifest_sizes {
        println!("  iteration {} -> {} docs", m.iteration, m.size);
    }
    Ok(())
}
