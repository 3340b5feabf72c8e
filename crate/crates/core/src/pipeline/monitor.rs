use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::signals::{MaskSelection, UnigramSurprisal, DEFAULT_MAX_MASKS};
use crate::tokenizer::Vocabulary;

/// Relative-threshold breach counter over windowed mean losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorState {
    pub baseline_mean_loss: Option<f64>,
    pub window_size: usize,
    pub rel_threshold: f64,
    pub patience: usize,
    pub consecutive_breaches: usize,
}

impl Default for MonitorState {
    fn default() -> Self {
        MonitorState {
            baseline_mean_loss: None,
            window_size: 1000,
            rel_threshold: 0.05,
            patience: 2,
            consecutive_breaches: 0,
        }
    }
}

impl MonitorState {
    pub fn new(window_size: usize, rel_threshold: f64, patience: usize) -> Result<Self> {
        if window_size == 0 || patience == 0 {
            return Err(Error::invalid("window size and patience must be positive"));
        }
        if !(rel_threshold > 0.0 && rel_threshold.is_finite()) {
            return Err(Error::invalid(format!("threshold {rel_threshold} must be positive")));
        }
        Ok(MonitorState {
            window_size,
            rel_threshold,
            patience,
            ..Default::default()
        })
    }

    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline_mean_loss = Some(baseline);
        self
    }
}

/// Feeds one window mean. Returns the next state and whether it triggered.
///
/// A breach is a mean above `baseline × (1 + rel_threshold)`. After
/// `patience` consecutive breaches the monitor triggers, clears the counter
/// and re-anchors the baseline to the triggering window.
pub fn monitor_step(state: &MonitorState, window_mean_loss: f64) -> Result<(MonitorState, bool)> {
    let baseline = state.baseline_mean_loss.ok_or(Error::BaselineUninitialized)?;
    if !(window_mean_loss >= 0.0 && window_mean_loss.is_finite()) {
        return Err(Error::invalid(format!("window loss {window_mean_loss} must be non-negative")));
    }
    let mut next = state.clone();
    if window_mean_loss > baseline * (1.0 + state.rel_threshold) {
        next.consecutive_breaches += 1;
    } else {
        next.consecutive_breaches = 0;
    }
    let triggered = next.consecutive_breaches >= next.patience;
    if triggered {
        next.consecutive_breaches = 0;
        next.baseline_mean_loss = Some(window_mean_loss);
    }
    if next.consecutive_breaches > next.patience {
        return Err(Error::Invariant("breach counter exceeded patience".into()));
    }
    Ok((next, triggered))
}

/// One row of a monitor trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub window: usize,
    pub mean_loss: f64,
    pub baseline: f64,
    pub breaches: usize,
    pub triggered: bool,
}

/// Runs the monitor over pre-computed window means; the first window sets the
/// baseline when the state has none.
pub fn monitor_means(state: &MonitorState, means: &[f64]) -> Result<Vec<MonitorRecord>> {
    let mut state = state.clone();
    let mut trace = Vec::with_capacity(means.len());
    for (window, &mean) in means.iter().enumerate() {
        if state.baseline_mean_loss.is_none() {
            state.baseline_mean_loss = Some(mean);
            trace.push(MonitorRecord {
                window,
                mean_loss: mean,
                baseline: mean,
                breaches: 0,
                triggered: false,
            });
            continue;
        }
        let baseline = state.baseline_mean_loss.unwrap_or(mean);
        let (next, triggered) = monitor_step(&state, mean)?;
        trace.push(MonitorRecord {
            window,
            mean_loss: mean,
            baseline,
            breaches: if triggered { next.patience } else { next.consecutive_breaches },
            triggered,
        });
        state = next;
    }
    Ok(trace)
}

/// Mean surrogate loss of each full window of `stream`, against a unigram
/// model fitted on the first window.
pub fn window_losses(stream: &[Document], vocab: &Vocabulary, window_size: usize) -> Result<Vec<f64>> {
    if window_size == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    let windows: Vec<&[Document]> = stream.chunks_exact(window_size).collect();
    let Some(first) = windows.first() else {
        return Ok(Vec::new());
    };
    let model = UnigramSurprisal::fit(first, vocab)?;
    Ok(windows
        .iter()
        .map(|w| {
            let total: f64 = w
                .iter()
                .map(|d| {
                    let pieces = vocab.tokenize_document(d, vocab.mode()).pieces;
                    model.masked_loss(&d.id, &pieces, DEFAULT_MAX_MASKS, MaskSelection::RarestFirst)
                })
                .sum();
            total / w.len() as f64
        })
        .collect())
}

/// Monitors a document stream window by window.
pub fn monitor_stream(stream: &[Document], vocab: &Vocabulary, state: &MonitorState) -> Result<Vec<MonitorRecord>> {
    let means = window_losses(stream, vocab, state.window_size)?;
    monitor_means(state, &means)
}

pub fn write_monitor_csv<W: Write>(mut w: W, trace: &[MonitorRecord]) -> std::io::Result<()> {
    writeln!(w, "window,mean_loss,baseline,breaches,triggered")?;
    for r in trace {
        writeln!(
            w,
            "{},{:.6},{:.6},{},{}",
            r.window, r.mean_loss, r.baseline, r.breaches, r.triggered
        )?;
    }
    Ok(())
}

pub fn read_monitor_csv<R: BufRead>(r: R) -> Result<Vec<MonitorRecord>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate().skip(1) {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let parsed = (|| {
            if f.len() != 5 {
                return None;
            }
            Some(MonitorRecord {
                window: f[0].parse().ok()?,
                mean_loss: f[1].parse().ok()?,
                baseline: f[2].parse().ok()?,
                breaches: f[3].parse().ok()?,
                triggered: f[4].parse().ok()?,
            })
        })();
        out.push(parsed.ok_or_else(|| Error::Parse {
            line: lineno,
            message: "expected window,mean_loss,baseline,breaches,triggered".into(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_trace() {
        let s = MonitorState::default().with_baseline(1.0);
        let (s, t1) = monitor_step(&s, 1.02).unwrap();
        assert!(!t1);
        assert_eq!(s.consecutive_breaches, 0);
        let (s, t2) = monitor_step(&s, 1.08).unwrap();
        assert!(!t2);
        assert_eq!(s.consecutive_breaches, 1);
        let (s, t3) = monitor_step(&s, 1.09).unwrap();
        assert!(t3);
        assert_eq!(s.consecutive_breaches, 0);
        assert_eq!(s.baseline_mean_loss, Some(1.09));
    }

    #[test]
    fn spikes_and_errors() {
        let s = MonitorState::default().with_baseline(1.0);
        let mut state = s.clone();
        for x in [1.0, 1.2, 1.0, 1.2, 1.0] {
            let (next, t) = monitor_step(&state, x).unwrap();
            assert!(!t);
            state = next;
        }
        assert!(matches!(
            monitor_step(&MonitorState::default(), 1.0),
            Err(Error::BaselineUninitialized)
        ));
        assert!(monitor_step(&s, -1.0).is_err());
    }

    #[test]
    fn trace_and_csv() {
        let trace = monitor_means(&MonitorState::default(), &[1.0, 1.02, 1.08, 1.09, 1.1]).unwrap();
        assert_eq!(
            trace.iter().map(|r| r.triggered).collect::<Vec<_>>(),
            [false, false, false, true, false]
        );
        assert_eq!(trace[4].baseline, 1.09);
        let mut buf = Vec::new();
        write_monitor_csv(&mut buf, &trace).unwrap();
        let back = read_monitor_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        assert!(back[3].triggered);
        assert!(read_monitor_csv("h\n1,2\n".as_bytes()).is_err());
        assert!(monitor_means(&MonitorState::default(), &[]).unwrap().is_empty());
    }

    #[test]
    fn stream_windows() {
        let vocab = Vocabulary::from_pieces(&["a", "b", "z"]).unwrap();
        let mut stream: Vec<Document> = (0..4).map(|i| Document::new(format!("s{i}"), "a a b", 0)).collect();
        stream.extend((4..9).map(|i| Document::new(format!("s{i}"), "z z z", 0)));
        let state = MonitorState::new(2, 0.05, 2).unwrap();
        let trace = monitor_stream(&stream, &vocab, &state).unwrap();
        // the trailing partial window is dropped
        assert_eq!(trace.len(), 4);
        assert!(trace[3].triggered);
    }

    proptest! {
        #[test]
        fn sub_threshold_streams_never_trigger(
            base in 0.1f64..10.0,
            fracs in proptest::collection::vec(0.0f64..=1.0, 0..50),
        ) {
            let mut s = MonitorState::default().with_baseline(base);
            for f in fracs {
                let (next, t) = monitor_step(&s, base * (1.0 + s.rel_threshold * f)).unwrap();
                prop_assert!(!t);
                s = next;
            }
        }

        #[test]
        fn sustained_shift_triggers(
            base in 0.1f64..10.0,
            patience in 1usize..6,
            excess in proptest::collection::vec(1e-6f64..1.0, 6..12),
        ) {
            let mut s = MonitorState::new(10, 0.05, patience).unwrap().with_baseline(base);
            let mut fired = false;
            for e in excess.iter().take(patience) {
                let (next, t) = monitor_step(&s, base * 1.05 * (1.0 + e)).unwrap();
                prop_assert!(next.consecutive_breaches <= next.patience);
                fired |= t;
                s = next;
            }
            prop_assert!(fired);
        }
    }
}
