//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.
//!
//!     cargo test --test acceptance

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use vocabdrift::drift::{vocab_shift, TokenKind, TopKVocab};
use vocabdrift::pipeline::{monitor_step, run_epoch, EpochConfig, MonitorState};
use vocabdrift::sampler::{
    parse_sizes, run_iterative_sampling, weighted_sample, weighted_sample_at, SamplingConfig, TokenShiftSignal,
};
use vocabdrift::seeding::uniform_open;
use vocabdrift::signals::{SignalKind, SignalScore};
use vocabdrift::synth::{drifting_checkpoints, generate, SynthConfig};
use vocabdrift::tokenizer::{induce_vocabulary, HashtagMode, VocabConfig, Vocabulary, CONTINUATION, UNK};
use vocabdrift::vocab_update::{plan_section_update, update_vocabulary};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn brute_shift(a: &[String], b: &[String]) -> f64 {
    let mut union: Vec<&String> = Vec::new();
    for t in a.iter().chain(b) {
        if !union.contains(&t) {
            union.push(t);
        }
    }
    let inter = a.iter().filter(|t| b.contains(t)).count();
    1.0 - inter as f64 / union.len() as f64
}

fn topk(tokens: &[String]) -> TopKVocab {
    TopKVocab {
        epoch: 0,
        kind: TokenKind::NaturalWord,
        k: tokens.len(),
        ranked: tokens.iter().map(|t| (t.clone(), 1)).collect(),
    }
}

fn random_set(rng: &mut ChaCha8Rng, universe: usize) -> Vec<String> {
    let n = rng.gen_range(1..=50);
    let mut set = BTreeSet::new();
    while set.len() < n.min(universe) {
        set.insert(format!("t{}", rng.gen_range(0..universe)));
    }
    set.into_iter().collect()
}

fn shift_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let universe = rng.gen_range(1..=120);
        let a = random_set(&mut rng, universe);
        let b = random_set(&mut rng, universe);
        let got = vocab_shift(&topk(&a), &topk(&b)).map_err(|e| e.to_string())?;
        let want = brute_shift(&a, &b);
        ensure(got == want, || format!("pair {i}: {got} != {want}"))?;
        ensure(vocab_shift(&topk(&a), &topk(&a)).unwrap() == 0.0, || format!("pair {i}: identical != 0"))?;
        let disjoint: Vec<String> = b.iter().map(|t| format!("x{t}")).collect();
        ensure(vocab_shift(&topk(&a), &topk(&disjoint)).unwrap() == 1.0, || {
            format!("pair {i}: disjoint != 1")
        })?;
    }
    Ok("1000 random pairs equal the brute-force set computation".into())
}

// ---------------------------------------------------------------- 2

fn brute_tokenize(word: &str, pieces: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut matched = None;
        for end in (start + 1..=chars.len()).rev() {
            let body: String = chars[start..end].iter().collect();
            let cand = if start == 0 { body } else { format!("{CONTINUATION}{body}") };
            if pieces.contains(&cand) {
                matched = Some((cand, end));
                break;
            }
        }
        match matched {
            Some((p, end)) => {
                out.push(p);
                start = end;
            }
            None => return vec![UNK.to_string()],
        }
    }
    out
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn tokenizer_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphabet: Vec<char> = "abcdeé".chars().collect();
    let mut checked = 0;
    let mut unk_free = 0;
    while checked < 10_000 {
        let mut pieces = HashSet::new();
        for _ in 0..rng.gen_range(1..40) {
            let body = random_word(&mut rng, &alphabet, 4);
            pieces.insert(if rng.gen_bool(0.5) { format!("{CONTINUATION}{body}") } else { body });
        }
        if rng.gen_bool(0.5) {
            for c in &alphabet {
                pieces.insert(c.to_string());
                pieces.insert(format!("{CONTINUATION}{c}"));
            }
        }
        let list: Vec<&String> = pieces.iter().collect();
        let vocab = Vocabulary::from_pieces(&list).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let word = random_word(&mut rng, &alphabet, 9);
            let got = vocab.tokenize_word(&word);
            let want = brute_tokenize(&word, &pieces);
            ensure(got == want, || format!("`{word}`: {got:?} != {want:?}"))?;
            if got != [UNK] {
                unk_free += 1;
                let joined: String = got
                    .iter()
                    .map(|p| p.strip_prefix(CONTINUATION).unwrap_or(p))
                    .collect();
                ensure(joined == word, || format!("`{word}` reassembles to `{joined}`"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} words match the prefix oracle, {unk_free} UNK-free results reassemble"))
}

// ---------------------------------------------------------------- 3

fn tokenization_vignette() -> Outcome {
    let vocab = Vocabulary::from_pieces(&["gr", "##ie", "##zman", "##n", "#un", "##es", "##co"])
        .map_err(|e| e.to_string())?;
    let g = vocab.tokenize_word("griezmann");
    ensure(g == ["gr", "##ie", "##zman", "##n"], || format!("griezmann -> {g:?}"))?;
    let u = vocab.tokenize_word("#unesco");
    ensure(u == ["#un", "##es", "##co"], || format!("#unesco -> {u:?}"))?;
    Ok(format!("griezmann -> {g:?}, #unesco -> {u:?}"))
}

// ---------------------------------------------------------------- 4

/// Literal transcription of the reference vocabulary update loop.
fn transcribed_update(current: &[String], counts: &BTreeMap<String, u64>, min_count: u64) -> BTreeSet<String> {
    let mut new_pieces: Vec<(String, u64)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    new_pieces.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let new_set: BTreeSet<&String> = new_pieces.iter().map(|(t, _)| t).collect();

    let mut new_vocabulary: BTreeSet<String> = current.iter().filter(|t| new_set.contains(t)).cloned().collect();
    let sorted: Vec<&String> = new_pieces
        .iter()
        .map(|(t, _)| t)
        .filter(|t| !new_vocabulary.contains(*t) && !current.contains(t))
        .collect();
    let vacancies = current.iter().filter(|t| !new_set.contains(t)).count();
    for t in sorted.into_iter().take(vacancies) {
        new_vocabulary.insert(t.clone());
    }
    new_vocabulary
}

fn update_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut shortages = 0;
    for i in 0..500 {
        let universe = rng.gen_range(2..60);
        let size = rng.gen_range(1..=30.min(universe));
        let current: Vec<String> = rand::seq::index::sample(&mut rng, universe, size)
            .into_iter()
            .map(|j| format!("w{j}"))
            .collect();
        let mut counts = BTreeMap::new();
        for j in 0..universe {
            if rng.gen_bool(0.6) {
                counts.insert(format!("w{j}"), rng.gen_range(1..20u64));
            }
        }
        let min_count = rng.gen_range(1..4);

        let (plan, entries) = plan_section_update(&current, &counts, min_count);
        let ours: BTreeSet<String> = entries.iter().map(|(t, _)| t.clone()).collect();
        let oracle = transcribed_update(&current, &counts, min_count);
        ensure(entries.len() == current.len() && ours.len() == current.len(), || {
            format!("instance {i}: size {} != {}", ours.len(), current.len())
        })?;
        if plan.retained.is_empty() {
            ensure(ours == oracle, || format!("instance {i}: {ours:?} != {oracle:?}"))?;
        } else {
            // the plain loop runs out of candidates; the rest is our shortage rule
            shortages += 1;
            let extra: BTreeSet<String> = ours.difference(&oracle).cloned().collect();
            ensure(oracle.is_subset(&ours), || format!("instance {i}: oracle not contained"))?;
            ensure(extra == plan.retained.iter().cloned().collect(), || {
                format!("instance {i}: extra {extra:?} != retained {:?}", plan.retained)
            })?;
        }
    }
    Ok(format!("500 instances match the transcription ({shortages} used the shortage rule), sizes preserved"))
}

// ---------------------------------------------------------------- 5

fn score(id: &str, w_s: f64, w_t: f64) -> SignalScore {
    SignalScore {
        doc_id: id.to_string(),
        w_s,
        w_t,
        signal_kind: SignalKind::MlmLoss,
    }
}

fn sampling_distribution() -> Outcome {
    let pools: [&[(f64, f64)]; 4] = [
        &[(0.0, 0.2), (1.0, 0.2)],
        &[(0.2, 0.2), (0.4, 0.4), (0.6, 0.6)],
        &[(1.0, 1.0), (0.5, 0.1), (0.0, 0.3), (0.8, 0.2)],
        &[(0.1, 0.1), (0.3, 0.3), (0.5, 0.5), (0.7, 0.7), (0.9, 0.9)],
    ];
    let draws = 100_000u64;
    let mut worst: f64 = 0.0;
    for (p, weights) in pools.iter().enumerate() {
        let pool: Vec<SignalScore> = weights
            .iter()
            .enumerate()
            .map(|(i, (s, t))| score(&format!("d{i}"), *s, *t))
            .collect();
        let cw: Vec<f64> = weights.iter().map(|(s, t)| 0.5 * s + 0.5 * t).collect();
        let total: f64 = cw.iter().sum();
        let mut hits = vec![0u64; pool.len()];
        for seed in 0..draws {
            let cfg = SamplingConfig {
                seed,
                ..Default::default()
            };
            let m = weighted_sample(&pool, 1, &cfg).map_err(|e| e.to_string())?;
            hits[m.doc_ids[0][1..].parse::<usize>().unwrap()] += 1;
        }
        for (i, h) in hits.iter().enumerate() {
            let freq = *h as f64 / draws as f64;
            let want = cw[i] / total;
            worst = worst.max((freq - want).abs());
            ensure((freq - want).abs() <= 0.01, || {
                format!("pool {p} doc {i}: frequency {freq:.4} vs {want:.4}")
            })?;
        }
    }

    // alpha = 0: ranking is the length-weighted baseline, whatever w_s says
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let n = rng.gen_range(2..=5);
        let pool: Vec<SignalScore> = (0..n)
            .map(|i| score(&format!("d{i}"), rng.gen(), rng.gen_range(0.05..1.0)))
            .collect();
        let cfg = SamplingConfig {
            alpha: 0.0,
            seed: trial,
            ..Default::default()
        };
        let got = weighted_sample_at(&pool, n, &cfg, 1).map_err(|e| e.to_string())?.doc_ids;
        let mut baseline: Vec<(f64, String)> = pool
            .iter()
            .map(|s| (uniform_open(trial, 1, &s.doc_id).powf(1.0 / s.w_t), s.doc_id.clone()))
            .collect();
        baseline.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let want: Vec<String> = baseline.into_iter().map(|(_, id)| id).collect();
        ensure(got == want, || format!("alpha=0 trial {trial}: {got:?} != {want:?}"))?;
    }
    Ok(format!("max |freq - cw/sum| = {worst:.4} over 4 pools x 100000 draws; alpha=0 matches length baseline"))
}

// ---------------------------------------------------------------- 6

fn iterative_mining() -> Outcome {
    let corpus = generate(&SynthConfig {
        docs_per_epoch: 10_000,
        drift_fraction: 0.1,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let current = induce_vocabulary(&corpus.old, &VocabConfig::default()).map_err(|e| e.to_string())?;
    let (vocab, _) = update_vocabulary(&current, &corpus.new, 2).map_err(|e| e.to_string())?;
    let drifting: BTreeSet<String> = corpus.injected.iter().cloned().collect();
    ensure(drifting.iter().all(|t| vocab.contains(t)), || "injected tokens not admitted".into())?;
    let tokens: Vec<String> = vocab.entries().map(|e| e.token).collect();
    let checkpoints = drifting_checkpoints(&tokens, &drifting, 3, 16, 6).map_err(|e| e.to_string())?;
    let sizes = parse_sizes("paper-ratio:1200").map_err(|e| e.to_string())?;

    let (mut drifted_hits, mut clean_hits) = (0usize, 0usize);
    for seed in 0..100 {
        let mut signal = TokenShiftSignal {
            vocab: vocab.clone(),
            new_tokens: drifting.clone(),
            checkpoints: checkpoints.clone(),
            top_x: None,
        };
        let cfg = SamplingConfig {
            seed,
            iteration_sizes: sizes.clone(),
            ..Default::default()
        };
        let manifests = run_iterative_sampling(&corpus.new, &mut signal, &cfg).map_err(|e| e.to_string())?;
        for id in manifests.iter().flat_map(|m| &m.doc_ids) {
            if corpus.drifted.contains(id) {
                drifted_hits += 1;
            } else {
                clean_hits += 1;
            }
        }
    }
    let n_drifted = corpus.drifted.len() as f64;
    let n_clean = (corpus.new.len() - corpus.drifted.len()) as f64;
    let drifted_rate = drifted_hits as f64 / (100.0 * n_drifted);
    let clean_rate = clean_hits as f64 / (100.0 * n_clean);
    let ratio = drifted_rate / clean_rate;
    ensure(ratio >= 2.0, || format!("per-document rate ratio {ratio:.3} < 2"))?;
    Ok(format!(
        "sizes {sizes:?}: drifted rate {drifted_rate:.4}, clean rate {clean_rate:.4}, ratio {ratio:.2}"
    ))
}

// ---------------------------------------------------------------- 7

fn monitor_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let delta = rng.gen_range(0.01..0.5);
        let patience = rng.gen_range(1..6);
        let base = rng.gen_range(0.1..20.0);
        let mut s = MonitorState::new(1000, delta, patience).unwrap().with_baseline(base);
        for _ in 0..rng.gen_range(1..200) {
            let x = base * (1.0 + delta * rng.gen_range(0.0..=1.0));
            let (next, t) = monitor_step(&s, x).map_err(|e| e.to_string())?;
            ensure(!t, || format!("stream {i}: sub-threshold window {x} triggered"))?;
            s = next;
        }
    }
    let mut sustained = 0;
    for i in 0..1000 {
        let delta = rng.gen_range(0.01..0.5);
        let patience = rng.gen_range(1..6);
        let base = rng.gen_range(0.1..20.0);
        let mut s = MonitorState::new(1000, delta, patience).unwrap().with_baseline(base);
        // some calm windows first
        for _ in 0..rng.gen_range(0..10) {
            s = monitor_step(&s, base * rng.gen_range(0.5..1.0)).unwrap().0;
        }
        let run = rng.gen_range(patience..patience + 5);
        let mut fired = false;
        for _ in 0..run {
            // strictly above the threshold
            let x = base * (1.0 + delta) * (1.0 + rng.gen_range(1e-6..1.0));
            let (next, t) = monitor_step(&s, x).map_err(|e| e.to_string())?;
            fired |= t;
            s = next;
            if fired {
                break;
            }
        }
        ensure(fired, || format!("sustained stream {i} never triggered"))?;
        sustained += 1;
    }
    Ok(format!("1000 sub-threshold streams silent, {sustained}/1000 sustained shifts triggered"))
}

// ---------------------------------------------------------------- 8

fn oracle_word_shift(a: &[vocabdrift::Document], b: &[vocabdrift::Document], k: usize) -> f64 {
    let top = |docs: &[vocabdrift::Document]| -> Vec<String> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for d in docs {
            for w in d.text.split(' ').filter(|w| !w.is_empty() && !(w.len() > 1 && w.starts_with('#'))) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut v: Vec<(&str, u64)> = counts.into_iter().collect();
        v.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
        v.into_iter().take(k).map(|(w, _)| w.to_string()).collect()
    };
    brute_shift(&top(a), &top(b))
}

fn end_to_end() -> Outcome {
    let corpus = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let current = induce_vocabulary(
        &corpus.old,
        &VocabConfig {
            mode: HashtagMode::WholeHashtags,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let cfg = EpochConfig {
        sampling: SamplingConfig {
            seed: 42,
            iteration_sizes: parse_sizes("paper-ratio:240").unwrap(),
            ..Default::default()
        },
        shift_k: 100,
        ..Default::default()
    };
    let run = run_epoch(&current, &corpus.old, &corpus.new, &cfg).map_err(|e| e.to_string())?;
    let added = &run.plan.vocab_plan.wordpiece.added;
    let missing: Vec<&String> = corpus.injected.iter().filter(|t| !added.contains(t)).collect();
    ensure(missing.is_empty(), || format!("injected tokens not admitted: {missing:?}"))?;

    let word = run
        .shift
        .iter()
        .find(|r| r.kind == TokenKind::NaturalWord)
        .ok_or("no natural-word row")?
        .shift;
    let oracle = oracle_word_shift(&corpus.old, &corpus.new, 100);
    ensure((word - oracle).abs() < 1e-12, || format!("word shift {word} != oracle {oracle}"))?;
    ensure(word > 0.2, || format!("word shift {word} <= 0.2"))?;

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let again = run_epoch(&current, &corpus.old, &corpus.new, &cfg).map_err(|e| e.to_string())?;
        again.write(d.path()).map_err(|e| e.to_string())?;
        vocabdrift::pipeline::emit_report(d.path()).map_err(|e| e.to_string())?;
    }
    let files = |root: &std::path::Path| -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for e in std::fs::read_dir(&dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    out.insert(rel, std::fs::read(&p).unwrap());
                }
            }
        }
        out
    };
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    ensure(!a.is_empty() && a == b, || "reruns differ".into())?;
    Ok(format!(
        "10/10 injected admitted, word shift {word:.4} (oracle {oracle:.4}), {} files byte-identical",
        a.len()
    ))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 shift metric oracle", shift_oracle, Duration::from_secs(1)),
        ("2 tokenizer properties", tokenizer_properties, Duration::from_secs(10)),
        ("3 tokenization vignette", tokenization_vignette, Duration::from_secs(1)),
        ("4 vocabulary update equivalence", update_equivalence, Duration::from_secs(5)),
        ("5 sampling distribution", sampling_distribution, Duration::from_secs(30)),
        ("6 iterative mining", iterative_mining, Duration::from_secs(60)),
        ("7 monitor soundness/completeness", monitor_properties, Duration::from_secs(5)),
        ("8 end-to-end drift run", end_to_end, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  criterion {name} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
