//! Acceptance criteria, one pass/fail line each.
//!
//! `TCDR_FULL_RECIPE=1` also runs the long full-scale replication.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use tcdr::io::{export, Format};
use tcdr::latency::{bench_latency, SleepDetector};
use tcdr_core::attack::{add_awgn, inject_tap_manipulation, time_shift, AttackSpec, NoiseSpec, DEFAULT_SNR_LEVELS};
use tcdr_core::classifier::{fine_tune, Architecture, EncoderAsset, ModelBundle, TrainConfig};
use tcdr_core::dataset::{dedup_by_prompt, hex, stratified_split, stratified_subset, Dataset, SplitSpec};
use tcdr_core::eval::{evaluate, prepare_samples, TextDetector};
use tcdr_core::explainer::{content_mask, explain, extract_attention, AttentionTensor, ImportanceConfig};
use tcdr_core::metrics::{cycles_at_60hz, metrics, ConfusionMatrix};
use tcdr_core::relay::{estimate_phasor, scan_trace, RelaySettings};
use tcdr_core::scenario::{draw_scenario, generate_kept, realize_trace, GeneratorConfig, ScenarioKind};
use tcdr_core::signal::{Channel, Label, MeasurementWindow, Phase, Side, SignalTrace, Source, CHANNELS, WINDOW_LEN};
use tcdr_core::textualizer::{
    align_tokens_to_cells, format_value, parse_numerals, render_prompt, normalize, textualize, PromptTemplate,
    TemplateId, WordPieceTokenizer, TOKEN_BUDGET,
};
use tcdr_core::waveform::{simulate_steady_state, SystemConfig};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Confusion matrix implied by the published detection rate, specificity and
/// accuracy on a 10,000-window test set, then fed through `metrics`.
fn criterion_1() -> Outcome {
    let (tpr, tnr, acc): (f64, f64, f64) = (0.9762, 1.0, 0.9984);
    let n: f64 = 10_000.0;
    let attack_share = (tnr - acc) / (tnr - tpr);
    let p = (attack_share * n).round();
    let tp = (tpr * p).round();
    let fn_ = p - tp;
    let tn = ((n - p) * tnr).round();
    let fp = n - p - tn;
    ensure((tp, fn_, tn, fp) == (656.0, 16.0, 9328.0, 0.0), format!("implied matrix {tp}/{fn_}/{tn}/{fp}"))?;
    let r = metrics(&ConfusionMatrix::new(tp as u64, fp as u64, tn as u64, fn_ as u64)).map_err(e2s)?;

    let prec_a = tp / (tp + fp);
    let prec_f = tn / (tn + fn_);
    let rec_a = tp / (tp + fn_);
    let rec_f = tn / (tn + fp);
    let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
    let recall = 50.0 * (rec_a + rec_f);
    let f1m = 50.0 * (f1(prec_a, rec_a) + f1(prec_f, rec_f));
    ensure((recall - 98.81).abs() <= 0.01, format!("oracle recall {recall}"))?;
    ensure((f1m - 99.36).abs() <= 0.01, format!("oracle F1 {f1m}"))?;
    ensure((r.recall_macro - 98.81).abs() <= 0.01, format!("recall {}", r.recall_macro))?;
    ensure((r.f1_macro - 99.36).abs() <= 0.01, format!("F1 {}", r.f1_macro))?;
    ensure((r.accuracy - 99.84).abs() <= 0.01, format!("accuracy {}", r.accuracy))?;
    ensure((r.detection_rate - 97.62).abs() <= 0.01, format!("detection rate {}", r.detection_rate))?;
    Ok(format!("recall {:.3}, F1 {:.3}", r.recall_macro, r.f1_macro))
}

/// Full-cycle DFT magnitude of `x` over `n` samples ending at `end` (exclusive).
fn dft_magnitude(x: &[f64], end: usize, n: usize) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (k, v) in x[end - n..end].iter().enumerate() {
        let th = 2.0 * PI * k as f64 / n as f64;
        re += v * th.cos();
        im -= v * th.sin();
    }
    2.0 * (re * re + im * im).sqrt() / n as f64
}

fn differential_pu(trace: &SignalTrace, phase: Phase, end: usize, n: usize) -> f64 {
    let a = trace.channel_per_unit(Channel::new(phase, Side::Input));
    let b = trace.channel_per_unit(Channel::new(phase, Side::Output));
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    dft_magnitude(&sum, end, n)
}

fn restraint_pu(trace: &SignalTrace, phase: Phase, end: usize, n: usize) -> f64 {
    let a = trace.channel_per_unit(Channel::new(phase, Side::Input));
    let b = trace.channel_per_unit(Channel::new(phase, Side::Output));
    (dft_magnitude(&a, end, n) + dft_magnitude(&b, end, n)) / 2.0
}

fn criterion_2() -> Outcome {
    let settings = RelaySettings::default();
    let sys = SystemConfig::default();
    let cycle = 1.0 / sys.nominal_frequency;
    let n_cycle = (sys.sampling_rate / sys.nominal_frequency).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    const SCENARIOS: usize = 500;

    for i in 0..SCENARIOS {
        let load = rng.random_range(50.0..400.0);
        let t0 = rng.random_range(0.0..1.0);
        let trace = simulate_steady_state(&sys, load, t0, 0.12).map_err(e2s)?;
        let d = scan_trace(&trace, &settings).map_err(e2s)?.decision;
        ensure(!d.tripped(), format!("steady-state scenario {i} at {load:.1} MW tripped"))?;
    }

    let faults = GeneratorConfig {
        attack_fraction: 0.0,
        ..GeneratorConfig::default()
    };
    let mut strong = 0;
    for i in 0..SCENARIOS as u64 {
        let s = draw_scenario(&faults, i);
        let ScenarioKind::Fault(spec) = &s.kind else {
            return Err(format!("scenario {i} is not a fault"));
        };
        let trace = realize_trace(&faults, &s).map_err(e2s)?;
        let deadline = spec.inception_time + 2.0 * cycle;
        let end = trace.index_at_or_after(deadline).min(trace.len());
        let diff = Phase::ALL
            .iter()
            .map(|p| differential_pu(&trace, *p, end, n_cycle))
            .fold(0.0, f64::max);
        if diff < 5.0 * settings.pickup {
            continue;
        }
        strong += 1;
        let d = scan_trace(&trace, &settings).map_err(e2s)?.decision;
        match d.trip_time {
            Some(t) if t <= deadline + 1e-9 => {}
            Some(t) => {
                return Err(format!(
                    "fault {} tripped {:.2} cycles after inception",
                    s.id,
                    (t - spec.inception_time) / cycle
                ))
            }
            None => return Err(format!("fault {} with {diff:.2} pu differential did not trip", s.id)),
        }
    }
    ensure(strong >= SCENARIOS / 2, format!("only {strong} strong faults drawn"))?;

    let mut taps = 0;
    while taps < SCENARIOS {
        let load = rng.random_range(50.0..400.0);
        let trace = simulate_steady_state(&sys, load, 0.95, 0.12).map_err(e2s)?;
        let shift: f64 = rng.random_range(-0.3..0.3);
        if shift == 0.0 {
            continue;
        }
        let attacked = inject_tap_manipulation(&trace, &AttackSpec::tap(1.0, shift)).map_err(e2s)?;
        let end = attacked.len();
        let below = Phase::ALL.iter().all(|p| {
            differential_pu(&attacked, *p, end, n_cycle)
                < settings.pickup.max(settings.slope * restraint_pu(&attacked, *p, end, n_cycle)) * 0.98
        });
        if !below {
            continue;
        }
        taps += 1;
        let d = scan_trace(&attacked, &settings).map_err(e2s)?.decision;
        ensure(!d.tripped(), format!("tap shift {shift:.4} at {load:.1} MW tripped"))?;
    }
    Ok(format!(
        "{SCENARIOS} steady, {strong}/{SCENARIOS} strong faults within 2 cycles, {taps} sub-slope tap attacks"
    ))
}

fn criterion_3() -> Outcome {
    let tok = WordPieceTokenizer::reference();
    let batch = generate_kept(&GeneratorConfig::default(), 1000).map_err(e2s)?;
    let holdout = generate_kept(&GeneratorConfig::complex_holdout(7), 200).map_err(e2s)?;
    let mut windows = batch.windows;
    windows.extend(holdout.windows);
    let mut longest = 0;
    let mut prompts = 0;
    for w in &windows {
        let norm = normalize(w);
        for template in PromptTemplate::all() {
            let doc = render_prompt(&norm, &template).map_err(e2s)?;
            let numerals = parse_numerals(&doc).map_err(e2s)?;
            ensure(numerals.len() == 192, format!("{}: {} numerals", w.scenario_id, numerals.len()))?;
            let mut seen = [[false; CHANNELS]; WINDOW_LEN];
            for (t, c, text) in &numerals {
                let v: f64 = text.parse().map_err(|_| format!("`{text}` is not a number"))?;
                ensure(
                    text.len() == 5 && text.as_bytes()[1] == b'.',
                    format!("`{text}` is not d.ddd"),
                )?;
                ensure(format_value(v).map_err(e2s)? == *text, format!("`{text}` does not round-trip"))?;
                ensure(
                    (v - norm.value(*t, *c)).abs() <= 0.0005 + 1e-12,
                    format!("`{text}` is far from {}", norm.value(*t, *c)),
                )?;
                seen[*t][*c] = true;
            }
            ensure(seen.iter().flatten().all(|s| *s), "a cell has no numeral")?;
            prompts += 1;
        }
        let (doc, sample) = textualize(w, &PromptTemplate::for_id(TemplateId::Baseline), &tok).map_err(e2s)?;
        ensure(sample.active_len() <= TOKEN_BUDGET, format!("{} tokens", sample.active_len()))?;
        longest = longest.max(sample.active_len());
        for span in &doc.value_spans {
            let covered: String = sample
                .token_offsets
                .iter()
                .filter(|(s, e)| *s >= span.start && *e <= span.end && s < e)
                .map(|(s, e)| &doc.text[*s..*e])
                .collect();
            ensure(
                covered == doc.text[span.start..span.end],
                format!("tokens of `{}` rebuild `{covered}`", &doc.text[span.start..span.end]),
            )?;
        }
    }
    Ok(format!(
        "{prompts} prompts round-trip 192 numerals; {} BASELINE prompts, longest {longest} tokens",
        windows.len()
    ))
}

fn criterion_4() -> Outcome {
    let sys = SystemConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let load = sys.load_levels[seed as usize % sys.load_levels.len()];
        let clean = simulate_steady_state(&sys, load, 0.01 * seed as f64, 1.0).map_err(e2s)?;
        ensure(clean.len() >= 1600, format!("trace of {} samples", clean.len()))?;
        for snr in DEFAULT_SNR_LEVELS {
            let noisy = add_awgn(&clean, &NoiseSpec::new(snr, seed)).map_err(e2s)?;
            for c in 0..CHANNELS {
                let (mut ps, mut pn) = (0.0, 0.0);
                for (a, b) in clean.samples().iter().zip(noisy.samples()) {
                    ps += a[c] * a[c];
                    pn += (b[c] - a[c]) * (b[c] - a[c]);
                }
                let realized = 10.0 * (ps / pn).log10();
                worst = worst.max((realized - snr).abs());
            }
        }
    }
    ensure(worst <= 0.2, format!("worst SNR error {worst:.4} dB"))?;
    Ok(format!("worst realized SNR error {worst:.2e} dB over 100 seeds x 4 levels x 6 channels"))
}

/// Linear interpolation of `x` onto a grid `factor` times finer.
fn upsample(x: &[f64], factor: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((x.len() - 1) * factor + 1);
    for w in x.windows(2) {
        for k in 0..factor {
            let f = k as f64 / factor as f64;
            out.push(w[0] * (1.0 - f) + w[1] * f);
        }
    }
    out.push(*x.last().unwrap());
    out
}

fn criterion_5() -> Outcome {
    let sys = SystemConfig::default();
    let trace = simulate_steady_state(&sys, 350.0, 0.95, 0.2).map_err(e2s)?;
    let shifted = time_shift(&trace, Side::Output, 1.0, trace.t0).map_err(e2s)?;
    let ch = Channel::new(Phase::A, Side::Output);
    let (a, b) = (trace.channel(ch), shifted.channel(ch));

    let factor = 16;
    let (ua, ub) = (upsample(&a, factor), upsample(&b, factor));
    let margin = 8 * factor;
    let max_lag = 4 * factor;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for lag in 0..=max_lag {
        let score: f64 = (margin..ua.len() - margin).map(|i| ub[i] * ua[i - lag]).sum();
        if score > best.0 {
            best = (score, lag);
        }
    }
    let est = best.1 as f64 / factor as f64;
    let expected = 1e-3 * sys.sampling_rate;
    ensure((expected - 1.6).abs() < 1e-12, "1 ms is not 1.6 samples")?;
    ensure((est - expected).abs() <= 0.1, format!("estimated shift {est} samples"))?;

    let n = (sys.sampling_rate / sys.nominal_frequency).round() as usize;
    let start = 4 * n;
    let pa = estimate_phasor(&a[start..start + n], sys.sampling_rate, sys.nominal_frequency).map_err(e2s)?;
    let pb = estimate_phasor(&b[start..start + n], sys.sampling_rate, sys.nominal_frequency).map_err(e2s)?;
    let mut diff = (pa.angle - pb.angle).to_degrees();
    while diff > 180.0 {
        diff -= 360.0;
    }
    while diff < -180.0 {
        diff += 360.0;
    }
    let oracle = 360.0 * sys.nominal_frequency * 1e-3;
    ensure((oracle - 21.6).abs() < 1e-9, "oracle angle")?;
    ensure((diff - oracle).abs() <= 0.5, format!("phasor angle difference {diff:.3} deg"))?;
    Ok(format!("shift {est} samples, angle difference {diff:.3} deg"))
}

struct Learned {
    probe: ModelBundle,
    test: Dataset,
}

fn criterion_6() -> (Outcome, Option<Learned>) {
    let run = || -> Result<(String, Learned), String> {
        let tok = WordPieceTokenizer::reference();
        let batch = generate_kept(&GeneratorConfig::default(), 2600).map_err(e2s)?;
        let ds = dedup_by_prompt(&Dataset::new(batch.windows)).map_err(e2s)?.dataset;
        let (train, test) = stratified_split(&ds, &SplitSpec::default()).map_err(e2s)?;
        let subset = stratified_subset(&train, 2000, 42).map_err(e2s)?;
        ensure((subset.len() as i64 - 2000).abs() <= 2, format!("subset of {}", subset.len()))?;
        let (fit, val) = stratified_split(
            &subset,
            &SplitSpec {
                train_fraction: 0.9,
                seed: 42,
            },
        )
        .map_err(e2s)?;
        let asset = EncoderAsset::compact(&tok, Architecture::Bidirectional);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let t0 = Instant::now();
        let fit_s = prepare_samples(fit.windows(), TemplateId::Baseline, &tok).map_err(e2s)?;
        let val_s = prepare_samples(val.windows(), TemplateId::Baseline, &tok).map_err(e2s)?;
        let bundle = fine_tune(&asset, &fit_s, &val_s, &cfg).map_err(e2s)?;
        let detector = TextDetector::new(&bundle, &tok, TemplateId::Baseline).map_err(e2s)?;
        let report = evaluate(&detector, &test).map_err(e2s)?.report;
        let recall = report.detection_rate / 100.0;
        let accuracy = report.accuracy / 100.0;
        let majority = test.majority_rate();
        let elapsed = t0.elapsed();

        let probe_set = stratified_subset(&train, 32, 7).map_err(e2s)?;
        let probe_s = prepare_samples(probe_set.windows(), TemplateId::Baseline, &tok).map_err(e2s)?;
        let probe_cfg = TrainConfig {
            epochs: 40,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let probe = fine_tune(&asset, &probe_s, &[], &probe_cfg).map_err(e2s)?;
        let msg = format!(
            "recall {recall:.3}, accuracy {accuracy:.3} vs majority {majority:.3} on {} test windows ({:.0} s); overfit probe train accuracy {:.3} on {}",
            test.len(),
            elapsed.as_secs_f64(),
            probe.log.train_accuracy,
            probe_s.len()
        );
        let passed = recall >= 0.70 && accuracy > majority && probe.log.train_accuracy == 1.0 && probe_s.len() == 32;
        let learned = Learned { probe, test };
        if passed {
            Ok((msg, learned))
        } else {
            Err(msg)
        }
    };
    match run() {
        Ok((m, l)) => (Ok(m), Some(l)),
        Err(e) => (Err(e), None),
    }
}

fn criterion_7() -> Outcome {
    if std::env::var("TCDR_FULL_RECIPE").as_deref() != Ok("1") {
        return Ok("SKIPPED (optional long-running gate; set TCDR_FULL_RECIPE=1)".into());
    }
    let tok = WordPieceTokenizer::reference();
    let batch = generate_kept(&GeneratorConfig::default(), 50_000).map_err(e2s)?;
    let ds = dedup_by_prompt(&Dataset::new(batch.windows)).map_err(e2s)?.dataset;
    let (train, test) = stratified_split(&ds, &SplitSpec::default()).map_err(e2s)?;
    let (fit, val) = stratified_split(&train, &SplitSpec { train_fraction: 0.9, seed: 42 }).map_err(e2s)?;
    let asset = EncoderAsset::compact(&tok, Architecture::Bidirectional);
    let fit_s = prepare_samples(fit.windows(), TemplateId::Baseline, &tok).map_err(e2s)?;
    let val_s = prepare_samples(val.windows(), TemplateId::Baseline, &tok).map_err(e2s)?;
    let bundle = fine_tune(&asset, &fit_s, &val_s, &TrainConfig::pretrained()).map_err(e2s)?;
    let detector = TextDetector::new(&bundle, &tok, TemplateId::Baseline).map_err(e2s)?;
    let r = evaluate(&detector, &test).map_err(e2s)?.report;
    let msg = format!("detection rate {:.2}, specificity {:.2}", r.detection_rate, r.specificity);
    if (r.detection_rate - 97.62).abs() <= 1.5 && r.specificity >= 99.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn check_stochastic(t: &AttentionTensor) -> Result<(), String> {
    for l in 0..t.layers() {
        for h in 0..t.heads() {
            for row in t.matrix(l, h) {
                let s: f64 = row.iter().sum();
                ensure((s - 1.0).abs() <= 1e-6, format!("row sum {s}"))?;
            }
        }
    }
    Ok(())
}

fn criterion_8(learned: Option<&Learned>) -> Outcome {
    let row = vec![1.0f64.ln(), 2.0f64.ln(), 4.0f64.ln()];
    let t = AttentionTensor::from_logits(&[vec![vec![row.clone(), row.clone(), row]]], false).map_err(e2s)?;
    for r in t.matrix(0, 0) {
        for (got, want) in r.iter().zip([1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0]) {
            ensure((got - want).abs() <= 1e-9, format!("softmax {got} vs {want}"))?;
        }
    }
    check_stochastic(&t)?;

    let tok = WordPieceTokenizer::reference();
    let (model, windows): (ModelBundle, Vec<MeasurementWindow>) = match learned {
        Some(l) => (l.probe.clone(), l.test.windows().iter().take(12).cloned().collect()),
        None => {
            let ds = Dataset::new(generate_kept(&GeneratorConfig::default(), 40).map_err(e2s)?.windows);
            let s = prepare_samples(&ds.windows()[..16], TemplateId::Baseline, &tok).map_err(e2s)?;
            let asset = EncoderAsset::compact(&tok, Architecture::Bidirectional);
            let m = fine_tune(&asset, &s, &[], &TrainConfig { epochs: 1, ..TrainConfig::default() }).map_err(e2s)?;
            (m, ds.windows()[16..28].to_vec())
        }
    };
    let mut tensors = 0;
    for w in &windows {
        let (doc, sample) = textualize(w, &PromptTemplate::for_id(TemplateId::Baseline), &tok).map_err(e2s)?;
        let tensor = extract_attention(&model, &sample).map_err(e2s)?;
        check_stochastic(&tensor)?;
        tensors += 1;

        let alignment = align_tokens_to_cells(&sample, &doc).map_err(e2s)?;
        let mut cells = std::collections::BTreeSet::new();
        for c in alignment.iter().flatten() {
            cells.insert(*c);
        }
        ensure(cells.len() == 192, format!("alignment covers {} cells", cells.len()))?;
        let map = explain(&model, &sample, &alignment, &ImportanceConfig::default()).map_err(e2s)?;
        ensure(map.uncovered.is_empty(), format!("{} uncovered cells", map.uncovered.len()))?;

        // Received mass from scratch over active positions.
        let active: Vec<usize> = (0..sample.len()).filter(|i| sample.attention_mask[*i]).collect();
        let mask = content_mask(&sample);
        let n = tensor.n_tokens();
        let mut raw = vec![0.0f64; n];
        for l in 0..tensor.layers() {
            for h in 0..tensor.heads() {
                let a = tensor.matrix(l, h);
                for (j, r) in raw.iter_mut().enumerate() {
                    if mask[active[j]] {
                        *r += a.iter().map(|row| row[j]).sum::<f64>();
                    }
                }
            }
        }
        let top = raw.iter().cloned().fold(0.0, f64::max);
        let expected: f64 = active
            .iter()
            .zip(&raw)
            .filter(|(p, _)| alignment[**p].is_some())
            .map(|(_, r)| r / top)
            .sum();
        let got = map.conserved_mass();
        ensure((got - expected).abs() <= 1e-9, format!("conserved mass {got} vs {expected}"))?;
    }
    Ok(format!("3-token softmax exact; {tensors} extracted tensors row-stochastic, 192 cells, mass conserved"))
}

fn criterion_9() -> Outcome {
    let windows: Vec<MeasurementWindow> = (0..200)
        .map(|i| {
            MeasurementWindow::new(vec![[i as f64; CHANNELS]; WINDOW_LEN], Label::Fault, format!("s{i}"), 16, Source::Simulated)
                .map_err(e2s)
        })
        .collect::<Result<_, _>>()?;
    let rep = bench_latency(&SleepDetector(Duration::from_micros(2000)), &windows, 5, "stub").map_err(e2s)?;
    ensure((rep.mean_ms - 2.0).abs() <= 0.5, format!("stub mean {:.3} ms", rep.mean_ms))?;
    let c = cycles_at_60hz(5.39);
    ensure((c - 0.3234).abs() < 1e-12, format!("5.39 ms is {c} cycles"))?;
    ensure(format!("{c:.2}") == "0.32", "cycles do not report as 0.32")?;
    Ok(format!("stub mean {:.3} ms, 5.39 ms = {c:.4} cycles", rep.mean_ms))
}

fn split_digest(ds: &Dataset, dir: &std::path::Path) -> Result<(String, usize, usize), String> {
    let (train, test) = stratified_split(ds, &SplitSpec::default()).map_err(e2s)?;
    let (a, b) = (dir.join("train.records"), dir.join("test.records"));
    export(&train, &a, Format::Records).map_err(e2s)?;
    export(&test, &b, Format::Records).map_err(e2s)?;
    let mut h = Sha256::new();
    h.update(std::fs::read(&a).map_err(e2s)?);
    h.update(b"|");
    h.update(std::fs::read(&b).map_err(e2s)?);
    Ok((hex(&h.finalize()), train.count(Label::Fault), train.count(Label::Attack)))
}

/// Digest of the exported seed-42 split of the 600-window default batch.
const GOLDEN_SPLIT: &str = "257d4ff96fe67444499f1269127e67f5e584cb6eac315cb8b1357b8125839d5a";

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let ds = Dataset::new(generate_kept(&GeneratorConfig::default(), 600).map_err(e2s)?.windows);
    let first = split_digest(&ds, dir.path())?;
    let reversed = Dataset::new(ds.windows().iter().rev().cloned().collect());
    let second = split_digest(&reversed, dir.path())?;
    ensure(first == second, "split differs between runs or input orders")?;
    if !GOLDEN_SPLIT.is_empty() {
        ensure(first.0 == GOLDEN_SPLIT, format!("split digest {} differs from the recorded one", first.0))?;
    }
    for (label, k) in [(Label::Fault, first.1), (Label::Attack, first.2)] {
        let n = ds.count(label) as f64;
        ensure((k as f64 - 0.8 * n).abs() <= 1.0, format!("{label}: {k} of {n} in train"))?;
    }
    Ok(format!(
        "digest {}, train FAULT {}/{} ATTACK {}/{}",
        first.0,
        first.1,
        ds.count(Label::Fault),
        first.2,
        ds.count(Label::Attack)
    ))
}

fn report(id: usize, name: &str, outcome: &Outcome, failed: &mut Vec<usize>) {
    match outcome {
        Ok(m) => println!("criterion {id:>2} {name:<34} PASS  {m}"),
        Err(m) => {
            println!("criterion {id:>2} {name:<34} FAIL  {m}");
            failed.push(id);
        }
    }
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    report(1, "metric identity", &criterion_1(), &mut failed);
    report(2, "relay oracle properties", &criterion_2(), &mut failed);
    report(3, "textualization bit-exactness", &criterion_3(), &mut failed);
    report(4, "noise calibration", &criterion_4(), &mut failed);
    report(5, "time-stamp attack calibration", &criterion_5(), &mut failed);
    let (c6, learned) = criterion_6();
    report(6, "reduced-scale learning", &c6, &mut failed);
    report(7, "full-recipe replication", &criterion_7(), &mut failed);
    report(8, "attention math", &criterion_8(learned.as_ref()), &mut failed);
    report(9, "latency harness calibration", &criterion_9(), &mut failed);
    report(10, "split reproducibility", &criterion_10(), &mut failed);
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
