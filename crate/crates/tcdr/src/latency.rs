//! Single-sample inference timing.

use std::time::{Duration, Instant};

use tcdr_core::classifier::{ModelBundle, Prediction};
use tcdr_core::eval::Detector;
use tcdr_core::metrics::LatencyReport;
use tcdr_core::signal::MeasurementWindow;
use tcdr_core::textualizer::{textualize, PromptTemplate, TemplateId, TokenizerAsset};
use tcdr_core::Error as CoreError;

use crate::error::Result;

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn check(windows: &[MeasurementWindow]) -> Result<()> {
    if windows.is_empty() {
        return Err(CoreError::Data("latency benchmark needs at least one sample".into()).into());
    }
    Ok(())
}

/// Times `detect` per window at batch size 1; the first `warmup` calls are discarded.
pub fn bench_latency<D: Detector + ?Sized>(
    detector: &D,
    windows: &[MeasurementWindow],
    warmup: usize,
    hardware_note: &str,
) -> Result<LatencyReport> {
    check(windows)?;
    for w in windows.iter().cycle().take(warmup) {
        detector.detect(w)?;
    }
    let mut samples = Vec::with_capacity(windows.len());
    for w in windows {
        let t0 = Instant::now();
        let p = detector.detect(w)?;
        samples.push(ms(t0.elapsed()));
        std::hint::black_box(p);
    }
    Ok(LatencyReport::from_samples_ms(&samples, hardware_note)?)
}

/// Deployment path (normalize, render, tokenize, predict) with the text
/// preparation time reported separately.
pub fn bench_text_pipeline<T: TokenizerAsset + ?Sized>(
    bundle: &ModelBundle,
    tokenizer: &T,
    template: TemplateId,
    windows: &[MeasurementWindow],
    warmup: usize,
    hardware_note: &str,
) -> Result<LatencyReport> {
    check(windows)?;
    let template = PromptTemplate::for_id(template);
    let run = |w: &MeasurementWindow| -> Result<(f64, f64)> {
        let t0 = Instant::now();
        let (_, sample) = textualize(w, &template, tokenizer)?;
        let t1 = Instant::now();
        std::hint::black_box(bundle.predict(&sample)?);
        Ok((ms(t1 - t0), ms(t1.elapsed()) + ms(t1 - t0)))
    };
    for w in windows.iter().cycle().take(warmup) {
        run(w)?;
    }
    let mut total = Vec::with_capacity(windows.len());
    let mut tok = 0.0;
    for w in windows {
        let (t, all) = run(w)?;
        tok += t;
        total.push(all);
    }
    let mut report = LatencyReport::from_samples_ms(&total, hardware_note)?;
    report.tokenize_mean_ms = Some(tok / windows.len() as f64);
    Ok(report)
}

/// Harness calibration stub: sleeps, then answers FAULT.
#[derive(Debug, Clone, Copy)]
pub struct SleepDetector(pub Duration);

impl Detector for SleepDetector {
    fn name(&self) -> String {
        format!("sleep-{}us", self.0.as_micros())
    }

    fn detect(&self, _: &MeasurementWindow) -> tcdr_core::Result<Prediction> {
        std::thread::sleep(self.0);
        Ok(Prediction::from_probability(0.0))
    }
}

/// CPU model string from `/proc/cpuinfo`, when available.
pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu}; {threads} thread(s); {}", std::env::consts::ARCH)
}
