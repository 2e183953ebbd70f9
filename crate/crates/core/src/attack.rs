//! False-data-injection transforms and calibrated measurement noise.
//!
//! Every transform returns a new trace and leaves its input untouched.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::math;
use crate::relay::fit_phasor;
use crate::signal::{
    Channel, EventKind, EventMarker, MeasurementWindow, Phase, Side, SignalTrace, CHANNELS,
};

/// Largest tap-ratio change an attacker can command.
pub const MAX_TAP_SHIFT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    #[serde(rename = "INJECT_ARBITRARY")]
    InjectArbitrary,
    #[serde(rename = "REPLAY")]
    Replay,
    #[serde(rename = "TAP_MANIPULATION")]
    TapManipulation,
    #[serde(rename = "TSA_PLUS_FDIA")]
    TsaPlusFdia,
}

impl AttackKind {
    pub fn code(self) -> &'static str {
        match self {
            AttackKind::InjectArbitrary => "INJECT_ARBITRARY",
            AttackKind::Replay => "REPLAY",
            AttackKind::TapManipulation => "TAP_MANIPULATION",
            AttackKind::TsaPlusFdia => "TSA_PLUS_FDIA",
        }
    }
}

/// Kind-specific attack parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttackPayload {
    InjectArbitrary {
        /// Peak amperes per phase (A, B, C).
        magnitude_profile: Vec<f64>,
        /// Extra angle per phase relative to the legitimate waveform, radians.
        phase_shift: [f64; 3],
    },
    Replay {
        replay_source: String,
    },
    TapManipulation {
        tap_shift: f64,
    },
    TsaPlusFdia {
        tsa_delay_ms: f64,
        fdia: Box<AttackSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub onset_time: f64,
    pub target_side: Side,
    pub payload: AttackPayload,
}

impl AttackSpec {
    pub fn kind(&self) -> AttackKind {
        match self.payload {
            AttackPayload::InjectArbitrary { .. } => AttackKind::InjectArbitrary,
            AttackPayload::Replay { .. } => AttackKind::Replay,
            AttackPayload::TapManipulation { .. } => AttackKind::TapManipulation,
            AttackPayload::TsaPlusFdia { .. } => AttackKind::TsaPlusFdia,
        }
    }

    pub fn inject(onset_time: f64, target_side: Side, magnitude_profile: Vec<f64>) -> Self {
        Self {
            onset_time,
            target_side,
            payload: AttackPayload::InjectArbitrary {
                magnitude_profile,
                phase_shift: [0.0; 3],
            },
        }
    }

    pub fn replay(onset_time: f64, target_side: Side, replay_source: impl Into<String>) -> Self {
        Self {
            onset_time,
            target_side,
            payload: AttackPayload::Replay {
                replay_source: replay_source.into(),
            },
        }
    }

    pub fn tap(onset_time: f64, tap_shift: f64) -> Self {
        Self {
            onset_time,
            target_side: Side::Output,
            payload: AttackPayload::TapManipulation { tap_shift },
        }
    }

    pub fn tsa_plus(tsa_delay_ms: f64, fdia: AttackSpec) -> Self {
        Self {
            onset_time: fdia.onset_time,
            target_side: Side::Output,
            payload: AttackPayload::TsaPlusFdia {
                tsa_delay_ms,
                fdia: Box::new(fdia),
            },
        }
    }
}

fn mark_attack(trace: &mut SignalTrace, onset: f64) {
    trace.event_markers.push(EventMarker {
        time: onset,
        kind: EventKind::Attack,
    });
}

fn onset_index(trace: &SignalTrace, onset: f64) -> Result<usize> {
    if !trace.contains_time(onset) {
        return Err(out_of_range(
            "attack onset",
            format!("{onset} s outside trace [{}, {})", trace.t0, trace.end_time()),
        ));
    }
    Ok(trace.index_at_or_after(onset))
}

fn side_channels(side: Side) -> [Channel; 3] {
    Phase::ALL.map(|p| Channel::new(p, side))
}

/// Replaces the targeted side, from onset on, with attacker sinusoids.
///
/// The injected waves keep the frequency and angle of the legitimate signal
/// (estimated over the cycle before onset) plus the requested shift.
pub fn inject_arbitrary(trace: &SignalTrace, spec: &AttackSpec) -> Result<SignalTrace> {
    let AttackPayload::InjectArbitrary {
        magnitude_profile,
        phase_shift,
    } = &spec.payload
    else {
        return Err(Error::InvalidArgument(format!(
            "inject_arbitrary got a {} spec",
            spec.kind().code()
        )));
    };
    if magnitude_profile.is_empty() {
        return Err(Error::InvalidArgument("magnitude_profile is empty".into()));
    }
    if magnitude_profile.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "magnitude_profile needs 3 phases, got {}",
            magnitude_profile.len()
        )));
    }
    if magnitude_profile.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument(
            "magnitude_profile entries must be finite and >= 0".into(),
        ));
    }
    let start = onset_index(trace, spec.onset_time)?;
    let fs = trace.sampling_rate;
    let cycle = math::round(fs / trace.frequency) as usize;
    if start < cycle {
        return Err(out_of_range(
            "attack onset",
            format!("needs one cycle ({cycle} samples) of pre-attack data"),
        ));
    }
    let w = 2.0 * PI * trace.frequency / fs;
    let mut out = trace.clone();
    for ch in side_channels(spec.target_side) {
        let legit: Vec<f64> = trace.samples()[start - cycle..start]
            .iter()
            .map(|r| r[ch.index()])
            .collect();
        let phasor = fit_phasor(&legit, start - cycle, fs, trace.frequency);
        let amp = magnitude_profile[ch.phase().index()];
        let angle = phasor.angle + phase_shift[ch.phase().index()];
        for (k, row) in out.samples_mut().iter_mut().enumerate().skip(start) {
            row[ch.index()] = amp * math::cos(w * k as f64 + angle);
        }
    }
    mark_attack(&mut out, spec.onset_time);
    Ok(out)
}

/// Copies captured fault data onto the targeted side from onset on.
///
/// Material is read from `fault_trace` starting at its fault-inception marker
/// and rescaled between the two traces' per-unit bases.
pub fn inject_replay(
    trace: &SignalTrace,
    fault_trace: &SignalTrace,
    spec: &AttackSpec,
) -> Result<SignalTrace> {
    if !matches!(spec.payload, AttackPayload::Replay { .. }) {
        return Err(Error::InvalidArgument(format!(
            "inject_replay got a {} spec",
            spec.kind().code()
        )));
    }
    replay_channels(trace, fault_trace, spec.onset_time, &side_channels(spec.target_side))
}

/// Replay onto an arbitrary set of channels.
pub fn replay_channels(
    trace: &SignalTrace,
    fault_trace: &SignalTrace,
    onset: f64,
    channels: &[Channel],
) -> Result<SignalTrace> {
    if (trace.sampling_rate - fault_trace.sampling_rate).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "sampling rate mismatch: {} vs {} Hz",
            trace.sampling_rate, fault_trace.sampling_rate
        )));
    }
    let start = onset_index(trace, onset)?;
    let inception = fault_trace.first_marker(EventKind::Fault).ok_or_else(|| {
        Error::InvalidArgument("replay material carries no fault inception marker".into())
    })?;
    let src0 = fault_trace.index_at_or_after(inception);
    let needed = trace.len() - start;
    if src0 + needed > fault_trace.len() {
        return Err(Error::InvalidArgument(format!(
            "replay material too short: need {needed} samples after inception, have {}",
            fault_trace.len().saturating_sub(src0)
        )));
    }
    let mut out = trace.clone();
    for ch in channels {
        let scale = trace.base.for_side(ch.side()) / fault_trace.base.for_side(ch.side());
        for (i, row) in out.samples_mut()[start..].iter_mut().enumerate() {
            row[ch.index()] = fault_trace.samples()[src0 + i][ch.index()] * scale;
        }
    }
    mark_attack(&mut out, onset);
    Ok(out)
}

/// Scales the output side by `1 + tap_shift` from onset on.
pub fn inject_tap_manipulation(trace: &SignalTrace, spec: &AttackSpec) -> Result<SignalTrace> {
    let AttackPayload::TapManipulation { tap_shift } = spec.payload else {
        return Err(Error::InvalidArgument(format!(
            "inject_tap_manipulation got a {} spec",
            spec.kind().code()
        )));
    };
    if tap_shift == 0.0 || !(tap_shift.abs() <= MAX_TAP_SHIFT) {
        return Err(out_of_range(
            "tap shift",
            format!("|{tap_shift}| must lie in (0, {MAX_TAP_SHIFT}]"),
        ));
    }
    let start = onset_index(trace, spec.onset_time)?;
    let mut out = trace.clone();
    for row in &mut out.samples_mut()[start..] {
        for ch in side_channels(Side::Output) {
            row[ch.index()] *= 1.0 + tap_shift;
        }
    }
    mark_attack(&mut out, spec.onset_time);
    Ok(out)
}

/// Delays the `side` channels by `delay_ms` from onset on, using linear
/// interpolation between samples.
pub fn time_shift(
    trace: &SignalTrace,
    side: Side,
    delay_ms: f64,
    onset: f64,
) -> Result<SignalTrace> {
    if !(delay_ms > 0.0) || !delay_ms.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time-stamp delay must be > 0 ms, got {delay_ms}"
        )));
    }
    let shift = delay_ms * 1e-3 * trace.sampling_rate;
    let span = (trace.len() - 1) as f64;
    if shift >= span {
        return Err(out_of_range(
            "time-stamp delay",
            format!("{delay_ms} ms exceeds the trace span"),
        ));
    }
    let start = onset_index(trace, onset)?;
    let mut out = trace.clone();
    for ch in side_channels(side) {
        let src = trace.channel(ch);
        for (k, row) in out.samples_mut().iter_mut().enumerate().skip(start) {
            let pos = k as f64 - shift;
            row[ch.index()] = if pos <= 0.0 {
                src[0]
            } else {
                let lo = math::floor(pos) as usize;
                let frac = pos - lo as f64;
                if lo + 1 < src.len() {
                    src[lo] * (1.0 - frac) + src[lo + 1] * frac
                } else {
                    src[lo]
                }
            };
        }
    }
    Ok(out)
}

/// Time-stamp attack on the output side followed by an FDIA payload.
///
/// `replay_material` is required when the payload is a replay.
pub fn inject_tsa_plus_fdia(
    trace: &SignalTrace,
    fdia: &AttackSpec,
    tsa_delay_ms: f64,
    replay_material: Option<&SignalTrace>,
) -> Result<SignalTrace> {
    if !(tsa_delay_ms > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tsa_delay_ms must be > 0, got {tsa_delay_ms}"
        )));
    }
    if fdia.kind() == AttackKind::TsaPlusFdia {
        return Err(Error::InvalidArgument(
            "TSA payload must be one of the three FDIA kinds".into(),
        ));
    }
    let shifted = time_shift(trace, Side::Output, tsa_delay_ms, fdia.onset_time)?;
    apply_attack(&shifted, fdia, replay_material)
}

/// Dispatches on the spec's kind.
pub fn apply_attack(
    trace: &SignalTrace,
    spec: &AttackSpec,
    replay_material: Option<&SignalTrace>,
) -> Result<SignalTrace> {
    let need_material = || {
        replay_material.ok_or_else(|| {
            Error::InvalidArgument("replay attack needs replay material".into())
        })
    };
    match &spec.payload {
        AttackPayload::InjectArbitrary { .. } => inject_arbitrary(trace, spec),
        AttackPayload::Replay { .. } => inject_replay(trace, need_material()?, spec),
        AttackPayload::TapManipulation { .. } => inject_tap_manipulation(trace, spec),
        AttackPayload::TsaPlusFdia { tsa_delay_ms, fdia } => {
            inject_tsa_plus_fdia(trace, fdia, *tsa_delay_ms, replay_material)
        }
    }
}

/// How realized noise power relates to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseCalibration {
    /// Each channel's Gaussian draw is rescaled so its mean-square power
    /// equals the target exactly.
    #[default]
    ExactPower,
    /// Plain i.i.d. draws with the target variance.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub calibration: NoiseCalibration,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            calibration: NoiseCalibration::ExactPower,
        }
    }
}

/// Signal SNR levels swept by the noise campaign, dB.
pub const DEFAULT_SNR_LEVELS: [f64; 4] = [45.0, 40.0, 35.0, 30.0];

/// Types whose six channels can be corrupted in place.
pub trait NoiseTarget: Clone {
    fn rows(&self) -> &[[f64; CHANNELS]];
    fn rows_mut(&mut self) -> &mut [[f64; CHANNELS]];
}

impl NoiseTarget for SignalTrace {
    fn rows(&self) -> &[[f64; CHANNELS]] {
        self.samples()
    }
    fn rows_mut(&mut self) -> &mut [[f64; CHANNELS]] {
        self.samples_mut()
    }
}

impl NoiseTarget for MeasurementWindow {
    fn rows(&self) -> &[[f64; CHANNELS]] {
        self.values()
    }
    fn rows_mut(&mut self) -> &mut [[f64; CHANNELS]] {
        self.values_mut()
    }
}

/// Mean-square power of one channel.
pub fn channel_power(rows: &[[f64; CHANNELS]], channel: usize) -> f64 {
    rows.iter().map(|r| r[channel] * r[channel]).sum::<f64>() / rows.len() as f64
}

/// Adds white Gaussian noise at `noise.snr_db` to every channel.
///
/// Each channel draws from its own seeded stream, so results do not depend on
/// channel order. Returns a copy; markers and metadata are preserved.
pub fn add_awgn<T: NoiseTarget>(target: &T, noise: &NoiseSpec) -> Result<T> {
    if !(noise.snr_db > 0.0) || !noise.snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "snr_db must be finite and > 0, got {}",
            noise.snr_db
        )));
    }
    let rows = target.rows();
    let n = rows.len();
    let mut out = target.clone();
    for c in 0..CHANNELS {
        let power = channel_power(rows, c);
        if !(power > 0.0) {
            return Err(Error::ZeroPower { channel: c });
        }
        let variance = power / math::powf(10.0, noise.snr_db / 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(c as u64);
        let mut draw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = match noise.calibration {
            NoiseCalibration::Iid => math::sqrt(variance),
            NoiseCalibration::ExactPower => {
                let ms = draw.iter().map(|x| x * x).sum::<f64>() / n as f64;
                math::sqrt(variance / ms)
            }
        };
        for x in &mut draw {
            *x *= scale;
        }
        for (row, e) in out.rows_mut().iter_mut().zip(&draw) {
            row[c] += e;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::PerUnitBase;
    use crate::waveform::{simulate_fault, simulate_steady_state, FaultSpec, FaultType, SystemConfig};
    use alloc::vec;

    fn steady() -> SignalTrace {
        simulate_steady_state(&SystemConfig::default(), 350.0, 0.95, 0.12).unwrap()
    }

    fn side_rows(t: &SignalTrace, side: Side) -> Vec<[f64; 3]> {
        let idx = side_channels(side).map(|c| c.index());
        t.samples().iter().map(|r| idx.map(|i| r[i])).collect()
    }

    #[test]
    fn injection_leaves_other_side_identical() {
        let t = steady();
        let spec = AttackSpec::inject(1.01, Side::Input, vec![10.0, 10.0, 10.0]);
        let a = inject_arbitrary(&t, &spec).unwrap();
        assert_eq!(side_rows(&t, Side::Output), side_rows(&a, Side::Output));
        assert_eq!(a.first_marker(EventKind::Attack), Some(1.01));
        assert!(t.event_markers.is_empty());
    }

    #[test]
    fn injection_of_legit_amplitudes_reproduces_signal() {
        let t = steady();
        let amp = 350.0 / 300.0 * t.base.input;
        let spec = AttackSpec::inject(1.01, Side::Input, vec![amp; 3]);
        let a = inject_arbitrary(&t, &spec).unwrap();
        for (x, y) in t.samples().iter().zip(a.samples()) {
            for c in 0..CHANNELS {
                assert!((x[c] - y[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn injection_errors() {
        let t = steady();
        let empty = AttackSpec::inject(1.01, Side::Input, vec![]);
        assert!(inject_arbitrary(&t, &empty).is_err());
        let late = AttackSpec::inject(5.0, Side::Input, vec![1.0; 3]);
        assert!(matches!(inject_arbitrary(&t, &late), Err(Error::OutOfRange { .. })));
        let wrong = AttackSpec::tap(1.01, 0.2);
        assert!(inject_arbitrary(&t, &wrong).is_err());
    }

    #[test]
    fn replay_copies_from_inception() {
        let cfg = SystemConfig::default();
        let fault = FaultSpec::new(FaultType::ThreePhase, 1.0, Phase::ALL.to_vec(), 8.0, 0.02);
        let src = simulate_fault(&cfg, 356.0, &fault, 0.95, 0.25).unwrap();
        let t = steady();
        let spec = AttackSpec::replay(1.01, Side::Input, "src");
        let a = inject_replay(&t, &src, &spec).unwrap();
        let k = a.index_at_or_after(1.01);
        let s0 = src.index_at_or_after(1.0);
        assert_eq!(a.samples()[k][0], src.samples()[s0][0]);
        assert_eq!(a.samples()[k + 5][2], src.samples()[s0 + 5][2]);
        assert_eq!(side_rows(&t, Side::Output), side_rows(&a, Side::Output));
    }

    #[test]
    fn replay_errors() {
        let cfg = SystemConfig::default();
        let fault = FaultSpec::new(FaultType::ThreePhase, 1.0, Phase::ALL.to_vec(), 8.0, 0.02);
        let short = simulate_fault(&cfg, 356.0, &fault, 0.95, 0.06).unwrap();
        let t = steady();
        let spec = AttackSpec::replay(1.01, Side::Input, "src");
        assert!(inject_replay(&t, &short, &spec).is_err());
        let other = SignalTrace::new(
            short.samples().to_vec(),
            0.95,
            3200.0,
            60.0,
            PerUnitBase { input: 1.0, output: 1.0 },
        )
        .unwrap();
        assert!(inject_replay(&t, &other, &spec).is_err());
        let beyond = AttackSpec::replay(3.0, Side::Input, "src");
        assert!(matches!(inject_replay(&t, &short, &beyond), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn tap_scales_output_only() {
        let t = steady();
        let a = inject_tap_manipulation(&t, &AttackSpec::tap(1.0, 0.25)).unwrap();
        assert_eq!(side_rows(&t, Side::Input), side_rows(&a, Side::Input));
        let k = a.index_at_or_after(1.0);
        assert!((a.samples()[k + 3][4] - 1.25 * t.samples()[k + 3][4]).abs() < 1e-12);
        assert_eq!(a.samples()[k - 1], t.samples()[k - 1]);
        assert!(inject_tap_manipulation(&t, &AttackSpec::tap(1.0, 0.0)).is_err());
        assert!(inject_tap_manipulation(&t, &AttackSpec::tap(1.0, 0.31)).is_err());
    }

    #[test]
    fn tsa_rejects_zero_and_oversized_delay() {
        let t = steady();
        let payload = AttackSpec::tap(1.0, 0.3);
        assert!(inject_tsa_plus_fdia(&t, &payload, 0.0, None).is_err());
        assert!(time_shift(&t, Side::Output, 1000.0, 1.0).is_err());
        let nested = AttackSpec::tsa_plus(1.0, payload.clone());
        assert!(inject_tsa_plus_fdia(&t, &nested, 1.0, None).is_err());
    }

    #[test]
    fn awgn_vanishes_at_huge_snr() {
        let t = steady();
        let n = add_awgn(&t, &NoiseSpec::new(300.0, 7)).unwrap();
        for (x, y) in t.samples().iter().zip(n.samples()) {
            for c in 0..CHANNELS {
                assert!((x[c] - y[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn awgn_unit_power_variance() {
        // unit-power channel: sqrt(2) cos has mean square 1 over whole cycles
        let n = 1600;
        let samples: Vec<[f64; CHANNELS]> = (0..n)
            .map(|k| [math::sqrt(2.0) * math::cos(2.0 * PI * 60.0 * k as f64 / 1600.0); CHANNELS])
            .collect();
        let t = SignalTrace::new(samples, 0.0, 1600.0, 60.0, PerUnitBase { input: 1.0, output: 1.0 }).unwrap();
        assert!((channel_power(t.samples(), 0) - 1.0).abs() < 1e-9);
        let noisy = add_awgn(&t, &NoiseSpec::new(30.0, 3)).unwrap();
        let noise: Vec<[f64; CHANNELS]> = noisy
            .samples()
            .iter()
            .zip(t.samples())
            .map(|(a, b)| core::array::from_fn(|c| a[c] - b[c]))
            .collect();
        for c in 0..CHANNELS {
            assert!((channel_power(&noise, c) - 0.001).abs() < 1e-12);
        }
    }

    #[test]
    fn awgn_is_deterministic_and_pure() {
        let t = steady();
        let before = t.clone();
        let a = add_awgn(&t, &NoiseSpec::new(35.0, 11)).unwrap();
        let b = add_awgn(&t, &NoiseSpec::new(35.0, 11)).unwrap();
        let c = add_awgn(&t, &NoiseSpec::new(35.0, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(t, before);
        assert_eq!(a.event_markers, t.event_markers);
    }

    #[test]
    fn awgn_rejects_zero_power_and_bad_snr() {
        let samples = vec![[0.0; CHANNELS]; 64];
        let t = SignalTrace::new(samples, 0.0, 1600.0, 60.0, PerUnitBase { input: 1.0, output: 1.0 }).unwrap();
        assert!(matches!(
            add_awgn(&t, &NoiseSpec::new(30.0, 1)),
            Err(Error::ZeroPower { channel: 0 })
        ));
        let s = steady();
        assert!(add_awgn(&s, &NoiseSpec::new(0.0, 1)).is_err());
        assert!(add_awgn(&s, &NoiseSpec::new(f64::INFINITY, 1)).is_err());
    }
}
