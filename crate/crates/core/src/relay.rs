//! Percentage-differential relay for a two-winding transformer.
//!
//! Phasors come from a sliding full-cycle Fourier correlation. Because
//! 1600 Hz is not an integer multiple of 60 Hz, the window uses the nearest
//! whole number of samples and the cosine/sine correlations are corrected by
//! their 2x2 Gram matrix, which makes the estimate exact for a pure tone at
//! the nominal frequency.
//!
//! Polarity: traces store both sides in the through-flow direction; the relay
//! negates the output side so that currents are measured into the zone and a
//! through-load sums to zero.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::signal::{Channel, Phase, Side, SignalTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    /// Peak amplitude.
    pub magnitude: f64,
    /// Radians in `(-pi, pi]`.
    pub angle: f64,
}

impl Phasor {
    pub const ZERO: Phasor = Phasor {
        magnitude: 0.0,
        angle: 0.0,
    };

    pub fn new(magnitude: f64, angle: f64) -> Self {
        Self::from_rect(magnitude * math::cos(angle), magnitude * math::sin(angle))
    }

    pub fn from_rect(re: f64, im: f64) -> Self {
        let magnitude = math::hypot(re, im);
        if magnitude == 0.0 {
            return Self::ZERO;
        }
        let mut angle = math::atan2(im, re);
        if angle <= -PI {
            angle += 2.0 * PI;
        }
        Self { magnitude, angle }
    }

    pub fn re(&self) -> f64 {
        self.magnitude * math::cos(self.angle)
    }

    pub fn im(&self) -> f64 {
        self.magnitude * math::sin(self.angle)
    }

    pub fn add(&self, other: &Phasor) -> Phasor {
        Phasor::from_rect(self.re() + other.re(), self.im() + other.im())
    }

    pub fn scale(&self, k: f64) -> Phasor {
        Phasor::from_rect(self.re() * k, self.im() * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaySettings {
    /// Minimum operate current, per-unit.
    pub pickup: f64,
    pub slope: f64,
    /// Seconds of data in each phasor estimate.
    pub estimation_window: f64,
    pub trip_confirm_samples: usize,
    /// Fundamental frequency the phasor estimator correlates against.
    pub frequency: f64,
}

impl Default for RelaySettings {
    fn default() -> Self {
        Self {
            pickup: 0.3,
            slope: 0.25,
            estimation_window: 1.0 / 60.0,
            trip_confirm_samples: 4,
            frequency: 60.0,
        }
    }
}

impl RelaySettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.pickup > 0.0) {
            return Err(Error::Config(format!("pickup must be > 0, got {}", self.pickup)));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(Error::Config(format!("slope must be in (0, 1), got {}", self.slope)));
        }
        if self.trip_confirm_samples < 1 {
            return Err(Error::Config("trip_confirm_samples must be >= 1".into()));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::Config("frequency must be positive".into()));
        }
        if !(self.estimation_window > 0.0) {
            return Err(Error::Config("estimation_window must be positive".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self, sampling_rate: f64) -> usize {
        (math::round(self.estimation_window * sampling_rate) as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayDecision {
    pub per_phase_trip: [bool; 3],
    pub trip_time: Option<f64>,
    /// Operate current per phase, per-unit.
    pub differential: [f64; 3],
    /// Restraint current per phase, per-unit.
    pub restraint: [f64; 3],
}

impl RelayDecision {
    pub fn tripped(&self) -> bool {
        self.per_phase_trip.iter().any(|t| *t)
    }
}

/// Fundamental phasor of the trailing window of `samples`, with time measured
/// from the first element of the slice.
pub fn estimate_phasor(samples: &[f64], sampling_rate: f64, frequency: f64) -> Result<Phasor> {
    if !(sampling_rate > 0.0) || !(frequency > 0.0) {
        return Err(Error::InvalidArgument(
            "sampling rate and frequency must be positive".into(),
        ));
    }
    let n = (math::round(sampling_rate / frequency) as usize).max(2);
    if samples.len() < n {
        return Err(Error::InvalidArgument(format!(
            "phasor estimation needs {n} samples, got {}",
            samples.len()
        )));
    }
    let start = samples.len() - n;
    Ok(fit_phasor(&samples[start..], start, sampling_rate, frequency))
}

/// Least-squares fit of `a cos(wt) + b sin(wt)` over `window`, where the
/// first element sits at index `offset` of the reference timeline.
pub(crate) fn fit_phasor(window: &[f64], offset: usize, sampling_rate: f64, frequency: f64) -> Phasor {
    let w = 2.0 * PI * frequency / sampling_rate;
    let (mut cc, mut cs, mut ss, mut xc, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, x) in window.iter().enumerate() {
        let arg = w * (offset + i) as f64;
        let (c, s) = (math::cos(arg), math::sin(arg));
        cc += c * c;
        cs += c * s;
        ss += s * s;
        xc += x * c;
        xs += x * s;
    }
    let det = cc * ss - cs * cs;
    let a = (ss * xc - cs * xs) / det;
    let b = (cc * xs - cs * xc) / det;
    // x = M cos(wt + theta) = a cos(wt) + b sin(wt) with a = M cos(theta), b = -M sin(theta)
    Phasor::from_rect(a, -b)
}

/// Evaluates the percentage-differential characteristic at one instant.
///
/// Both phasor sets must already be per-unit and measured into the zone.
pub fn differential_decision(
    in_phasors: &[Phasor; 3],
    out_phasors: &[Phasor; 3],
    settings: &RelaySettings,
    at: f64,
) -> RelayDecision {
    let mut decision = RelayDecision {
        per_phase_trip: [false; 3],
        trip_time: None,
        differential: [0.0; 3],
        restraint: [0.0; 3],
    };
    for p in 0..3 {
        let diff = in_phasors[p].add(&out_phasors[p]).magnitude;
        let rest = 0.5 * (in_phasors[p].magnitude + out_phasors[p].magnitude);
        decision.differential[p] = diff;
        decision.restraint[p] = rest;
        decision.per_phase_trip[p] = operates(diff, rest, settings);
    }
    if decision.tripped() {
        decision.trip_time = Some(at);
    }
    decision
}

fn operates(diff: f64, rest: f64, s: &RelaySettings) -> bool {
    diff > s.pickup.max(s.slope * rest)
}

/// Sliding-window evaluation of a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayScan {
    /// Time of each evaluation.
    pub times: Vec<f64>,
    pub differential: Vec<[f64; 3]>,
    pub restraint: Vec<[f64; 3]>,
    /// Latched outcome with confirmation applied.
    pub decision: RelayDecision,
}

pub fn scan_trace(trace: &SignalTrace, settings: &RelaySettings) -> Result<RelayScan> {
    settings.validate()?;
    let fs = trace.sampling_rate;
    let n = settings.window_samples(fs);
    let needed = n + settings.trip_confirm_samples - 1;
    if trace.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "trace of {} samples is shorter than the {needed} the relay needs",
            trace.len()
        )));
    }
    let frequency = settings.frequency;

    let channels: Vec<Vec<f64>> = Channel::ALL
        .iter()
        .map(|ch| {
            let pu = trace.channel_per_unit(*ch);
            match ch.side() {
                Side::Input => pu,
                Side::Output => pu.into_iter().map(|v| -v).collect(),
            }
        })
        .collect();

    let mut scan = RelayScan {
        times: Vec::new(),
        differential: Vec::new(),
        restraint: Vec::new(),
        decision: RelayDecision {
            per_phase_trip: [false; 3],
            trip_time: None,
            differential: [0.0; 3],
            restraint: [0.0; 3],
        },
    };
    let mut streak = [0usize; 3];
    let mut peak = 0.0;
    for end in n..=trace.len() {
        let start = end - n;
        let at = trace.time_of(end - 1);
        let mut ins = [Phasor::ZERO; 3];
        let mut outs = [Phasor::ZERO; 3];
        for phase in Phase::ALL {
            let i = Channel::new(phase, Side::Input).index();
            let o = Channel::new(phase, Side::Output).index();
            ins[phase.index()] = fit_phasor(&channels[i][start..end], start, fs, frequency);
            outs[phase.index()] = fit_phasor(&channels[o][start..end], start, fs, frequency);
        }
        let d = differential_decision(&ins, &outs, settings, at);
        for p in 0..3 {
            streak[p] = if d.per_phase_trip[p] { streak[p] + 1 } else { 0 };
            if streak[p] >= settings.trip_confirm_samples && !scan.decision.per_phase_trip[p] {
                scan.decision.per_phase_trip[p] = true;
                if scan.decision.trip_time.is_none() {
                    scan.decision.trip_time = Some(at);
                    scan.decision.differential = d.differential;
                    scan.decision.restraint = d.restraint;
                }
            }
        }
        if scan.decision.trip_time.is_none() {
            let m = d.differential.iter().cloned().fold(0.0, f64::max);
            if m >= peak {
                peak = m;
                scan.decision.differential = d.differential;
                scan.decision.restraint = d.restraint;
            }
        }
        scan.times.push(at);
        scan.differential.push(d.differential);
        scan.restraint.push(d.restraint);
    }
    Ok(scan)
}

/// Earliest time the confirmed trip condition holds on any phase.
pub fn detect_trigger(trace: &SignalTrace, settings: &RelaySettings) -> Result<Option<f64>> {
    Ok(scan_trace(trace, settings)?.decision.trip_time)
}
