//! Analytic three-phase current traces for a two-winding transformer.
//!
//! The surrogate superimposes a pre-fault load phasor, a fault phasor and an
//! exponentially decaying DC offset. Currents are CT secondary amperes; both
//! sides are referred so that a healthy transformer produces identical
//! per-unit waveforms on the input and output side.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::math;
use crate::signal::{
    Channel, EventKind, EventMarker, Label, MeasurementWindow, PerUnitBase, Phase, Side,
    SignalTrace, Source, CHANNELS, WINDOW_LEN,
};

/// Phase displacement of phases A, B, C (positive sequence).
pub const PHASE_SHIFT: [f64; 3] = [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub nominal_frequency: f64,
    pub sampling_rate: f64,
    /// Power that corresponds to 1 per-unit current.
    pub rated_load_mw: f64,
    pub load_levels: Vec<f64>,
    /// Line-to-line voltage of the input winding, kV.
    pub input_voltage_kv: f64,
    /// Input to output voltage ratio.
    pub turns_ratio: f64,
    pub ct_ratio_in: f64,
    pub ct_ratio_out: f64,
    /// Source impedance `(R, X)` in per-unit; sets the natural DC time constant.
    pub source_impedance: (f64, f64),
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            nominal_frequency: 60.0,
            sampling_rate: 1600.0,
            rated_load_mw: 300.0,
            load_levels: (0..6).map(|k| 350.0 + 2.0 * k as f64).collect(),
            input_voltage_kv: 230.0,
            turns_ratio: 2.0,
            ct_ratio_in: 400.0,
            ct_ratio_out: 800.0,
            source_impedance: (0.01, 0.1),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nominal_frequency", self.nominal_frequency),
            ("sampling_rate", self.sampling_rate),
            ("rated_load_mw", self.rated_load_mw),
            ("input_voltage_kv", self.input_voltage_kv),
            ("turns_ratio", self.turns_ratio),
            ("ct_ratio_in", self.ct_ratio_in),
            ("ct_ratio_out", self.ct_ratio_out),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.load_levels.is_empty() {
            return Err(Error::Config("load_levels is empty".into()));
        }
        if let Some(bad) = self.load_levels.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Config(format!("load level {bad} is not positive")));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.nominal_frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.nominal_frequency
    }

    /// Samples per fundamental cycle; not necessarily an integer.
    pub fn samples_per_cycle(&self) -> f64 {
        self.sampling_rate / self.nominal_frequency
    }

    /// Peak secondary current at rated load on each side.
    pub fn per_unit_base(&self) -> PerUnitBase {
        let primary_in = math::sqrt(2.0) * self.rated_load_mw * 1e6
            / (math::sqrt(3.0) * self.input_voltage_kv * 1e3);
        let primary_out = primary_in * self.turns_ratio;
        PerUnitBase {
            input: primary_in / self.ct_ratio_in,
            output: primary_out / self.ct_ratio_out,
        }
    }

    /// Natural DC-offset time constant `X / (omega R)` of the source.
    pub fn natural_time_constant(&self) -> f64 {
        let (r, x) = self.source_impedance;
        if r <= 0.0 {
            return f64::INFINITY;
        }
        x / (self.omega() * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultType {
    #[serde(rename = "1PH_GND")]
    SinglePhaseGround,
    #[serde(rename = "2PH_GND")]
    TwoPhaseGround,
    #[serde(rename = "3PH")]
    ThreePhase,
}

impl FaultType {
    pub const ALL: [FaultType; 3] = [
        FaultType::SinglePhaseGround,
        FaultType::TwoPhaseGround,
        FaultType::ThreePhase,
    ];

    pub fn phase_count(self) -> usize {
        match self {
            FaultType::SinglePhaseGround => 1,
            FaultType::TwoPhaseGround => 2,
            FaultType::ThreePhase => 3,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            FaultType::SinglePhaseGround => "1PH_GND",
            FaultType::TwoPhaseGround => "2PH_GND",
            FaultType::ThreePhase => "3PH",
        }
    }
}

/// Earliest and latest fault inception times used by the scenario catalog.
pub const INCEPTION_WINDOW: (f64, f64) = (1.00, 1.02);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    pub inception_time: f64,
    pub faulted_phases: Vec<Phase>,
    pub fault_current_multiple: f64,
    /// Seconds; zero disables the DC offset.
    pub dc_offset_time_constant: f64,
    /// Output-side current on faulted phases as a fraction of its pre-fault value.
    pub output_fraction: f64,
}

impl FaultSpec {
    pub fn new(
        fault_type: FaultType,
        inception_time: f64,
        faulted_phases: Vec<Phase>,
        fault_current_multiple: f64,
        dc_offset_time_constant: f64,
    ) -> Self {
        Self {
            fault_type,
            inception_time,
            faulted_phases,
            fault_current_multiple,
            dc_offset_time_constant,
            output_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.faulted_phases.is_empty() {
            return Err(Error::InvalidArgument("faulted_phases is empty".into()));
        }
        let mut seen = [false; 3];
        for p in &self.faulted_phases {
            if core::mem::replace(&mut seen[p.index()], true) {
                return Err(Error::InvalidArgument(format!("phase {p:?} listed twice")));
            }
        }
        if self.faulted_phases.len() != self.fault_type.phase_count() {
            return Err(Error::InvalidArgument(format!(
                "{} fault needs {} phases, got {}",
                self.fault_type.code(),
                self.fault_type.phase_count(),
                self.faulted_phases.len()
            )));
        }
        if !(self.fault_current_multiple >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fault_current_multiple must be >= 1, got {}",
                self.fault_current_multiple
            )));
        }
        if !(self.dc_offset_time_constant >= 0.0) {
            return Err(Error::InvalidArgument(
                "dc_offset_time_constant must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.output_fraction) {
            return Err(Error::InvalidArgument(
                "output_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn is_faulted(&self, phase: Phase) -> bool {
        self.faulted_phases.contains(&phase)
    }
}

fn check_span(cfg: &SystemConfig, duration: f64) -> Result<usize> {
    cfg.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if duration < 2.0 * cfg.period() - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "duration {duration} s is shorter than two fundamental cycles"
        )));
    }
    Ok(math::round(duration * cfg.sampling_rate) as usize)
}

/// Instantaneous load current of `phase` at time `t`, in per-unit of the given amplitude.
fn load_wave(cfg: &SystemConfig, amplitude: f64, phase: Phase, t: f64) -> f64 {
    amplitude * math::cos(cfg.omega() * t + PHASE_SHIFT[phase.index()])
}

fn load_amplitude_pu(cfg: &SystemConfig, load_mw: f64) -> Result<f64> {
    if !(load_mw > 0.0) || !load_mw.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "load must be positive, got {load_mw} MW"
        )));
    }
    Ok(load_mw / cfg.rated_load_mw)
}

/// Balanced load flow through a healthy transformer starting at `t0`.
pub fn simulate_steady_state(
    cfg: &SystemConfig,
    load_mw: f64,
    t0: f64,
    duration: f64,
) -> Result<SignalTrace> {
    let n = check_span(cfg, duration)?;
    let amp = load_amplitude_pu(cfg, load_mw)?;
    let base = cfg.per_unit_base();
    let samples = (0..n)
        .map(|k| {
            let t = t0 + k as f64 / cfg.sampling_rate;
            let mut row = [0.0; CHANNELS];
            for ch in Channel::ALL {
                let pu = load_wave(cfg, amp, ch.phase(), t);
                row[ch.index()] = pu * base.for_side(ch.side());
            }
            row
        })
        .collect();
    SignalTrace::new(samples, t0, cfg.sampling_rate, cfg.nominal_frequency, base)
}

/// Internal transformer fault superimposed on the load flow.
///
/// Faulted input phases carry `multiple x load` plus a DC offset sized so the
/// current is continuous at inception; faulted output phases drop to
/// `output_fraction` of their pre-fault value.
pub fn simulate_fault(
    cfg: &SystemConfig,
    load_mw: f64,
    fault: &FaultSpec,
    t0: f64,
    duration: f64,
) -> Result<SignalTrace> {
    fault.validate()?;
    let mut trace = simulate_steady_state(cfg, load_mw, t0, duration)?;
    if !trace.contains_time(fault.inception_time) {
        return Err(out_of_range(
            "fault inception",
            format!(
                "{} s outside trace [{}, {})",
                fault.inception_time,
                trace.t0,
                trace.end_time()
            ),
        ));
    }
    let amp = load_amplitude_pu(cfg, load_mw)?;
    let base = trace.base;
    let tf = fault.inception_time;
    let m = fault.fault_current_multiple;
    let start = trace.index_at_or_after(tf);
    let fs = trace.sampling_rate;
    let t0 = trace.t0;
    for (k, row) in trace.samples_mut().iter_mut().enumerate().skip(start) {
        let t = t0 + k as f64 / fs;
        for phase in Phase::ALL.into_iter().filter(|p| fault.is_faulted(*p)) {
            let pre = load_wave(cfg, amp, phase, t);
            let offset0 = (1.0 - m) * load_wave(cfg, amp, phase, tf);
            let decay = if fault.dc_offset_time_constant > 0.0 {
                math::exp(-(t - tf) / fault.dc_offset_time_constant)
            } else {
                0.0
            };
            let i_in = m * pre + offset0 * decay;
            let i_out = fault.output_fraction * pre;
            row[Channel::new(phase, Side::Input).index()] = i_in * base.input;
            row[Channel::new(phase, Side::Output).index()] = i_out * base.output;
        }
    }
    trace.event_markers.push(EventMarker {
        time: tf,
        kind: EventKind::Fault,
    });
    Ok(trace)
}

/// How many of the 32 window samples precede the trigger sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSplit {
    pub pre: usize,
}

impl Default for WindowSplit {
    fn default() -> Self {
        Self { pre: WINDOW_LEN / 2 }
    }
}

impl WindowSplit {
    pub fn post(&self) -> usize {
        WINDOW_LEN - self.pre
    }
}

/// Cuts the 32-sample window around `trigger_time`.
///
/// The label is ATTACK when the trace carries an attack marker, FAULT
/// otherwise.
pub fn capture_window(
    trace: &SignalTrace,
    trigger_time: f64,
    split: WindowSplit,
    scenario_id: impl Into<String>,
) -> Result<MeasurementWindow> {
    if split.pre >= WINDOW_LEN {
        return Err(Error::Config(format!(
            "pre-trigger split {} must be < {WINDOW_LEN}",
            split.pre
        )));
    }
    let k = trace.nearest_index(trigger_time);
    let first = k - split.pre as i64;
    let last = k + split.post() as i64 - 1;
    if first < 0 || last >= trace.len() as i64 {
        return Err(out_of_range(
            "trigger time",
            format!(
                "{trigger_time} s needs samples [{first}, {last}] but trace has [0, {})",
                trace.len()
            ),
        ));
    }
    let values = trace.samples()[first as usize..=last as usize].to_vec();
    let label = if trace.first_marker(EventKind::Attack).is_some() {
        Label::Attack
    } else {
        Label::Fault
    };
    MeasurementWindow::new(values, label, scenario_id, split.pre, Source::Simulated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn max_pu_mismatch(trace: &SignalTrace) -> f64 {
        let mut worst: f64 = 0.0;
        for phase in Phase::ALL {
            let a = trace.channel_per_unit(Channel::new(phase, Side::Input));
            let b = trace.channel_per_unit(Channel::new(phase, Side::Output));
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    #[test]
    fn steady_state_sides_match() {
        let cfg = SystemConfig::default();
        let trace = simulate_steady_state(&cfg, 350.0, 0.0, 0.1).unwrap();
        assert_eq!(trace.len(), 160);
        assert!(max_pu_mismatch(&trace) < 1e-9);
    }

    #[test]
    fn steady_state_scales_linearly_with_load() {
        let cfg = SystemConfig::default();
        let a = simulate_steady_state(&cfg, 350.0, 0.0, 0.1).unwrap();
        let b = simulate_steady_state(&cfg, 360.0, 0.0, 0.1).unwrap();
        let rms = |t: &SignalTrace| {
            let v = t.channel(Channel::ALL[0]);
            math::sqrt(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
        };
        assert!((rms(&b) / rms(&a) - 360.0 / 350.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_spans() {
        let cfg = SystemConfig::default();
        assert!(simulate_steady_state(&cfg, 350.0, 0.0, 0.0).is_err());
        assert!(simulate_steady_state(&cfg, 350.0, 0.0, 0.02).is_err());
        assert!(simulate_steady_state(&cfg, -1.0, 0.0, 0.1).is_err());
        let bad = SystemConfig {
            sampling_rate: 0.0,
            ..SystemConfig::default()
        };
        assert!(simulate_steady_state(&bad, 350.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn fault_equals_steady_state_before_inception() {
        let cfg = SystemConfig::default();
        let spec = FaultSpec::new(FaultType::ThreePhase, 1.01, Phase::ALL.to_vec(), 8.0, 0.02);
        let steady = simulate_steady_state(&cfg, 350.0, 0.95, 0.12).unwrap();
        let fault = simulate_fault(&cfg, 350.0, &spec, 0.95, 0.12).unwrap();
        let k0 = fault.index_at_or_after(1.01);
        assert_eq!(&steady.samples()[..k0], &fault.samples()[..k0]);
        assert_ne!(steady.samples()[k0 + 1], fault.samples()[k0 + 1]);
        assert_eq!(fault.first_marker(EventKind::Fault), Some(1.01));
    }

    #[test]
    fn fault_offset_decays_monotonically() {
        let cfg = SystemConfig::default();
        let spec = FaultSpec::new(FaultType::SinglePhaseGround, 1.004, vec![Phase::A], 6.0, 0.03);
        let trace = simulate_fault(&cfg, 352.0, &spec, 0.95, 0.2).unwrap();
        let steady = simulate_steady_state(&cfg, 352.0, 0.95, 0.2).unwrap();
        let k0 = trace.index_at_or_after(1.004);
        let mut last = f64::INFINITY;
        for k in k0..trace.len() {
            let offset = trace.samples()[k][0] - 6.0 * steady.samples()[k][0];
            assert!(offset.abs() <= last + 1e-12);
            last = offset.abs();
        }
    }

    #[test]
    fn unit_multiple_fault_is_a_noop() {
        let cfg = SystemConfig::default();
        let mut spec = FaultSpec::new(FaultType::SinglePhaseGround, 1.01, vec![Phase::B], 1.0, 0.0);
        spec.output_fraction = 1.0;
        let steady = simulate_steady_state(&cfg, 350.0, 0.95, 0.12).unwrap();
        let fault = simulate_fault(&cfg, 350.0, &spec, 0.95, 0.12).unwrap();
        for (a, b) in steady.samples().iter().zip(fault.samples()) {
            for c in 0..CHANNELS {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fault_validation() {
        let cfg = SystemConfig::default();
        let empty = FaultSpec::new(FaultType::SinglePhaseGround, 1.01, vec![], 4.0, 0.02);
        assert!(simulate_fault(&cfg, 350.0, &empty, 0.95, 0.12).is_err());
        let wrong = FaultSpec::new(FaultType::ThreePhase, 1.01, vec![Phase::A], 4.0, 0.02);
        assert!(simulate_fault(&cfg, 350.0, &wrong, 0.95, 0.12).is_err());
        let late = FaultSpec::new(FaultType::SinglePhaseGround, 2.0, vec![Phase::A], 4.0, 0.02);
        assert!(matches!(
            simulate_fault(&cfg, 350.0, &late, 0.95, 0.12),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn capture_window_split_and_range() {
        let cfg = SystemConfig::default();
        let trace = simulate_steady_state(&cfg, 350.0, 0.0, 0.1).unwrap();
        let mid = trace.time_of(trace.len() / 2);
        let w = capture_window(&trace, mid, WindowSplit::default(), "s").unwrap();
        assert_eq!(w.trigger_index, 16);
        assert_eq!(w.values(), &trace.samples()[64..96]);
        assert!(matches!(
            capture_window(&trace, trace.time_of(1), WindowSplit::default(), "s"),
            Err(Error::OutOfRange { .. })
        ));
        let end = trace.time_of(trace.len() - 2);
        assert!(capture_window(&trace, end, WindowSplit::default(), "s").is_err());
    }

    #[test]
    fn natural_time_constant_in_typical_range() {
        let tau = SystemConfig::default().natural_time_constant();
        assert!(tau > 0.01 && tau < 0.04, "{tau}");
    }
}
