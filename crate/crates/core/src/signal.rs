//! Measurement containers shared by every stage of the pipeline.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};

/// Number of time steps in a measurement window.
pub const WINDOW_LEN: usize = 32;
/// Number of current channels (three phases on two transformer sides).
pub const CHANNELS: usize = 6;
/// Values per window.
pub const WINDOW_VALUES: usize = WINDOW_LEN * CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Input,
    Output,
}

impl Side {
    pub fn word(self) -> &'static str {
        match self {
            Side::Input => "input",
            Side::Output => "output",
        }
    }
}

/// One of the six current channels, ordered `A_in, B_in, C_in, A_out, B_out, C_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Channel(u8);

impl Channel {
    pub const ALL: [Channel; CHANNELS] = [
        Channel(0),
        Channel(1),
        Channel(2),
        Channel(3),
        Channel(4),
        Channel(5),
    ];

    pub fn new(phase: Phase, side: Side) -> Self {
        let base = match side {
            Side::Input => 0,
            Side::Output => 3,
        };
        Channel(base + phase as u8)
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index < CHANNELS {
            Ok(Channel(index as u8))
        } else {
            Err(out_of_range("channel index", format!("{index} >= {CHANNELS}")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn phase(self) -> Phase {
        Phase::ALL[(self.0 % 3) as usize]
    }

    pub fn side(self) -> Side {
        if self.0 < 3 {
            Side::Input
        } else {
            Side::Output
        }
    }

    /// Short column name used in CSV headers (`Ain`, `Bout`, ...).
    pub fn column_name(self) -> &'static str {
        ["Ain", "Bin", "Cin", "Aout", "Bout", "Cout"][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Fault,
    Attack,
}

impl Label {
    /// Class index used by the classifiers: `0 = FAULT`, `1 = ATTACK`.
    pub fn class_index(self) -> usize {
        match self {
            Label::Fault => 0,
            Label::Attack => 1,
        }
    }

    pub fn from_class_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Label::Fault),
            1 => Ok(Label::Attack),
            _ => Err(out_of_range("class index", format!("{index}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fault => "FAULT",
            Label::Attack => "ATTACK",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FAULT" | "0" => Ok(Label::Fault),
            "ATTACK" | "FDIA" | "CYBERATTACK" | "1" => Ok(Label::Attack),
            other => Err(Error::Data(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Simulated,
    Ingested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Fault,
    Attack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub time: f64,
    pub kind: EventKind,
}

/// Per-side peak secondary current corresponding to 1 per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerUnitBase {
    pub input: f64,
    pub output: f64,
}

impl PerUnitBase {
    pub fn for_side(&self, side: Side) -> f64 {
        match side {
            Side::Input => self.input,
            Side::Output => self.output,
        }
    }
}

/// A multi-cycle record of the six CT secondary currents.
///
/// Both sides are stored in the through-flow direction, so a healthy
/// transformer shows identical per-unit waveforms on the two sides. The relay
/// applies the into-zone polarity itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    samples: Vec<[f64; CHANNELS]>,
    pub t0: f64,
    pub sampling_rate: f64,
    /// Nominal system frequency.
    pub frequency: f64,
    pub base: PerUnitBase,
    pub event_markers: Vec<EventMarker>,
}

impl SignalTrace {
    pub fn new(
        samples: Vec<[f64; CHANNELS]>,
        t0: f64,
        sampling_rate: f64,
        frequency: f64,
        base: PerUnitBase,
    ) -> Result<Self> {
        if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {sampling_rate}"
            )));
        }
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        if !(base.input > 0.0 && base.output > 0.0) {
            return Err(Error::InvalidArgument("per-unit base must be positive".into()));
        }
        if samples.len() < WINDOW_LEN {
            return Err(Error::Shape {
                expected: format!(">= {WINDOW_LEN} samples"),
                got: format!("{}", samples.len()),
            });
        }
        if let Some((k, c)) = first_non_finite(&samples) {
            return Err(Error::NonFinite(format!("sample {k}, channel {c}")));
        }
        Ok(Self {
            samples,
            t0,
            sampling_rate,
            frequency,
            base,
            event_markers: Vec::new(),
        })
    }

    pub fn samples(&self) -> &[[f64; CHANNELS]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sampling_rate
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sampling_rate
    }

    /// Time just past the last sample.
    pub fn end_time(&self) -> f64 {
        self.time_of(self.samples.len())
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t0 && t < self.end_time()
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let x = (t - self.t0) * self.sampling_rate;
        let k = crate::math::ceil(x - 1e-9);
        if k <= 0.0 {
            0
        } else {
            k as usize
        }
    }

    /// Index of the sample nearest to `t` (may be outside the trace).
    pub fn nearest_index(&self, t: f64) -> i64 {
        crate::math::round((t - self.t0) * self.sampling_rate) as i64
    }

    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        self.samples.iter().map(|row| row[channel.index()]).collect()
    }

    pub fn channel_per_unit(&self, channel: Channel) -> Vec<f64> {
        let base = self.base.for_side(channel.side());
        self.samples
            .iter()
            .map(|row| row[channel.index()] / base)
            .collect()
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [[f64; CHANNELS]] {
        &mut self.samples
    }

    pub fn first_marker(&self, kind: EventKind) -> Option<f64> {
        self.event_markers
            .iter()
            .find(|m| m.kind == kind)
            .map(|m| m.time)
    }
}

fn first_non_finite(samples: &[[f64; CHANNELS]]) -> Option<(usize, usize)> {
    samples.iter().enumerate().find_map(|(k, row)| {
        row.iter()
            .position(|v| !v.is_finite())
            .map(|c| (k, c))
    })
}

/// A labelled `(32, 6)` block of currents cut around a relay trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    values: Vec<[f64; CHANNELS]>,
    pub label: Label,
    pub scenario_id: String,
    pub trigger_index: usize,
    pub source: Source,
}

impl MeasurementWindow {
    pub fn new(
        values: Vec<[f64; CHANNELS]>,
        label: Label,
        scenario_id: impl Into<String>,
        trigger_index: usize,
        source: Source,
    ) -> Result<Self> {
        if values.len() != WINDOW_LEN {
            return Err(Error::Shape {
                expected: format!("({WINDOW_LEN}, {CHANNELS})"),
                got: format!("({}, {CHANNELS})", values.len()),
            });
        }
        if trigger_index >= WINDOW_LEN {
            return Err(out_of_range(
                "trigger index",
                format!("{trigger_index} not in [0, {}]", WINDOW_LEN - 1),
            ));
        }
        if let Some((k, c)) = first_non_finite(&values) {
            return Err(Error::NonFinite(format!("time {k}, channel {c}")));
        }
        Ok(Self {
            values,
            label,
            scenario_id: scenario_id.into(),
            trigger_index,
            source,
        })
    }

    /// Builds a window from 192 time-major values.
    pub fn from_flat(
        flat: &[f64],
        label: Label,
        scenario_id: impl Into<String>,
        trigger_index: usize,
        source: Source,
    ) -> Result<Self> {
        if flat.len() != WINDOW_VALUES {
            return Err(Error::Shape {
                expected: format!("{WINDOW_VALUES} values"),
                got: format!("{} values", flat.len()),
            });
        }
        let values = flat
            .chunks_exact(CHANNELS)
            .map(|c| {
                let mut row = [0.0; CHANNELS];
                row.copy_from_slice(c);
                row
            })
            .collect();
        Self::new(values, label, scenario_id, trigger_index, source)
    }

    pub fn values(&self) -> &[[f64; CHANNELS]] {
        &self.values
    }

    pub fn value(&self, time: usize, channel: usize) -> f64 {
        self.values[time][channel]
    }

    /// Time-major flattening: `v[t * 6 + c]`.
    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|r| r.iter().copied()).collect()
    }

    pub fn channel(&self, channel: usize) -> [f64; WINDOW_LEN] {
        let mut out = [0.0; WINDOW_LEN];
        for (o, row) in out.iter_mut().zip(&self.values) {
            *o = row[channel];
        }
        out
    }

    /// Same metadata, new values. Values must keep the `(32, 6)` shape.
    pub fn with_values(&self, values: Vec<[f64; CHANNELS]>) -> Result<Self> {
        Self::new(
            values,
            self.label,
            self.scenario_id.clone(),
            self.trigger_index,
            self.source,
        )
    }

    pub(crate) fn values_mut(&mut self) -> &mut [[f64; CHANNELS]] {
        &mut self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_layout() {
        assert_eq!(Channel::new(Phase::A, Side::Input).index(), 0);
        assert_eq!(Channel::new(Phase::C, Side::Output).index(), 5);
        assert_eq!(Channel::ALL[4].phase(), Phase::B);
        assert_eq!(Channel::ALL[4].side(), Side::Output);
    }

    #[test]
    fn window_shape_is_enforced() {
        let rows = alloc::vec![[0.0; CHANNELS]; 31];
        assert!(matches!(
            MeasurementWindow::new(rows, Label::Fault, "x", 0, Source::Simulated),
            Err(Error::Shape { .. })
        ));
        let flat = alloc::vec![0.0; 191];
        assert!(MeasurementWindow::from_flat(&flat, Label::Fault, "x", 0, Source::Simulated).is_err());
    }

    #[test]
    fn window_rejects_nan_and_bad_trigger() {
        let mut rows = alloc::vec![[0.0; CHANNELS]; WINDOW_LEN];
        assert!(MeasurementWindow::new(rows.clone(), Label::Fault, "x", 32, Source::Simulated).is_err());
        rows[3][2] = f64::NAN;
        assert!(matches!(
            MeasurementWindow::new(rows, Label::Fault, "x", 0, Source::Simulated),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("attack".parse::<Label>().unwrap(), Label::Attack);
        assert_eq!("0".parse::<Label>().unwrap(), Label::Fault);
        assert!("normal".parse::<Label>().is_err());
    }
}
