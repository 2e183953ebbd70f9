//! Seeded scenario catalog: draws fault and attack scenarios, realizes their
//! traces, filters them through the relay and cuts the detector windows.
//!
//! Every scenario owns an independent random stream keyed by `(seed, index)`,
//! so any subset can be regenerated in any order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, AttackKind, AttackPayload, AttackSpec};
use crate::error::{Error, Result};
use crate::relay::{scan_trace, RelayDecision, RelaySettings};
use crate::signal::{MeasurementWindow, Phase, Side, SignalTrace};
use crate::waveform::{
    capture_window, simulate_fault, simulate_steady_state, FaultSpec, FaultType, SystemConfig,
    WindowSplit, INCEPTION_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub system: SystemConfig,
    pub relay: RelaySettings,
    pub split: WindowSplit,
    pub seed: u64,
    /// Prefix of generated scenario ids.
    pub id_prefix: String,
    pub trace_start: f64,
    pub trace_duration: f64,
    pub attack_fraction: f64,
    /// FDIA families drawn for attack scenarios, uniformly.
    pub attack_kinds: Vec<AttackKind>,
    pub fault_multiple_range: (f64, f64),
    pub dc_time_constant_range: (f64, f64),
    pub tsa_delay_ms: f64,
    /// FDIA family used as the payload of combined time-stamp attacks.
    pub tsa_payload: AttackKind,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            relay: RelaySettings::default(),
            split: WindowSplit::default(),
            seed: 42,
            id_prefix: "syn".into(),
            trace_start: 0.95,
            trace_duration: 0.12,
            attack_fraction: 0.5,
            attack_kinds: vec![
                AttackKind::InjectArbitrary,
                AttackKind::Replay,
                AttackKind::TapManipulation,
            ],
            fault_multiple_range: (4.0, 12.0),
            dc_time_constant_range: (0.010, 0.040),
            tsa_delay_ms: 1.0,
            tsa_payload: AttackKind::Replay,
        }
    }
}

impl GeneratorConfig {
    /// Holdout of combined time-stamp + FDIA attacks.
    pub fn complex_holdout(seed: u64) -> Self {
        Self {
            seed,
            id_prefix: "tsa".into(),
            attack_fraction: 1.0,
            attack_kinds: vec![AttackKind::TsaPlusFdia],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.relay.validate()?;
        if !(0.0..=1.0).contains(&self.attack_fraction) {
            return Err(Error::Config("attack_fraction must lie in [0, 1]".into()));
        }
        if self.attack_fraction > 0.0 && self.attack_kinds.is_empty() {
            return Err(Error::Config("attack_kinds is empty".into()));
        }
        if self.tsa_payload == AttackKind::TsaPlusFdia {
            return Err(Error::Config("tsa_payload must be an FDIA family".into()));
        }
        let (lo, hi) = self.fault_multiple_range;
        if !(lo >= 1.0 && hi >= lo) {
            return Err(Error::Config("fault_multiple_range must satisfy 1 <= lo <= hi".into()));
        }
        Ok(())
    }

    pub fn scenario_id(&self, index: u64) -> String {
        format!("{}-{:06}", self.id_prefix, index)
    }

    fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Replay material: a genuine fault captured on the same system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySource {
    pub load_mw: f64,
    pub fault: FaultSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScenarioKind {
    Fault(FaultSpec),
    Attack {
        spec: AttackSpec,
        replay: Option<ReplaySource>,
    },
}

/// One catalog entry before realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub index: u64,
    pub seed: u64,
    pub load_mw: f64,
    pub kind: ScenarioKind,
}

impl Scenario {
    pub fn kind_code(&self) -> &'static str {
        match &self.kind {
            ScenarioKind::Fault(f) => f.fault_type.code(),
            ScenarioKind::Attack { spec, .. } => spec.kind().code(),
        }
    }

    pub fn is_attack(&self) -> bool {
        matches!(self.kind, ScenarioKind::Attack { .. })
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn draw_phases(rng: &mut ChaCha8Rng, count: usize) -> Vec<Phase> {
    let mut phases = Phase::ALL.to_vec();
    // partial Fisher-Yates
    for i in 0..count {
        let j = rng.random_range(i..3);
        phases.swap(i, j);
    }
    phases.truncate(count);
    phases.sort();
    phases
}

fn draw_fault(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, inception: f64) -> FaultSpec {
    let fault_type = FaultType::ALL[rng.random_range(0..3)];
    let phases = draw_phases(rng, fault_type.phase_count());
    let multiple = uniform(rng, cfg.fault_multiple_range);
    let tau = uniform(rng, cfg.dc_time_constant_range);
    FaultSpec::new(fault_type, inception, phases, multiple, tau)
}

fn draw_side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random_bool(0.5) {
        Side::Input
    } else {
        Side::Output
    }
}

fn draw_fdia(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    kind: AttackKind,
    onset: f64,
    load_mw: f64,
    id: &str,
) -> (AttackSpec, Option<ReplaySource>) {
    let base = cfg.system.per_unit_base();
    let load_pu = load_mw / cfg.system.rated_load_mw;
    match kind {
        AttackKind::InjectArbitrary => {
            let side = draw_side(rng);
            let legit = load_pu * base.for_side(side);
            let n_attacked = rng.random_range(1..=3);
            let attacked = draw_phases(rng, n_attacked);
            let profile = Phase::ALL
                .iter()
                .map(|p| {
                    if !attacked.contains(p) {
                        legit
                    } else if side == Side::Output && rng.random_bool(0.5) {
                        legit * rng.random_range(0.0..0.6)
                    } else {
                        legit * rng.random_range(2.0..10.0)
                    }
                })
                .collect();
            (AttackSpec::inject(onset, side, profile), None)
        }
        AttackKind::Replay => {
            let side = draw_side(rng);
            let src_load = cfg.system.load_levels[rng.random_range(0..cfg.system.load_levels.len())];
            let fault = draw_fault(cfg, rng, INCEPTION_WINDOW.0);
            (
                AttackSpec::replay(onset, side, format!("{id}/replay-source")),
                Some(ReplaySource {
                    load_mw: src_load,
                    fault,
                }),
            )
        }
        AttackKind::TapManipulation => {
            let magnitude = rng.random_range(0.2..0.3);
            let shift = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            (AttackSpec::tap(onset, shift), None)
        }
        AttackKind::TsaPlusFdia => {
            let (payload, replay) = draw_fdia(cfg, rng, cfg.tsa_payload, onset, load_mw, id);
            (AttackSpec::tsa_plus(cfg.tsa_delay_ms, payload), replay)
        }
    }
}

/// Draws scenario `index`; depends only on `(cfg, index)`.
pub fn draw_scenario(cfg: &GeneratorConfig, index: u64) -> Scenario {
    let mut rng = cfg.rng_for(index);
    let id = cfg.scenario_id(index);
    let levels = &cfg.system.load_levels;
    let load_mw = levels[rng.random_range(0..levels.len())];
    let event_time = uniform(&mut rng, INCEPTION_WINDOW);
    let is_attack = rng.random_bool(cfg.attack_fraction.clamp(0.0, 1.0));
    let kind = if is_attack {
        let family = cfg.attack_kinds[rng.random_range(0..cfg.attack_kinds.len())];
        let (spec, replay) = draw_fdia(cfg, &mut rng, family, event_time, load_mw, &id);
        ScenarioKind::Attack { spec, replay }
    } else {
        ScenarioKind::Fault(draw_fault(cfg, &mut rng, event_time))
    };
    Scenario {
        id,
        index,
        seed: cfg.seed,
        load_mw,
        kind,
    }
}

/// Replay material needs enough post-inception samples to cover any onset.
const REPLAY_SOURCE_DURATION: f64 = 0.2;

/// Builds the trace of a scenario without relay filtering.
pub fn realize_trace(cfg: &GeneratorConfig, scenario: &Scenario) -> Result<SignalTrace> {
    let sys = &cfg.system;
    match &scenario.kind {
        ScenarioKind::Fault(fault) => simulate_fault(
            sys,
            scenario.load_mw,
            fault,
            cfg.trace_start,
            cfg.trace_duration,
        ),
        ScenarioKind::Attack { spec, replay } => {
            let healthy =
                simulate_steady_state(sys, scenario.load_mw, cfg.trace_start, cfg.trace_duration)?;
            let material = match replay {
                Some(src) => Some(simulate_fault(
                    sys,
                    src.load_mw,
                    &src.fault,
                    cfg.trace_start,
                    REPLAY_SOURCE_DURATION,
                )?),
                None => None,
            };
            apply_attack(&healthy, spec, material.as_ref())
        }
    }
}

/// Catalog row: the scenario plus what the relay made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub scenario: Scenario,
    pub decision: RelayDecision,
    /// False when the scenario did not trip the relay (or its window could not
    /// be cut) and was left out of the dataset.
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizedScenario {
    pub entry: CatalogEntry,
    pub window: Option<MeasurementWindow>,
}

pub fn realize(cfg: &GeneratorConfig, scenario: &Scenario) -> Result<RealizedScenario> {
    let trace = realize_trace(cfg, scenario)
        .map_err(|e| Error::Data(format!("scenario {}: {e}", scenario.id)))?;
    let scan = scan_trace(&trace, &cfg.relay)?;
    let window = match scan.decision.trip_time {
        Some(t) => capture_window(&trace, t, cfg.split, scenario.id.clone()).ok(),
        None => None,
    };
    Ok(RealizedScenario {
        entry: CatalogEntry {
            scenario: scenario.clone(),
            decision: scan.decision,
            kept: window.is_some(),
        },
        window,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioBatch {
    pub catalog: Vec<CatalogEntry>,
    pub windows: Vec<MeasurementWindow>,
}

impl ScenarioBatch {
    pub fn rejected(&self) -> usize {
        self.catalog.iter().filter(|e| !e.kept).count()
    }
}

/// Generates scenarios `first..first + count`.
pub fn generate(cfg: &GeneratorConfig, first: u64, count: usize) -> Result<ScenarioBatch> {
    cfg.validate()?;
    let mut batch = ScenarioBatch::default();
    for index in first..first + count as u64 {
        let scenario = draw_scenario(cfg, index);
        let realized = realize(cfg, &scenario)?;
        batch.catalog.push(realized.entry);
        if let Some(w) = realized.window {
            batch.windows.push(w);
        }
    }
    Ok(batch)
}

/// Keeps generating until `target` windows have been kept.
pub fn generate_kept(cfg: &GeneratorConfig, target: usize) -> Result<ScenarioBatch> {
    cfg.validate()?;
    let mut batch = ScenarioBatch::default();
    let mut index = 0u64;
    let limit = (target as u64).saturating_mul(4).max(64);
    while batch.windows.len() < target {
        if index >= limit {
            return Err(Error::Data(format!(
                "only {} of {target} scenarios tripped the relay after {index} draws",
                batch.windows.len()
            )));
        }
        let realized = realize(cfg, &draw_scenario(cfg, index))?;
        batch.catalog.push(realized.entry);
        if let Some(w) = realized.window {
            batch.windows.push(w);
        }
        index += 1;
    }
    Ok(batch)
}

/// The FDIA family that a scenario's payload belongs to (looks through TSA).
pub fn payload_family(spec: &AttackSpec) -> AttackKind {
    match &spec.payload {
        AttackPayload::TsaPlusFdia { fdia, .. } => fdia.kind(),
        _ => spec.kind(),
    }
}
