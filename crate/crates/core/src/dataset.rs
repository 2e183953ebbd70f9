//! Labelled window collections, content fingerprints and stratified splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::{Label, MeasurementWindow, Source, WINDOW_VALUES};

pub type Digest32 = [u8; 32];

fn canonical_bits(v: f64) -> [u8; 8] {
    // -0.0 and 0.0 print identically, so they must hash identically
    let v = if v == 0.0 { 0.0 } else { v };
    v.to_le_bytes()
}

/// Hash of a window's measurement values and label; ignores ids.
pub fn content_hash(w: &MeasurementWindow) -> Digest32 {
    let mut h = Sha256::new();
    h.update(w.label.as_str().as_bytes());
    for row in w.values() {
        for v in row {
            h.update(canonical_bits(*v));
        }
    }
    h.finalize().into()
}

/// Hash of the full canonical record: id, label, trigger index and values.
pub fn record_hash(w: &MeasurementWindow) -> Digest32 {
    let mut h = Sha256::new();
    h.update(w.scenario_id.as_bytes());
    h.update([0u8]);
    h.update(w.label.as_str().as_bytes());
    h.update((w.trigger_index as u64).to_le_bytes());
    for row in w.values() {
        for v in row {
            h.update(canonical_bits(*v));
        }
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Immutable set of labelled windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    windows: Vec<MeasurementWindow>,
    class_counts: BTreeMap<Label, usize>,
    fingerprint: String,
}

impl Dataset {
    pub fn new(windows: Vec<MeasurementWindow>) -> Self {
        let mut class_counts = BTreeMap::new();
        for w in &windows {
            *class_counts.entry(w.label).or_insert(0) += 1;
        }
        let mut hashes: Vec<Digest32> = windows.iter().map(record_hash).collect();
        hashes.sort_unstable();
        let mut h = Sha256::new();
        h.update((hashes.len() as u64).to_le_bytes());
        for d in &hashes {
            h.update(d);
        }
        let fingerprint = hex(&h.finalize());
        Self {
            windows,
            class_counts,
            fingerprint,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn windows(&self) -> &[MeasurementWindow] {
        &self.windows
    }

    pub fn into_windows(self) -> Vec<MeasurementWindow> {
        self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Count per label; labels with no windows are absent.
    pub fn class_counts(&self) -> &BTreeMap<Label, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    /// Order-independent content fingerprint (hex sha256).
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn majority_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let max = self.class_counts.values().copied().max().unwrap_or(0);
        max as f64 / self.len() as f64
    }

    pub fn merge(&self, other: &Dataset) -> Dataset {
        let mut w = self.windows.clone();
        w.extend(other.windows.iter().cloned());
        Dataset::new(w)
    }

    pub fn content_hashes(&self) -> BTreeSet<Digest32> {
        self.windows.iter().map(content_hash).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.windows.iter().map(|w| w.label).collect()
    }
}

/// Number of windows of `a` whose content also occurs in `b`.
pub fn shared_windows(a: &Dataset, b: &Dataset) -> usize {
    let hb = b.content_hashes();
    a.windows.iter().filter(|w| hb.contains(&content_hash(w))).count()
}

/// Fails with [`Error::Leakage`] when the two sets share any window content.
pub fn ensure_disjoint(a: &Dataset, b: &Dataset) -> Result<()> {
    match shared_windows(a, b) {
        0 => Ok(()),
        n => Err(Error::Leakage(n)),
    }
}

/// Hash of the rendered numerals of a window: two windows with the same key
/// produce identical prompts under every template.
pub fn prompt_key(w: &MeasurementWindow) -> Result<Digest32> {
    let mut h = Sha256::new();
    for row in crate::textualizer::normalize(w).values() {
        for v in row {
            h.update(crate::textualizer::format_value(*v)?.as_bytes());
        }
    }
    Ok(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dedup {
    pub dataset: Dataset,
    /// Windows dropped because an equivalent window with the same label was kept.
    pub duplicates: usize,
    /// Windows dropped because equivalent windows carry different labels.
    pub conflicts: usize,
}

/// Collapses windows whose prompts would be identical. Of each group the
/// window with the smallest record hash is kept; groups with mixed labels are
/// dropped entirely. Order of the kept windows is preserved.
pub fn dedup_by_prompt(ds: &Dataset) -> Result<Dedup> {
    let mut groups: BTreeMap<Digest32, Vec<usize>> = BTreeMap::new();
    for (i, w) in ds.windows.iter().enumerate() {
        groups.entry(prompt_key(w)?).or_default().push(i);
    }
    let mut keep = alloc::vec![false; ds.len()];
    let (mut duplicates, mut conflicts) = (0, 0);
    for members in groups.values() {
        let label = ds.windows[members[0]].label;
        if members.iter().any(|i| ds.windows[*i].label != label) {
            conflicts += members.len();
            continue;
        }
        let best = members
            .iter()
            .min_by_key(|i| record_hash(&ds.windows[**i]))
            .copied()
            .unwrap_or(members[0]);
        keep[best] = true;
        duplicates += members.len() - 1;
    }
    let windows = ds
        .windows
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(w, _)| w.clone())
        .collect();
    Ok(Dedup {
        dataset: Dataset::new(windows),
        duplicates,
        conflicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Train count for a class of `n` members: `round(f n)`, kept in `[1, n-1]`.
    pub fn train_count(&self, n: usize) -> usize {
        let k = libm::round(self.train_fraction * n as f64) as usize;
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Per-class seeded split. Members are first ordered by record hash, so the
/// result depends only on content and seed, not on file order.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let (train, test) = split_indices(ds, spec)?;
    let pick = |idx: &[usize]| Dataset::new(idx.iter().map(|i| ds.windows[*i].clone()).collect());
    Ok((pick(&train), pick(&test)))
}

/// Index form of [`stratified_split`].
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&label, &n) in &ds.class_counts {
        if n < 2 {
            return Err(Error::Data(format!("class {label} has {n} member(s); need at least 2")));
        }
        let mut members: Vec<(Digest32, usize)> = ds
            .windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == label)
            .map(|(i, w)| (record_hash(w), i))
            .collect();
        members.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(label.class_index() as u64);
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i as u64) as usize;
            members.swap(i, j);
        }
        let k = spec.train_count(n);
        train.extend(members[..k].iter().map(|m| m.1));
        test.extend(members[k..].iter().map(|m| m.1));
    }
    Ok((train, test))
}

/// Stratified sample of about `size` windows, class proportions preserved.
pub fn stratified_subset(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if size >= ds.len() {
        return Ok(ds.clone());
    }
    let spec = SplitSpec {
        train_fraction: size as f64 / ds.len() as f64,
        seed,
    };
    Ok(stratified_split(ds, &spec)?.0)
}

/// Why a record was rejected on ingest.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordFault {
    Shape { values: usize },
    UnknownLabel(String),
    NonFinite { value_index: usize },
    Parse { field: String, text: String },
    Invalid(Error),
}

impl fmt::Display for RecordFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordFault::Shape { values } => {
                write!(f, "shape mismatch: {values} values, expected {WINDOW_VALUES}")
            }
            RecordFault::UnknownLabel(l) => write!(f, "unknown label `{l}`"),
            RecordFault::NonFinite { value_index } => write!(f, "non-finite value at index {value_index}"),
            RecordFault::Parse { field, text } => write!(f, "cannot parse {field} `{text}`"),
            RecordFault::Invalid(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub scenario_id: Option<String>,
    pub fault: RecordFault,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.scenario_id {
            write!(f, " ({id})")?;
        }
        write!(f, ": {}", self.fault)
    }
}

/// Builds a window from already split fields, classifying any problem.
pub fn window_from_fields(
    scenario_id: &str,
    label: &str,
    trigger_index: &str,
    values: &[&str],
    source: Source,
) -> core::result::Result<MeasurementWindow, RecordFault> {
    let label = label
        .parse::<Label>()
        .map_err(|_| RecordFault::UnknownLabel(label.trim().to_string()))?;
    let trigger = trigger_index.trim().parse::<usize>().map_err(|_| RecordFault::Parse {
        field: "trigger_index".into(),
        text: trigger_index.into(),
    })?;
    if values.len() != WINDOW_VALUES {
        return Err(RecordFault::Shape { values: values.len() });
    }
    let mut flat = Vec::with_capacity(WINDOW_VALUES);
    for (i, text) in values.iter().enumerate() {
        let v = text.trim().parse::<f64>().map_err(|_| RecordFault::Parse {
            field: format!("value {i}"),
            text: (*text).into(),
        })?;
        if !v.is_finite() {
            return Err(RecordFault::NonFinite { value_index: i });
        }
        flat.push(v);
    }
    MeasurementWindow::from_flat(&flat, label, scenario_id.trim(), trigger, source).map_err(RecordFault::Invalid)
}

/// One RECORDS line: `scenario_id,label,trigger_index,v0,...,v191`.
pub fn format_record(w: &MeasurementWindow) -> Result<String> {
    if w.scenario_id.contains([',', '\n', '\r']) {
        return Err(Error::Data(format!("scenario id `{}` contains a separator", w.scenario_id)));
    }
    let mut s = String::with_capacity(WINDOW_VALUES * 20);
    s.push_str(&w.scenario_id);
    s.push(',');
    s.push_str(w.label.as_str());
    s.push(',');
    s.push_str(&w.trigger_index.to_string());
    for row in w.values() {
        for v in row {
            s.push(',');
            s.push_str(&format!("{v:?}"));
        }
    }
    Ok(s)
}

pub fn parse_record(line: &str, source: Source) -> core::result::Result<MeasurementWindow, RecordFault> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() < 3 {
        return Err(RecordFault::Shape {
            values: fields.len().saturating_sub(3),
        });
    }
    window_from_fields(fields[0], fields[1], fields[2], &fields[3..], source)
}

/// Parses a whole RECORDS document; blank lines and `#` comments are skipped.
pub fn parse_records(text: &str, source: Source) -> (Vec<MeasurementWindow>, Vec<RecordError>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_record(line, source) {
            Ok(w) => ok.push(w),
            Err(fault) => bad.push(RecordError {
                line: i + 1,
                scenario_id: line.split(',').next().map(|s| s.trim().to_string()),
                fault,
            }),
        }
    }
    (ok, bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{CHANNELS, WINDOW_LEN};
    use alloc::vec;

    fn window(i: usize, label: Label) -> MeasurementWindow {
        let rows = (0..WINDOW_LEN)
            .map(|t| core::array::from_fn(|c| (i * 1000 + t * CHANNELS + c) as f64 * 0.01))
            .collect();
        MeasurementWindow::new(rows, label, format!("w{i}"), 16, Source::Simulated).unwrap()
    }

    fn dataset(fault: usize, attack: usize) -> Dataset {
        let mut w = Vec::new();
        for i in 0..fault {
            w.push(window(i, Label::Fault));
        }
        for i in 0..attack {
            w.push(window(fault + i, Label::Attack));
        }
        Dataset::new(w)
    }

    #[test]
    fn counts_and_fingerprint_order_free() {
        let ds = dataset(7, 3);
        assert_eq!(ds.count(Label::Fault), 7);
        assert_eq!(ds.count(Label::Attack), 3);
        let mut rev = ds.windows().to_vec();
        rev.reverse();
        assert_eq!(Dataset::new(rev).fingerprint(), ds.fingerprint());
        assert_ne!(dataset(7, 2).fingerprint(), ds.fingerprint());
    }

    #[test]
    fn split_100_100() {
        let ds = dataset(100, 100);
        let (tr, te) = stratified_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(tr.count(Label::Fault), 80);
        assert_eq!(tr.count(Label::Attack), 80);
        assert_eq!(te.count(Label::Fault), 20);
        assert_eq!(te.count(Label::Attack), 20);
        ensure_disjoint(&tr, &te).unwrap();
        assert_eq!(tr.merge(&te).fingerprint(), ds.fingerprint());
    }

    #[test]
    fn split_ignores_input_order() {
        let ds = dataset(13, 9);
        let mut rev = ds.windows().to_vec();
        rev.reverse();
        let a = stratified_split(&ds, &SplitSpec::default()).unwrap();
        let b = stratified_split(&Dataset::new(rev), &SplitSpec::default()).unwrap();
        assert_eq!(a.0.fingerprint(), b.0.fingerprint());
    }

    #[test]
    fn seed_changes_membership_not_counts() {
        let ds = dataset(50, 30);
        let a = stratified_split(&ds, &SplitSpec::default()).unwrap().0;
        let b = stratified_split(&ds, &SplitSpec { seed: 7, ..SplitSpec::default() }).unwrap().0;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.class_counts(), b.class_counts());
    }

    #[test]
    fn singleton_class_is_rejected() {
        let ds = dataset(5, 1);
        assert!(matches!(stratified_split(&ds, &SplitSpec::default()), Err(Error::Data(_))));
    }

    #[test]
    fn leakage_detected_by_content() {
        let ds = dataset(4, 4);
        let mut copy = ds.windows()[0].clone();
        copy.scenario_id = "renamed".into();
        let other = Dataset::new(vec![copy, window(99, Label::Fault)]);
        assert_eq!(shared_windows(&other, &ds), 1);
        assert_eq!(ensure_disjoint(&ds, &other), Err(Error::Leakage(1)));
    }

    #[test]
    fn record_round_trip() {
        let w = window(3, Label::Attack);
        let line = format_record(&w).unwrap();
        let back = parse_record(&line, Source::Simulated).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn record_faults_are_distinct() {
        let w = window(1, Label::Fault);
        let line = format_record(&w).unwrap();
        let short: String = line.rsplit_once(',').unwrap().0.into();
        assert_eq!(
            parse_record(&short, Source::Ingested),
            Err(RecordFault::Shape { values: 191 })
        );
        let bad_label = line.replacen("FAULT", "MAYBE", 1);
        assert_eq!(
            parse_record(&bad_label, Source::Ingested),
            Err(RecordFault::UnknownLabel("MAYBE".into()))
        );
        let (head, _) = line.rsplit_once(',').unwrap();
        let nan = format!("{head},NaN");
        assert_eq!(
            parse_record(&nan, Source::Ingested),
            Err(RecordFault::NonFinite { value_index: 191 })
        );
        let text = format!("{line}\n\n{short}\n{line}\n");
        let (ok, bad) = parse_records(&text, Source::Ingested);
        assert_eq!(ok.len(), 2);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].line, 3);
    }

    #[test]
    fn prompt_equivalent_windows_collapse() {
        let d = dedup_by_prompt(&dataset(3, 0)).unwrap();
        assert_eq!((d.dataset.len(), d.duplicates, d.conflicts), (1, 2, 0));
        let d = dedup_by_prompt(&dataset(2, 1)).unwrap();
        assert_eq!((d.dataset.len(), d.duplicates, d.conflicts), (0, 0, 3));
        let mut w = window(0, Label::Fault);
        w.values_mut()[3][2] = 1e6;
        let ds = Dataset::new(vec![w, window(1, Label::Fault)]);
        assert_eq!(dedup_by_prompt(&ds).unwrap().dataset.len(), 2);
    }
}
