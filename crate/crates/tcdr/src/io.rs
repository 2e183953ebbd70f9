//! Dataset files (RECORDS and CSV), trace CSVs and the scenario catalog.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tcdr_core::dataset::{format_record, parse_records, window_from_fields, Dataset, RecordError, RecordFault};
use tcdr_core::scenario::{CatalogEntry, ScenarioBatch};
use tcdr_core::signal::{Channel, MeasurementWindow, SignalTrace, Source, CHANNELS, WINDOW_LEN, WINDOW_VALUES};
use tcdr_core::waveform::WindowSplit;

use crate::error::{format_err, io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// One line per window: `scenario_id,label,trigger_index,v0..v191`.
    Records,
    /// Header row plus one row per window.
    Csv,
}

impl Format {
    /// `.csv` is CSV; anything else is RECORDS.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Records,
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "records" => Ok(Format::Records),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Config(format!("unknown dataset format `{s}`"))),
        }
    }
}

/// Parsed windows plus the records that were rejected.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rejected: Vec<RecordError>,
}

impl Ingested {
    /// The dataset, or a data error naming the first rejected records.
    pub fn strict(self, path: &Path) -> Result<Dataset> {
        if self.rejected.is_empty() {
            return Ok(self.dataset);
        }
        let mut msg = format!("{} malformed record(s)", self.rejected.len());
        for r in self.rejected.iter().take(5) {
            let _ = write!(msg, "; {r}");
        }
        Err(format_err(path, msg))
    }
}

pub fn ingest(path: &Path, format: Format, source: Source) -> Result<Ingested> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        Format::Records => {
            let (ok, bad) = parse_records(&text, source);
            Ok(Ingested {
                dataset: Dataset::new(ok),
                rejected: bad,
            })
        }
        Format::Csv => ingest_csv(&text, source).map_err(|m| format_err(path, m)),
    }
}

/// Value column name for time step `t` of `channel`.
pub fn value_column(t: usize, channel: usize) -> String {
    let name = Channel::from_index(channel).expect("channel index").column_name();
    format!("{name}_{t:02}")
}

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["scenario_id".to_string(), "label".into(), "trigger_index".into()];
    for t in 0..WINDOW_LEN {
        for c in 0..CHANNELS {
            h.push(value_column(t, c));
        }
    }
    h
}

/// CSV ingest. Requires `scenario_id` and `label` columns; `trigger_index`
/// is optional. Value columns are matched by name (`Ain_00` ... `Cout_31`)
/// when all 192 are present, otherwise the remaining columns are read in
/// order as time-major values.
fn ingest_csv(text: &str, source: Source) -> std::result::Result<Ingested, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Ok(Ingested {
            dataset: Dataset::empty(),
            rejected: Vec::new(),
        });
    }
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = find("scenario_id").ok_or("missing scenario_id column")?;
    let label_col = find("label").ok_or("missing label column")?;
    let trigger_col = find("trigger_index");
    let named: Option<Vec<usize>> = (0..WINDOW_LEN)
        .flat_map(|t| (0..CHANNELS).map(move |c| (t, c)))
        .map(|(t, c)| find(&value_column(t, c)))
        .collect();
    let value_cols: Vec<usize> = match named {
        Some(cols) => cols,
        None => (0..header.len())
            .filter(|i| *i != id_col && *i != label_col && Some(*i) != trigger_col)
            .collect(),
    };
    let default_trigger = WindowSplit::default().pre.to_string();
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad.push(RecordError {
                    line,
                    scenario_id: None,
                    fault: RecordFault::Parse {
                        field: "row".into(),
                        text: e.to_string(),
                    },
                });
                continue;
            }
        };
        let id = row.get(id_col).unwrap_or("");
        let values: Vec<&str> = value_cols.iter().filter_map(|i| row.get(*i)).collect();
        let extra = row.len().saturating_sub(header.len());
        let values_len = if extra > 0 { values.len() + extra } else { values.len() };
        let result = if values_len != WINDOW_VALUES {
            Err(RecordFault::Shape { values: values_len })
        } else {
            let trigger = trigger_col.and_then(|i| row.get(i)).unwrap_or(&default_trigger);
            window_from_fields(id, row.get(label_col).unwrap_or(""), trigger, &values, source)
        };
        match result {
            Ok(w) => ok.push(w),
            Err(fault) => bad.push(RecordError {
                line,
                scenario_id: Some(id.to_string()),
                fault,
            }),
        }
    }
    Ok(Ingested {
        dataset: Dataset::new(ok),
        rejected: bad,
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

pub fn export(ds: &Dataset, path: &Path, format: Format) -> Result<()> {
    export_windows(ds.windows(), path, format)
}

pub fn export_windows(windows: &[MeasurementWindow], path: &Path, format: Format) -> Result<()> {
    let mut out = create(path)?;
    match format {
        Format::Records => {
            for w in windows {
                writeln!(out, "{}", format_record(w)?).map_err(io_err(path))?;
            }
        }
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(&mut out);
            let csv_err = |e: csv::Error| format_err(path, e.to_string());
            wr.write_record(csv_header()).map_err(csv_err)?;
            for w in windows {
                let mut rec = vec![w.scenario_id.clone(), w.label.as_str().to_string(), w.trigger_index.to_string()];
                rec.extend(w.flat().iter().map(|v| format!("{v:?}")));
                wr.write_record(&rec).map_err(csv_err)?;
            }
            wr.flush().map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Columnar trace export: `t,Ain,Bin,Cin,Aout,Bout,Cout` in amperes.
pub fn write_trace_csv(trace: &SignalTrace, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let names: Vec<&str> = Channel::ALL.iter().map(|c| c.column_name()).collect();
    writeln!(out, "t,{}", names.join(",")).map_err(io_err(path))?;
    for (i, row) in trace.samples().iter().enumerate() {
        let mut line = format!("{:?}", trace.time_of(i));
        for v in row {
            let _ = write!(line, ",{v:?}");
        }
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// One JSON object per scenario.
pub fn write_catalog(entries: &[CatalogEntry], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for e in entries {
        let line = serde_json::to_string(e).map_err(|err| format_err(path, err.to_string()))?;
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Per scenario kind: drawn, kept and rejected (no relay trip or no window).
pub fn write_catalog_summary(batch: &ScenarioBatch, path: &Path) -> Result<()> {
    let mut rows: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for e in &batch.catalog {
        let r = rows.entry(e.scenario.kind_code()).or_default();
        r.0 += 1;
        if e.kept {
            r.1 += 1;
        }
    }
    let mut out = create(path)?;
    writeln!(out, "kind,scenarios,kept,rejected").map_err(io_err(path))?;
    for (kind, (n, kept)) in &rows {
        writeln!(out, "{kind},{n},{kept},{}", n - kept).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}
