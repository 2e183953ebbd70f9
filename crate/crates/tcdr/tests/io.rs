use std::fs;

use proptest::prelude::*;
use tcdr::io::{csv_header, export, ingest, value_column, Format};
use tcdr_core::dataset::{format_record, Dataset, RecordFault};
use tcdr_core::signal::{Label, MeasurementWindow, Source, CHANNELS, WINDOW_LEN};

fn window(i: usize, label: Label) -> MeasurementWindow {
    let rows = (0..WINDOW_LEN)
        .map(|t| std::array::from_fn(|c| ((t * 3 + c * 5 + i) as f64 * 0.37).sin() * (100.0 + i as f64)))
        .collect::<Vec<[f64; CHANNELS]>>();
    MeasurementWindow::new(rows, label, format!("rec-{i}"), 16, Source::Ingested).unwrap()
}

fn ten() -> Dataset {
    Dataset::new((0..10).map(|i| window(i, if i < 7 { Label::Fault } else { Label::Attack })).collect())
}

#[test]
fn ten_records_count_by_class() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.records");
    let text: String = ten().windows().iter().map(|w| format_record(w).unwrap() + "\n").collect();
    fs::write(&path, text).unwrap();
    let got = ingest(&path, Format::Records, Source::Ingested).unwrap();
    assert!(got.rejected.is_empty());
    assert_eq!(got.dataset.count(Label::Fault), 7);
    assert_eq!(got.dataset.count(Label::Attack), 3);
}

#[test]
fn short_record_is_a_shape_error_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.records");
    let good = format_record(&window(1, Label::Fault)).unwrap();
    let short = good.rsplit_once(',').unwrap().0.replace("rec-1", "short-one");
    fs::write(&path, format!("{good}\n{short}\n")).unwrap();
    let got = ingest(&path, Format::Records, Source::Ingested).unwrap();
    assert_eq!(got.dataset.len(), 1);
    assert_eq!(got.rejected.len(), 1);
    let r = &got.rejected[0];
    assert_eq!(r.line, 2);
    assert_eq!(r.scenario_id.as_deref(), Some("short-one"));
    assert_eq!(r.fault, RecordFault::Shape { values: 191 });
    let err = got.strict(&path).unwrap_err();
    assert!(err.to_string().contains("short-one"));
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn csv_and_records_share_a_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ten();
    for (name, format) in [("a.records", Format::Records), ("a.csv", Format::Csv)] {
        let path = dir.path().join(name);
        export(&ds, &path, format).unwrap();
        let back = ingest(&path, Format::from_path(&path), Source::Ingested).unwrap().strict(&path).unwrap();
        assert_eq!(back.fingerprint(), ds.fingerprint(), "{name}");
        assert_eq!(back.windows(), ds.windows());
    }
}

#[test]
fn empty_dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset::empty();
    for (name, format) in [("e.records", Format::Records), ("e.csv", Format::Csv)] {
        let path = dir.path().join(name);
        export(&ds, &path, format).unwrap();
        let back = ingest(&path, format, Source::Ingested).unwrap().strict(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.fingerprint(), ds.fingerprint());
    }
}

#[test]
fn csv_header_lists_every_cell() {
    let h = csv_header();
    assert_eq!(h.len(), 3 + WINDOW_LEN * CHANNELS);
    assert_eq!(&h[..3], ["scenario_id", "label", "trigger_index"]);
    assert_eq!(h[3], value_column(0, 0));
    assert_eq!(h.last().unwrap(), &value_column(WINDOW_LEN - 1, CHANNELS - 1));
}

#[test]
fn csv_columns_may_come_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shuffled.csv");
    let w = window(3, Label::Attack);
    let mut cols: Vec<(String, String)> = vec![
        ("label".into(), "ATTACK".into()),
        ("scenario_id".into(), w.scenario_id.clone()),
        ("trigger_index".into(), "16".into()),
    ];
    for t in (0..WINDOW_LEN).rev() {
        for c in 0..CHANNELS {
            cols.push((value_column(t, c), format!("{:?}", w.value(t, c))));
        }
    }
    let header: Vec<&str> = cols.iter().map(|c| c.0.as_str()).collect();
    let row: Vec<&str> = cols.iter().map(|c| c.1.as_str()).collect();
    fs::write(&path, format!("{}\n{}\n", header.join(","), row.join(","))).unwrap();
    let back = ingest(&path, Format::Csv, Source::Ingested).unwrap().strict(&path).unwrap();
    assert_eq!(back.windows(), &[w]);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = ingest(std::path::Path::new("/nonexistent/x.records"), Format::Records, Source::Ingested).unwrap_err();
    assert_eq!(err.exit_code(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn records_round_trip_bit_exactly(
        values in prop::collection::vec(-1e6f64..1e6, WINDOW_LEN * CHANNELS),
        attack in any::<bool>(),
        trigger in 0usize..WINDOW_LEN,
    ) {
        let label = if attack { Label::Attack } else { Label::Fault };
        let w = MeasurementWindow::from_flat(&values, label, "p-0", trigger, Source::Ingested).unwrap();
        let ds = Dataset::new(vec![w]);
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("p.records", Format::Records), ("p.csv", Format::Csv)] {
            let path = dir.path().join(name);
            export(&ds, &path, format).unwrap();
            let back = ingest(&path, format, Source::Ingested).unwrap().strict(&path).unwrap();
            prop_assert_eq!(back.windows(), ds.windows());
        }
    }
}
