use tcdr::heatmap::{export_heatmap, read_cells_csv, render_heatmap, write_cells_csv, HeatmapStyle};
use tcdr_core::explainer::project_to_cells;
use tcdr_core::signal::{Label, MeasurementWindow, Source, CHANNELS, WINDOW_LEN};

fn window() -> MeasurementWindow {
    let rows = (0..WINDOW_LEN)
        .map(|t| std::array::from_fn(|c| (t as f64 * 0.4 + c as f64).sin()))
        .collect::<Vec<[f64; CHANNELS]>>();
    MeasurementWindow::new(rows, Label::Attack, "h-1", 16, Source::Simulated).unwrap()
}

fn cells() -> Vec<[f64; CHANNELS]> {
    (0..WINDOW_LEN)
        .map(|t| std::array::from_fn(|c| ((t * CHANNELS + c) as f64 / 191.0).powi(2)))
        .collect()
}

fn png_size(bytes: &[u8]) -> (u32, u32) {
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    let be = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
    (be(&bytes[16..20]), be(&bytes[20..24]))
}

#[test]
fn cell_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.csv");
    write_cells_csv(&cells(), &path).unwrap();
    assert_eq!(read_cells_csv(&path).unwrap(), cells());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + WINDOW_LEN * CHANNELS);
    assert!(text.starts_with("time_index,channel,score\n0,Ain,"));
}

#[test]
fn png_has_the_configured_size() {
    let dir = tempfile::tempdir().unwrap();
    let style = HeatmapStyle {
        width: 640,
        height: 360,
        ..HeatmapStyle::default()
    };
    let path = dir.path().join("h.png");
    render_heatmap(&cells(), &window(), &path, &style).unwrap();
    assert_eq!(png_size(&std::fs::read(&path).unwrap()), (640, 360));
}

#[test]
fn rendering_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let style = HeatmapStyle::default();
    for ext in ["png", "svg"] {
        let a = dir.path().join(format!("a.{ext}"));
        let b = dir.path().join(format!("b.{ext}"));
        render_heatmap(&cells(), &window(), &a, &style).unwrap();
        render_heatmap(&cells(), &window(), &b, &style).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{ext}");
    }
}

#[test]
fn zero_map_exports_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let alignment = vec![Some((0, 0)), None, Some((31, 5))];
    let map = project_to_cells(&[0.0, 0.0, 0.0], &alignment, "attention-received/mean-heads/mean-layers").unwrap();
    assert_eq!(map.normalizer, 0.0);
    let path = dir.path().join("zero.png");
    export_heatmap(&map, &window(), &path, &HeatmapStyle::default()).unwrap();
    assert!(path.exists());
    let back = read_cells_csv(&path.with_extension("csv")).unwrap();
    assert!(back.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn wrong_cell_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let short = vec![[0.5; CHANNELS]; WINDOW_LEN - 1];
    assert!(render_heatmap(&short, &window(), &dir.path().join("x.png"), &HeatmapStyle::default()).is_err());
}
