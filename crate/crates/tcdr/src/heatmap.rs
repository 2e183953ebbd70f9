//! Attention heatmaps over the six relay channels.

use std::fs;
use std::io::Write;
use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use tcdr_core::explainer::AttentionMap;
use tcdr_core::signal::{Channel, MeasurementWindow, CHANNELS, WINDOW_LEN};
use tcdr_core::textualizer::normalize;

use crate::error::{format_err, io_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapStyle {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub gap: u32,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        Self {
            width: 960,
            height: 600,
            margin: 16,
            gap: 8,
        }
    }
}

/// Everything needed to redraw a heatmap later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub map: AttentionMap,
    pub window: MeasurementWindow,
    pub probability: f64,
    pub config_fingerprint: String,
}

/// `time_index,channel,score`, one row per cell, time-major.
pub fn write_cells_csv(cells: &[[f64; CHANNELS]], path: &Path) -> Result<()> {
    let mut s = String::from("time_index,channel,score\n");
    for (t, row) in cells.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let name = Channel::from_index(c).expect("channel").column_name();
            s.push_str(&format!("{t},{name},{v:?}\n"));
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(s.as_bytes()).map_err(io_err(path))
}

pub fn read_cells_csv(path: &Path) -> Result<Vec<[f64; CHANNELS]>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut cells = vec![[f64::NAN; CHANNELS]; WINDOW_LEN];
    let names: Vec<&str> = Channel::ALL.iter().map(|c| c.column_name()).collect();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || format_err(path, format!("line {}: `{line}`", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let t: usize = f[0].trim().parse().map_err(|_| bad())?;
        let c = names.iter().position(|n| *n == f[1].trim()).ok_or_else(bad)?;
        let v: f64 = f[2].trim().parse().map_err(|_| bad())?;
        if t >= WINDOW_LEN {
            return Err(bad());
        }
        cells[t][c] = v;
    }
    if cells.iter().flatten().any(|v| v.is_nan()) {
        return Err(format_err(path, "missing cells"));
    }
    Ok(cells)
}

fn shade(score: f64) -> RGBColor {
    let s = score.clamp(0.0, 1.0);
    let fade = |full: u8| (255.0 - (255.0 - full as f64) * s).round() as u8;
    RGBColor(fade(200), fade(30), fade(30))
}

fn draw<DB: DrawingBackend>(area: DrawingArea<DB, plotters::coord::Shift>, cells: &[[f64; CHANNELS]], window: &MeasurementWindow, style: &HeatmapStyle) -> std::result::Result<(), String> {
    let e = |err: DrawingAreaErrorKind<DB::ErrorType>| err.to_string();
    area.fill(&WHITE).map_err(e)?;
    let m = style.margin as i32;
    let gap = style.gap as i32;
    let panel_h = ((style.height as i32 - 2 * m - gap * (CHANNELS as i32 - 1)) / CHANNELS as i32).max(1);
    let inner_w = (style.width as i32 - 2 * m).max(WINDOW_LEN as i32);
    let norm = normalize(window);
    for c in 0..CHANNELS {
        let top = m + c as i32 * (panel_h + gap);
        let x_of = |t: usize| m + (t as i32 * inner_w) / WINDOW_LEN as i32;
        for (t, row) in cells.iter().enumerate() {
            let rect = Rectangle::new([(x_of(t), top), (x_of(t + 1), top + panel_h)], shade(row[c]).filled());
            area.draw(&rect).map_err(e)?;
        }
        let frame = Rectangle::new([(m, top), (m + inner_w, top + panel_h)], BLACK.stroke_width(1));
        area.draw(&frame).map_err(e)?;
        let points: Vec<(i32, i32)> = (0..WINDOW_LEN)
            .map(|t| {
                let x = (x_of(t) + x_of(t + 1)) / 2;
                let y = top + panel_h - 2 - ((norm.value(t, c) * (panel_h - 4) as f64).round() as i32);
                (x, y)
            })
            .collect();
        area.draw(&PathElement::new(points, BLACK.stroke_width(2))).map_err(e)?;
    }
    area.present().map_err(e)
}

/// Renders to PNG, or to SVG when the extension is `.svg`.
pub fn render_heatmap(cells: &[[f64; CHANNELS]], window: &MeasurementWindow, path: &Path, style: &HeatmapStyle) -> Result<()> {
    if cells.len() != WINDOW_LEN {
        return Err(format_err(path, format!("{} rows of cell scores", cells.len())));
    }
    let size = (style.width, style.height);
    let svg = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let r = if svg {
        draw(SVGBackend::new(path, size).into_drawing_area(), cells, window, style)
    } else {
        draw(BitMapBackend::new(path, size).into_drawing_area(), cells, window, style)
    };
    r.map_err(|m| format_err(path, m))
}

/// Writes the image plus a `.csv` sidecar next to it.
pub fn export_heatmap(map: &AttentionMap, window: &MeasurementWindow, path: &Path, style: &HeatmapStyle) -> Result<()> {
    render_heatmap(&map.cell_scores, window, path, style)?;
    write_cells_csv(&map.cell_scores, &path.with_extension("csv"))
}

pub fn save_explanation(x: &Explanation, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(x).map_err(|e| format_err(path, e.to_string()))?;
    fs::write(path, json).map_err(io_err(path))
}

pub fn load_explanation(path: &Path) -> Result<Explanation> {
    let raw = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&raw).map_err(|e| format_err(path, e.to_string()))
}
