use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::manifest::Manifest;
use crate::error::{Error, Result};
use crate::segment::{envelopes, read_events_csv, EventInterval};
use crate::tfproc::{read_spectrogram, to_image, Spectrogram};

/// Height of the interval band drawn above the spectrogram, px.
pub const BAND_ROWS: u32 = 4;
pub const BAND_COLOR: Rgb<u8> = Rgb([255, 255, 0]);
const UPPER_COLOR: Rgb<u8> = Rgb([255, 0, 0]);
const CENTRAL_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
const LOWER_COLOR: Rgb<u8> = Rgb([0, 128, 255]);
const CELL: u32 = 24;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotReport {
    pub overlays: Vec<PathBuf>,
    pub heatmap: Option<PathBuf>,
    /// Artifacts that could not be read; plotting carries on without them.
    pub missing: Vec<String>,
}

/// Spectrogram (positive Doppler up) with the three envelopes drawn in and a
/// band above it that is lit exactly over each event's `[start, end)` frames.
pub fn overlay_image(spec: &Spectrogram, dynamic_range_db: f64, events: &[EventInterval]) -> RgbImage {
    let img = to_image(spec, dynamic_range_db);
    let (w, h) = (spec.frames as u32, spec.bins as u32);
    let mut out = RgbImage::new(w, h + BAND_ROWS);
    let y_of = |row: usize| BAND_ROWS + (h - 1 - row as u32);
    for t in 0..spec.frames {
        for row in 0..spec.bins {
            let v = (img.get(row, t) * 255.0).round() as u8;
            out.put_pixel(t as u32, y_of(row), Rgb([v, v, v]));
        }
    }
    let env = envelopes(spec);
    for t in 0..spec.frames {
        out.put_pixel(t as u32, y_of(env.lower[t]), LOWER_COLOR);
        out.put_pixel(t as u32, y_of(env.upper[t]), UPPER_COLOR);
        out.put_pixel(t as u32, y_of(env.central[t]), CENTRAL_COLOR);
    }
    for ev in events {
        for t in ev.start..ev.end.min(spec.frames) {
            for y in 0..BAND_ROWS {
                out.put_pixel(t as u32, y, BAND_COLOR);
            }
        }
    }
    out
}

fn confusion_heatmap(csv_path: &Path) -> Result<RgbImage> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::format(format!("{}: {e}", csv_path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(format!("{}: {e}", csv_path.display())))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::format(format!("{}: {e}", csv_path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    let n = rows.len() as u32;
    let mut img = RgbImage::new(n * CELL, n * CELL);
    for (i, row) in rows.iter().enumerate() {
        for (j, &pct) in row.iter().enumerate() {
            let a = (pct / 100.0).clamp(0.0, 1.0);
            let shade = (255.0 * (1.0 - a)).round() as u8;
            let color = Rgb([shade, shade, 255]);
            for dy in 0..CELL {
                for dx in 0..CELL {
                    let border = dx == 0 || dy == 0;
                    let px = if border { Rgb([200, 200, 200]) } else { color };
                    img.put_pixel(j as u32 * CELL + dx, i as u32 * CELL + dy, px);
                }
            }
        }
    }
    Ok(img)
}

/// One overlay per spectrogram listed in `manifest` and one confusion
/// heatmap, written to `<root>/plots`.
pub fn emit_plots(root: &Path, manifest: &Manifest) -> Result<PlotReport> {
    let plots = root.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    let mut report = PlotReport::default();

    let mut events: BTreeMap<String, Vec<EventInterval>> = BTreeMap::new();
    match manifest.under("events/events.csv").next() {
        Some(entry) => match read_events_csv(&root.join(&entry.path)) {
            Ok(records) => {
                for r in records {
                    events.entry(r.spectrogram_id.clone()).or_default().push(r.interval());
                }
            }
            Err(e) => report.missing.push(format!("{}: {e}", entry.path)),
        },
        None => report.missing.push("events/events.csv".to_string()),
    }

    for entry in manifest.under("spectrograms/").filter(|e| e.path.ends_with(".json")) {
        let path = root.join(&entry.path);
        let (spec, meta) = match read_spectrogram(&path) {
            Ok(v) => v,
            Err(e) => {
                report.missing.push(format!("{}: {e}", entry.path));
                continue;
            }
        };
        let stem = Path::new(&entry.path).file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let img = overlay_image(&spec, meta.dynamic_range_db, events.get(&stem).map_or(&[][..], |v| v));
        let out = plots.join(format!("{stem}_overlay.png"));
        img.save(&out)?;
        report.overlays.push(out);
    }

    let confusion = "model/confusion.csv";
    if manifest.under(confusion).next().is_some() {
        match confusion_heatmap(&root.join(confusion)) {
            Ok(img) => {
                let out = plots.join("confusion_heatmap.png");
                img.save(&out)?;
                report.heatmap = Some(out);
            }
            Err(e) => report.missing.push(format!("{confusion}: {e}")),
        }
    } else {
        report.missing.push(confusion.to_string());
    }
    Ok(report)
}
