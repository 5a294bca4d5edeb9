//! Spectrogram files: an 8-bit PNG for viewing plus a JSON sidecar that
//! carries the axes and the full-precision power so later stages can resume
//! from it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{to_image, ImageMatrix, Spectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMeta {
    pub id: String,
    pub look_offset_deg: f64,
    pub sample_period: f64,
    pub range_bins: (usize, usize),
    pub dynamic_range_db: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(flatten)]
    meta: SpectrogramMeta,
    bins: usize,
    frames: usize,
    hop: usize,
    frame_times: Vec<f64>,
    doppler_hz: Vec<f64>,
    window: Vec<f64>,
    /// Frame-major power values.
    power: Vec<f64>,
}

/// Writes `<stem>.png` (positive Doppler at the top) and `<stem>.json`.
/// Returns both paths.
pub fn write_spectrogram(
    dir: &Path,
    stem: &str,
    spec: &Spectrogram,
    meta: &SpectrogramMeta,
) -> Result<(PathBuf, PathBuf)> {
    let img = to_image(spec, meta.dynamic_range_db);
    let png = dir.join(format!("{stem}.png"));
    write_gray_png(&png, &img, true)?;

    let json = dir.join(format!("{stem}.json"));
    let sidecar = Sidecar {
        meta: meta.clone(),
        bins: spec.bins,
        frames: spec.frames,
        hop: spec.hop,
        frame_times: spec.frame_times(meta.sample_period),
        doppler_hz: spec.doppler_axis(meta.sample_period),
        window: spec.window.clone(),
        power: spec.power.clone(),
    };
    let file = File::create(&json).map_err(|e| Error::io(&json, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, &sidecar)?;
    out.write_all(b"\n").map_err(|e| Error::io(&json, e))?;
    out.flush().map_err(|e| Error::io(&json, e))?;
    Ok((png, json))
}

/// Loads a spectrogram from its JSON sidecar.
pub fn read_spectrogram(json: &Path) -> Result<(Spectrogram, SpectrogramMeta)> {
    let file = File::open(json).map_err(|e| Error::io(json, e))?;
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(file))?;
    if sidecar.power.len() != sidecar.bins * sidecar.frames {
        return Err(Error::format(format!(
            "{}: power has {} values, expected {} x {}",
            json.display(),
            sidecar.power.len(),
            sidecar.bins,
            sidecar.frames
        )));
    }
    let spec = Spectrogram::from_frames(sidecar.bins, sidecar.hop, sidecar.window, sidecar.power)
        .map_err(|e| Error::format(format!("{}: {e}", json.display())))?;
    Ok((spec, sidecar.meta))
}

/// Saves a `[0, 1]` image as 8-bit grayscale, optionally flipped vertically.
fn write_gray_png(path: &Path, img: &ImageMatrix, flip_rows: bool) -> Result<()> {
    let mut buf = image::GrayImage::new(img.cols as u32, img.rows as u32);
    for r in 0..img.rows {
        let y = if flip_rows { img.rows - 1 - r } else { r };
        for c in 0..img.cols {
            let v = (img.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8;
            buf.put_pixel(c as u32, y as u32, image::Luma([v]));
        }
    }
    buf.save(path).map_err(Error::from)
}

/// Loads an 8-bit grayscale PNG into `[0, 1]`.
#[cfg(test)]
pub(crate) fn read_gray_png(path: &Path, flip_rows: bool) -> Result<ImageMatrix> {
    let img = image::open(path)?.to_luma8();
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let mut out = ImageMatrix::zeros(rows, cols);
    for (x, y, px) in img.enumerate_pixels() {
        let r = if flip_rows { rows - 1 - y as usize } else { y as usize };
        out.set(r, x as usize, px.0[0] as f64 / 255.0);
    }
    Ok(out)
}
