//! Segmented examples on disk: one RGB PNG per look direction plus a JSON
//! sidecar carrying the label.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activity::ActivityClass;
use crate::error::{Error, Result};
use crate::nnet::LabeledExample;
use crate::segment::EventInterval;
use crate::tensor::Tensor3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSidecar {
    pub id: String,
    pub scene: String,
    /// Beam on which the event was detected.
    pub look_offset_deg: f64,
    pub interval: EventInterval,
    pub label: Option<ActivityClass>,
    /// Image file per look direction, in branch order.
    pub images: Vec<String>,
}

fn write_rgb(path: &Path, t: &Tensor3) -> Result<()> {
    if t.channels != 3 {
        return Err(Error::invalid(format!("RGB export needs 3 channels, got {}", t.channels)));
    }
    let plane = t.rows * t.cols;
    let mut img = image::RgbImage::new(t.cols as u32, t.rows as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        for ch in 0..3 {
            px.0[ch] = (t.data[ch * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    img.save(path).map_err(Error::from)
}

fn read_rgb(path: &Path) -> Result<Tensor3> {
    let img = image::open(path)?.to_rgb8();
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor3::zeros(3, rows, cols);
    let plane = rows * cols;
    for (i, px) in img.pixels().enumerate() {
        for ch in 0..3 {
            t.data[ch * plane + i] = px.0[ch] as f64 / 255.0;
        }
    }
    Ok(t)
}

/// Writes `images.len()` PNGs named after `sidecar.images` and `<id>.json`.
pub fn write_example(dir: &Path, sidecar: &ExampleSidecar, images: &[Tensor3]) -> Result<()> {
    if images.len() != sidecar.images.len() {
        return Err(Error::invalid("one file name per image is required"));
    }
    for (name, img) in sidecar.images.iter().zip(images) {
        write_rgb(&dir.join(name), img)?;
    }
    let path = dir.join(format!("{}.json", sidecar.id));
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Every example sidecar in `dir`, sorted by id, with its images.
pub fn read_examples(dir: &Path) -> Result<Vec<(ExampleSidecar, Vec<Tensor3>)>> {
    let mut jsons: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    jsons.sort();
    jsons
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let sidecar: ExampleSidecar =
                serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
            let images = sidecar
                .images
                .iter()
                .map(|name| read_rgb(&dir.join(name)))
                .collect::<Result<Vec<_>>>()?;
            Ok((sidecar, images))
        })
        .collect()
}

/// Labelled examples in `dir`; unlabelled sidecars are skipped.
pub fn load_labeled_examples(dir: &Path) -> Result<Vec<LabeledExample>> {
    Ok(read_examples(dir)?
        .into_iter()
        .filter_map(|(s, images)| {
            s.label.map(|label| LabeledExample {
                id: s.id,
                images,
                label,
            })
        })
        .collect())
}
