use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::tfproc::ImageMatrix;

use super::EventInterval;

/// Side of the square zero canvas crops are centred on.
pub const CANVAS_SIZE: usize = 600;
/// Side of the classifier input.
pub const CNN_INPUT_SIZE: usize = 128;

/// A crop centred on a zero canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedImage {
    pub pixels: ImageMatrix,
    pub interval: EventInterval,
    /// `(top, left, rows, cols)` of the crop on the canvas.
    pub footprint: (usize, usize, usize, usize),
}

/// Crops frames `[start, end)` of `image` and centres them on a
/// `canvas x canvas` zero canvas.
pub fn crop_and_pad(image: &ImageMatrix, interval: &EventInterval, canvas: usize) -> Result<PaddedImage> {
    if interval.start >= interval.end || interval.end > image.cols {
        return Err(Error::invalid(format!(
            "interval [{}, {}) outside image of {} frames",
            interval.start, interval.end, image.cols
        )));
    }
    let (rows, cols) = (image.rows, interval.end - interval.start);
    if rows > canvas || cols > canvas {
        return Err(Error::invalid(format!(
            "crop {rows}x{cols} of interval [{}, {}) exceeds the {canvas}x{canvas} canvas",
            interval.start, interval.end
        )));
    }
    let top = (canvas - rows) / 2;
    let left = (canvas - cols) / 2;
    let mut pixels = ImageMatrix::zeros(canvas, canvas);
    for r in 0..rows {
        for c in 0..cols {
            pixels.set(top + r, left + c, image.get(r, interval.start + c));
        }
    }
    Ok(PaddedImage {
        pixels,
        interval: *interval,
        footprint: (top, left, rows, cols),
    })
}

/// Source coordinate and neighbours for output index `i` under half-pixel
/// centre alignment.
pub(crate) fn bilinear_taps(i: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
    let lo = src.floor() as usize;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, src - lo as f64)
}

pub fn resize_bilinear(image: &ImageMatrix, rows: usize, cols: usize) -> ImageMatrix {
    let mut out = ImageMatrix::zeros(rows, cols);
    let col_taps: Vec<_> = (0..cols).map(|c| bilinear_taps(c, image.cols, cols)).collect();
    for r in 0..rows {
        let (r0, r1, wr) = bilinear_taps(r, image.rows, rows);
        for (c, &(c0, c1, wc)) in col_taps.iter().enumerate() {
            let top = image.get(r0, c0) * (1.0 - wc) + image.get(r0, c1) * wc;
            let bottom = image.get(r1, c0) * (1.0 - wc) + image.get(r1, c1) * wc;
            out.set(r, c, top * (1.0 - wr) + bottom * wr);
        }
    }
    out
}

/// Crop, centre on the 600x600 canvas, resize to 128x128 and replicate into
/// three identical channels.
pub fn crop_pad_resize(image: &ImageMatrix, interval: &EventInterval) -> Result<Tensor3> {
    let padded = crop_and_pad(image, interval, CANVAS_SIZE)?;
    let small = resize_bilinear(&padded.pixels, CNN_INPUT_SIZE, CNN_INPUT_SIZE);
    Ok(Tensor3::replicate(&small, 3))
}
