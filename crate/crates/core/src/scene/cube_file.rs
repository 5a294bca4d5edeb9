//! Binary cube files and their ground-truth sidecars.
//!
//! Layout (little-endian): `"MDC1"`, `u32 P`, `u32 Q`, `u32 M`, then six `f64`
//! (carrier, bandwidth, pri, adc_rate, element spacing, noise variance),
//! then `N * M` complex samples as `(f32 re, f32 im)` in `(n, m)` row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{PersonTruth, RawDataCube};
use crate::error::{Error, Result};
use crate::radar::RadarParams;

pub const CUBE_MAGIC: &[u8; 4] = b"MDC1";

const HEADER_LEN: usize = 4 + 3 * 4 + 6 * 8;

pub fn write_cube(path: &Path, cube: &RawDataCube) -> Result<()> {
    cube.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let p = &cube.params;
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(CUBE_MAGIC);
    for dim in [p.samples_per_pulse, p.num_pulses, p.num_elements] {
        let dim = u32::try_from(dim).map_err(|_| Error::invalid("cube dimension exceeds u32"))?;
        header.extend_from_slice(&dim.to_le_bytes());
    }
    for v in [p.carrier_freq, p.bandwidth, p.pri, p.adc_rate, p.element_spacing, p.noise_variance] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&header).map_err(|e| Error::io(path, e))?;

    let mut chunk = Vec::with_capacity(8 * 4096);
    for block in cube.samples.chunks(4096) {
        chunk.clear();
        for s in block {
            chunk.extend_from_slice(&(s.re as f32).to_le_bytes());
            chunk.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        out.write_all(&chunk).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a cube body. Ground truth is left empty; see [`read_ground_truth`].
pub fn read_cube(path: &Path) -> Result<RawDataCube> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::with_capacity(1 << 20, file);
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::format(format!("{}: truncated cube header", path.display())))?;
    if &header[..4] != CUBE_MAGIC {
        return Err(Error::format(format!("{}: not an MDC1 cube", path.display())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let f64_at = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
    let params = RadarParams {
        samples_per_pulse: u32_at(4),
        num_pulses: u32_at(8),
        num_elements: u32_at(12),
        carrier_freq: f64_at(16),
        bandwidth: f64_at(24),
        pri: f64_at(32),
        adc_rate: f64_at(40),
        element_spacing: f64_at(48),
        noise_variance: f64_at(56),
    };
    params
        .validate()
        .map_err(|e| Error::format(format!("{}: bad cube header: {e}", path.display())))?;

    let count = params.total_samples() * params.num_elements;
    let mut samples = Vec::with_capacity(count);
    let mut buf = vec![0u8; 8 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let take = remaining.min(4096);
        let bytes = &mut buf[..take * 8];
        input
            .read_exact(bytes)
            .map_err(|_| Error::format(format!("{}: truncated cube body", path.display())))?;
        for c in bytes.chunks_exact(8) {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::format(format!("{}: non-finite sample", path.display())));
            }
            samples.push(Complex64::new(re as f64, im as f64));
        }
        remaining -= take;
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(format!("{}: trailing bytes after cube body", path.display())));
    }
    Ok(RawDataCube {
        params,
        samples,
        ground_truth: Vec::new(),
    })
}

pub fn write_ground_truth(path: &Path, truth: &[PersonTruth]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, truth)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<PersonTruth>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::super::{synthesize_cube, PersonMotion};
    use super::*;

    #[test]
    fn file_roundtrip_preserves_header_and_f32_samples() {
        let params = RadarParams {
            num_pulses: 16,
            noise_variance: 0.5,
            ..RadarParams::default().with_samples_per_pulse(32)
        };
        let cube = synthesize_cube(&[PersonMotion::static_at(60.0, 2.0)], &params, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mdc");
        write_cube(&path, &cube).unwrap();
        let bytes = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(bytes, HEADER_LEN + 8 * 32 * 16 * 4);
        let back = read_cube(&path).unwrap();
        assert_eq!(back.params, params);
        for (a, b) in cube.samples.iter().zip(&back.samples) {
            assert_eq!(a.re as f32 as f64, b.re);
            assert_eq!(a.im as f32 as f64, b.im);
        }

        let gt = dir.path().join("c.json");
        write_ground_truth(&gt, &cube.ground_truth).unwrap();
        assert_eq!(read_ground_truth(&gt).unwrap(), cube.ground_truth);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.mdc");
        std::fs::write(&path, b"NOPE and some more bytes to fill a header................................").unwrap();
        assert!(matches!(read_cube(&path), Err(Error::Format(_))));
    }
}
