//! Binary model file:
//!
//! ```text
//! "MDN1" | version u32 | input_size in_channels branches conv_layers filters hidden classes (u32 each)
//! | tensor count u32 | per tensor: ndim u32, dims u32 x ndim, f32 x prod(dims)
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use super::model::{CnnArch, CnnModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"MDN1";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &CnnModel<f32>) -> Vec<u8> {
    let a = &model.arch;
    let mut out = Vec::with_capacity(64 + 4 * model.params.len());
    out.extend_from_slice(MODEL_MAGIC);
    let put = |v: u32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    put(MODEL_VERSION, &mut out);
    for v in [a.input_size, a.in_channels, a.branches, a.conv_layers, a.filters, a.hidden, a.classes] {
        put(v as u32, &mut out);
    }
    put(model.layout.len() as u32, &mut out);
    for spec in &model.layout {
        put(spec.shape.len() as u32, &mut out);
        for &d in &spec.shape {
            put(d as u32, &mut out);
        }
        for p in &model.params[spec.range()] {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(format!("model file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<CnnModel<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::format("not a model file (bad magic)"));
    }
    let version = r.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(Error::format(format!("unsupported model version {version}")));
    }
    let mut f = [0usize; 7];
    for v in &mut f {
        *v = r.u32()?;
    }
    let arch = CnnArch {
        input_size: f[0],
        in_channels: f[1],
        branches: f[2],
        conv_layers: f[3],
        filters: f[4],
        hidden: f[5],
        classes: f[6],
    };
    let mut model = CnnModel::<f32>::zeros(arch).map_err(|e| Error::format(format!("model header: {e}")))?;
    let count = r.u32()?;
    if count != model.layout.len() {
        return Err(Error::format(format!(
            "model holds {count} tensors, architecture needs {}",
            model.layout.len()
        )));
    }
    for spec in model.layout.clone() {
        let ndim = r.u32()?;
        let dims = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if dims != spec.shape {
            return Err(Error::format(format!(
                "tensor {} has shape {dims:?}, expected {:?}",
                spec.name, spec.shape
            )));
        }
        let raw = r.take(4 * spec.len())?;
        for (p, chunk) in model.params[spec.range()].iter_mut().zip(raw.chunks_exact(4)) {
            *p = f32::from_le_bytes(chunk.try_into().unwrap());
            if !p.is_finite() {
                return Err(Error::format(format!("non-finite value in tensor {}", spec.name)));
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes after model", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &CnnModel<f32>) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<CnnModel<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> CnnArch {
        CnnArch {
            input_size: 8,
            in_channels: 3,
            branches: 2,
            conv_layers: 2,
            filters: 4,
            hidden: 6,
            classes: 9,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let model = CnnModel::<f32>::init(arch(), 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mdn");
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn corruption_is_detected() {
        let model = CnnModel::<f32>::init(arch(), 1).unwrap();
        let bytes = model_to_bytes(&model);
        assert!(model_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(model_from_bytes(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(model_from_bytes(&magic).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(model_from_bytes(&nan).is_err());
        let mut shape = bytes;
        // hidden units field
        shape[4 + 4 + 5 * 4..4 + 4 + 6 * 4].copy_from_slice(&7u32.to_le_bytes());
        assert!(model_from_bytes(&shape).is_err());
    }
}
