//! Binary model checkpoints.
//!
//! Layout (all integers `u32` little-endian, all parameters `f64` little-endian):
//!
//! ```text
//! magic          8 bytes  "FSCILCK\0"
//! version        u32      1
//! backbone_len   u32      number of backbone layers L
//! has_projection u32      0 or 1
//! class_rows     u32      classifier rows R
//! class_cols     u32      classifier row width D
//! shape table    (inputs u32, outputs u32) for each of the L backbone layers,
//!                then for the two projection layers when present
//! parameters     per layer in table order: weights (outputs x inputs, row-major)
//!                then bias (outputs); then the R classifier rows
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Backbone, Dense, ModelParams, ProjectionHead};

pub const MAGIC: &[u8; 8] = b"FSCILCK\0";
pub const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut layers: Vec<&Dense> = params.backbone.layers.iter().collect();
    if let Some(p) = &params.projection {
        layers.push(&p.hidden);
        layers.push(&p.output);
    }
    let cols = params.classifier.first().map_or(0, Vec::len);
    let mut buf = Vec::with_capacity(32 + 8 * params.parameter_count());
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION as usize);
    put_u32(&mut buf, params.backbone.layers.len());
    put_u32(&mut buf, params.projection.is_some() as usize);
    put_u32(&mut buf, params.classifier.len());
    put_u32(&mut buf, cols);
    for l in &layers {
        put_u32(&mut buf, l.inputs);
        put_u32(&mut buf, l.outputs);
    }
    for t in params.tensors() {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, detail: &str) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            location: format!("byte {}", self.pos),
            detail: detail.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.fail("unexpected end of checkpoint")),
        }
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| self.fail("size overflow"))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(r.fail("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(r.fail(&format!("unsupported version {version}")));
    }
    let n_backbone = r.u32()?;
    let has_projection = match r.u32()? {
        0 => false,
        1 => true,
        _ => return Err(r.fail("projection flag must be 0 or 1")),
    };
    let rows = r.u32()?;
    let cols = r.u32()?;
    let n_layers = n_backbone + if has_projection { 2 } else { 0 };
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        shapes.push((r.u32()?, r.u32()?));
    }
    for w in shapes.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(r.fail("layer shapes do not chain"));
        }
    }
    let head_out = shapes.last().map_or(0, |s| s.1);
    if n_layers > 0 && rows > 0 && cols != head_out {
        return Err(r.fail("classifier width differs from head output"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (inputs, outputs) in shapes {
        let weights = r.f64s(inputs * outputs)?;
        let bias = r.f64s(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    let mut classifier = Vec::with_capacity(rows);
    for _ in 0..rows {
        classifier.push(r.f64s(cols)?);
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes"));
    }
    let projection = if has_projection {
        let output = layers.pop().expect("two projection layers");
        let hidden = layers.pop().expect("two projection layers");
        Some(ProjectionHead { hidden, output })
    } else {
        None
    };
    Ok(ModelParams {
        backbone: Backbone { layers },
        projection,
        classifier,
    })
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
