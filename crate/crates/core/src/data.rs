//! Dataset files and the synthetic Gaussian-cluster generator.
//!
//! Vector datasets are headerless CSV, one sample per row: `label,f1,...,fd`.
//! Blank lines and lines starting with `#` are skipped; sample ids are the
//! 0-based data row index.
//!
//! Image datasets are a manifest CSV of `id,label,path` rows (an optional
//! header of exactly that text is allowed; paths are relative
//! to the manifest) pointing at raw tensor files:
//!
//! ```text
//! magic     4 bytes "FSIM"
//! width     u32 LE
//! height    u32 LE
//! channels  u32 LE
//! samples   width * height * channels bytes, channel-major, 0..=255
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Rng;
use crate::sample::{Image, Payload, Sample};

pub const IMAGE_MAGIC: &[u8; 4] = b"FSIM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Csv,
    Images,
}

fn parse_err(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        detail: detail.into(),
    }
}

fn check_labels(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels: BTreeSet<usize> = samples.iter().map(|s| s.label).collect();
    if let Some(missing) = (0..labels.len()).find(|l| !labels.contains(l)) {
        return Err(Error::NonContiguousLabels { missing });
    }
    Ok(())
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let label = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(path, n + 1, "label is not a nonnegative integer"))?;
        let values = fields
            .enumerate()
            .map(|(k, f)| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, n + 1, format!("field {} is not a finite number", k + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(parse_err(path, n + 1, "row has no features"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_err(path, n + 1, format!("expected {d} features, got {}", values.len())))
            }
            _ => {}
        }
        samples.push(Sample::vector(samples.len() as u64, label, values));
    }
    check_labels(&samples)?;
    Ok(samples)
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data.len());
    out.extend_from_slice(IMAGE_MAGIC);
    for v in [img.width, img.height, img.channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend(img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Image> {
    let fail = |offset: usize, detail: &str| Error::Parse {
        path: path.to_path_buf(),
        location: format!("byte {offset}"),
        detail: detail.to_string(),
    };
    if bytes.len() < 16 {
        return Err(fail(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != IMAGE_MAGIC {
        return Err(fail(0, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (w, h, c) = (word(0), word(1), word(2));
    let n = w * h * c;
    if n == 0 {
        return Err(fail(4, "zero-sized image"));
    }
    let body = &bytes[16..];
    if body.len() != n {
        return Err(fail(
            bytes.len(),
            &format!("expected {n} sample bytes, found {}", body.len()),
        ));
    }
    Image::new(w, h, c, body.iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn load_image_manifest(path: &Path) -> Result<Vec<Sample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::new();
    let mut shape = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (samples.is_empty() && line == "id,label,path") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, label, rel] = parts.as_slice() else {
            return Err(parse_err(path, n + 1, "expected id,label,path"));
        };
        let id = id.parse::<u64>().map_err(|_| parse_err(path, n + 1, "bad id"))?;
        let label = label.parse::<usize>().map_err(|_| parse_err(path, n + 1, "bad label"))?;
        let file = root.join(rel);
        let bytes = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let img = decode_image(&bytes, &file)?;
        let s = (img.width, img.height, img.channels);
        match shape {
            None => shape = Some(s),
            Some(prev) if prev != s => {
                return Err(parse_err(path, n + 1, format!("{} has a different shape", file.display())))
            }
            _ => {}
        }
        samples.push(Sample {
            id,
            label,
            payload: Payload::Image(img),
        });
    }
    check_labels(&samples)?;
    Ok(samples)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<Sample>> {
    match format {
        DatasetFormat::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, path)
        }
        DatasetFormat::Images => load_image_manifest(path),
    }
}

/// Isotropic Gaussian clusters around standard-normal class centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Standard deviation of every cluster.
    pub spread: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::InvalidConfig("synth needs positive classes, dim and per_class".into()));
        }
        if !(self.spread >= 0.0) || !self.spread.is_finite() {
            return Err(Error::InvalidConfig(format!("synth spread {} must be >= 0", self.spread)));
        }
        Ok(())
    }
}

/// Samples ordered class-major; ids follow row order.
pub fn synth_blobs(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let mut centers_rng = root.fork(0);
    let centers: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| (0..cfg.dim).map(|_| centers_rng.normal()).collect())
        .collect();
    let mut noise = root.fork(1);
    let mut out = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let v = center
                .iter()
                .map(|m| if cfg.spread > 0.0 { m + cfg.spread * noise.normal() } else { *m })
                .collect();
            out.push(Sample::vector(out.len() as u64, c, v));
        }
    }
    Ok(out)
}

pub fn to_csv(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        let _ = write!(out, "{}", s.label);
        for v in s.payload.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_synth(cfg: &SynthConfig, path: &Path) -> Result<PathBuf> {
    let samples = synth_blobs(cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_csv(&samples)).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}
