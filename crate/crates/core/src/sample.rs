//! Labeled data items.

use crate::error::{Error, Result};

/// Dense image tensor, channel-major (`data[c * h * w + y * w + x]`), values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Vector(Vec<f64>),
    Image(Image),
}

impl Payload {
    /// Flattened values as seen by the model input layer.
    pub fn values(&self) -> &[f64] {
        match self {
            Payload::Vector(v) => v,
            Payload::Image(img) => &img.data,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Payload::Vector(v) => v,
            Payload::Image(img) => &mut img.data,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Payload) -> bool {
        match (self, other) {
            (Payload::Vector(a), Payload::Vector(b)) => a.len() == b.len(),
            (Payload::Image(a), Payload::Image(b)) => {
                (a.width, a.height, a.channels) == (b.width, b.height, b.channels)
            }
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Payload::Vector(v) => format!("vector[{}]", v.len()),
            Payload::Image(i) => format!("image[{}x{}x{}]", i.width, i.height, i.channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub label: usize,
    pub payload: Payload,
}

impl Sample {
    pub fn vector(id: u64, label: usize, values: Vec<f64>) -> Self {
        Self {
            id,
            label,
            payload: Payload::Vector(values),
        }
    }
}

/// Number of distinct labels, assuming labels are `0..C`.
pub fn class_count(samples: &[Sample]) -> usize {
    samples.iter().map(|s| s.label + 1).max().unwrap_or(0)
}

/// Indices of `samples` grouped by label, each group in input order.
pub fn group_by_label(samples: &[Sample]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); class_count(samples)];
    for (i, s) in samples.iter().enumerate() {
        groups[s.label].push(i);
    }
    groups
}
