//! Few-shot class-incremental learning on a frozen, margin-trained embedding.
//!
//! The pipeline trains a feature extractor on the base session with an
//! angular-margin cosine loss, pair-mixed auxiliary classes and two-view input
//! augmentation. After training only the backbone is kept. Every class, old or
//! new, is then represented by a unit-norm prototype built from the same
//! number of samples, and test samples go to the prototype with the largest
//! cosine similarity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod prototype;
pub mod sample;

pub use error::{Error, Result};
pub use math::Rng;
pub use sample::{Image, Payload, Sample};
