//! Language-aware multi-teacher knowledge distillation.
//!
//! Small feed-forward teachers, one per language, are trained on their own
//! language. A student (mono- or multilingual) then learns from the labels
//! and from a per-sample blend of the teachers' smoothed output
//! distributions, where each teacher's share comes from the cosine
//! similarity between its logits and the student's.

pub mod data;
pub mod distill;
mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
