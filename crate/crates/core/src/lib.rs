//! Few-shot classification engine for edge devices.
//!
//! The pipeline is: a MobileViT-XXS feature extractor ([`backbone`]) maps
//! images to embeddings; [`fewshot`] centers and normalizes them and
//! classifies queries against class prototypes. [`distill`] trains small
//! students to align with teacher embeddings, [`energy`] turns power traces
//! and latencies into energy-per-inference figures, and [`io`] stores weights
//! and embedding sets on disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backbone;
pub mod distill;
pub mod energy;
pub mod fewshot;
pub mod io;
pub mod seed;
pub mod synth;
pub mod tensor;

pub use tensor::{Tensor, TensorError};
