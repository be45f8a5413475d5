//! Context-aware knowledge graph convolutional recommender.
//!
//! - [`compute`]: tensors, reverse-mode tape, Adam.
//! - [`data`]: schemas, ingestion, splits, negative sampling, synthetic data.
//! - [`model`]: attention layers, aggregators, output heads, baselines, checkpoints.
//! - [`train`]: losses, training loop, grid search, metrics, evaluation.
//! - [`explain`]: attention extraction, clustering, explanation rendering.

pub mod compute;
pub mod data;
pub mod digest;
pub mod error;
pub mod explain;
pub mod model;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
