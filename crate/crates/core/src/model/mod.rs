//! The attention network, its output heads, ablations and the one-hot
//! FM/NFM baselines.
//!
//! Forward passes are written once against [`Backend`] and run either on a
//! gradient [`Tape`](crate::compute::Tape) for training or on the plain
//! [`Eval`] executor for inference.

pub mod backend;
pub mod checkpoint;
pub mod config;
pub mod heads;
pub mod layers;
pub mod network;

pub use backend::{Backend, Eval};
pub use checkpoint::Checkpoint;
pub use config::{Ablation, Aggregator, Head, ModelConfig, ModelKind, FM_FACTORS};
pub use network::{AttentionProfile, Model, UserState};
