//! Traffic-flow classification with open-set VPN rejection.
//!
//! The crate turns packet captures into fixed-length byte vectors, trains
//! from-scratch MLP and LSTM classifiers over them, and decides flow classes
//! with two threshold families (per-class scores and distance from one-hot
//! class centers), each with a two-network cascade that rejects unconfident
//! flows into the VPN class.

pub mod decision;
pub mod eval;
pub mod flow;
pub mod neural;
pub mod pipeline;
pub mod synth;
pub mod types;

pub use types::{ByteVector, InvalidLabel, Label, LabelSet, ScoreVector};
