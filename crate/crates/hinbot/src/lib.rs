//! Bot detection on heterogeneous social graphs.
//!
//! A social network is modeled as one node set (accounts, with per-account
//! feature vectors) connected by several directed edge sets, one per relation
//! such as `follower` or `following`. The model encodes features, runs stacked
//! relation-aware transformer layers (per-relation multi-head attention over
//! in-neighbors with a gated residual), fuses the per-relation outputs with
//! semantic attention, and classifies each account as human or bot.
//!
//! The crate ships the full pipeline: a stochastic-block-model graph
//! generator, CSV graph IO, the model with hand-written backward passes, an
//! AdamW training loop, evaluation and ablation drivers, and a thin CLI.
//! Everything is deterministic for a fixed seed: same config and seed produce
//! byte-identical reports and checkpoints.

pub mod cli;
pub mod config;
pub mod fusion;
pub mod graph;
pub mod model;
pub mod nn;
pub mod rgt;
pub mod synth;

pub use nn::{Matrix, ParamTensor, Rng};
