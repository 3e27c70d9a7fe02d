//! Traffic-state identification from road-user trajectories.
//!
//! Trajectories are resampled into per-frame traffic graphs (adjacency
//! weight e^(-d) for pairs closer than a threshold), rendered as images,
//! pooled into fixed-size feature sequences, and classified into
//! neutral / clumping / unclumping with from-scratch recurrent networks
//! (GRU, LSTM, plain RNN, optionally with additive attention).
//!
//! The numeric core is generic over the scalar type via [`num::Scalar`];
//! the aliases below fix the default `f64` instantiations.

pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod linalg;
pub mod neural;
pub mod num;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::Label;

/// default scalar used by the binary and tests
pub type Scalar = f64;
pub type Mat = linalg::Mat<Scalar>;
pub type RawSequence = ingest::RawSequence<Scalar>;
pub type AdjacencySequence = graph::AdjacencySequence<Scalar>;
pub type FeatureSequence = features::FeatureSequence<Scalar>;
pub type TemporalModel = neural::TemporalModel<Scalar>;
