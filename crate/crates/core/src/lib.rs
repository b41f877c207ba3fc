//! Deterministic federated-learning simulation engine for imbalanced tabular
//! binary classification.
//!
//! The crate provides the building blocks of a desk-scale FL benchmark:
//! from-scratch MLP training primitives ([`nn`]), dataset ingestion and
//! resampling ([`data`]), client partitioning schemes ([`partition`]), the
//! server aggregation strategies and run orchestration ([`fed`]), and
//! cost-sensitive evaluation ([`metrics`]).
//!
//! Everything is a pure function of its inputs plus an explicit seed: two runs
//! with the same configuration produce byte-identical results regardless of
//! worker parallelism.

pub mod data;
pub mod error;
pub mod fed;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod partition;
pub mod rng;

pub use error::{Error, Result};
