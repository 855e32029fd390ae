//! Sparse modern Hopfield networks.
//!
//! Sparsemax retrieval dynamics with their dense softmax counterpart,
//! retrieval-error and capacity bounds, the attention-layer view of the update
//! rule, and a small experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod error;
pub mod harness;
pub mod hopfield;
pub mod simplex;
pub mod theory;

pub use error::{HopfieldError, Result};
pub use hopfield::{
    dense_energy, dense_step, energy, retrieve, separation_report, sparse_energy, sparse_step, step, weights, Mode,
    PatternStore, QueryState, RetrievalConfig, RetrievalTrace, SeparationReport, StopReason,
};
pub use simplex::{gini_entropy_neg, lse, psi_star, simplex_projection_oracle, softmax, sparsemax, SimplexVector};
