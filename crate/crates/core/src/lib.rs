//! Lifted recurrent networks.
//!
//! A single-hidden-layer ReLU recurrent network is trained by keeping every
//! hidden state as a free, non-negative variable and replacing the recursion
//! with quadratic penalties. Training then alternates exact convex solves:
//! ridge regressions for the weights, non-negative least squares (or a
//! projected-gradient solve under softmax cross-entropy) for each state, and
//! optionally a simplex-entropy prox for output states.
//!
//! The crate also carries a plain SGD/BPTT baseline with the same
//! architecture, seeded generators for the synthetic sequence tasks, and the
//! portable random stream they share.

pub mod baseline;
pub mod datasets;
pub mod matrix;
pub mod rng;
pub mod lifted;
pub mod solvers;

pub use matrix::{DenseMatrix, SeqTensor};
pub use rng::Rng;
