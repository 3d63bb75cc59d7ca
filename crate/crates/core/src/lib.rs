//! Variable-order Markov chain toolkit: context-tree sources, Bayesian
//! context-tree weighting, path blending, PPM, an exact simulator of a
//! hard-attention transformer that performs CTW in-context, arithmetic
//! coding, and an experiment harness.

pub mod bench;
pub mod coder;
pub mod ctw;
pub mod error;
pub mod logmath;
pub mod model;
pub mod pathblend;
pub mod ppm;
pub mod predictor;
pub mod stats;
pub mod syntf;

pub use error::{Result, VomcError};
