//! Truncated long-range oriented percolation on `Z^d x Z_+`.
//!
//! * [`lattice`]: connection families, truncation, support sequences and
//!   half-axis projections.
//! * [`sampler`]: keyed lazy edge states, cluster exploration and survival
//!   estimates.
//! * [`renorm`]: parameter derivation, seed events, the coarse-lattice
//!   exploration and its verifier.
//! * [`aniso`]: anisotropic percolation with long horizontal bonds and its
//!   induced model.
//! * [`contact`]: long-range contact process via its Poisson graphical
//!   representation and slab discretization.
//! * [`harness`]: experiment configuration, sweeps, verification suite and
//!   report writers.

pub mod aniso;
pub mod contact;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod renorm;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
