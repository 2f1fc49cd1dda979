//! Finite-volume laboratory for the disordered random conductance model:
//! lattice graphs and their quotients, Laplacian determinants, the tilted
//! conductance measures, monotone Gibbs samplers and the free/wired
//! free-energy statistics.

// `!(x > y)` is used deliberately so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aw;
pub mod error;
pub mod experiment;
pub mod laplace;
pub mod lattice;
pub mod measures;
pub mod pool;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod trees;

pub use error::{Error, Result};
