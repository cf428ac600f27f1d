#![cfg_attr(not(test), no_std)]
//! Provenance capture and optimization for bag-semantics relational queries.

extern crate alloc;

pub mod algebra;
pub mod cbo;
pub mod executor;
pub mod instrument;
pub mod pat;
pub mod pipeline;
pub mod properties;
pub mod sqlgen;
pub mod workload;
