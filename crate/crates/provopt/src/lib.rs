//! Text formats, data loading and command-line plumbing around `provopt-core`.

pub mod bench;
pub mod cli;
pub mod data;
pub mod plan;
pub mod sexpr;
pub mod update;
