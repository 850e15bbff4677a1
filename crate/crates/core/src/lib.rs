//! Graph-based frugal forward-backward splitting with minimal lifting.
//!
//! The crate solves monotone inclusions
//!
//! ```text
//! find x such that 0 in A_1(x) + ... + A_n(x) + B_1(x) + ... + B_{n-1}(x)
//! ```
//!
//! with `A_i` maximally monotone (used through resolvents) and `B_j`
//! `beta`-cocoercive (evaluated forward). A triple of directed graphs decides how
//! resolvent outputs, governing variables and forward evaluations are wired.
//!
//! * [`graph`]: algorithmic graphs, structure matrices, onto decompositions,
//!   graph triples and the named presets.
//! * [`operators`]: resolvent and forward operator traits and implementations.
//! * [`solver`]: the generic iteration, parameter checks and reduction checks.
//! * [`complete_fb`]: the rational-coefficient complete-graph iteration.
//! * [`oracle`]: the lifted product-space operators used as an independent
//!   reference.
//! * [`bench`]: the random ball-constrained benchmark and its tables.
//! * [`io`]: problem and triple files.
//! * [`verify`]: the self-check suite behind `graphfb verify`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod complete_fb;
pub mod error;
pub mod graph;
pub mod io;
pub mod operators;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{AlgorithmicGraph, GraphTriple, Preset};
pub use operators::{ProblemInstance, Vector};
pub use solver::{run, step, validate_config, RunResult, SolverConfig, SolverState, StopRule};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub struct Graphs;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/solver.md")]
    pub struct Solver;
    #[doc = include_str!("../../../book/src/complete.md")]
    pub struct Complete;
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub struct Oracle;
    #[doc = include_str!("../../../book/src/benchmark.md")]
    pub struct Benchmark;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
