//! First-order solvers for the smooth penalized network utility maximization
//! problem.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the whole numerical
//! pipeline:
//!
//! - [`topology`]: capacitated directed graphs, deterministic minimum-hop
//!   routing, flow generation and the sparse link-by-flow routing matrix.
//! - [`problem`]: the (α, ξ)-fair utility, the Softplus link penalty, the
//!   penalized objective, its gradient and the smoothness certificate.
//! - [`solvers`]: projected gradient, exponentiated gradient, Nesterov's
//!   accelerated gradient and its function/gradient restart variants.
//! - [`oracle`]: independent ground truth (finite differences, closed forms,
//!   exhaustive LP vertex enumeration, nested grid search).
//!
//! File formats, wall-clock timing, benchmarking and the command line live in
//! the `numsolve` companion crate.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod math;
pub mod oracle;
pub mod problem;
pub mod solvers;
pub mod topology;

pub use oracle::{OracleError, OracleMethod, OracleResult};
pub use problem::{ProblemError, ProblemInstance, SmoothnessCert, UtilityParams};
pub use solvers::{
    Clock, InitPoint, IterateTrace, NoClock, RestartReset, Solution, SolverConfig, SolverError,
    SolverKind, StepSize, TraceStride,
};
pub use topology::{Flow, FlowMode, Link, RoutingMatrix, Topology, TopologyError};
