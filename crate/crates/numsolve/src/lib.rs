//! File formats, experiment harness and command-line front end for the
//! `numsolve-core` solvers.

pub mod bench;
pub mod cli;
pub mod clock;
pub mod formats;

pub use bench::{
    run_experiment, timing_sweep, utility_comparison, BenchError, BenchReport, ExperimentSpec,
    FlowSource, ReferencePolicy, TimingOptions,
};
pub use clock::StdClock;
pub use formats::{parse_flows, parse_routing_matrix, parse_topology, FormatError, KeyValues};
