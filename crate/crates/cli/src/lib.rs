//! Library side of the `cadbench` tool: instance generation, projection
//! benchmarks, oracle verification suites and descent runs.
//!
//! Every command is a plain function over in-memory instances so the same
//! code drives the binary and the tests.

pub mod bench;
pub mod cli;
pub mod verify;

pub use bench::{
    load_instances, run_descend, run_gen, run_project, write_points, write_records, BenchRecord, DescendOptions,
    DescendSummary, GenOptions, ProjectOptions, ProjectOutcome,
};
pub use verify::{run_suite, Failure, Suite, SuiteReport, VerifyOptions};

/// Default output directory, overridable by the environment.
pub const OUT_DIR_ENV: &str = "CADBENCH_OUT_DIR";
