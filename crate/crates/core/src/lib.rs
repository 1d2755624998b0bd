//! Deterministic causal-analysis engine: ground-truth simulation, a portfolio
//! of discovery algorithms, diagnostics-driven algorithm selection, bootstrap
//! refinement and a benchmarking harness.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the matrix notation they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algorithms;
pub mod bench;
pub mod cancel;
pub mod ci;
pub mod data;
pub mod diagnostics;
pub mod discovery;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod parallel;
pub mod pipeline;
pub mod postprocess;
pub mod report;
pub mod rng;
pub mod selector;
pub mod sim;
pub mod stats;

pub use algorithms::{run_algorithm, AlgoOutput, AlgorithmId, ParamMap};
pub use cancel::CancelToken;
pub use data::Dataset;
pub use error::{Error, Result};
pub use parallel::Parallelism;
