//! Distributed online primal–dual optimization with constraint tracking over
//! time-varying graphs, with an offline per-step oracle for dynamic regret.
//!
//! ```no_run
//! use tvdispatch_core::{
//!     build_synthetic, run, validate_schedule, GraphPreset, InitPolicy, RunMeta, RunMode,
//!     SyntheticSpec,
//! };
//!
//! let spec = SyntheticSpec::default();
//! let problems = build_synthetic(&spec).unwrap();
//! let graph = GraphPreset::Switching3.build(spec.nodes).unwrap();
//! let schedule = validate_schedule(0.25, 0.25).unwrap();
//! let meta = RunMeta {
//!     scenario: "synthetic".into(),
//!     graph: "switching3".into(),
//!     seed: 0,
//!     kappa1: 0.25,
//!     kappa2: 0.25,
//!     mode: RunMode::Distributed,
//! };
//! let trace = run(&problems, &graph, &schedule, 0, InitPolicy::default(), spec.horizon, meta).unwrap();
//! assert!(trace.is_complete());
//! ```

mod dd;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod invariants;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod problem;
pub mod scenarios;
pub mod vecops;

pub use engine::{
    centralized_step, distributed_step, init_run, run, run_centralized, step_size, validate_schedule,
    InitPolicy, NodeState, RunFailure, RunMeta, RunMode, RunTrace, Schedule, StepRecord,
};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ResultsBundle};
pub use invariants::{check_invariants, InvariantReport, Tolerances};
pub use metrics::{constraint_violation, dynamic_regret, path_length, MetricsReport};
pub use network::{
    metropolis_weights, mixing_bound, transition_matrix, validate_sequence, Adjacency, GraphPreset,
    GraphSequence, MixingConstants, SequenceReport, WeightMatrix,
};
pub use oracle::{solve_horizon, solve_step, OracleOptions, StepOptimum};
pub use problem::{project, FeasibleSet, IsoQuadratic, NodeEval, NodeProblem, StepFunctions};
pub use scenarios::{
    build_dispatch, build_pev, build_synthetic, ingest_market_csv, synthetic_market, write_market_csv,
    DispatchScenario, MarketSeries, PevSpec, Scenario, SyntheticSpec,
};
