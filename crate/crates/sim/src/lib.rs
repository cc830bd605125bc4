//! Deterministic single-CPU interrupt simulator for the `irqueue-core`
//! queue.
//!
//! A [`Scenario`] lists enqueue, dequeue and peek operations, each bound to
//! an interrupt level. A [`Schedule`] decides, at every step boundary,
//! whether the running frame advances by one shared-memory access or a
//! higher-level operation starts and preempts it. [`run_schedule`] executes
//! one schedule, [`explore()`] enumerates all of them and [`fuzz()`] samples
//! them from a seed. Every run is checked against the queue's safety and
//! delivery conditions (see [`Invariant`]).
//!
//! ```
//! use irqueue_sim::{run_schedule, Scenario, Schedule};
//!
//! let scenario = Scenario::new(3)
//!     .enqueue(0, &["A"])
//!     .enqueue(0, &["B"])
//!     .enqueue(0, &["C"]);
//! let trace = run_schedule(&scenario, &Schedule::new()).unwrap();
//! assert_eq!(trace.delivered(), ["A", "B", "C"]);
//! assert!(trace.failures.is_empty());
//! ```

pub mod explore;
pub mod fuzz;
pub mod reorder;
pub mod run;
pub mod scenario;
pub mod schedule;
pub mod suite;
pub mod trace;
pub mod world;

pub use explore::{explore, explore_with, ExplorationReport, ExploreConfig, FoundFailure, RunTally};
pub use fuzz::{fuzz, fuzz_schedule, FuzzConfig, FuzzReport};
pub use reorder::{Basis, Placement, ReorderReport, ReorderSummary};
pub use run::{run_schedule, run_schedule_with, RunError};
pub use scenario::{OpSpec, OpSpecKind, Plan, QueueSpec, Scenario, ScenarioError, SENTINEL};
pub use schedule::{Choice, ParseScheduleError, Schedule};
pub use trace::{check_trace, read_trace, CheckError, CheckReport, Trace, TraceLine, UndrainedError};
pub use world::{
    DrainError, Event, Failure, FrameRecord, Halt, Invariant, Role, ScheduleError, World,
    DEFAULT_MAX_STEPS,
};
