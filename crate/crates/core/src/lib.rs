//! Scheduling toolkit for semiconductor fabs: re-entrant routes, batching
//! machines, sequence-dependent setups and periodic maintenance.
//!
//! * [`instance`] – problem description, fact-format parser, generator.
//! * [`schedule`] – machine schedules, feasibility, start times, objectives.
//! * [`prealloc`] – static restriction of assignable machines.
//! * [`solver`] – two-stage branch and bound (makespan, then violations).
//! * [`oracle`] – exhaustive enumeration for micro-instances.
//! * [`bench`] – preallocation strategy matrix runner.
//! * [`render`] – Gantt charts as text or SVG.

pub mod bench;
pub mod fixtures;
pub mod instance;
pub mod oracle;
pub mod prealloc;
pub mod render;
pub mod schedule;
pub mod solver;

pub use instance::{parse_facts, serialize_facts, Instance};
pub use schedule::{evaluate, GlobalSchedule, Objectives, TimedSchedule};
pub use solver::{solve, SolveResult, SolverConfig};
