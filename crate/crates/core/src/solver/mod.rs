//! Two-stage anytime branch and bound: minimize the makespan, then, with the
//! makespan capped at the best one found, minimize setup violations and then
//! batch violations.
//!
//! The search appends one bundle (maintenances, derived setup change,
//! batch) at a time; see [`PartialState`]. Both search modes are complete
//! when given unlimited time.

mod model;
mod search;
mod state;

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use model::DecisionModel;
pub use state::{Bundle, PartialState};

use crate::instance::Instance;
use crate::prealloc::{build_prealloc, AllocConfig};
use crate::schedule::{GlobalSchedule, Objectives, TimedSchedule};
use search::Search;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("no feasible schedule exists")]
    NoFeasibleSchedule,
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Depth-first branch and bound in heuristic child order.
    ExactBnb,
    /// Greedy dispatch dive first, then limited discrepancy iterations with
    /// growing budgets until the search is exhaustive.
    #[default]
    GreedySeedThenBnb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// `None`: unlimited.
    pub stage1_limit: Option<Duration>,
    pub stage2_limit: Option<Duration>,
    pub prealloc: AllocConfig,
    pub search: SearchMode,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            stage1_limit: Some(Duration::from_secs(450)),
            stage2_limit: Some(Duration::from_secs(150)),
            prealloc: AllocConfig::flexible(),
            search: SearchMode::default(),
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    /// Exact search without time limits.
    pub fn exact() -> Self {
        SolverConfig {
            stage1_limit: None,
            stage2_limit: None,
            search: SearchMode::ExactBnb,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        for (name, limit) in [("stage1_limit", self.stage1_limit), ("stage2_limit", self.stage2_limit)] {
            if limit == Some(Duration::ZERO) {
                return Err(SolveError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Makespan,
    Violations,
}

/// A new best schedule, found `elapsed` after the solve started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incumbent {
    pub stage: Stage,
    pub elapsed: Duration,
    pub objectives: Objectives,
    pub schedule: GlobalSchedule,
}

impl fmt::Display for Incumbent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.elapsed.as_millis(),
            self.objectives.makespan,
            self.objectives.setup_violations,
            self.objectives.batch_violations
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best: Option<TimedSchedule>,
    pub objectives: Option<Objectives>,
    pub stage1_optimal: bool,
    pub stage2_optimal: bool,
    pub stage1_time: Duration,
    pub stage2_time: Duration,
    pub log: Vec<Incumbent>,
    /// Search nodes visited over both stages.
    pub nodes: u64,
}

/// Lower bound on the makespan of every schedule respecting `alloc`.
pub fn lower_bound(inst: &Instance, alloc: &AllocConfig) -> Result<u64, SolveError> {
    let map = build_prealloc(inst, alloc);
    let model = DecisionModel::new(inst, &map)?;
    Ok(PartialState::new(&model).lower_bound())
}

pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_with_progress(inst, cfg, &mut |_| {})
}

/// Like [`solve`], reporting every incumbent as soon as it is found.
pub fn solve_with_progress(
    inst: &Instance,
    cfg: &SolverConfig,
    progress: &mut dyn FnMut(&Incumbent),
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let map = build_prealloc(inst, &cfg.prealloc);
    let model = DecisionModel::new(inst, &map)?;
    let started = Instant::now();

    let mut s1 = Search::new(
        PartialState::new(&model),
        Stage::Makespan,
        started,
        cfg.stage1_limit,
        cfg.rng_seed,
        u64::MAX,
        None,
        progress,
    );
    let out1 = run(&mut s1, cfg.search);
    let mut log = s1.take_log();
    let mut nodes = s1.nodes;
    let stage1_time = started.elapsed();

    let Some((timed, objectives)) = out1.best else {
        if out1.complete {
            return Err(SolveError::NoFeasibleSchedule);
        }
        return Ok(SolveResult {
            best: None,
            objectives: None,
            stage1_optimal: false,
            stage2_optimal: false,
            stage1_time,
            stage2_time: Duration::ZERO,
            log,
            nodes,
        });
    };

    let mut result = SolveResult {
        best: Some(timed),
        objectives: Some(objectives),
        stage1_optimal: out1.complete,
        stage2_optimal: true,
        stage1_time,
        stage2_time: Duration::ZERO,
        log: Vec::new(),
        nodes,
    };
    if objectives.setup_violations > 0 || objectives.batch_violations > 0 {
        let stage2_started = Instant::now();
        let mut s2 = Search::new(
            PartialState::new(&model),
            Stage::Violations,
            started,
            cfg.stage2_limit,
            cfg.rng_seed.wrapping_add(1),
            objectives.makespan,
            Some((objectives.setup_violations, objectives.batch_violations)),
            progress,
        );
        let out2 = run(&mut s2, cfg.search);
        log.extend(s2.take_log());
        nodes += s2.nodes;
        if let Some((timed, obj)) = out2.best {
            result.best = Some(timed);
            result.objectives = Some(obj);
        }
        result.stage2_optimal = out2.complete;
        result.stage2_time = stage2_started.elapsed();
    }
    result.log = log;
    result.nodes = nodes;
    Ok(result)
}

/// Stage 2 on its own: minimizes (setup violations, batch violations) over
/// schedules with makespan at most `fixed_makespan`, within
/// `cfg.stage2_limit`. The stage-1 fields of the result are left empty.
pub fn minimize_violations(
    inst: &Instance,
    fixed_makespan: u64,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let map = build_prealloc(inst, &cfg.prealloc);
    let model = DecisionModel::new(inst, &map)?;
    let started = Instant::now();
    let mut sink = |_: &Incumbent| {};
    let mut s = Search::new(
        PartialState::new(&model),
        Stage::Violations,
        started,
        cfg.stage2_limit,
        cfg.rng_seed.wrapping_add(1),
        fixed_makespan,
        None,
        &mut sink,
    );
    let out = run(&mut s, cfg.search);
    if out.best.is_none() && out.complete {
        return Err(SolveError::NoFeasibleSchedule);
    }
    let (best, objectives) = match out.best {
        Some((t, o)) => (Some(t), Some(o)),
        None => (None, None),
    };
    Ok(SolveResult {
        best,
        objectives,
        stage1_optimal: false,
        stage2_optimal: out.complete,
        stage1_time: Duration::ZERO,
        stage2_time: started.elapsed(),
        log: s.take_log(),
        nodes: s.nodes,
    })
}

fn run(search: &mut Search<'_, '_>, mode: SearchMode) -> search::Outcome {
    match mode {
        SearchMode::ExactBnb => search.run_exact(),
        SearchMode::GreedySeedThenBnb => search.run_discrepancy(),
    }
}
