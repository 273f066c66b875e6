//! Depth-first branch and bound over [`PartialState`], optionally driven by
//! limited discrepancy iterations.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::{Bundle, PartialState};
use super::{Incumbent, Stage};
use crate::schedule::{evaluate_timed, Objectives, TimedSchedule};

const CHECK_EVERY: u64 = 256;

/// Setup and batch violation increase, start, machine, reversed size, tie
/// breaker; smaller keys are explored first.
type ChildKey = (u32, u32, u64, usize, usize, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

pub(crate) struct Outcome {
    pub best: Option<(TimedSchedule, Objectives)>,
    /// The whole space was searched (up to pruning).
    pub complete: bool,
}

pub(crate) struct Search<'s, 'm> {
    state: PartialState<'m>,
    stage: Stage,
    started: Instant,
    deadline: Option<Instant>,
    rng: ChaCha8Rng,
    /// Makespan cap; stage 2 only keeps schedules within it.
    cap: u64,
    /// Stage 1 stops once an incumbent reaches it.
    floor: u64,
    best: Option<(TimedSchedule, Objectives)>,
    /// Stage 2: violations of the incumbent to beat.
    to_beat: Option<(u32, u32)>,
    timed_out: bool,
    cut: bool,
    pub nodes: u64,
    on_incumbent: &'s mut dyn FnMut(&Incumbent),
    log: Vec<Incumbent>,
}

impl<'s, 'm> Search<'s, 'm> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: PartialState<'m>,
        stage: Stage,
        started: Instant,
        limit: Option<Duration>,
        seed: u64,
        cap: u64,
        to_beat: Option<(u32, u32)>,
        on_incumbent: &'s mut dyn FnMut(&Incumbent),
    ) -> Self {
        let floor = state.lower_bound();
        Search {
            state,
            stage,
            started,
            deadline: limit.map(|l| Instant::now() + l),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cap,
            floor,
            best: None,
            to_beat,
            timed_out: false,
            cut: false,
            nodes: 0,
            on_incumbent,
            log: Vec::new(),
        }
    }

    pub fn take_log(&mut self) -> Vec<Incumbent> {
        std::mem::take(&mut self.log)
    }

    /// Plain depth-first branch and bound.
    pub fn run_exact(&mut self) -> Outcome {
        self.dfs(None);
        self.outcome()
    }

    /// Limited discrepancy search: the i-th ranked child costs i, and
    /// iterations allow budgets 0, 1, 2, 4, ... until one finishes without
    /// cutting any child.
    pub fn run_discrepancy(&mut self) -> Outcome {
        let mut budget = 0u32;
        loop {
            self.cut = false;
            let flow = self.dfs(Some(budget));
            if flow == Flow::Stop || !self.cut {
                return self.outcome();
            }
            budget = if budget == 0 { 1 } else { budget.saturating_mul(2) };
        }
    }

    fn outcome(&mut self) -> Outcome {
        // stopping early without a timeout means the bound was reached
        Outcome {
            best: self.best.take(),
            complete: !self.timed_out,
        }
    }

    fn pruned(&self) -> bool {
        let lb = self.state.lower_bound();
        match self.stage {
            Stage::Makespan => self.best.as_ref().is_some_and(|(_, o)| lb >= o.makespan),
            Stage::Violations => {
                lb > self.cap
                    || self
                        .to_beat
                        .is_some_and(|tb| (self.state.setup_violations(), self.state.batch_violation_bound()) >= tb)
            }
        }
    }

    fn dfs(&mut self, budget: Option<u32>) -> Flow {
        self.nodes += 1;
        if self.nodes.is_multiple_of(CHECK_EVERY) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
            return Flow::Stop;
        }
        if self.state.is_complete() {
            return self.record();
        }
        if self.pruned() {
            return Flow::Continue;
        }
        let children = self.ordered_children();
        for (rank, child) in children.into_iter().enumerate() {
            let rank = rank as u32;
            let rest = match budget {
                Some(b) if rank > b => {
                    self.cut = true;
                    break;
                }
                Some(b) => Some(b - rank),
                None => None,
            };
            self.state.apply(child);
            let flow = self.dfs(rest);
            self.state.undo();
            if flow == Flow::Stop {
                return Flow::Stop;
            }
            if self.pruned() {
                break;
            }
        }
        Flow::Continue
    }

    fn ordered_children(&mut self) -> Vec<Bundle> {
        let candidates = self.state.candidates();
        let mut keyed: Vec<(ChildKey, Bundle)> = candidates
            .into_iter()
            .map(|b| {
                let (sv, bv) = match self.stage {
                    Stage::Makespan => (0, 0),
                    Stage::Violations => self.state.violation_delta(&b),
                };
                // lower machines first among equal starts: the append order
                // then never rules out a sibling for good
                let key = (
                    sv,
                    bv,
                    b.start,
                    b.machine,
                    usize::MAX - b.lots.len(),
                    self.rng.random::<u32>(),
                );
                (key, b)
            })
            .collect();
        keyed.sort_unstable_by_key(|(key, _)| *key);
        keyed.into_iter().map(|(_, b)| b).collect()
    }

    fn record(&mut self) -> Flow {
        let objectives = Objectives::new(
            self.state.makespan(),
            self.state.setup_violations(),
            self.state.batch_violations(),
        );
        let improves = match self.stage {
            Stage::Makespan => self.best.as_ref().is_none_or(|(_, o)| objectives.makespan < o.makespan),
            Stage::Violations => {
                objectives.makespan <= self.cap
                    && self
                        .to_beat
                        .is_none_or(|tb| (objectives.setup_violations, objectives.batch_violations) < tb)
            }
        };
        if !improves {
            return Flow::Continue;
        }
        let schedule = self.state.to_schedule();
        let (timed, checked) = evaluate_timed(&schedule, self.state.model().instance())
            .unwrap_or_else(|e| panic!("solver produced an invalid schedule: {e}"));
        assert_eq!(checked, objectives, "solver objectives disagree with evaluation");
        let inc = Incumbent {
            stage: self.stage,
            elapsed: self.started.elapsed(),
            objectives,
            schedule,
        };
        (self.on_incumbent)(&inc);
        self.log.push(inc);
        self.best = Some((timed, objectives));
        let done = match self.stage {
            Stage::Makespan => objectives.makespan <= self.floor,
            Stage::Violations => {
                self.to_beat = Some((objectives.setup_violations, objectives.batch_violations));
                objectives.setup_violations == 0 && objectives.batch_violations == 0
            }
        };
        if done {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}
