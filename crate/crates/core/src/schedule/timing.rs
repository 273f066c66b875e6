use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::{batch_specs, check_known_machine, EvalError, GlobalSchedule, OpRef, Slot, StructuralError};
use crate::instance::{Instance, Machine};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotPos {
    pub machine: Machine,
    pub slot: usize,
}

impl fmt::Display for SlotPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.machine, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeKind {
    /// Consecutive slots of one machine.
    Machine,
    /// Route precedence into the given operation.
    Route(OpRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyEdge {
    pub from: SlotPos,
    pub to: SlotPos,
    pub kind: EdgeKind,
}

impl fmt::Display for DependencyEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EdgeKind::Machine => write!(f, "{} -> {}", self.from, self.to),
            EdgeKind::Route(op) => write!(f, "{} -({op})-> {}", self.from, self.to),
        }
    }
}

/// Machine sequences and route precedences wait on each other in a circle,
/// so some start times are unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("circular waiting dependency: {}", .edges.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
pub struct CyclicDependency {
    /// Edges of one cycle, each ending where the next begins.
    pub edges: Vec<DependencyEdge>,
}

/// A global schedule with the earliest start time and duration of every
/// slot, indexed like `schedule.machines[m].slots[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedSchedule {
    pub schedule: GlobalSchedule,
    pub start: Vec<Vec<u64>>,
    pub duration: Vec<Vec<u64>>,
}

impl TimedSchedule {
    pub fn completion(&self, machine: usize, slot: usize) -> u64 {
        self.start[machine][slot] + self.duration[machine][slot]
    }

    /// Largest completion time; 0 for an empty schedule.
    pub fn makespan(&self) -> u64 {
        (0..self.start.len())
            .flat_map(|m| (0..self.start[m].len()).map(move |j| (m, j)))
            .map(|(m, j)| self.completion(m, j))
            .max()
            .unwrap_or(0)
    }

    /// Start time of the slot containing `op`.
    pub fn op_start(&self, op: &OpRef) -> Option<u64> {
        for (m, ms) in self.schedule.machines.iter().enumerate() {
            for (j, slot) in ms.slots.iter().enumerate() {
                if slot.ops().contains(op) {
                    return Some(self.start[m][j]);
                }
            }
        }
        None
    }

    /// The same schedule with each run of setup changes and maintenance
    /// operations moved right so that it ends exactly when the following
    /// batch starts. Runs after the last batch of a machine stay put.
    /// Batch start times and the makespan are unchanged.
    pub fn with_late_changeovers(&self) -> TimedSchedule {
        let mut out = self.clone();
        for (m, ms) in self.schedule.machines.iter().enumerate() {
            let starts = &mut out.start[m];
            for p in (0..ms.slots.len()).filter(|&p| ms.slots[p].is_production()) {
                let mut next = starts[p];
                for k in (0..p).rev() {
                    if ms.slots[k].is_production() {
                        break;
                    }
                    starts[k] = next - self.duration[m][k];
                    next = starts[k];
                }
            }
        }
        out
    }
}

/// Earliest start times by longest paths over machine-sequence and route
/// edges. Batches take the processing time of their operation regardless of
/// size, setup changes their change time, maintenance its duration.
pub fn compute_start_times(gs: &GlobalSchedule, inst: &Instance) -> Result<TimedSchedule, EvalError> {
    let mut durations: Vec<Vec<u64>> = Vec::with_capacity(gs.machines.len());
    let mut located: HashMap<&OpRef, (usize, usize)> = HashMap::new();
    let mut duplicated: Vec<&OpRef> = Vec::new();
    let mut seen_machines = HashSet::new();

    for (m, ms) in gs.machines.iter().enumerate() {
        check_known_machine(inst, &ms.machine)?;
        if !seen_machines.insert(&ms.machine) {
            return Err(StructuralError::DuplicateMachine(ms.machine.clone()).into());
        }
        let group = &ms.machine.group;
        let mut row = Vec::with_capacity(ms.slots.len());
        for (j, slot) in ms.slots.iter().enumerate() {
            let d = match slot {
                Slot::Batch(ops) => {
                    let specs = batch_specs(inst, &ms.machine, j, ops)?;
                    for op in ops {
                        if located.insert(op, (m, j)).is_some() {
                            duplicated.push(op);
                        }
                    }
                    specs[0].proc_time
                }
                Slot::SetupChange(s) => {
                    inst.setup_spec(group, s)
                        .ok_or_else(|| StructuralError::UnknownSetup {
                            machine: ms.machine.clone(),
                            setup: s.clone(),
                        })?
                        .change_time
                }
                Slot::Maint(label) => {
                    inst.maintenance(group, label)
                        .ok_or_else(|| StructuralError::UnknownMaintenance {
                            machine: ms.machine.clone(),
                            label: label.clone(),
                        })?
                        .duration
                }
            };
            row.push(d);
        }
        durations.push(row);
    }

    let mut missing: Vec<OpRef> = Vec::new();
    for lot in &inst.lots {
        let len = inst.route(&lot.product).map_or(0, |r| r.len()) as u32;
        for index in 1..=len {
            let op = OpRef::new(lot.id.clone(), index);
            if !located.contains_key(&op) {
                missing.push(op);
            }
        }
    }
    if !missing.is_empty() || !duplicated.is_empty() {
        let first = duplicated
            .first()
            .map(|op| (*op).clone())
            .unwrap_or_else(|| missing[0].clone());
        return Err(EvalError::Coverage {
            missing: missing.len(),
            duplicated: duplicated.len(),
            first,
        });
    }

    // flatten slots into graph nodes
    let mut offset = Vec::with_capacity(gs.machines.len());
    let mut total = 0;
    for ms in &gs.machines {
        offset.push(total);
        total += ms.slots.len();
    }
    let node_pos = |node: usize| -> (usize, usize) {
        let m = offset.partition_point(|&o| o <= node) - 1;
        (m, node - offset[m])
    };
    let dur = |node: usize| {
        let (m, j) = node_pos(node);
        durations[m][j]
    };

    let mut preds: Vec<Vec<(usize, Option<&OpRef>)>> = vec![Vec::new(); total];
    for (m, ms) in gs.machines.iter().enumerate() {
        for (j, slot) in ms.slots.iter().enumerate() {
            let node = offset[m] + j;
            if j > 0 {
                preds[node].push((node - 1, None));
            }
            for op in slot.ops() {
                if op.index > 1 {
                    let prev = OpRef::new(op.lot.clone(), op.index - 1);
                    let (pm, pj) = located[&prev];
                    preds[node].push((offset[pm] + pj, Some(op)));
                }
            }
        }
    }

    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut indegree = vec![0usize; total];
    for (node, ps) in preds.iter().enumerate() {
        for &(p, _) in ps {
            succs[p].push(node);
            indegree[node] += 1;
        }
    }
    let mut start = vec![0u64; total];
    let mut queue: VecDeque<usize> = (0..total).filter(|&n| indegree[n] == 0).collect();
    let mut done = 0;
    while let Some(n) = queue.pop_front() {
        done += 1;
        let finish = start[n] + dur(n);
        for &s in &succs[n] {
            start[s] = start[s].max(finish);
            indegree[s] -= 1;
            if indegree[s] == 0 {
                queue.push_back(s);
            }
        }
    }

    let slot_pos = |node: usize| {
        let (m, j) = node_pos(node);
        SlotPos {
            machine: gs.machines[m].machine.clone(),
            slot: j,
        }
    };

    if done < total {
        // every unfinished node keeps an unfinished predecessor; walk back
        // until a node repeats
        let mut steps: Vec<(usize, usize, Option<&OpRef>)> = Vec::new(); // (to, from, kind)
        let mut visited: HashMap<usize, usize> = HashMap::new();
        let mut node = (0..total).find(|&n| indegree[n] > 0).expect("unfinished node");
        while !visited.contains_key(&node) {
            visited.insert(node, steps.len());
            let &(p, kind) = preds[node]
                .iter()
                .find(|(p, _)| indegree[*p] > 0)
                .expect("unfinished predecessor");
            steps.push((node, p, kind));
            node = p;
        }
        let edges = steps[visited[&node]..]
            .iter()
            .rev()
            .map(|&(to, from, kind)| DependencyEdge {
                from: slot_pos(from),
                to: slot_pos(to),
                kind: kind.map_or(EdgeKind::Machine, |op| EdgeKind::Route(op.clone())),
            })
            .collect();
        return Err(CyclicDependency { edges }.into());
    }

    let mut timed_start = Vec::with_capacity(gs.machines.len());
    for (m, ms) in gs.machines.iter().enumerate() {
        timed_start.push((0..ms.slots.len()).map(|j| start[offset[m] + j]).collect());
    }
    Ok(TimedSchedule {
        schedule: gs.clone(),
        start: timed_start,
        duration: durations,
    })
}
