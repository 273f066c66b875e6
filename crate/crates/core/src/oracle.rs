//! Exhaustive enumeration of feasible global schedules for micro-instances.
//!
//! Enumerates every batch partition of every (product, route index), every
//! machine of the tool group for every batch, every order of the batches on
//! each machine and every pattern of maintenance insertions (at most one of
//! each label in front of a batch). Setup changes are inserted exactly where
//! a batch needs a setup that is not installed. Prefixes are pruned with
//! [`check_machine`]; a combination of machine schedules is kept when its
//! start times are finite.
//!
//! The enumeration is deterministic: partitions in restricted-growth order,
//! machines in declaration order, batches by ascending id, maintenance
//! subsets by ascending bit pattern.
//!
//! Maintenance after the last batch of a machine is never enumerated: no
//! constraint can require it and it only delays completion.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::instance::{Instance, Machine, MaintLabel, SetupId, SetupReq};
use crate::schedule::{
    check_machine, count_setup_violations, evaluate, EvalError, GlobalSchedule, MachineSchedule, Objectives, OpRef,
    Slot,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_lots: usize,
    pub max_ops_per_lot: usize,
    pub max_machines_per_group: usize,
    pub max_enumerated_states: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_lots: 3,
            max_ops_per_lot: 4,
            max_machines_per_group: 2,
            max_enumerated_states: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for the oracle: {what} = {value} exceeds {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("state budget of {0} exhausted; enumeration incomplete")]
    LimitExceeded(u64),
    #[error("no feasible schedule exists")]
    NoFeasibleSchedule,
    #[error("enumerated schedule failed evaluation: {0}")]
    Evaluation(EvalError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOptimum {
    pub objectives: Objectives,
    pub schedule: GlobalSchedule,
    /// Feasible schedules enumerated.
    pub schedules: u64,
    /// Search states visited, including pruned ones.
    pub states: u64,
}

#[derive(Debug)]
struct Batch {
    ops: Vec<OpRef>,
    group: usize,
    setup: SetupReq,
    below_min: bool,
}

/// One feasible slot sequence of a machine.
#[derive(Debug)]
struct MachineSeq {
    slots: Vec<Slot>,
    durations: Vec<u64>,
    /// Slot position of each batch id placed on the machine.
    batch_slot: Vec<(usize, usize)>,
    setup_violations: u32,
}

struct Enumerator<'a> {
    inst: &'a Instance,
    limits: OracleLimits,
    states: u64,
    machines: Vec<&'a Machine>,
    group_machines: Vec<Vec<usize>>,
    /// Maintenance labels per group, by decreasing duration then label.
    group_maints: Vec<Vec<(MaintLabel, u64)>>,
    memo: HashMap<(usize, u64), Rc<Vec<MachineSeq>>>,
    /// Position of every operation in `route_index`, for cycle pruning.
    lot_pos: HashMap<OpRef, (usize, u32)>,
    /// Batches holding the route predecessors of each batch's operations.
    batch_preds: Vec<Vec<usize>>,
    scratch: Scratch,
}

impl<'a> Enumerator<'a> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.states += 1;
        if self.states > self.limits.max_enumerated_states {
            Err(OracleError::LimitExceeded(self.limits.max_enumerated_states))
        } else {
            Ok(())
        }
    }

    /// All feasible sequences of `mask`'s batches on machine `m`.
    fn sequences(&mut self, m: usize, mask: u64, batches: &[Batch]) -> Result<Rc<Vec<MachineSeq>>, OracleError> {
        if let Some(seqs) = self.memo.get(&(m, mask)) {
            return Ok(seqs.clone());
        }
        let mut out = Vec::new();
        let mut ms = MachineSchedule::new(self.machines[m].clone(), Vec::new());
        let mut placed = Vec::new();
        self.extend(m, mask, batches, &mut ms, &mut placed, &mut out)?;
        let rc = Rc::new(out);
        self.memo.insert((m, mask), rc.clone());
        Ok(rc)
    }

    fn extend(
        &mut self,
        m: usize,
        remaining: u64,
        batches: &[Batch],
        ms: &mut MachineSchedule,
        placed: &mut Vec<(usize, usize)>,
        out: &mut Vec<MachineSeq>,
    ) -> Result<(), OracleError> {
        self.tick()?;
        if remaining == 0 {
            let durations = ms.slots.iter().map(|s| self.duration(m, s)).collect();
            let single = GlobalSchedule {
                machines: vec![ms.clone()],
            };
            out.push(MachineSeq {
                slots: ms.slots.clone(),
                durations,
                batch_slot: placed.clone(),
                setup_violations: count_setup_violations(&single, self.inst),
            });
            return Ok(());
        }
        let group_idx = batches[remaining.trailing_zeros() as usize].group;
        let maints = self.group_maints[group_idx].clone();
        for b in 0..batches.len() {
            if remaining & (1 << b) == 0 || self.must_wait(b, remaining, batches) {
                continue;
            }
            for subset in 0u32..(1 << maints.len()) {
                let base = ms.slots.len();
                for (k, (label, _)) in maints.iter().enumerate() {
                    if subset & (1 << k) != 0 {
                        ms.slots.push(Slot::Maint(label.clone()));
                    }
                }
                if let SetupReq::Setup(req) = &batches[b].setup {
                    if installed(ms) != Some(req) {
                        ms.slots.push(Slot::SetupChange(req.clone()));
                    }
                }
                ms.slots.push(Slot::Batch(batches[b].ops.clone()));
                let feasible = check_machine(ms, self.inst)
                    .map_err(|e| OracleError::Evaluation(e.into()))?
                    .is_feasible();
                if feasible {
                    placed.push((b, ms.slots.len() - 1));
                    self.extend(m, remaining & !(1 << b), batches, ms, placed, out)?;
                    placed.pop();
                } else {
                    self.tick()?;
                }
                ms.slots.truncate(base);
            }
        }
        Ok(())
    }

    /// Placing `b` before a batch holding an earlier operation of one of its
    /// lots on the same machine closes a cycle.
    fn must_wait(&self, b: usize, remaining: u64, batches: &[Batch]) -> bool {
        batches[b].ops.iter().any(|op| {
            let (lot, index) = self.lot_pos[op];
            (0..batches.len()).any(|o| {
                o != b
                    && remaining & (1 << o) != 0
                    && batches[o].ops.iter().any(|p| {
                        let (l2, i2) = self.lot_pos[p];
                        l2 == lot && i2 < index
                    })
            })
        })
    }

    fn duration(&self, m: usize, slot: &Slot) -> u64 {
        let group = &self.machines[m].group;
        match slot {
            Slot::Batch(ops) => self.inst.lot_op(&ops[0].lot, ops[0].index).map_or(0, |s| s.proc_time),
            Slot::SetupChange(s) => self.inst.setup_spec(group, s).map_or(0, |s| s.change_time),
            Slot::Maint(l) => self.inst.maintenance(group, l).map_or(0, |s| s.duration),
        }
    }
}

fn installed(ms: &MachineSchedule) -> Option<&SetupId> {
    ms.slots.iter().rev().find_map(|s| match s {
        Slot::SetupChange(x) => Some(x),
        _ => None,
    })
}

/// Feasible batch partitions of `lots` with blocks of at most `max` lots, in
/// restricted-growth order.
fn partitions(lots: &[OpRef], max: usize) -> Vec<Vec<Vec<OpRef>>> {
    fn rec(i: usize, lots: &[OpRef], max: usize, blocks: &mut Vec<Vec<OpRef>>, out: &mut Vec<Vec<Vec<OpRef>>>) {
        if i == lots.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            if blocks[b].len() < max {
                blocks[b].push(lots[i].clone());
                rec(i + 1, lots, max, blocks, out);
                blocks[b].pop();
            }
        }
        blocks.push(vec![lots[i].clone()]);
        rec(i + 1, lots, max, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, lots, max.max(1), &mut Vec::new(), &mut out);
    out
}

fn check_limits(inst: &Instance, limits: &OracleLimits) -> Result<(), OracleError> {
    let too_large = |what, value: usize, limit: usize| {
        if value > limit {
            Err(OracleError::TooLarge { what, value, limit })
        } else {
            Ok(())
        }
    };
    too_large("lots", inst.lots.len(), limits.max_lots)?;
    for route in inst.routes.values() {
        too_large("operations per lot", route.len(), limits.max_ops_per_lot)?;
    }
    for ms in inst.machines.values() {
        too_large("machines per group", ms.len(), limits.max_machines_per_group)?;
    }
    // batch masks are 64-bit
    too_large("operations", inst.operation_count(), 64)
}

/// A feasible combination: one sequence per machine, with the objectives of
/// a local longest-path computation.
type Visit<'v> = dyn FnMut(&[&MachineSeq], &[&'v Machine], Objectives) -> bool + 'v;

/// Returns (feasible schedules, states visited).
fn run<'a>(inst: &'a Instance, limits: &OracleLimits, visit: &mut Visit<'a>) -> Result<(u64, u64), OracleError> {
    check_limits(inst, limits)?;
    let machines: Vec<&Machine> = inst.all_machines().collect();
    let groups: Vec<_> = inst.machines.keys().cloned().collect();
    let group_machines: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| (0..machines.len()).filter(|&m| &machines[m].group == g).collect())
        .collect();
    let group_maints = groups
        .iter()
        .map(|g| {
            let mut v: Vec<(MaintLabel, u64)> = inst
                .maintenances(g)
                .iter()
                .map(|m| (m.label.clone(), m.duration))
                .collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            v
        })
        .collect();
    let mut lot_pos = HashMap::new();
    // (product, index) → operations, lots in instance order
    let mut keys: Vec<(usize, Vec<OpRef>)> = Vec::new();
    for (p, route) in inst.routes.values().enumerate() {
        for op in &route.steps {
            let ops: Vec<OpRef> = inst
                .lots
                .iter()
                .filter(|l| l.product == route.product)
                .map(|l| OpRef::new(l.id.clone(), op.index))
                .collect();
            if !ops.is_empty() {
                keys.push((p, ops));
            }
        }
    }
    for (n, lot) in inst.lots.iter().enumerate() {
        if let Some(route) = inst.route(&lot.product) {
            for op in &route.steps {
                lot_pos.insert(OpRef::new(lot.id.clone(), op.index), (n, op.index));
            }
        }
    }
    let mut e = Enumerator {
        inst,
        limits: *limits,
        states: 0,
        machines: machines.clone(),
        group_machines,
        group_maints,
        memo: HashMap::new(),
        lot_pos,
        batch_preds: Vec::new(),
        scratch: Scratch::default(),
    };

    let key_partitions: Vec<Vec<Vec<Vec<OpRef>>>> = keys
        .iter()
        .map(|(_, ops)| {
            let spec = inst.lot_op(&ops[0].lot, ops[0].index).expect("route operation");
            partitions(ops, spec.max_batch as usize)
        })
        .collect();

    let mut count = 0u64;
    let mut choice = vec![0usize; keys.len()];
    loop {
        // build the batch list of this partition choice
        let mut batches = Vec::new();
        for (k, parts) in key_partitions.iter().enumerate() {
            for block in &parts[choice[k]] {
                let spec = inst.lot_op(&block[0].lot, block[0].index).expect("route operation");
                let mut ops = block.clone();
                ops.sort();
                batches.push(Batch {
                    ops,
                    group: groups.iter().position(|g| g == &spec.group).expect("declared group"),
                    setup: spec.setup.clone(),
                    below_min: block.len() < spec.min_batch as usize,
                });
            }
        }
        // batch ids are only meaningful within one partition choice
        e.memo.clear();
        let op_batch: HashMap<&OpRef, usize> = batches
            .iter()
            .enumerate()
            .flat_map(|(b, batch)| batch.ops.iter().map(move |op| (op, b)))
            .collect();
        e.batch_preds = batches
            .iter()
            .map(|batch| {
                let mut preds: Vec<usize> = batch
                    .ops
                    .iter()
                    .filter(|op| op.index > 1)
                    .map(|op| op_batch[&OpRef::new(op.lot.clone(), op.index - 1)])
                    .collect();
                preds.sort_unstable();
                preds.dedup();
                preds
            })
            .collect();
        let mut assign = vec![0usize; batches.len()];
        if !assign_rec(&mut e, 0, &batches, &mut assign, &mut count, visit)? {
            return Ok((count, e.states));
        }

        // next partition choice, odometer style
        let mut k = keys.len();
        loop {
            if k == 0 {
                return Ok((count, e.states));
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < key_partitions[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Returns false when the visitor asked to stop.
fn assign_rec<'a>(
    e: &mut Enumerator<'a>,
    b: usize,
    batches: &[Batch],
    assign: &mut Vec<usize>,
    count: &mut u64,
    visit: &mut Visit<'a>,
) -> Result<bool, OracleError> {
    if b < batches.len() {
        for &m in &e.group_machines[batches[b].group].clone() {
            assign[b] = m;
            if !assign_rec(e, b + 1, batches, assign, count, visit)? {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    e.tick()?;
    let n = e.machines.len();
    let mut per_machine = Vec::with_capacity(n);
    for m in 0..n {
        let mask = (0..batches.len())
            .filter(|&b| assign[b] == m)
            .fold(0u64, |acc, b| acc | (1 << b));
        let seqs = e.sequences(m, mask, batches)?;
        if seqs.is_empty() {
            return Ok(true);
        }
        per_machine.push(seqs);
    }
    let batch_violations = batches.iter().filter(|b| b.below_min).count() as u32;
    let mut pick = vec![0usize; n];
    loop {
        e.tick()?;
        let chosen: Vec<&MachineSeq> = (0..n).map(|m| &per_machine[m][pick[m]]).collect();
        if let Some(makespan) = longest_path(&chosen, &e.batch_preds, &mut e.scratch) {
            let obj = Objectives {
                makespan,
                setup_violations: chosen.iter().map(|s| s.setup_violations).sum(),
                batch_violations,
            };
            *count += 1;
            if !visit(&chosen, &e.machines, obj) {
                return Ok(false);
            }
        }
        let mut m = n;
        loop {
            if m == 0 {
                return Ok(true);
            }
            m -= 1;
            pick[m] += 1;
            if pick[m] < per_machine[m].len() {
                break;
            }
            pick[m] = 0;
        }
    }
}

/// Makespan by longest paths over machine and route edges; `None` on a
/// cycle.
fn longest_path(chosen: &[&MachineSeq], batch_preds: &[Vec<usize>], scratch: &mut Scratch) -> Option<u64> {
    scratch.reset(chosen, batch_preds.len());
    let mut makespan = 0;
    for node in 0..scratch.finish.len() {
        makespan = makespan.max(finish(node, chosen, batch_preds, scratch)?);
    }
    Some(makespan)
}

#[derive(Default)]
struct Scratch {
    /// (machine, slot) of every node.
    node_pos: Vec<(usize, usize)>,
    offset: Vec<usize>,
    batch_node: Vec<usize>,
    node_batch: Vec<usize>,
    finish: Vec<u64>,
    /// 0 unvisited, 1 on the stack, 2 done.
    state: Vec<u8>,
}

impl Scratch {
    fn reset(&mut self, chosen: &[&MachineSeq], n_batches: usize) {
        self.node_pos.clear();
        self.offset.clear();
        self.batch_node.clear();
        self.batch_node.resize(n_batches, 0);
        for (m, s) in chosen.iter().enumerate() {
            self.offset.push(self.node_pos.len());
            self.node_pos.extend((0..s.slots.len()).map(|j| (m, j)));
        }
        let total = self.node_pos.len();
        self.node_batch.clear();
        self.node_batch.resize(total, usize::MAX);
        for (m, s) in chosen.iter().enumerate() {
            for &(b, j) in &s.batch_slot {
                self.batch_node[b] = self.offset[m] + j;
                self.node_batch[self.offset[m] + j] = b;
            }
        }
        self.finish.clear();
        self.finish.resize(total, 0);
        self.state.clear();
        self.state.resize(total, 0);
    }
}

fn finish(node: usize, chosen: &[&MachineSeq], batch_preds: &[Vec<usize>], sc: &mut Scratch) -> Option<u64> {
    match sc.state[node] {
        2 => return Some(sc.finish[node]),
        1 => return None,
        _ => {}
    }
    sc.state[node] = 1;
    let (m, j) = sc.node_pos[node];
    let mut start = 0;
    if j > 0 {
        start = finish(node - 1, chosen, batch_preds, sc)?;
    }
    let b = sc.node_batch[node];
    if b != usize::MAX {
        for k in 0..batch_preds[b].len() {
            let p = sc.batch_node[batch_preds[b][k]];
            start = start.max(finish(p, chosen, batch_preds, sc)?);
        }
    }
    sc.state[node] = 2;
    sc.finish[node] = start + chosen[m].durations[j];
    Some(sc.finish[node])
}

fn to_global(chosen: &[&MachineSeq], machines: &[&Machine]) -> GlobalSchedule {
    GlobalSchedule {
        machines: chosen
            .iter()
            .zip(machines)
            .map(|(s, m)| MachineSchedule::new((*m).clone(), s.slots.clone()))
            .collect(),
    }
}

/// Streams every feasible global schedule with the objectives computed by
/// [`evaluate`]. Returns the number of schedules; the visitor may stop the
/// enumeration early by returning false.
pub fn enumerate_schedules(
    inst: &Instance,
    limits: &OracleLimits,
    mut visit: impl FnMut(&GlobalSchedule, Objectives) -> bool,
) -> Result<u64, OracleError> {
    let mut failure = None;
    let (count, _) = run(inst, limits, &mut |chosen, machines, local| {
        let gs = to_global(chosen, machines);
        match evaluate(&gs, inst) {
            Ok(obj) => {
                assert_eq!(obj, local, "oracle timing disagrees with evaluate");
                visit(&gs, obj)
            }
            Err(err) => {
                failure = Some(err);
                false
            }
        }
    })?;
    match failure {
        Some(err) => Err(OracleError::Evaluation(err)),
        None => Ok(count),
    }
}

/// The lexicographically smallest objectives over all feasible schedules,
/// ties broken by enumeration order.
pub fn oracle_optimum(inst: &Instance, limits: &OracleLimits) -> Result<OracleOptimum, OracleError> {
    let mut best: Option<(Objectives, GlobalSchedule)> = None;
    let (schedules, states) = run(inst, limits, &mut |chosen, machines, obj| {
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, to_global(chosen, machines)));
        }
        true
    })?;
    let (objectives, schedule) = best.ok_or(OracleError::NoFeasibleSchedule)?;
    // the reference semantics must agree with the local longest paths
    let checked = evaluate(&schedule, inst).map_err(OracleError::Evaluation)?;
    assert_eq!(checked, objectives, "oracle timing disagrees with evaluate");
    Ok(OracleOptimum {
        objectives,
        schedule,
        schedules,
        states,
    })
}
