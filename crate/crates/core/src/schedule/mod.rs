//! Machine schedules and their meaning: setup tracking, maintenance windows,
//! start times and the three objectives (makespan, setup violations, batch
//! violations).
//!
//! A machine schedule is a sequence of slots. A slot is either a batch of
//! production operations (same product, same route index), a change to a
//! setup, or a maintenance operation. Machines start with no setup installed
//! and all maintenance counters at zero.

mod json;
mod timing;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, LotId, Machine, MaintLabel, MaintenanceSpec, OpSpec, SetupId, SetupReq, Trigger};

pub use json::{schedule_from_json, schedule_to_json, to_document, MachineEntry, SlotBody, SlotEntry};
pub use timing::{compute_start_times, CyclicDependency, DependencyEdge, EdgeKind, SlotPos, TimedSchedule};

/// The `index`-th production operation of `lot`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpRef {
    pub lot: LotId,
    pub index: u32,
}

impl OpRef {
    pub fn new(lot: impl Into<LotId>, index: u32) -> Self {
        OpRef { lot: lot.into(), index }
    }
}

impl fmt::Display for OpRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.lot, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Operations processed together; kept sorted.
    Batch(Vec<OpRef>),
    SetupChange(SetupId),
    Maint(MaintLabel),
}

impl Slot {
    pub fn batch(ops: impl IntoIterator<Item = OpRef>) -> Slot {
        let mut ops: Vec<OpRef> = ops.into_iter().collect();
        ops.sort();
        Slot::Batch(ops)
    }

    pub fn ops(&self) -> &[OpRef] {
        match self {
            Slot::Batch(ops) => ops,
            _ => &[],
        }
    }

    pub fn is_production(&self) -> bool {
        matches!(self, Slot::Batch(_))
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Batch(ops) => {
                f.write_str("{")?;
                for (n, op) in ops.iter().enumerate() {
                    if n > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{op}")?;
                }
                f.write_str("}")
            }
            Slot::SetupChange(s) => write!(f, "setup {s}"),
            Slot::Maint(l) => write!(f, "maint {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSchedule {
    pub machine: Machine,
    pub slots: Vec<Slot>,
}

impl MachineSchedule {
    pub fn new(machine: Machine, slots: Vec<Slot>) -> Self {
        MachineSchedule { machine, slots }
    }
}

/// One slot sequence per machine. Machines of the instance that are absent
/// are treated as idle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalSchedule {
    pub machines: Vec<MachineSchedule>,
}

impl GlobalSchedule {
    /// An empty slot sequence for every machine of the instance.
    pub fn empty_for(inst: &Instance) -> Self {
        GlobalSchedule {
            machines: inst
                .all_machines()
                .map(|m| MachineSchedule::new(m.clone(), Vec::new()))
                .collect(),
        }
    }

    pub fn machine(&self, machine: &Machine) -> Option<&MachineSchedule> {
        self.machines.iter().find(|ms| &ms.machine == machine)
    }

    pub fn machine_mut(&mut self, machine: &Machine) -> Option<&mut MachineSchedule> {
        self.machines.iter_mut().find(|ms| &ms.machine == machine)
    }

    pub fn slot_count(&self) -> usize {
        self.machines.iter().map(|m| m.slots.len()).sum()
    }
}

/// Objective values, compared lexicographically in field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Objectives {
    pub makespan: u64,
    pub setup_violations: u32,
    pub batch_violations: u32,
}

impl Objectives {
    pub fn new(makespan: u64, setup_violations: u32, batch_violations: u32) -> Self {
        Objectives {
            makespan,
            setup_violations,
            batch_violations,
        }
    }
}

impl fmt::Display for Objectives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "makespan={} setup={} batch={}",
            self.makespan, self.setup_violations, self.batch_violations
        )
    }
}

/// A schedule that refers to things the instance does not contain. Distinct
/// from infeasibility: such a schedule has no meaning at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("unknown machine {0}")]
    UnknownMachine(Machine),
    #[error("machine {0} listed more than once")]
    DuplicateMachine(Machine),
    #[error("unknown lot {0}")]
    UnknownLot(LotId),
    #[error("operation {0} is not on the lot's route")]
    UnknownOperation(OpRef),
    #[error("setup {setup} is not declared for tool group of {machine}")]
    UnknownSetup { machine: Machine, setup: SetupId },
    #[error("maintenance {label} is not declared for tool group of {machine}")]
    UnknownMaintenance { machine: Machine, label: MaintLabel },
    #[error("empty batch in slot {slot} of {machine}")]
    EmptyBatch { machine: Machine, slot: usize },
    #[error("operation {op} appears twice in slot {slot} of {machine}")]
    DuplicateInBatch { machine: Machine, slot: usize, op: OpRef },
}

/// A violated hard constraint of a single machine schedule. Slot positions
/// are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WrongToolGroup {
        slot: usize,
        op: OpRef,
    },
    MixedBatch {
        slot: usize,
    },
    BatchTooLarge {
        slot: usize,
        size: usize,
        max: u32,
    },
    SetupNotInPlace {
        slot: usize,
        required: SetupId,
        in_place: SetupReq,
    },
    MaintWindowExceeded {
        slot: usize,
        label: MaintLabel,
        trigger: Trigger,
        amount: u64,
        max: u64,
    },
    MaintTooEarly {
        slot: usize,
        label: MaintLabel,
        trigger: Trigger,
        amount: u64,
        min: u64,
    },
}

impl Violation {
    pub fn slot(&self) -> usize {
        match self {
            Violation::WrongToolGroup { slot, .. }
            | Violation::MixedBatch { slot }
            | Violation::BatchTooLarge { slot, .. }
            | Violation::SetupNotInPlace { slot, .. }
            | Violation::MaintWindowExceeded { slot, .. }
            | Violation::MaintTooEarly { slot, .. } => *slot,
        }
    }

    /// Short name of the violated constraint.
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::WrongToolGroup { .. } => "operation on wrong tool group",
            Violation::MixedBatch { .. } => "batch mixes operations",
            Violation::BatchTooLarge { .. } => "batch exceeds max_batch",
            Violation::SetupNotInPlace { .. } => "setup not in place",
            Violation::MaintWindowExceeded { .. } => "maintenance window exceeded",
            Violation::MaintTooEarly { .. } => "maintenance before window minimum",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot {}: {}", self.slot(), self.constraint())?;
        match self {
            Violation::WrongToolGroup { op, .. } => write!(f, " ({op})"),
            Violation::MixedBatch { .. } => Ok(()),
            Violation::BatchTooLarge { size, max, .. } => write!(f, " ({size} > {max})"),
            Violation::SetupNotInPlace { required, in_place, .. } => {
                write!(f, " (requires {required}, installed {in_place})")
            }
            Violation::MaintWindowExceeded {
                label,
                trigger,
                amount,
                max,
                ..
            } => {
                write!(f, " ({label}: {amount} {trigger} > {max})")
            }
            Violation::MaintTooEarly {
                label,
                trigger,
                amount,
                min,
                ..
            } => {
                write!(f, " ({label}: {amount} {trigger} < {min})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MachineVerdict {
    pub violations: Vec<Violation>,
}

impl MachineVerdict {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error("coverage: {missing} operation(s) unscheduled, {duplicated} scheduled more than once (first: {first})")]
    Coverage {
        missing: usize,
        duplicated: usize,
        first: OpRef,
    },
    #[error("machine {machine} is infeasible: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Infeasible {
        machine: Machine,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Cycle(#[from] CyclicDependency),
}

/// Installed setup when each slot starts: `Any` at the first slot, then the
/// target of the most recent setup change.
pub fn setup_states(ms: &MachineSchedule) -> Vec<SetupReq> {
    let mut current = SetupReq::Any;
    ms.slots
        .iter()
        .map(|slot| {
            let state = current.clone();
            if let Slot::SetupChange(s) = slot {
                current = SetupReq::Setup(s.clone());
            }
            state
        })
        .collect()
}

/// Resolves a batch's operation specs, checking references only.
pub(crate) fn batch_specs<'a>(
    inst: &'a Instance,
    machine: &Machine,
    slot: usize,
    ops: &[OpRef],
) -> Result<Vec<&'a OpSpec>, StructuralError> {
    if ops.is_empty() {
        return Err(StructuralError::EmptyBatch {
            machine: machine.clone(),
            slot,
        });
    }
    let mut specs = Vec::with_capacity(ops.len());
    for (n, op) in ops.iter().enumerate() {
        if ops[..n].contains(op) {
            return Err(StructuralError::DuplicateInBatch {
                machine: machine.clone(),
                slot,
                op: op.clone(),
            });
        }
        let lot = inst
            .lot(&op.lot)
            .ok_or_else(|| StructuralError::UnknownLot(op.lot.clone()))?;
        let spec = inst
            .op(&lot.product, op.index)
            .ok_or_else(|| StructuralError::UnknownOperation(op.clone()))?;
        specs.push(spec);
    }
    Ok(specs)
}

pub(crate) fn check_known_machine(inst: &Instance, machine: &Machine) -> Result<(), StructuralError> {
    if inst.group_machines(&machine.group).contains(machine) {
        Ok(())
    } else {
        Err(StructuralError::UnknownMachine(machine.clone()))
    }
}

/// Contribution of a batch to a maintenance counter: lots for lot-based
/// maintenance, per-lot shares `time ÷ |batch|` (floor) for time-based.
pub(crate) fn maintenance_amount(trigger: Trigger, specs: &[&OpSpec]) -> u64 {
    let k = specs.len() as u64;
    match trigger {
        Trigger::Lots => k,
        Trigger::Time => specs.iter().map(|s| s.proc_time / k).sum(),
    }
}

/// Checks the hard constraints of one machine schedule: setups in place,
/// batch composition, and every maintenance window.
pub fn check_machine(ms: &MachineSchedule, inst: &Instance) -> Result<MachineVerdict, StructuralError> {
    check_known_machine(inst, &ms.machine)?;
    let group = &ms.machine.group;
    let maints: &[MaintenanceSpec] = inst.maintenances(group);
    let mut counters = vec![0u64; maints.len()];
    // report each window overflow once, until the maintenance resets it
    let mut overflow_reported = vec![false; maints.len()];
    let mut installed = SetupReq::Any;
    let mut violations = Vec::new();

    for (j, slot) in ms.slots.iter().enumerate() {
        match slot {
            Slot::Batch(ops) => {
                let specs = batch_specs(inst, &ms.machine, j, ops)?;
                let head = specs[0];
                if specs.iter().any(|s| s.product != head.product || s.index != head.index) {
                    violations.push(Violation::MixedBatch { slot: j });
                }
                for (op, spec) in ops.iter().zip(&specs) {
                    if &spec.group != group {
                        violations.push(Violation::WrongToolGroup {
                            slot: j,
                            op: op.clone(),
                        });
                    }
                }
                if ops.len() > head.max_batch as usize {
                    violations.push(Violation::BatchTooLarge {
                        slot: j,
                        size: ops.len(),
                        max: head.max_batch,
                    });
                }
                let mut required: Vec<&SetupId> = specs.iter().filter_map(|s| s.setup.setup()).collect();
                required.dedup();
                for req in required {
                    if installed.setup() != Some(req) {
                        violations.push(Violation::SetupNotInPlace {
                            slot: j,
                            required: req.clone(),
                            in_place: installed.clone(),
                        });
                    }
                }
                for (c, m) in maints.iter().enumerate() {
                    counters[c] += maintenance_amount(m.trigger, &specs);
                    if counters[c] > m.max && !overflow_reported[c] {
                        overflow_reported[c] = true;
                        violations.push(Violation::MaintWindowExceeded {
                            slot: j,
                            label: m.label.clone(),
                            trigger: m.trigger,
                            amount: counters[c],
                            max: m.max,
                        });
                    }
                }
            }
            Slot::SetupChange(s) => {
                if inst.setup_spec(group, s).is_none() {
                    return Err(StructuralError::UnknownSetup {
                        machine: ms.machine.clone(),
                        setup: s.clone(),
                    });
                }
                installed = SetupReq::Setup(s.clone());
            }
            Slot::Maint(label) => {
                let c = maints.iter().position(|m| &m.label == label).ok_or_else(|| {
                    StructuralError::UnknownMaintenance {
                        machine: ms.machine.clone(),
                        label: label.clone(),
                    }
                })?;
                let m = &maints[c];
                if counters[c] < m.min {
                    violations.push(Violation::MaintTooEarly {
                        slot: j,
                        label: label.clone(),
                        trigger: m.trigger,
                        amount: counters[c],
                        min: m.min,
                    });
                }
                counters[c] = 0;
                overflow_reported[c] = false;
            }
        }
    }
    Ok(MachineVerdict { violations })
}

/// Setup changes that are followed by another change on the same machine
/// with fewer than `min_ops` production slots in between. Batches count once
/// regardless of their size.
pub fn count_setup_violations(gs: &GlobalSchedule, inst: &Instance) -> u32 {
    let mut count = 0;
    for ms in &gs.machines {
        let mut open: Option<(u32, u32)> = None; // (min_ops, production slots since)
        for slot in &ms.slots {
            match slot {
                Slot::SetupChange(s) => {
                    if let Some((min_ops, seen)) = open {
                        if seen < min_ops {
                            count += 1;
                        }
                    }
                    let min_ops = inst.setup_spec(&ms.machine.group, s).map_or(0, |spec| spec.min_ops);
                    open = Some((min_ops, 0));
                }
                Slot::Batch(_) => {
                    if let Some((_, seen)) = open.as_mut() {
                        *seen += 1;
                    }
                }
                Slot::Maint(_) => {}
            }
        }
    }
    count
}

/// Batches with fewer lots than the operation's minimum batch size.
pub fn count_batch_violations(gs: &GlobalSchedule, inst: &Instance) -> u32 {
    let mut count = 0;
    for ms in &gs.machines {
        for slot in &ms.slots {
            if let Slot::Batch(ops) = slot {
                let min = ops
                    .first()
                    .and_then(|op| inst.lot_op(&op.lot, op.index))
                    .map_or(0, |spec| spec.min_batch);
                if (ops.len() as u64) < u64::from(min) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Checks every machine, computes start times and returns the objectives of
/// the timed schedule.
pub fn evaluate_timed(gs: &GlobalSchedule, inst: &Instance) -> Result<(TimedSchedule, Objectives), EvalError> {
    let mut seen = HashSet::new();
    for ms in &gs.machines {
        if !seen.insert(&ms.machine) {
            return Err(StructuralError::DuplicateMachine(ms.machine.clone()).into());
        }
        let verdict = check_machine(ms, inst)?;
        if !verdict.is_feasible() {
            return Err(EvalError::Infeasible {
                machine: ms.machine.clone(),
                violations: verdict.violations,
            });
        }
    }
    let timed = compute_start_times(gs, inst)?;
    let objectives = Objectives {
        makespan: timed.makespan(),
        setup_violations: count_setup_violations(gs, inst),
        batch_violations: count_batch_violations(gs, inst),
    };
    Ok((timed, objectives))
}

pub fn evaluate(gs: &GlobalSchedule, inst: &Instance) -> Result<Objectives, EvalError> {
    evaluate_timed(gs, inst).map(|(_, obj)| obj)
}

pub fn makespan(ts: &TimedSchedule) -> u64 {
    ts.makespan()
}
