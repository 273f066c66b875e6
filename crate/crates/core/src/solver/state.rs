//! Partial schedules built by appending bundles, and their lower bounds.
//!
//! A bundle is what one machine does next: optionally some maintenances,
//! the setup change the batch needs (if any), then the batch. Bundles are
//! appended in order of non-decreasing batch start time; among batches
//! starting together the machine index may only decrease when the new batch
//! continues a lot of the previous one. Every feasible schedule has exactly
//! such an append order, so searching over them is complete, while most
//! permutations of independent decisions are generated once only.

use super::model::DecisionModel;
use crate::instance::Machine;
use crate::schedule::{GlobalSchedule, MachineSchedule, OpRef, Slot};

#[derive(Debug, Clone)]
struct MachineState {
    ready: u64,
    setup: Option<usize>,
    /// min_ops of the setup installed by the last change, if any.
    open_min_ops: Option<u32>,
    batches_since_change: u32,
    counters: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
struct LotState {
    next: usize,
    ready: u64,
}

/// One append step: maintenances, derived setup change, batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub(crate) machine: usize,
    /// Bit i set: maintenance i of the group (in execution order).
    pub(crate) maints: u32,
    pub(crate) change: Option<usize>,
    pub(crate) class: usize,
    /// Sorted lot indexes.
    pub(crate) lots: Vec<usize>,
    pub(crate) start: u64,
    pub(crate) gap: u64,
}

impl Bundle {
    pub fn machine<'m>(&self, model: &'m DecisionModel) -> &'m Machine {
        &model.machines[self.machine]
    }

    pub fn ops(&self, model: &DecisionModel) -> Vec<OpRef> {
        let index = model.classes[self.class].index;
        self.lots.iter().map(|&l| model.op_ref(l, index)).collect()
    }

    /// Start time of the batch.
    pub fn start(&self) -> u64 {
        self.start
    }

    /// Slots this bundle appends to its machine.
    pub fn slots(&self, model: &DecisionModel) -> Vec<Slot> {
        let group = &model.groups[model.machine_group[self.machine]];
        let mut out = Vec::new();
        for (i, m) in group.maints.iter().enumerate() {
            if self.maints & (1 << i) != 0 {
                out.push(Slot::Maint(m.label.clone()));
            }
        }
        if let Some(s) = self.change {
            out.push(Slot::SetupChange(group.setups[s].id.clone()));
        }
        out.push(Slot::batch(self.ops(model)));
        out
    }
}

#[derive(Debug, Clone)]
struct Undo {
    machine: MachineState,
    lots: Vec<LotState>,
    clock: u64,
    last: Option<(usize, usize)>,
    setup_violations: u32,
    batch_violations: u32,
    max_finish: u64,
}

/// A partial schedule: the bundles appended so far and the resulting state
/// of every machine and lot.
#[derive(Debug, Clone)]
pub struct PartialState<'m> {
    model: &'m DecisionModel<'m>,
    machines: Vec<MachineState>,
    lots: Vec<LotState>,
    /// Start of the most recent batch; later batches start no earlier.
    clock: u64,
    /// Bundle index in `stack` of the most recent batch.
    last: Option<(usize, usize)>,
    stack: Vec<(Bundle, Undo)>,
    remaining_in_class: Vec<usize>,
    remaining_ops: usize,
    setup_violations: u32,
    batch_violations: u32,
    max_finish: u64,
}

impl<'m> PartialState<'m> {
    pub fn new(model: &'m DecisionModel<'m>) -> Self {
        let machines = (0..model.machines.len())
            .map(|m| MachineState {
                ready: 0,
                setup: None,
                open_min_ops: None,
                batches_since_change: 0,
                counters: vec![0; model.groups[model.machine_group[m]].maints.len()],
            })
            .collect();
        PartialState {
            model,
            machines,
            lots: vec![LotState { next: 0, ready: 0 }; model.lots.len()],
            clock: 0,
            last: None,
            stack: Vec::new(),
            remaining_in_class: model.classes.iter().map(|c| c.lots.len()).collect(),
            remaining_ops: model.operation_count(),
            setup_violations: 0,
            batch_violations: 0,
            max_finish: 0,
        }
    }

    pub fn model(&self) -> &'m DecisionModel<'m> {
        self.model
    }

    pub fn is_complete(&self) -> bool {
        self.remaining_ops == 0
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    /// Largest completion time so far.
    pub fn makespan(&self) -> u64 {
        self.max_finish
    }

    pub fn setup_violations(&self) -> u32 {
        self.setup_violations
    }

    pub fn batch_violations(&self) -> u32 {
        self.batch_violations
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn bundles(&self) -> impl Iterator<Item = &Bundle> {
        self.stack.iter().map(|(b, _)| b)
    }

    /// All bundles that may be appended next, in generation order.
    pub fn candidates(&self) -> Vec<Bundle> {
        let mut out = Vec::new();
        let model = self.model;
        let last_lots: &[usize] = match self.last {
            Some((i, _)) => &self.stack[i].0.lots,
            None => &[],
        };
        let last_machine = self.last.map(|(_, m)| m);
        let mut ready: Vec<usize> = Vec::new();
        let mut subset: Vec<usize> = Vec::new();
        for (c, class) in model.classes.iter().enumerate() {
            if self.remaining_in_class[c] == 0 {
                continue;
            }
            ready.clear();
            ready.extend(class.lots.iter().copied().filter(|&l| self.lots[l].next == class.index));
            if ready.is_empty() {
                continue;
            }
            let op = &model.routes[class.product][class.index];
            let max = (op.max_batch as usize).min(ready.len());
            for size in 1..=max {
                combinations(&ready, size, &mut subset, &mut |lots| {
                    self.bundles_for(c, lots, last_machine, last_lots, &mut out);
                });
            }
        }
        out
    }

    fn bundles_for(
        &self,
        class: usize,
        lots: &[usize],
        last_machine: Option<usize>,
        last_lots: &[usize],
        out: &mut Vec<Bundle>,
    ) {
        let model = self.model;
        let index = model.classes[class].index;
        let op = model.op(lots[0], index);
        let lot_ready = lots.iter().map(|&l| self.lots[l].ready).max().unwrap_or(0);
        let k = lots.len() as u64;
        let shares_last = lots.iter().any(|l| last_lots.contains(l));
        'machines: for &m in &model.allowed[lots[0]][index] {
            for &l in &lots[1..] {
                if !model.allowed[l][index].contains(&m) {
                    continue 'machines;
                }
            }
            let ms = &self.machines[m];
            let group = &model.groups[model.machine_group[m]];
            let change = op.setup.filter(|&s| ms.setup != Some(s));
            let change_time = change.map_or(0, |s| group.setups[s].change);
            let n = group.maints.len();
            'masks: for mask in 0u32..(1 << n) {
                let mut gap = change_time;
                for (i, mc) in group.maints.iter().enumerate() {
                    let due = mask & (1 << i) != 0;
                    if due && ms.counters[i] < mc.min {
                        continue 'masks;
                    }
                    let base = if due { 0 } else { ms.counters[i] };
                    if base + mc.amount(k, op.proc) > mc.max {
                        continue 'masks;
                    }
                    if due {
                        gap += mc.duration;
                    }
                }
                let start = (ms.ready + gap).max(lot_ready);
                if start < self.clock {
                    continue;
                }
                if start == self.clock && last_machine.is_some_and(|lm| m < lm) && !shares_last {
                    continue;
                }
                out.push(Bundle {
                    machine: m,
                    maints: mask,
                    change,
                    class,
                    lots: lots.to_vec(),
                    start,
                    gap,
                });
            }
        }
    }

    /// Setup violations and batch violations the bundle adds when appended.
    pub fn violation_delta(&self, b: &Bundle) -> (u32, u32) {
        let ms = &self.machines[b.machine];
        let sv = match (b.change, ms.open_min_ops) {
            (Some(_), Some(min)) => u32::from(ms.batches_since_change < min),
            _ => 0,
        };
        let op = self.model.op(b.lots[0], self.model.classes[b.class].index);
        (sv, u32::from((b.lots.len() as u32) < op.min_batch))
    }

    pub fn apply(&mut self, b: Bundle) {
        let model = self.model;
        let index = model.classes[b.class].index;
        let op = model.op(b.lots[0], index);
        let group = &model.groups[model.machine_group[b.machine]];
        let (sv, bv) = self.violation_delta(&b);
        let undo = Undo {
            machine: self.machines[b.machine].clone(),
            lots: b.lots.iter().map(|&l| self.lots[l]).collect(),
            clock: self.clock,
            last: self.last,
            setup_violations: self.setup_violations,
            batch_violations: self.batch_violations,
            max_finish: self.max_finish,
        };
        let finish = b.start + op.proc;
        let k = b.lots.len() as u64;
        let ms = &mut self.machines[b.machine];
        for (i, mc) in group.maints.iter().enumerate() {
            if b.maints & (1 << i) != 0 {
                ms.counters[i] = 0;
            }
            ms.counters[i] += mc.amount(k, op.proc);
        }
        if let Some(s) = b.change {
            ms.setup = Some(s);
            ms.open_min_ops = Some(group.setups[s].min_ops);
            ms.batches_since_change = 0;
        }
        ms.batches_since_change += 1;
        ms.ready = finish;
        for &l in &b.lots {
            self.lots[l] = LotState {
                next: index + 1,
                ready: finish,
            };
        }
        self.setup_violations += sv;
        self.batch_violations += bv;
        self.max_finish = self.max_finish.max(finish);
        self.clock = b.start;
        self.last = Some((self.stack.len(), b.machine));
        self.remaining_in_class[b.class] -= b.lots.len();
        self.remaining_ops -= b.lots.len();
        self.stack.push((b, undo));
    }

    pub fn undo(&mut self) -> Option<Bundle> {
        let (b, undo) = self.stack.pop()?;
        self.machines[b.machine] = undo.machine;
        for (&l, st) in b.lots.iter().zip(undo.lots) {
            self.lots[l] = st;
        }
        self.clock = undo.clock;
        self.last = undo.last;
        self.setup_violations = undo.setup_violations;
        self.batch_violations = undo.batch_violations;
        self.max_finish = undo.max_finish;
        self.remaining_in_class[b.class] += b.lots.len();
        self.remaining_ops += b.lots.len();
        Some(b)
    }

    /// Lower bound on the makespan of every completion. Equals the makespan
    /// once all operations are scheduled.
    pub fn lower_bound(&self) -> u64 {
        let model = self.model;
        let mut lb = self.max_finish;
        if self.remaining_ops == 0 {
            return lb;
        }

        // per lot: earliest next start plus remaining processing
        for (l, st) in self.lots.iter().enumerate() {
            let p = model.lot_product[l];
            if st.next >= model.routes[p].len() {
                continue;
            }
            let op = &model.routes[p][st.next];
            let machine_ready = model.allowed[l][st.next]
                .iter()
                .map(|&m| {
                    let ms = &self.machines[m];
                    let change = match op.setup {
                        Some(s) if ms.setup != Some(s) => model.groups[op.group].setups[s].change,
                        _ => 0,
                    };
                    ms.ready + change
                })
                .min()
                .unwrap_or(0);
            let est = st.ready.max(self.clock).max(machine_ready);
            lb = lb.max(est + model.tail[p][st.next]);
        }

        // per machine: operations that can only run there
        // per group: all remaining work spread over the group's machines
        let n_machines = model.machines.len();
        let mut forced = vec![Forced::default(); n_machines];
        let mut group_work = vec![0u64; model.groups.len()];
        let mut group_setups: Vec<Vec<bool>> = model.groups.iter().map(|g| vec![false; g.setups.len()]).collect();
        for (c, class) in model.classes.iter().enumerate() {
            let n = self.remaining_in_class[c];
            if n == 0 {
                continue;
            }
            let op = &model.routes[class.product][class.index];
            group_work[op.group] += (n as u64).div_ceil(u64::from(op.max_batch)) * op.proc;
            if let Some(s) = op.setup {
                group_setups[op.group][s] = true;
            }
            let mut per_machine: Vec<(usize, u64, u64, u64)> = Vec::new(); // (machine, count, head, tail)
            for &l in &class.lots {
                let st = self.lots[l];
                if st.next > class.index {
                    continue;
                }
                let allowed = &model.allowed[l][class.index];
                if allowed.len() != 1 {
                    continue;
                }
                let p = class.product;
                let head = st.ready.max(self.clock) + model.tail[p][st.next] - model.tail[p][class.index];
                let tail = model.tail[p][class.index + 1];
                match per_machine.iter_mut().find(|e| e.0 == allowed[0]) {
                    Some(e) => {
                        e.1 += 1;
                        e.2 = e.2.min(head);
                        e.3 = e.3.min(tail);
                    }
                    None => per_machine.push((allowed[0], 1, head, tail)),
                }
            }
            for (m, count, head, tail) in per_machine {
                let f = &mut forced[m];
                f.work += count.div_ceil(u64::from(op.max_batch)) * op.proc;
                f.head = f.head.min(head);
                f.tail = f.tail.min(tail);
                f.any = true;
                if let Some(s) = op.setup {
                    if !f.setups.contains(&s) {
                        f.setups.push(s);
                    }
                }
            }
        }
        for (m, f) in forced.iter().enumerate() {
            if !f.any {
                continue;
            }
            let ms = &self.machines[m];
            let setups = &model.groups[model.machine_group[m]].setups;
            let mut change_sum = 0;
            let mut change_max = 0;
            for &s in &f.setups {
                if ms.setup != Some(s) {
                    change_sum += setups[s].change;
                    change_max = change_max.max(setups[s].change);
                }
            }
            let from_ready = ms.ready + change_sum + f.work;
            let from_head = f.head.max(self.clock) + f.work + change_sum - change_max;
            lb = lb.max(from_ready.max(from_head) + f.tail);
        }
        for (g, group) in model.groups.iter().enumerate() {
            if group_work[g] == 0 || group.machines.is_empty() {
                continue;
            }
            let mut total = group_work[g];
            for (s, needed) in group_setups[g].iter().enumerate() {
                if *needed && !group.machines.iter().any(|&m| self.machines[m].setup == Some(s)) {
                    total += group.setups[s].change;
                }
            }
            total += group.machines.iter().map(|&m| self.machines[m].ready).sum::<u64>();
            lb = lb.max(total.div_ceil(group.machines.len() as u64));
        }
        lb
    }

    /// Lower bound on the batch violations of every completion: classes
    /// whose remaining lots cannot fill a single minimum batch.
    pub fn batch_violation_bound(&self) -> u32 {
        let model = self.model;
        let mut extra = 0;
        for (c, class) in model.classes.iter().enumerate() {
            let n = self.remaining_in_class[c];
            let op = &model.routes[class.product][class.index];
            if n > 0 && (n as u32) < op.min_batch {
                extra += 1;
            }
        }
        self.batch_violations + extra
    }

    /// The slot sequences of the appended bundles, one per machine of the
    /// instance.
    pub fn to_schedule(&self) -> GlobalSchedule {
        let model = self.model;
        let mut machines: Vec<MachineSchedule> = model
            .machines
            .iter()
            .map(|m| MachineSchedule::new(m.clone(), Vec::new()))
            .collect();
        for (b, _) in &self.stack {
            machines[b.machine].slots.extend(b.slots(model));
        }
        GlobalSchedule { machines }
    }
}

#[derive(Debug, Clone)]
struct Forced {
    any: bool,
    work: u64,
    head: u64,
    tail: u64,
    setups: Vec<usize>,
}

impl Default for Forced {
    fn default() -> Self {
        Forced {
            any: false,
            work: 0,
            head: u64::MAX,
            tail: u64::MAX,
            setups: Vec::new(),
        }
    }
}

/// Calls `emit` with every `size`-subset of `items`, in lexicographic order.
fn combinations(items: &[usize], size: usize, buf: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    fn rec(items: &[usize], from: usize, size: usize, buf: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
        if buf.len() == size {
            emit(buf);
            return;
        }
        let need = size - buf.len();
        for i in from..=items.len() - need {
            buf.push(items[i]);
            rec(items, i + 1, size, buf, emit);
            buf.pop();
        }
    }
    buf.clear();
    rec(items, 0, size, buf, emit);
}
