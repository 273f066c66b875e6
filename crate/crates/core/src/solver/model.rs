//! Dense, index-based view of an instance plus a preallocation: the space
//! the search branches over.

use super::SolveError;
use crate::instance::{Instance, LotId, Machine, MaintLabel, ProductId, SetupId, Trigger};
use crate::prealloc::PreallocationMap;
use crate::schedule::{OpRef, Slot};

#[derive(Debug, Clone)]
pub(crate) struct OpC {
    pub group: usize,
    pub proc: u64,
    pub min_batch: u32,
    pub max_batch: u32,
    /// Index into the group's setups.
    pub setup: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct SetupC {
    pub id: SetupId,
    pub change: u64,
    pub min_ops: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct MaintC {
    pub label: MaintLabel,
    pub trigger: Trigger,
    pub min: u64,
    pub max: u64,
    pub duration: u64,
}

impl MaintC {
    /// Counter increase caused by a batch of `k` lots of processing time `proc`.
    pub fn amount(&self, k: u64, proc: u64) -> u64 {
        match self.trigger {
            Trigger::Lots => k,
            Trigger::Time => k * (proc / k),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GroupC {
    pub machines: Vec<usize>,
    pub setups: Vec<SetupC>,
    /// By decreasing duration, then label: the order in which maintenances
    /// in front of one batch are executed.
    pub maints: Vec<MaintC>,
}

/// All operations of one (product, route index) pair: the unit of batching.
#[derive(Debug, Clone)]
pub(crate) struct ClassC {
    pub product: usize,
    /// 0-based route position.
    pub index: usize,
    pub lots: Vec<usize>,
}

/// The decisions of a schedule: how operations are batched, which machine
/// runs each batch, the order of batches per machine, and which
/// maintenances precede each batch. Setup changes follow from these.
#[derive(Debug, Clone)]
pub struct DecisionModel<'a> {
    pub(crate) inst: &'a Instance,
    pub(crate) machines: Vec<Machine>,
    pub(crate) machine_group: Vec<usize>,
    pub(crate) groups: Vec<GroupC>,
    pub(crate) lots: Vec<LotId>,
    pub(crate) lot_product: Vec<usize>,
    pub(crate) products: Vec<ProductId>,
    pub(crate) routes: Vec<Vec<OpC>>,
    /// `tail[p][i]`: processing time of route positions i.. of product p.
    pub(crate) tail: Vec<Vec<u64>>,
    /// `allowed[lot][i]`: machines for the lot's operation at position i.
    pub(crate) allowed: Vec<Vec<Vec<usize>>>,
    pub(crate) classes: Vec<ClassC>,
    pub(crate) class_of: Vec<Vec<usize>>,
}

impl<'a> DecisionModel<'a> {
    pub fn new(inst: &'a Instance, prealloc: &PreallocationMap) -> Result<Self, SolveError> {
        let machines: Vec<Machine> = inst.all_machines().cloned().collect();
        let group_ids: Vec<_> = inst.machines.keys().cloned().collect();
        let group_pos = |g| group_ids.iter().position(|x| x == g);
        let machine_group: Vec<usize> = machines
            .iter()
            .map(|m| group_pos(&m.group).expect("machine group"))
            .collect();
        let groups: Vec<GroupC> = group_ids
            .iter()
            .enumerate()
            .map(|(g, id)| {
                let setups = inst
                    .setups
                    .values()
                    .filter(|s| &s.group == id)
                    .map(|s| SetupC {
                        id: s.id.clone(),
                        change: s.change_time,
                        min_ops: s.min_ops,
                    })
                    .collect();
                let mut maints: Vec<MaintC> = inst
                    .maintenances(id)
                    .iter()
                    .map(|m| MaintC {
                        label: m.label.clone(),
                        trigger: m.trigger,
                        min: m.min,
                        max: m.max,
                        duration: m.duration,
                    })
                    .collect();
                maints.sort_by(|a, b| b.duration.cmp(&a.duration).then_with(|| a.label.cmp(&b.label)));
                GroupC {
                    machines: (0..machines.len()).filter(|&m| machine_group[m] == g).collect(),
                    setups,
                    maints,
                }
            })
            .collect();

        let products: Vec<ProductId> = inst.routes.keys().cloned().collect();
        let mut routes = Vec::with_capacity(products.len());
        let mut tail = Vec::with_capacity(products.len());
        for route in inst.routes.values() {
            let mut ops = Vec::with_capacity(route.len());
            for op in &route.steps {
                let g =
                    group_pos(&op.group).ok_or_else(|| SolveError::Config(format!("{} has no machines", op.group)))?;
                let setup = match op.setup.setup() {
                    Some(s) => Some(
                        groups[g]
                            .setups
                            .iter()
                            .position(|x| &x.id == s)
                            .ok_or_else(|| SolveError::Config(format!("setup {s} undeclared on {}", op.group)))?,
                    ),
                    None => None,
                };
                ops.push(OpC {
                    group: g,
                    proc: op.proc_time,
                    min_batch: op.min_batch,
                    max_batch: op.max_batch.max(1),
                    setup,
                });
            }
            let mut t = vec![0u64; ops.len() + 1];
            for i in (0..ops.len()).rev() {
                t[i] = t[i + 1] + ops[i].proc;
            }
            routes.push(ops);
            tail.push(t);
        }

        let lots: Vec<LotId> = inst.lots.iter().map(|l| l.id.clone()).collect();
        let mut lot_product = Vec::with_capacity(lots.len());
        let mut allowed = Vec::with_capacity(lots.len());
        for lot in &inst.lots {
            let p = products
                .iter()
                .position(|p| p == &lot.product)
                .ok_or_else(|| SolveError::Config(format!("lot {} has no route", lot.id)))?;
            lot_product.push(p);
            let mut per_op = Vec::with_capacity(routes[p].len());
            for (i, step) in routes[p].iter().enumerate() {
                let op = OpRef::new(lot.id.clone(), i as u32 + 1);
                let set = prealloc.get(&op).unwrap_or(&[]);
                let mut idx: Vec<usize> = set
                    .iter()
                    .filter_map(|m| machines.iter().position(|x| x == m))
                    .filter(|&m| machine_group[m] == step.group)
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                if idx.is_empty() {
                    return Err(SolveError::Config(format!("no machine preallocated for {op}")));
                }
                per_op.push(idx);
            }
            allowed.push(per_op);
        }

        let mut classes = Vec::new();
        let mut class_of = Vec::with_capacity(products.len());
        for (p, route) in routes.iter().enumerate() {
            let members: Vec<usize> = (0..lots.len()).filter(|&l| lot_product[l] == p).collect();
            let mut row = Vec::with_capacity(route.len());
            for i in 0..route.len() {
                row.push(classes.len());
                classes.push(ClassC {
                    product: p,
                    index: i,
                    lots: members.clone(),
                });
            }
            class_of.push(row);
        }

        Ok(DecisionModel {
            inst,
            machines,
            machine_group,
            groups,
            lots,
            lot_product,
            products,
            routes,
            tail,
            allowed,
            classes,
            class_of,
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub(crate) fn op(&self, lot: usize, index: usize) -> &OpC {
        &self.routes[self.lot_product[lot]][index]
    }

    pub(crate) fn op_ref(&self, lot: usize, index: usize) -> OpRef {
        OpRef::new(self.lots[lot].clone(), index as u32 + 1)
    }

    pub(crate) fn operation_count(&self) -> usize {
        self.lot_product.iter().map(|&p| self.routes[p].len()).sum()
    }

    fn lot_index(&self, id: &LotId) -> Option<usize> {
        self.lots.iter().position(|l| l == id)
    }

    /// Every way to split the lots of `product` at route position `index`
    /// into batches of at most `max_batch` lots. Each batch is listed in lot
    /// order and identified by its smallest lot; batches are ordered by that
    /// lot. Operations with `max_batch` 1 have exactly one partition.
    pub fn batch_partitions(&self, product: &ProductId, index: u32) -> Vec<Vec<Vec<LotId>>> {
        let Some(p) = self.products.iter().position(|x| x == product) else {
            return Vec::new();
        };
        let Some(op) = self.routes[p].get(index.wrapping_sub(1) as usize) else {
            return Vec::new();
        };
        let lots = &self.classes[self.class_of[p][index as usize - 1]].lots;
        let mut out = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        partitions_rec(0, lots, op.max_batch as usize, &mut blocks, &mut |blocks| {
            out.push(
                blocks
                    .iter()
                    .map(|b| b.iter().map(|&l| self.lots[l].clone()).collect())
                    .collect(),
            );
        });
        out
    }

    /// Machines on which all of `ops` may run together: the intersection of
    /// their preallocation sets. Empty when they cannot share a batch.
    pub fn common_machines(&self, ops: &[OpRef]) -> Vec<Machine> {
        let mut common: Option<Vec<usize>> = None;
        for op in ops {
            let Some(l) = self.lot_index(&op.lot) else {
                return Vec::new();
            };
            let Some(set) = self.allowed[l].get(op.index.wrapping_sub(1) as usize) else {
                return Vec::new();
            };
            common = Some(match common {
                None => set.clone(),
                Some(c) => c.into_iter().filter(|m| set.contains(m)).collect(),
            });
        }
        common
            .unwrap_or_default()
            .into_iter()
            .map(|m| self.machines[m].clone())
            .collect()
    }

    /// The slots inserted in front of a batch on `machine` when the given
    /// maintenances are due and `change` must be installed, and their total
    /// duration. Maintenances run in decreasing order of duration, the setup
    /// change last.
    pub fn gap(&self, machine: &Machine, maints: &[MaintLabel], change: Option<&SetupId>) -> Option<(Vec<Slot>, u64)> {
        let m = self.machines.iter().position(|x| x == machine)?;
        let group = &self.groups[self.machine_group[m]];
        let mut slots = Vec::new();
        let mut delay = 0;
        for mc in &group.maints {
            if maints.contains(&mc.label) {
                slots.push(Slot::Maint(mc.label.clone()));
                delay += mc.duration;
            }
        }
        if slots.len() != maints.len() {
            return None;
        }
        if let Some(s) = change {
            let spec = group.setups.iter().find(|x| &x.id == s)?;
            slots.push(Slot::SetupChange(s.clone()));
            delay += spec.change;
        }
        Some((slots, delay))
    }
}

fn partitions_rec(
    i: usize,
    lots: &[usize],
    max: usize,
    blocks: &mut Vec<Vec<usize>>,
    emit: &mut dyn FnMut(&[Vec<usize>]),
) {
    if i == lots.len() {
        emit(blocks);
        return;
    }
    for b in 0..blocks.len() {
        if blocks[b].len() < max {
            blocks[b].push(lots[i]);
            partitions_rec(i + 1, lots, max, blocks, emit);
            blocks[b].pop();
        }
    }
    blocks.push(vec![lots[i]]);
    partitions_rec(i + 1, lots, max, blocks, emit);
    blocks.pop();
}
