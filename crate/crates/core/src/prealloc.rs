//! Static preallocation: restricting each production operation to a subset
//! of its tool group's machines before search.
//!
//! A group of N machines is cut into ⌈N / sub_size⌉ contiguous subgroups.
//! Operations receive an index per tool group (one index per lot, or one per
//! visit) and are dealt to subgroups round robin by that index. Optionally,
//! within a subgroup, all operations sharing a setup are pinned to a single
//! machine, heaviest setups first, each to the least loaded machine.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::instance::{Instance, Machine, SetupReq, ToolGroupId};
use crate::schedule::OpRef;

/// How operations of one lot are indexed within a tool group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum LotStep {
    /// Every visit of a lot shares the lot's index (`lot_step` 0).
    #[default]
    Common,
    /// Successive visits of a lot get successive indexes (`lot_step` 1).
    Successive,
}

impl LotStep {
    pub fn value(self) -> u32 {
        match self {
            LotStep::Common => 0,
            LotStep::Successive => 1,
        }
    }
}

impl TryFrom<u32> for LotStep {
    type Error = AllocConfigError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(LotStep::Common),
            1 => Ok(LotStep::Successive),
            _ => Err(AllocConfigError::LotStep(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocConfigError {
    #[error("lot_step must be 0 or 1, got {0}")]
    LotStep(u32),
}

/// `sub_size` 0 keeps assignments fully flexible, 1 fixes one machine per
/// operation. `by_setup` only has an effect for `sub_size` ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AllocConfig {
    pub sub_size: u32,
    pub lot_step: LotStep,
    pub by_setup: bool,
}

impl AllocConfig {
    pub fn new(sub_size: u32, lot_step: u32, by_setup: bool) -> Result<Self, AllocConfigError> {
        Ok(AllocConfig {
            sub_size,
            lot_step: LotStep::try_from(lot_step)?,
            by_setup,
        })
    }

    /// Full flexibility.
    pub fn flexible() -> Self {
        AllocConfig::default()
    }
}

impl fmt::Display for AllocConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sub_size={} lot_step={} by_setup={}",
            self.sub_size,
            self.lot_step.value(),
            self.by_setup
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    pub group: ToolGroupId,
    /// 1-based.
    pub ordinal: u32,
    pub machines: Vec<Machine>,
}

/// Machines each production operation may be assigned to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreallocationMap {
    pub map: BTreeMap<OpRef, Vec<Machine>>,
}

impl PreallocationMap {
    pub fn get(&self, op: &OpRef) -> Option<&[Machine]> {
        self.map.get(op).map(Vec::as_slice)
    }

    pub fn allows(&self, op: &OpRef, machine: &Machine) -> bool {
        self.get(op).is_some_and(|ms| ms.contains(machine))
    }
}

/// Cuts `machines` into ⌈N / sub_size⌉ contiguous subgroups whose sizes
/// differ by at most one, larger ones first.
pub fn partition_subgroups(group: &ToolGroupId, machines: &[Machine], sub_size: u32) -> Vec<Subgroup> {
    let n = machines.len();
    let k = (sub_size as usize).max(1);
    if n == 0 {
        return Vec::new();
    }
    let count = n.div_ceil(k);
    let (base, extra) = (n / count, n % count);
    let mut out = Vec::with_capacity(count);
    let mut at = 0;
    for s in 0..count {
        let size = base + usize::from(s < extra);
        out.push(Subgroup {
            group: group.clone(),
            ordinal: s as u32 + 1,
            machines: machines[at..at + size].to_vec(),
        });
        at += size;
    }
    out
}

/// Per tool group, numbers the operations visiting it in (lot, route index)
/// order. With [`LotStep::Common`] a lot's visits share the lot's ordinal
/// among the lots visiting the group; with [`LotStep::Successive`] every
/// visit gets the next number.
pub fn index_operations(inst: &Instance, lot_step: LotStep) -> BTreeMap<ToolGroupId, BTreeMap<OpRef, u32>> {
    let mut out: BTreeMap<ToolGroupId, BTreeMap<OpRef, u32>> = BTreeMap::new();
    let mut next: BTreeMap<&ToolGroupId, u32> = BTreeMap::new();
    for lot in &inst.lots {
        let Some(route) = inst.route(&lot.product) else {
            continue;
        };
        let mut lot_index: BTreeMap<&ToolGroupId, u32> = BTreeMap::new();
        for op in &route.steps {
            let counter = next.entry(&op.group).or_insert(0);
            let index = match lot_step {
                LotStep::Common => *lot_index.entry(&op.group).or_insert_with(|| {
                    *counter += 1;
                    *counter - 1
                }),
                LotStep::Successive => {
                    *counter += 1;
                    *counter - 1
                }
            };
            out.entry(op.group.clone())
                .or_default()
                .insert(OpRef::new(lot.id.clone(), op.index), index);
        }
    }
    out
}

/// Round robin: index k goes to subgroup (k mod n) + 1, returned as a
/// position into `subgroups`.
pub fn allocate_subgroups(indexes: &BTreeMap<OpRef, u32>, subgroups: &[Subgroup]) -> BTreeMap<OpRef, usize> {
    let n = subgroups.len().max(1);
    indexes.iter().map(|(op, &k)| (op.clone(), k as usize % n)).collect()
}

/// Pins every setup occurring among `ops` to one machine of the subgroup.
/// Setups are taken by descending total processing time (ties: ascending
/// setup, `Any` first) and each goes to the machine with the least load so
/// far (ties: ascending machine id); load is summed processing time.
pub fn allocate_by_setup(subgroup: &Subgroup, ops: &[OpRef], inst: &Instance) -> BTreeMap<OpRef, Machine> {
    let mut by_setup: BTreeMap<SetupReq, (u64, Vec<&OpRef>)> = BTreeMap::new();
    for op in ops {
        let Some(spec) = inst.lot_op(&op.lot, op.index) else {
            continue;
        };
        let entry = by_setup.entry(spec.setup.clone()).or_default();
        entry.0 += spec.proc_time;
        entry.1.push(op);
    }
    let mut order: Vec<(SetupReq, (u64, Vec<&OpRef>))> = by_setup.into_iter().collect();
    // stable sort keeps ascending setup order among equal totals
    order.sort_by_key(|(_, (total, _))| std::cmp::Reverse(*total));

    let mut machines: Vec<&Machine> = subgroup.machines.iter().collect();
    machines.sort_by(|a, b| a.id.cmp(&b.id));
    let mut load = vec![0u64; machines.len()];
    let mut out = BTreeMap::new();
    for (_, (total, members)) in order {
        let Some(pick) = (0..machines.len()).min_by_key(|&i| (load[i], i)) else {
            break;
        };
        load[pick] += total;
        for op in members {
            out.insert(op.clone(), machines[pick].clone());
        }
    }
    out
}

pub fn build_prealloc(inst: &Instance, cfg: &AllocConfig) -> PreallocationMap {
    let mut map = BTreeMap::new();
    let indexes = index_operations(inst, cfg.lot_step);
    for (group, ops) in &indexes {
        let machines = inst.group_machines(group);
        if cfg.sub_size == 0 {
            for op in ops.keys() {
                map.insert(op.clone(), machines.to_vec());
            }
            continue;
        }
        let subgroups = partition_subgroups(group, machines, cfg.sub_size);
        let placed = allocate_subgroups(ops, &subgroups);
        if cfg.by_setup && cfg.sub_size >= 2 {
            for (s, sub) in subgroups.iter().enumerate() {
                let members: Vec<OpRef> = placed
                    .iter()
                    .filter(|(_, &p)| p == s)
                    .map(|(op, _)| op.clone())
                    .collect();
                for (op, machine) in allocate_by_setup(sub, &members, inst) {
                    map.insert(op, vec![machine]);
                }
            }
        } else {
            for (op, s) in placed {
                map.insert(op, subgroups[s].machines.clone());
            }
        }
    }
    PreallocationMap { map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{reference_instance, REFERENCE_FACTS};
    use crate::instance::{generate_instance, parse_facts, GeneratorParams};
    use proptest::prelude::*;

    fn machines(group: &str, n: u64) -> Vec<Machine> {
        (1..=n)
            .map(|id| Machine {
                group: group.into(),
                id: id.into(),
            })
            .collect()
    }

    fn ids(sub: &Subgroup) -> Vec<String> {
        sub.machines.iter().map(|m| m.id.to_string()).collect()
    }

    #[test]
    fn seven_machines_in_threes() {
        let g: ToolGroupId = "g".into();
        let subs = partition_subgroups(&g, &machines("g", 7), 3);
        let got: Vec<_> = subs.iter().map(ids).collect();
        assert_eq!(got, [vec!["1", "2", "3"], vec!["4", "5"], vec!["6", "7"]]);
        assert_eq!(subs.iter().map(|s| s.ordinal).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn small_partitions() {
        let g: ToolGroupId = "g".into();
        assert_eq!(partition_subgroups(&g, &machines("g", 3), 3).len(), 1);
        let sizes: Vec<_> = partition_subgroups(&g, &machines("g", 5), 2)
            .iter()
            .map(|s| s.machines.len())
            .collect();
        assert_eq!(sizes, [2, 2, 1]);
        assert_eq!(partition_subgroups(&g, &machines("g", 2), 3).len(), 1);
    }

    fn two_visit_instance() -> Instance {
        parse_facts(
            "tool(implant,1). tool(implant,2). tool(other,1).
             route(1,1,implant,5,1,1,0). route(1,2,other,5,1,1,0). route(1,3,implant,5,1,1,0).
             lot(1,1). lot(2,1).",
        )
        .unwrap()
    }

    #[test]
    fn common_and_successive_indexes() {
        let inst = two_visit_instance();
        let g: ToolGroupId = "implant".into();
        let common = &index_operations(&inst, LotStep::Common)[&g];
        let got: Vec<u32> = common.values().copied().collect();
        // ops sorted as 1[1], 1[3], 2[1], 2[3]
        assert_eq!(got, [0, 0, 1, 1]);
        let step = &index_operations(&inst, LotStep::Successive)[&g];
        assert_eq!(step.values().copied().collect::<Vec<_>>(), [0, 1, 2, 3]);
        assert_ne!(common, step);
    }

    #[test]
    fn single_visit_gets_index_zero() {
        let inst = parse_facts("tool(g,1). route(1,1,g,5,1,1,0). lot(1,1).").unwrap();
        for step in [LotStep::Common, LotStep::Successive] {
            let idx = index_operations(&inst, step);
            assert_eq!(idx[&ToolGroupId::from("g")].values().copied().collect::<Vec<_>>(), [0]);
        }
    }

    #[test]
    fn round_robin() {
        let g: ToolGroupId = "g".into();
        let subs = partition_subgroups(&g, &machines("g", 4), 2);
        let indexes: BTreeMap<OpRef, u32> = (0..4).map(|k| (OpRef::new(u64::from(k) + 1, 1), k)).collect();
        let placed = allocate_subgroups(&indexes, &subs);
        let ordinals: Vec<u32> = placed.values().map(|&s| subs[s].ordinal).collect();
        assert_eq!(ordinals, [1, 2, 1, 2]);
        let one = partition_subgroups(&g, &machines("g", 2), 2);
        assert!(allocate_subgroups(&indexes, &one).values().all(|&s| s == 0));
    }

    #[test]
    fn successive_visits_split_across_subgroups() {
        let inst = two_visit_instance();
        let cfg = AllocConfig::new(1, 1, false).unwrap();
        let map = build_prealloc(&inst, &cfg);
        let first = map.get(&OpRef::new(1u64, 1)).unwrap();
        let again = map.get(&OpRef::new(1u64, 3)).unwrap();
        assert_ne!(first, again);
        let cfg = AllocConfig::new(1, 0, false).unwrap();
        let map = build_prealloc(&inst, &cfg);
        assert_eq!(map.get(&OpRef::new(1u64, 1)), map.get(&OpRef::new(1u64, 3)));
    }

    fn reference_with_two_implant_machines() -> Instance {
        parse_facts(&format!("{REFERENCE_FACTS}\ntool(implant_128,2).")).unwrap()
    }

    #[test]
    fn by_setup_heavier_setup_first() {
        let inst = reference_with_two_implant_machines();
        let map = build_prealloc(&inst, &AllocConfig::new(2, 0, true).unwrap());
        let on = |l: u64, i: u32| map.get(&OpRef::new(l, i)).unwrap()[0].id.to_string();
        // su128_1 totals 16, su128_2 totals 14
        assert_eq!((on(1, 3), on(2, 3)), ("1".into(), "1".into()));
        assert_eq!((on(1, 5), on(2, 5)), ("2".into(), "2".into()));
    }

    #[test]
    fn by_setup_least_loaded() {
        let inst = parse_facts(
            "tool(g,1). tool(g,2). setup(g,a,1,0). setup(g,b,1,0). setup(g,c,1,0).
             route(1,1,g,10,1,1,a). route(2,1,g,8,1,1,b). route(3,1,g,6,1,1,c).
             lot(1,1). lot(2,2). lot(3,3).",
        )
        .unwrap();
        let sub = &partition_subgroups(&"g".into(), inst.group_machines(&"g".into()), 2)[0];
        let ops: Vec<OpRef> = (1..=3).map(|l| OpRef::new(l as u64, 1)).collect();
        let got = allocate_by_setup(sub, &ops, &inst);
        let machine_of = |l: u64| got[&OpRef::new(l, 1)].id.to_string();
        assert_eq!([machine_of(1), machine_of(2), machine_of(3)], ["1", "2", "2"]);
        let load = |m: &str| -> u64 {
            got.iter()
                .filter(|(_, mm)| mm.id.to_string() == m)
                .map(|(op, _)| inst.lot_op(&op.lot, op.index).unwrap().proc_time)
                .sum()
        };
        assert_eq!((load("1"), load("2")), (10, 14));
    }

    #[test]
    fn by_setup_single_machine() {
        let inst = reference_instance();
        let map = build_prealloc(&inst, &AllocConfig::new(2, 0, true).unwrap());
        assert!(map.map.values().all(|ms| ms.len() == 1));
    }

    #[test]
    fn reference_every_config_picks_the_only_machine() {
        let inst = reference_instance();
        for sub_size in 0..=3 {
            for lot_step in 0..=1 {
                for by_setup in [false, true] {
                    let map = build_prealloc(&inst, &AllocConfig::new(sub_size, lot_step, by_setup).unwrap());
                    assert_eq!(map.map.len(), 10);
                    for (op, ms) in &map.map {
                        let group = &inst.lot_op(&op.lot, op.index).unwrap().group;
                        assert_eq!(ms, inst.group_machines(group));
                    }
                }
            }
        }
    }

    #[test]
    fn lot_step_is_restricted() {
        assert_eq!(AllocConfig::new(2, 2, false), Err(AllocConfigError::LotStep(2)));
    }

    fn seven_machine_instance() -> Instance {
        let mut facts = String::new();
        for m in 1..=7 {
            facts.push_str(&format!("tool(g,{m}). "));
        }
        facts.push_str("route(1,1,g,5,1,1,0). route(1,2,g,6,1,1,0).");
        for l in 1..=6 {
            facts.push_str(&format!(" lot({l},1)."));
        }
        parse_facts(&facts).unwrap()
    }

    #[test]
    fn seven_machine_group_subsets() {
        let inst = seven_machine_instance();
        let map = build_prealloc(&inst, &AllocConfig::new(3, 0, false).unwrap());
        assert!(map.map.values().all(|ms| ms.len() == 3 || ms.len() == 2));
        let full = build_prealloc(&inst, &AllocConfig::flexible());
        assert!(full.map.values().all(|ms| ms.len() == 7));
    }

    proptest! {
        #[test]
        fn partition_covers_disjointly(n in 1u64..=12, k in 1u32..=5) {
            let g: ToolGroupId = "g".into();
            let ms = machines("g", n);
            let subs = partition_subgroups(&g, &ms, k);
            prop_assert_eq!(subs.len(), (n as usize).div_ceil(k as usize));
            let flat: Vec<Machine> = subs.iter().flat_map(|s| s.machines.clone()).collect();
            prop_assert_eq!(flat, ms);
            let sizes: Vec<usize> = subs.iter().map(|s| s.machines.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert!(sizes.iter().all(|&s| s <= k as usize));
        }

        #[test]
        fn sets_are_nonempty_subsets_and_shrink(seed in 0u64..200, lot_step in 0u32..=1, by_setup: bool) {
            let inst = generate_instance(&GeneratorParams {
                n_lots: 4,
                machines_per_group: 3,
                seed,
                ..GeneratorParams::default()
            }).unwrap();
            let fixed = build_prealloc(&inst, &AllocConfig::new(1, lot_step, false).unwrap());
            let three = build_prealloc(&inst, &AllocConfig::new(3, lot_step, by_setup).unwrap());
            let full = build_prealloc(&inst, &AllocConfig::flexible());
            prop_assert_eq!(&three, &build_prealloc(&inst, &AllocConfig::new(3, lot_step, by_setup).unwrap()));
            for (op, ms) in &full.map {
                let group = &inst.lot_op(&op.lot, op.index).unwrap().group;
                prop_assert_eq!(ms.as_slice(), inst.group_machines(group));
                prop_assert_eq!(fixed.map[op].len(), 1);
                prop_assert!(!three.map[op].is_empty());
                // one subgroup per group: fixed ⊆ size-3 without by_setup ⊆ full
                if !by_setup {
                    prop_assert!(three.map[op].contains(&fixed.map[op][0]));
                }
                prop_assert!(three.map[op].iter().all(|m| ms.contains(m)));
            }
        }
    }
}
