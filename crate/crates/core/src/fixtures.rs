//! The two-lot reference instance and its optimal schedule, shared by unit
//! tests, integration tests and the bindings.

use crate::instance::{parse_facts, Instance, Machine};
use crate::schedule::{GlobalSchedule, MachineSchedule, OpRef, Slot};

/// Two lots of one product over three single-machine tool groups. The
/// lexicographic optimum is makespan 89, one setup violation, no batch
/// violation.
pub const REFERENCE_FACTS: &str = include_str!("../../../data/reference.lp");

pub fn reference_instance() -> Instance {
    parse_facts(REFERENCE_FACTS).expect("bundled instance parses")
}

fn machine(group: &str) -> Machine {
    Machine {
        group: group.into(),
        id: 1u64.into(),
    }
}

fn b(ops: &[(u64, u32)]) -> Slot {
    Slot::batch(ops.iter().map(|&(l, i)| OpRef::new(l, i)))
}

/// The optimal schedule of [`REFERENCE_FACTS`]: both lots batched on diffusion,
/// one lithotrack maintenance between the passes, and on implant a switch
/// from `su128_1` to `su128_2` after two lots with a maintenance before the
/// last operation.
pub fn reference_schedule() -> GlobalSchedule {
    GlobalSchedule {
        machines: vec![
            MachineSchedule::new(machine("diffusion_fe_120"), vec![b(&[(1, 1), (2, 1)])]),
            MachineSchedule::new(
                machine("implant_128"),
                vec![
                    Slot::SetupChange("su128_1".into()),
                    b(&[(2, 3)]),
                    b(&[(1, 3)]),
                    Slot::SetupChange("su128_2".into()),
                    b(&[(2, 5)]),
                    Slot::Maint("implant_128_mn".into()),
                    b(&[(1, 5)]),
                ],
            ),
            MachineSchedule::new(
                machine("lithotrack_fe_95"),
                vec![
                    Slot::SetupChange("su450_3".into()),
                    b(&[(2, 2)]),
                    b(&[(1, 2)]),
                    Slot::Maint("lithotrack_fe_95_wk".into()),
                    b(&[(1, 4)]),
                    b(&[(2, 4)]),
                ],
            ),
        ],
    }
}
