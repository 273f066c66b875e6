//! The JSON schedule document: an array of machines, each with its ordered
//! slots. Start times and durations are informative on input; they are
//! recomputed from the instance when a document is evaluated.

use serde::{Deserialize, Serialize};

use super::{GlobalSchedule, MachineSchedule, OpRef, Slot, TimedSchedule};
use crate::instance::{Machine, MachineId, MaintLabel, SetupId, ToolGroupId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineEntry {
    pub group: ToolGroupId,
    pub machine: MachineId,
    pub slots: Vec<SlotEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SlotBody {
    Batch { ops: Vec<OpRef> },
    Setup { setup: SetupId },
    Maint { label: MaintLabel },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    #[serde(flatten)]
    pub body: SlotBody,
    #[serde(default)]
    pub start: u64,
    #[serde(default)]
    pub duration: u64,
}

pub fn to_document(ts: &TimedSchedule) -> Vec<MachineEntry> {
    ts.schedule
        .machines
        .iter()
        .enumerate()
        .map(|(m, ms)| MachineEntry {
            group: ms.machine.group.clone(),
            machine: ms.machine.id.clone(),
            slots: ms
                .slots
                .iter()
                .enumerate()
                .map(|(j, slot)| SlotEntry {
                    body: match slot {
                        Slot::Batch(ops) => SlotBody::Batch { ops: ops.clone() },
                        Slot::SetupChange(s) => SlotBody::Setup { setup: s.clone() },
                        Slot::Maint(l) => SlotBody::Maint { label: l.clone() },
                    },
                    start: ts.start[m][j],
                    duration: ts.duration[m][j],
                })
                .collect(),
        })
        .collect()
}

pub fn schedule_to_json(ts: &TimedSchedule) -> String {
    serde_json::to_string_pretty(&to_document(ts)).expect("schedule documents serialize")
}

/// Reads the slot structure of a schedule document, ignoring its times.
pub fn schedule_from_json(text: &str) -> Result<GlobalSchedule, serde_json::Error> {
    let doc: Vec<MachineEntry> = serde_json::from_str(text)?;
    Ok(GlobalSchedule {
        machines: doc
            .into_iter()
            .map(|entry| {
                MachineSchedule::new(
                    Machine {
                        group: entry.group,
                        id: entry.machine,
                    },
                    entry
                        .slots
                        .into_iter()
                        .map(|s| match s.body {
                            SlotBody::Batch { ops } => Slot::batch(ops),
                            SlotBody::Setup { setup } => Slot::SetupChange(setup),
                            SlotBody::Maint { label } => Slot::Maint(label),
                        })
                        .collect(),
                )
            })
            .collect(),
    })
}
