//! The search bound never exceeds the makespan of any schedule that extends
//! a partial state.

mod common;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smsp_core::oracle::enumerate_schedules;
use smsp_core::prealloc::{build_prealloc, AllocConfig};
use smsp_core::schedule::{compute_start_times, GlobalSchedule, Slot};
use smsp_core::solver::{DecisionModel, PartialState};

struct Completion {
    schedule: GlobalSchedule,
    start: Vec<Vec<u64>>,
    makespan: u64,
}

fn normalize(slot: &Slot) -> Slot {
    match slot {
        Slot::Batch(ops) => Slot::batch(ops.iter().cloned()),
        other => other.clone(),
    }
}

/// Whether `full` keeps every machine's partial slots as a prefix and starts
/// all other batches no earlier than `clock`.
fn extends(partial: &GlobalSchedule, full: &Completion, clock: u64) -> bool {
    for ms in &partial.machines {
        let Some(mi) = full.schedule.machines.iter().position(|x| x.machine == ms.machine) else {
            return false;
        };
        let slots = &full.schedule.machines[mi].slots;
        if slots.len() < ms.slots.len() || ms.slots.iter().zip(slots).any(|(a, b)| normalize(a) != normalize(b)) {
            return false;
        }
        for (j, slot) in slots.iter().enumerate().skip(ms.slots.len()) {
            if slot.is_production() && full.start[mi][j] < clock {
                return false;
            }
        }
    }
    true
}

#[test]
fn bound_is_admissible_on_random_partial_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut states = 0;
    let mut checked = 0;
    let mut seed = 0;
    while states < 1000 {
        let inst = common::micro_instance(seed);
        seed += 1;
        let mut completions = Vec::new();
        let ok = enumerate_schedules(&inst, &common::oracle_limits(), |gs, obj| {
            let timed = compute_start_times(gs, &inst).unwrap();
            completions.push(Completion {
                schedule: gs.clone(),
                start: timed.start,
                makespan: obj.makespan,
            });
            completions.len() < 20_000
        });
        if ok.is_err() || completions.is_empty() {
            continue;
        }
        let map = build_prealloc(&inst, &AllocConfig::flexible());
        let model = DecisionModel::new(&inst, &map).unwrap();
        for _ in 0..25 {
            let mut state = PartialState::new(&model);
            let depth = rng.random_range(0..=6);
            for _ in 0..depth {
                let cands = state.candidates();
                let Some(b) = cands.choose(&mut rng) else { break };
                state.apply(b.clone());
            }
            states += 1;
            let lb = state.lower_bound();
            let partial = state.to_schedule();
            for c in completions.iter().filter(|c| extends(&partial, c, state.clock())) {
                checked += 1;
                assert!(
                    lb <= c.makespan,
                    "seed {}: bound {lb} above completion {} after {:?}",
                    seed - 1,
                    c.makespan,
                    state.bundles().map(|b| b.slots(&model)).collect::<Vec<_>>()
                );
            }
            if state.is_complete() {
                assert_eq!(lb, state.makespan());
            }
        }
    }
    assert!(checked > 1000, "only {checked} completions checked");
    eprintln!("{states} states, {checked} completions");
}
