//! Seeded generator for scalable benchmark instances with re-entrant routes.
//!
//! Durations are drawn from 5..=25 time units. Maintenance windows are wide
//! enough that a machine can always make progress: whenever a batch would
//! overflow a window, the count already reached its minimum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    Instance, MaintLabel, MaintenanceSpec, OpSpec, ProductId, SetupId, SetupReq, SetupSpec, Term, ToolGroupId, Trigger,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub n_lots: u32,
    pub n_products: u32,
    pub route_len: u32,
    pub n_groups: u32,
    pub machines_per_group: u32,
    /// Share of operations that may be processed in batches.
    pub batch_fraction: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    /// Two products with 10-operation routes over three tool groups of three
    /// machines, seven lots.
    fn default() -> Self {
        GeneratorParams {
            n_lots: 7,
            n_products: 2,
            route_len: 10,
            n_groups: 3,
            machines_per_group: 3,
            batch_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
    #[error("batch_fraction must lie in [0, 1], got {0}")]
    BatchFraction(f64),
}

fn sym(s: String) -> Term {
    Term::Sym(s)
}

pub fn generate_instance(params: &GeneratorParams) -> Result<Instance, GeneratorError> {
    for (value, name) in [
        (params.n_lots, "n_lots"),
        (params.n_products, "n_products"),
        (params.route_len, "route_len"),
        (params.n_groups, "n_groups"),
        (params.machines_per_group, "machines_per_group"),
    ] {
        if value == 0 {
            return Err(GeneratorError::ZeroCount(name));
        }
    }
    if !(0.0..=1.0).contains(&params.batch_fraction) {
        return Err(GeneratorError::BatchFraction(params.batch_fraction));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut b = Instance::builder();

    let groups: Vec<ToolGroupId> = (1..=params.n_groups)
        .map(|g| ToolGroupId(sym(format!("tg{g}"))))
        .collect();
    let mut group_setups: Vec<Vec<SetupId>> = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for m in 1..=params.machines_per_group {
            b.machine(group.clone(), u64::from(m));
        }
        let n_setups = rng.random_range(4..=6);
        let mut ids = Vec::new();
        for k in 1..=n_setups {
            let id = SetupId(sym(format!("su{}_{k}", g + 1)));
            b.setup(SetupSpec {
                group: group.clone(),
                id: id.clone(),
                change_time: rng.random_range(15..=25),
                min_ops: rng.random_range(0..=3),
            });
            ids.push(id);
        }
        group_setups.push(ids);
    }

    // largest batch and processing time per group, for maintenance windows
    let mut max_batch = vec![1u64; groups.len()];
    let mut max_time = vec![5u64; groups.len()];

    for p in 1..=params.n_products {
        let product = ProductId::from(u64::from(p));
        let mut sequence: Vec<usize> = Vec::new();
        while sequence.len() < params.route_len as usize {
            let mut perm: Vec<usize> = (0..groups.len()).collect();
            perm.shuffle(&mut rng);
            if let (Some(&last), true) = (sequence.last(), perm.len() > 1) {
                if perm[0] == last {
                    perm.swap(0, 1);
                }
            }
            sequence.extend(perm);
        }
        sequence.truncate(params.route_len as usize);

        for (i, &g) in sequence.iter().enumerate() {
            let proc_time = rng.random_range(5..=20);
            let batching = rng.random_bool(params.batch_fraction);
            let (min_b, max_b, setup) = if batching {
                let max_b = rng.random_range(2..=4);
                (rng.random_range(2..=max_b), max_b, SetupReq::Any)
            } else {
                let ids = &group_setups[g];
                (1, 1, SetupReq::Setup(ids[rng.random_range(0..ids.len())].clone()))
            };
            max_batch[g] = max_batch[g].max(u64::from(max_b));
            max_time[g] = max_time[g].max(proc_time);
            b.route_step(OpSpec {
                product: product.clone(),
                index: i as u32 + 1,
                group: groups[g].clone(),
                proc_time,
                min_batch: min_b,
                max_batch: max_b,
                setup,
            });
        }
    }

    for (g, group) in groups.iter().enumerate() {
        let first = if g % 2 == 0 { Trigger::Time } else { Trigger::Lots };
        let mut triggers = vec![first];
        if rng.random_bool(0.3) {
            triggers.push(match first {
                Trigger::Time => Trigger::Lots,
                Trigger::Lots => Trigger::Time,
            });
        }
        for (k, trigger) in triggers.into_iter().enumerate() {
            let (min, max) = match trigger {
                Trigger::Lots => {
                    let min = rng.random_range(1..=3);
                    (min, min + max_batch[g] + rng.random_range(0..=3))
                }
                Trigger::Time => {
                    let min = rng.random_range(10..=30);
                    (min, min + max_time[g] + rng.random_range(0..=30))
                }
            };
            b.maintenance(MaintenanceSpec {
                group: group.clone(),
                label: MaintLabel(sym(format!("tg{}_pm{}", g + 1, k + 1))),
                trigger,
                min,
                max,
                duration: rng.random_range(10..=15),
            });
        }
    }

    for l in 1..=params.n_lots {
        let product = (l - 1) % params.n_products + 1;
        b.lot(u64::from(l), u64::from(product));
    }

    Ok(b.build().expect("generated declarations are consistent"))
}
