#![allow(dead_code)]

use smsp_core::instance::{generate_instance, GeneratorParams};
use smsp_core::oracle::OracleLimits;
use smsp_core::Instance;

/// Micro-instances small enough for the oracle: 2–3 lots, routes of 2–4
/// operations, 2–3 groups of 1–2 machines.
pub fn micro_params(seed: u64) -> GeneratorParams {
    GeneratorParams {
        n_lots: 2 + (seed % 2) as u32,
        n_products: 1 + u32::from(seed.is_multiple_of(3)),
        route_len: 2 + (seed % 3) as u32,
        n_groups: 2 + (seed % 2) as u32,
        machines_per_group: 1 + ((seed / 2) % 2) as u32,
        batch_fraction: 0.3,
        seed,
    }
}

pub fn micro_instance(seed: u64) -> Instance {
    generate_instance(&micro_params(seed)).expect("generator")
}

pub fn oracle_limits() -> OracleLimits {
    OracleLimits::default()
}
