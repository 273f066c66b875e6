//! Generated instances are valid and survive the fact format unchanged.

use smsp_core::instance::{generate_instance, validate_instance, GeneratorParams};
use smsp_core::{parse_facts, serialize_facts};

#[test]
fn every_seed_yields_a_valid_round_tripping_instance() {
    for seed in 0..1000u64 {
        let params = GeneratorParams {
            n_lots: 1 + (seed % 10) as u32,
            n_products: 1 + (seed % 3) as u32,
            route_len: 1 + (seed % 11) as u32,
            n_groups: 1 + (seed % 4) as u32,
            machines_per_group: 1 + (seed / 3 % 4) as u32,
            batch_fraction: (seed % 5) as f64 / 8.0,
            seed,
        };
        let inst = generate_instance(&params).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let problems = validate_instance(&inst);
        assert!(problems.is_empty(), "seed {seed}: {problems:?}");
        assert_eq!(inst.lots.len(), params.n_lots as usize);
        let text = serialize_facts(&inst);
        assert_eq!(parse_facts(&text).unwrap(), inst, "seed {seed}");
    }
}
