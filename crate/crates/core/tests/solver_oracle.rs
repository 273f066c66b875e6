mod common;

use smsp_core::oracle::{oracle_optimum, OracleError};
use smsp_core::solver::{solve, SearchMode, SolverConfig};

#[test]
fn exact_solver_matches_oracle_on_micro_instances() {
    let mut compared = 0;
    for seed in 0..80 {
        let inst = common::micro_instance(seed);
        let expected = match oracle_optimum(&inst, &common::oracle_limits()) {
            Ok(best) => Ok(best.objectives),
            Err(OracleError::NoFeasibleSchedule) => Err(()),
            Err(OracleError::LimitExceeded(_) | OracleError::TooLarge { .. }) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        for search in [SearchMode::ExactBnb, SearchMode::GreedySeedThenBnb] {
            let cfg = SolverConfig {
                search,
                rng_seed: seed,
                ..SolverConfig::exact()
            };
            let got = solve(&inst, &cfg).map_err(|_| ()).map(|r| {
                assert!(r.stage1_optimal && r.stage2_optimal, "seed {seed}");
                r.objectives.unwrap()
            });
            assert_eq!(got, expected, "seed {seed} {search:?}");
        }
        compared += 1;
    }
    assert!(compared >= 50, "only {compared} instances within oracle limits");
}
