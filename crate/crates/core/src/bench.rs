//! Runs a matrix of preallocation strategies over a set of instances and
//! tabulates the solver results, one row per (instance, configuration).

use std::fmt;
use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

use crate::instance::Instance;
use crate::prealloc::{AllocConfig, LotStep};
use crate::solver::{solve, SolveError, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Strategy {
    /// One machine per operation.
    Fixed,
    /// Subgroups of machines, operations spread by index.
    Flexible,
    /// Subgroups, then one machine per operation balanced by setup.
    Setup,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BenchConfig {
    pub strategy: Strategy,
    pub size: u32,
    pub lot_step: LotStep,
}

impl BenchConfig {
    pub fn alloc(&self) -> AllocConfig {
        AllocConfig {
            sub_size: self.size,
            lot_step: self.lot_step,
            by_setup: self.strategy == Strategy::Setup,
        }
    }
}

impl fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.strategy, self.size, self.lot_step.value())
    }
}

/// The eight configurations compared for three-machine groups: Fixed size 1,
/// Flexible sizes 2 and 3, Setup sizes 2 and 3, each with both lot steps
/// unless the subgroup spans the whole group.
pub fn strategy_matrix() -> Vec<BenchConfig> {
    use LotStep::{Common, Successive};
    use Strategy::*;
    [
        (Fixed, 1, Common),
        (Fixed, 1, Successive),
        (Flexible, 2, Common),
        (Flexible, 2, Successive),
        (Flexible, 3, Common),
        (Setup, 2, Common),
        (Setup, 2, Successive),
        (Setup, 3, Common),
    ]
    .into_iter()
    .map(|(strategy, size, lot_step)| BenchConfig {
        strategy,
        size,
        lot_step,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub strategy: Strategy,
    pub size: u32,
    pub lot_step: u32,
    pub makespan: Option<u64>,
    pub setup_viol: Option<u32>,
    pub batch_viol: Option<u32>,
    /// Seconds; the stage limit when the stage timed out.
    pub stage1_time: f64,
    pub stage2_time: f64,
    pub stage1_optimal: bool,
    pub stage2_optimal: bool,
    pub error: Option<String>,
}

impl BenchRow {
    /// A row for an instance that could not be run at all.
    pub fn failed(id: &str, config: &BenchConfig, error: impl Into<String>) -> Self {
        BenchRow {
            instance: id.to_string(),
            strategy: config.strategy,
            size: config.size,
            lot_step: config.lot_step.value(),
            makespan: None,
            setup_viol: None,
            batch_viol: None,
            stage1_time: 0.0,
            stage2_time: 0.0,
            stage1_optimal: false,
            stage2_optimal: false,
            error: Some(error.into()),
        }
    }
}

/// Solves one instance under one configuration. `base` supplies limits,
/// search mode and seed.
pub fn run_one(id: &str, inst: &Instance, config: &BenchConfig, base: &SolverConfig) -> BenchRow {
    let cfg = SolverConfig {
        prealloc: config.alloc(),
        ..base.clone()
    };
    let mut row = BenchRow::failed(id, config, "");
    row.error = None;
    let timed_out = |optimal: bool, took: Duration, limit: Option<Duration>| match (optimal, limit) {
        (false, Some(limit)) => limit.as_secs_f64(),
        _ => took.as_secs_f64(),
    };
    match solve(inst, &cfg) {
        Ok(r) => {
            if let Some(obj) = r.objectives {
                row.makespan = Some(obj.makespan);
                row.setup_viol = Some(obj.setup_violations);
                row.batch_viol = Some(obj.batch_violations);
            } else {
                row.error = Some("no schedule within the time limit".into());
            }
            row.stage1_optimal = r.stage1_optimal;
            row.stage2_optimal = r.stage2_optimal && r.objectives.is_some();
            row.stage1_time = timed_out(r.stage1_optimal, r.stage1_time, cfg.stage1_limit);
            row.stage2_time = if r.objectives.is_some() {
                timed_out(r.stage2_optimal, r.stage2_time, cfg.stage2_limit)
            } else {
                0.0
            };
        }
        Err(e @ (SolveError::NoFeasibleSchedule | SolveError::Config(_))) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every configuration on every instance with up to `threads` workers.
/// Rows come out ordered by instance, then configuration.
pub fn run_bench(
    instances: &[(String, Instance)],
    configs: &[BenchConfig],
    base: &SolverConfig,
    threads: usize,
) -> Vec<BenchRow> {
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..configs.len()).map(move |c| (i, c)))
        .collect();
    let results: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, c)) = jobs.get(j) else { break };
                let (id, inst) = &instances[i];
                let row = run_one(id, inst, &configs[c], base);
                results.lock().expect("bench results")[j] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("bench results")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// CSV with a header row, also for an empty table.
pub fn write_csv<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "instance",
        "strategy",
        "size",
        "lot_step",
        "makespan",
        "setup_viol",
        "batch_viol",
        "stage1_time",
        "stage2_time",
        "stage1_optimal",
        "stage2_optimal",
        "error",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_instance;

    #[test]
    fn matrix_has_eight_distinct_configs() {
        let m = strategy_matrix();
        assert_eq!(m.len(), 8);
        let mut seen = std::collections::HashSet::new();
        assert!(m.iter().all(|c| seen.insert(*c)));
        assert_eq!(m[7].alloc(), AllocConfig::new(3, 0, true).unwrap());
    }

    #[test]
    fn rows_follow_instance_then_config_order() {
        let base = SolverConfig::exact();
        let instances = vec![
            ("a".to_string(), reference_instance()),
            ("b".to_string(), reference_instance()),
        ];
        let configs = &strategy_matrix()[..2];
        let rows = run_bench(&instances, configs, &base, 3);
        let keys: Vec<_> = rows.iter().map(|r| (r.instance.as_str(), r.lot_step)).collect();
        assert_eq!(keys, [("a", 0), ("a", 1), ("b", 0), ("b", 1)]);
        // one machine per group: every strategy is full flexibility
        assert!(rows
            .iter()
            .all(|r| r.makespan == Some(89) && r.stage1_optimal && r.stage2_optimal));
    }

    #[test]
    fn empty_table_has_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("instance,strategy,size,lot_step,makespan"));
    }

    #[test]
    fn csv_rows_leave_missing_values_empty() {
        let row = BenchRow {
            instance: "x".into(),
            strategy: Strategy::Setup,
            size: 3,
            lot_step: 0,
            makespan: None,
            setup_viol: None,
            batch_viol: None,
            stage1_time: 1.5,
            stage2_time: 0.0,
            stage1_optimal: false,
            stage2_optimal: false,
            error: Some("no feasible schedule exists".into()),
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1),
            Some("x,Setup,3,0,,,,1.5,0.0,false,false,no feasible schedule exists")
        );
    }
}
