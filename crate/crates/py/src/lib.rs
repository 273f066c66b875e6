//! Python bindings: parse or generate instances, evaluate JSON schedules,
//! solve, and run the oracle.

use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use smsp_core::instance::{generate_instance, validate_instance, GeneratorParams};
use smsp_core::oracle::{oracle_optimum as core_oracle, OracleError, OracleLimits};
use smsp_core::prealloc::AllocConfig;
use smsp_core::render::{gantt_svg, gantt_text, GanttOptions};
use smsp_core::schedule::{compute_start_times, evaluate_timed, schedule_from_json, schedule_to_json, TimedSchedule};
use smsp_core::solver::{self, SearchMode, SolveError, SolverConfig};
use smsp_core::Objectives;

create_exception!(smsp, InfeasibleError, PyException, "No feasible schedule exists.");

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn triple(o: Objectives) -> (u64, u32, u32) {
    (o.makespan, o.setup_violations, o.batch_violations)
}

/// A scheduling problem: tool groups, machines, routes, setups,
/// maintenance and lots.
#[pyclass(frozen)]
struct Instance {
    inner: smsp_core::Instance,
}

#[pymethods]
impl Instance {
    /// Parses fact-format text.
    #[staticmethod]
    fn from_facts(text: &str) -> PyResult<Self> {
        let inner = smsp_core::parse_facts(text).map_err(value_error)?;
        Ok(Instance { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (lots=7, products=2, route_len=10, groups=3, machines=3, batch_fraction=0.2, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        lots: u32,
        products: u32,
        route_len: u32,
        groups: u32,
        machines: u32,
        batch_fraction: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = generate_instance(&GeneratorParams {
            n_lots: lots,
            n_products: products,
            route_len,
            n_groups: groups,
            machines_per_group: machines,
            batch_fraction,
            seed,
        })
        .map_err(value_error)?;
        Ok(Instance { inner })
    }

    fn to_facts(&self) -> String {
        smsp_core::serialize_facts(&self.inner)
    }

    /// Violated invariants; empty when the instance is valid.
    fn validate(&self) -> Vec<String> {
        validate_instance(&self.inner).iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn n_lots(&self) -> usize {
        self.inner.lots.len()
    }

    #[getter]
    fn n_operations(&self) -> usize {
        self.inner.operation_count()
    }

    #[getter]
    fn n_machines(&self) -> usize {
        self.inner.machine_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(lots={}, operations={}, machines={})",
            self.inner.lots.len(),
            self.inner.operation_count(),
            self.inner.machine_count()
        )
    }
}

/// Outcome of `solve`.
#[pyclass(frozen, get_all)]
struct SolveResult {
    /// (makespan, setup violations, batch violations), or None.
    objectives: Option<(u64, u32, u32)>,
    stage1_optimal: bool,
    stage2_optimal: bool,
    stage1_time: f64,
    stage2_time: f64,
    /// (elapsed seconds, makespan, setup, batch) per incumbent.
    log: Vec<(f64, u64, u32, u32)>,
    nodes: u64,
    schedule_json: Option<String>,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(objectives={:?}, stage1_optimal={}, stage2_optimal={})",
            self.objectives, self.stage1_optimal, self.stage2_optimal
        )
    }
}

fn alloc(sub_size: u32, lot_step: u32, by_setup: bool) -> PyResult<AllocConfig> {
    AllocConfig::new(sub_size, lot_step, by_setup).map_err(value_error)
}

fn seconds(limit: Option<f64>) -> PyResult<Option<Duration>> {
    limit
        .map(|s| Duration::try_from_secs_f64(s).map_err(value_error))
        .transpose()
}

/// Two-stage solve. Limits are in seconds; None means unlimited.
#[pyfunction]
#[pyo3(signature = (instance, stage1_limit=None, stage2_limit=None, sub_size=0, lot_step=0, by_setup=false, search="exact", seed=0))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    instance: &Instance,
    stage1_limit: Option<f64>,
    stage2_limit: Option<f64>,
    sub_size: u32,
    lot_step: u32,
    by_setup: bool,
    search: &str,
    seed: u64,
) -> PyResult<SolveResult> {
    let search = match search {
        "exact" => SearchMode::ExactBnb,
        "greedy" => SearchMode::GreedySeedThenBnb,
        other => return Err(value_error(format!("unknown search mode {other:?}"))),
    };
    let cfg = SolverConfig {
        stage1_limit: seconds(stage1_limit)?,
        stage2_limit: seconds(stage2_limit)?,
        prealloc: alloc(sub_size, lot_step, by_setup)?,
        search,
        rng_seed: seed,
    };
    let inst = &instance.inner;
    let r = py.detach(|| solver::solve(inst, &cfg)).map_err(|e| match e {
        SolveError::NoFeasibleSchedule => InfeasibleError::new_err(e.to_string()),
        SolveError::Config(_) => value_error(e),
    })?;
    Ok(SolveResult {
        objectives: r.objectives.map(triple),
        stage1_optimal: r.stage1_optimal,
        stage2_optimal: r.stage2_optimal,
        stage1_time: r.stage1_time.as_secs_f64(),
        stage2_time: r.stage2_time.as_secs_f64(),
        log: r
            .log
            .iter()
            .map(|i| {
                let (m, s, b) = triple(i.objectives);
                (i.elapsed.as_secs_f64(), m, s, b)
            })
            .collect(),
        nodes: r.nodes,
        schedule_json: r.best.as_ref().map(schedule_to_json),
    })
}

fn timed(instance: &Instance, schedule_json: &str) -> PyResult<(TimedSchedule, Objectives)> {
    let gs = schedule_from_json(schedule_json).map_err(value_error)?;
    evaluate_timed(&gs, &instance.inner).map_err(value_error)
}

/// Objectives of a JSON schedule; raises ValueError naming the violated
/// constraint when it is infeasible.
#[pyfunction]
fn evaluate(instance: &Instance, schedule_json: &str) -> PyResult<(u64, u32, u32)> {
    Ok(triple(timed(instance, schedule_json)?.1))
}

/// Makespan lower bound of the empty schedule under a preallocation.
#[pyfunction]
#[pyo3(signature = (instance, sub_size=0, lot_step=0, by_setup=false))]
fn lower_bound(instance: &Instance, sub_size: u32, lot_step: u32, by_setup: bool) -> PyResult<u64> {
    solver::lower_bound(&instance.inner, &alloc(sub_size, lot_step, by_setup)?).map_err(value_error)
}

/// Exhaustive optimum of a micro-instance: (objectives, schedule JSON).
#[pyfunction]
#[pyo3(signature = (instance, max_lots=3, max_ops_per_lot=4, max_machines_per_group=2, max_states=10_000_000))]
fn oracle_optimum(
    py: Python<'_>,
    instance: &Instance,
    max_lots: usize,
    max_ops_per_lot: usize,
    max_machines_per_group: usize,
    max_states: u64,
) -> PyResult<((u64, u32, u32), String)> {
    let limits = OracleLimits {
        max_lots,
        max_ops_per_lot,
        max_machines_per_group,
        max_enumerated_states: max_states,
    };
    let inst = &instance.inner;
    let best = py.detach(|| core_oracle(inst, &limits)).map_err(|e| match e {
        OracleError::NoFeasibleSchedule => InfeasibleError::new_err(e.to_string()),
        other => value_error(other),
    })?;
    let ts = compute_start_times(&best.schedule, inst).map_err(value_error)?;
    Ok((triple(best.objectives), schedule_to_json(&ts)))
}

/// Gantt chart of a JSON schedule, as "svg" or "text".
#[pyfunction]
#[pyo3(signature = (instance, schedule_json, format="svg", scale=1.0))]
fn gantt(instance: &Instance, schedule_json: &str, format: &str, scale: f64) -> PyResult<String> {
    let (ts, _) = timed(instance, schedule_json)?;
    let opts = GanttOptions {
        scale,
        ..GanttOptions::default()
    };
    match format {
        "svg" => Ok(gantt_svg(&ts, &opts)),
        "text" => Ok(gantt_text(&ts, &opts)),
        other => Err(value_error(format!("unknown format {other:?}"))),
    }
}

#[pymodule]
fn smsp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<SolveResult>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(gantt, m)?)?;
    Ok(())
}
