//! Python bindings: scheduling problems and plans, the knapsack solvers,
//! visibility and link models, and single scenario runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use coopercept::channel::{link_probability, ChannelConfig, LossModel};
use coopercept::geometry::{Point2, VehicleId};
use coopercept::harness::{run_scenario, ScenarioConfig};
use coopercept::scheduler::{
    agnostic_schedule, fptas_plan, fptas_schedule, greedy_schedule, knapsack_exact, mdp_optimal, optimal_plan, priorities,
    AgnosticState, ChannelMatrix, FramePlan, Item, SchedulerInput, DEFAULT_RESOLUTION,
};
use coopercept::spatial::{visibility_from, ObjectId};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One interval's scheduling problem. Items are `(tx, object, size, rewards)`
/// with `rewards` indexed like `peers`.
#[pyclass(module = "coopercept", skip_from_py_object)]
#[derive(Clone)]
struct Problem {
    input: SchedulerInput,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (peers, items, frame_budgets, starvation=false, received=None))]
    fn new(
        peers: Vec<u32>,
        items: Vec<(u32, u64, u64, Vec<f64>)>,
        frame_budgets: Vec<u64>,
        starvation: bool,
        received: Option<Vec<Vec<bool>>>,
    ) -> PyResult<Self> {
        let mut peers: Vec<VehicleId> = peers.into_iter().map(VehicleId).collect();
        peers.sort();
        let items = items
            .into_iter()
            .map(|(tx, object, size, rewards)| Item { tx: VehicleId(tx), object: ObjectId(object), size, rewards, starvation: 0 })
            .collect();
        let mut input = SchedulerInput::new(peers, items, frame_budgets, starvation);
        if let Some(h) = received {
            input.received = h;
        }
        input.validate().map_err(py_err)?;
        Ok(Self { input })
    }

    /// Sets the unserved-interval counter of each item.
    fn set_starvation(&mut self, counts: Vec<u32>) -> PyResult<()> {
        if counts.len() != self.input.items.len() {
            return Err(py_err("one count per item required"));
        }
        for (it, m) in self.input.items.iter_mut().zip(counts) {
            it.starvation = m;
        }
        Ok(())
    }

    fn priorities(&self) -> Vec<f64> {
        priorities(&self.input)
    }

    fn greedy(&self) -> Plan {
        Plan::of(greedy_schedule(&self.input), &self.input)
    }

    #[pyo3(signature = (resolution=DEFAULT_RESOLUTION))]
    fn optimal(&self, resolution: u64) -> Plan {
        Plan::of(optimal_plan(&self.input, resolution), &self.input)
    }

    #[pyo3(signature = (eps=0.1))]
    fn fptas(&self, eps: f64) -> PyResult<Plan> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(py_err("eps must lie in (0, 1)"));
        }
        Ok(Plan::of(fptas_plan(&self.input, eps), &self.input))
    }

    fn agnostic(&self) -> Plan {
        Plan::of(agnostic_schedule(&self.input, &mut AgnosticState::default()), &self.input)
    }

    /// Expected reward of the optimal adaptive policy when every link delivers
    /// with probability `p`, and the items it broadcasts first.
    fn mdp(&self, p: f64) -> PyResult<(f64, Vec<usize>)> {
        let matrix = ChannelMatrix::uniform(self.input.peers.clone(), p);
        let s = mdp_optimal(&self.input, &matrix).map_err(py_err)?;
        Ok((s.value, s.first_action))
    }

    fn __len__(&self) -> usize {
        self.input.items.len()
    }
}

#[pyclass(module = "coopercept", frozen)]
struct Plan {
    /// `(frame, item index)` in broadcast order.
    #[pyo3(get)]
    assignments: Vec<(usize, usize)>,
    #[pyo3(get)]
    used: Vec<u64>,
    #[pyo3(get)]
    total_weight: f64,
}

impl Plan {
    fn of(plan: FramePlan, input: &SchedulerInput) -> Self {
        Self {
            assignments: plan.assignments.iter().map(|a| (a.frame, a.item)).collect(),
            used: plan.used.clone(),
            total_weight: plan.total_weight(input),
        }
    }
}

#[pymethods]
impl Plan {
    fn __repr__(&self) -> String {
        format!("Plan(items={}, used={:?}, total_weight={})", self.assignments.len(), self.used, self.total_weight)
    }
}

/// 0/1 knapsack; returns `(value, chosen indices)`.
#[pyfunction]
#[pyo3(name = "knapsack_exact", signature = (values, sizes, budget, resolution=1))]
fn py_knapsack_exact(values: Vec<f64>, sizes: Vec<u64>, budget: u64, resolution: u64) -> PyResult<(f64, Vec<usize>)> {
    if values.len() != sizes.len() {
        return Err(py_err("values and sizes differ in length"));
    }
    let items: Vec<(f64, u64)> = values.into_iter().zip(sizes).collect();
    let s = knapsack_exact(&items, budget, resolution);
    Ok((s.value, s.items))
}

#[pyfunction]
#[pyo3(name = "knapsack_fptas")]
fn py_knapsack_fptas(values: Vec<f64>, sizes: Vec<u64>, budget: u64, eps: f64) -> PyResult<(f64, Vec<usize>)> {
    if values.len() != sizes.len() {
        return Err(py_err("values and sizes differ in length"));
    }
    let items: Vec<(f64, u64)> = values.into_iter().zip(sizes).collect();
    let s = fptas_schedule(&items, budget, eps);
    Ok((s.value, s.items))
}

/// Visibility from `observer` of each of the first `n_targets` polygons, the
/// others acting as occluders.
#[pyfunction]
#[pyo3(signature = (observer, shapes, n_targets=None, range=100.0))]
fn visibility(observer: (f64, f64), shapes: Vec<Vec<(f64, f64)>>, n_targets: Option<usize>, range: f64) -> Vec<bool> {
    let pts: Vec<Vec<Point2>> = shapes.into_iter().map(|s| s.into_iter().map(|(x, y)| [x, y]).collect()).collect();
    let refs: Vec<&[Point2]> = pts.iter().map(|s| s.as_slice()).collect();
    visibility_from([observer.0, observer.1], &refs, n_targets.unwrap_or(refs.len()), range, 0.0)
}

/// Default exponential link model, zero beyond `radio_range`.
#[pyfunction]
#[pyo3(signature = (distance, p0=0.95, delta=200.0, radio_range=170.0))]
fn link(distance: f64, p0: f64, delta: f64, radio_range: f64) -> f64 {
    if distance > radio_range {
        0.0
    } else {
        link_probability(distance, &LossModel::Exponential { p0, delta })
    }
}

#[pyfunction]
fn frame_budgets() -> Vec<u64> {
    ChannelConfig::default().budgets()
}

#[pyclass(module = "coopercept", frozen)]
struct RunResult {
    #[pyo3(get)]
    outcome: String,
    #[pyo3(get)]
    reaction_time_s: Option<f64>,
    #[pyo3(get)]
    closest_distance_m: Option<f64>,
    #[pyo3(get)]
    collider_visible_fraction: Option<f64>,
    #[pyo3(get)]
    total_reward: f64,
    #[pyo3(get)]
    sim_time_s: f64,
    /// Channel trace as CSV.
    #[pyo3(get)]
    trace: String,
}

#[pymethods]
impl RunResult {
    fn __repr__(&self) -> String {
        let closest = self.closest_distance_m.map_or("None".to_string(), |d| format!("{d:.3}"));
        format!("RunResult(outcome={:?}, closest_distance_m={closest}, sim_time_s={})", self.outcome, self.sim_time_s)
    }
}

/// Runs one scenario. `config` is an optional JSON document of further
/// settings; the keyword arguments override it.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (scenario, scheduler, density=10, speed=30.0, delta=0.0, seed=0, config=None))]
fn run(
    py: Python<'_>,
    scenario: &str,
    scheduler: &str,
    density: usize,
    speed: f64,
    delta: f64,
    seed: u64,
    config: Option<&str>,
) -> PyResult<RunResult> {
    let base: ScenarioConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(py_err)?,
        None => ScenarioConfig::default(),
    };
    let cfg = ScenarioConfig {
        scenario: scenario.parse().map_err(py_err)?,
        scheduler: scheduler.parse().map_err(py_err)?,
        density,
        speed_kmh: speed,
        delta_s: delta,
        seed,
        ..base
    };
    cfg.validate().map_err(py_err)?;
    let out = py.detach(|| run_scenario(&cfg)).map_err(py_err)?;
    let r = out.result;
    Ok(RunResult {
        outcome: r.outcome.name().to_string(),
        reaction_time_s: r.reaction_time_s,
        closest_distance_m: r.closest_distance_m,
        collider_visible_fraction: r.collider_visible_fraction,
        total_reward: r.total_reward,
        sim_time_s: r.sim_time_s,
        trace: out.trace,
    })
}

#[pymodule]
#[pyo3(name = "coopercept")]
fn coopercept_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Plan>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(py_knapsack_exact, m)?)?;
    m.add_function(wrap_pyfunction!(py_knapsack_fptas, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(link, m)?)?;
    m.add_function(wrap_pyfunction!(frame_budgets, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
