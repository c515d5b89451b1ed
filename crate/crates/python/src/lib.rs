//! Python bindings: scenes, the pushing model, the reward, the planners and
//! the benchmark harness. Structured results are returned as plain dicts.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pushsort_core::harness::{self, Algo, RunConfig, ScenarioSpec, TrajectoryLog};
use pushsort_core::planner::{self, derive_rng, Node, UniformRandomPolicy};
use pushsort_core::scene::{self as core_scene, Action, Pose2, SceneFile, ACTION_COUNT};
use pushsort_core::{objective, physics, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn pose_tuple(p: &Pose2) -> (f64, f64, f64) {
    (p.x, p.y, p.theta)
}

/// Robot and movable poses, each `(x, y, theta)`.
#[pyclass(name = "WorldState", module = "pushsort", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWorldState {
    inner: core_scene::WorldState,
}

#[pymethods]
impl PyWorldState {
    #[new]
    fn new(robot: (f64, f64, f64), movables: Vec<(f64, f64, f64)>) -> Self {
        let pose = |(x, y, t): (f64, f64, f64)| Pose2::new(x, y, t);
        Self {
            inner: core_scene::WorldState::new(pose(robot), movables.into_iter().map(pose).collect()),
        }
    }

    #[getter]
    fn robot(&self) -> (f64, f64, f64) {
        pose_tuple(&self.inner.robot)
    }

    #[getter]
    fn movables(&self) -> Vec<(f64, f64, f64)> {
        self.inner.movables.iter().map(pose_tuple).collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("WorldState(robot={:?}, movables={})", self.robot(), self.inner.movables.len())
    }
}

/// Static scene description: workspace, robot shape, movables, obstacles.
#[pyclass(name = "Scene", module = "pushsort", frozen)]
struct PyScene {
    inner: core_scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Parses a scene file; returns `(scene, start_state)`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<(Self, PyWorldState)> {
        let file = SceneFile::from_json(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (scene, state) = file.into_parts().map_err(to_py)?;
        Ok((Self { inner: scene }, PyWorldState { inner: state }))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<(Self, PyWorldState)> {
        let (scene, state) = SceneFile::load(path.as_ref()).map_err(to_py)?;
        Ok((Self { inner: scene }, PyWorldState { inner: state }))
    }

    fn to_json(&self, state: &PyWorldState) -> String {
        SceneFile::from_parts(&self.inner, &state.inner).to_json()
    }

    fn save(&self, state: &PyWorldState, path: &str) -> PyResult<()> {
        SceneFile::from_parts(&self.inner, &state.inner).save(path.as_ref()).map_err(to_py)
    }

    /// SVG top view of `state`.
    #[pyo3(signature = (state, caption = ""))]
    fn svg(&self, state: &PyWorldState, caption: &str) -> String {
        harness::render_svg(&self.inner, &state.inner, caption)
    }

    #[getter]
    fn workspace(&self) -> (f64, f64, f64, f64) {
        let ws = self.inner.workspace();
        (ws.min.x, ws.min.y, ws.max.x, ws.max.y)
    }

    #[getter]
    fn classes(&self) -> Vec<usize> {
        self.inner.movables().iter().map(|m| m.class_id).collect()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    #[getter]
    fn obstacle_count(&self) -> usize {
        self.inner.obstacles().len()
    }

    fn __len__(&self) -> usize {
        self.inner.movables().len()
    }

    fn is_valid(&self, state: &PyWorldState) -> bool {
        core_scene::is_valid(&self.inner, &state.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(movables={}, classes={}, obstacles={})",
            self.inner.movables().len(),
            self.inner.class_count(),
            self.inner.obstacles().len()
        )
    }
}

/// Planner and physics parameters; keyword arguments override defaults.
#[pyclass(name = "Config", module = "pushsort", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(py: Python<'_>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let inner = match overrides {
            None => RunConfig::default(),
            Some(d) => {
                let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
                RunConfig::from_json(&text).map_err(PyValueError::new_err)?
            }
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_loads(py, &self.inner.to_json())
    }

    fn __repr__(&self) -> String {
        format!("Config({})", self.inner.to_json().replace('\n', ""))
    }
}

fn config_or_default(cfg: Option<&PyConfig>) -> RunConfig {
    cfg.map_or_else(RunConfig::default, |c| c.inner.clone())
}

fn action_from(id: usize) -> PyResult<Action> {
    if id < ACTION_COUNT {
        Ok(Action::from_index(id))
    } else {
        Err(PyValueError::new_err(format!("action must be in 0..{ACTION_COUNT}, got {id}")))
    }
}

/// Samples a random scene; returns `(scene, start_state)`.
#[pyfunction]
#[pyo3(signature = (n_objects, n_classes, ratio_nonconvex = 0.0, n_obstacles = 0, workspace_side = 0.5, seed = 0))]
fn generate_scene(
    n_objects: usize,
    n_classes: usize,
    ratio_nonconvex: f64,
    n_obstacles: usize,
    workspace_side: f64,
    seed: u64,
) -> PyResult<(PyScene, PyWorldState)> {
    let spec = ScenarioSpec {
        n_objects,
        n_classes,
        ratio_nonconvex,
        n_obstacles,
        workspace_side,
        seed,
        ..ScenarioSpec::default()
    };
    let (scene, state) = harness::generate_scene(&spec, &mut derive_rng(seed, 0)).map_err(to_py)?;
    Ok((PyScene { inner: scene }, PyWorldState { inner: state }))
}

/// Reward breakdown: `e_self`, `e_other`, `e_obst`, `d_cent`, `g`.
#[pyfunction]
#[pyo3(signature = (scene, state, config = None))]
fn reward<'py>(
    py: Python<'py>,
    scene: &PyScene,
    state: &PyWorldState,
    config: Option<&PyConfig>,
) -> PyResult<Bound<'py, PyAny>> {
    scene.inner.check_state(&state.inner).map_err(to_py)?;
    let r = objective::reward(&scene.inner, &state.inner, &config_or_default(config).planner);
    let dict = PyDict::new(py);
    dict.set_item("e_self", r.e_self)?;
    dict.set_item("e_other", r.e_other)?;
    dict.set_item("e_obst", r.e_obst)?;
    dict.set_item("d_cent", r.d_cent)?;
    dict.set_item("g", r.g)?;
    Ok(dict.into_any())
}

#[pyfunction]
#[pyo3(signature = (scene, state, config = None))]
fn is_sorted(scene: &PyScene, state: &PyWorldState, config: Option<&PyConfig>) -> PyResult<bool> {
    scene.inner.check_state(&state.inner).map_err(to_py)?;
    Ok(objective::is_sorted(&scene.inner, &state.inner, &config_or_default(config).planner))
}

/// Executes action `action` (0-7 translations counterclockwise from east,
/// 8-9 rotations) through the noiseless model; returns `(next_state, info)`.
#[pyfunction]
#[pyo3(signature = (scene, state, action, config = None))]
fn step<'py>(
    py: Python<'py>,
    scene: &PyScene,
    state: &PyWorldState,
    action: usize,
    config: Option<&PyConfig>,
) -> PyResult<(PyWorldState, Bound<'py, PyDict>)> {
    let mut phys = config_or_default(config).physics;
    phys.noise_std_frac = 0.0;
    let r = physics::step(&scene.inner, &state.inner, action_from(action)?, &phys, None).map_err(to_py)?;
    let info = PyDict::new(py);
    info.set_item("contacted", r.contacted_any)?;
    info.set_item("out_of_bounds", r.out_of_bounds)?;
    info.set_item("stalled", r.stalled)?;
    info.set_item("pushed", r.pushed_indices)?;
    Ok((PyWorldState { inner: r.next_state }, info))
}

/// One MCTS decision from `state`.
#[pyfunction]
#[pyo3(signature = (scene, state, config = None, seed = 0))]
fn plan<'py>(
    py: Python<'py>,
    scene: &PyScene,
    state: &PyWorldState,
    config: Option<&PyConfig>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let run = config_or_default(config);
    let o = py
        .detach(|| {
            planner::mcts_search(
                &scene.inner,
                &state.inner,
                &run.planner,
                &run.physics,
                &UniformRandomPolicy,
                &mut derive_rng(seed, 1),
            )
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("best_action", o.best_action.index())?;
    d.set_item("g_hat", o.g_hat)?;
    d.set_item("root_g", o.root_g)?;
    d.set_item("iterations_used", o.iterations_used)?;
    Ok(d)
}

/// Runs a closed-loop trial; returns the trajectory log as a dict plus
/// `steps`, `wall_time` and `plan_time`.
#[pyfunction]
#[pyo3(signature = (scene, state, algo = "mcts", config = None, seed = 0))]
fn solve<'py>(
    py: Python<'py>,
    scene: &PyScene,
    state: &PyWorldState,
    algo: &str,
    config: Option<&PyConfig>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let algo: Algo = algo.parse().map_err(to_py)?;
    let run = config_or_default(config);
    run.validate().map_err(to_py)?;
    let rec = py.detach(|| harness::run_trial(&scene.inner, &state.inner, algo, &run.planner, &run.physics, seed));
    if let Some(e) = rec.error {
        return Err(PyValueError::new_err(e));
    }
    let log = json_loads(py, &TrajectoryLog::from_record(&rec, "python").to_json())?;
    log.set_item("steps_taken", rec.steps)?;
    log.set_item("wall_time", rec.wall_time)?;
    log.set_item("plan_time", rec.plan_time)?;
    Ok(log)
}

/// Seeded batch over a scenario family given as a dict of `ScenarioSpec`
/// fields; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (spec, algo = "mcts", trials = 10, workers = 1, config = None))]
fn run_batch<'py>(
    py: Python<'py>,
    spec: &Bound<'py, PyDict>,
    algo: &str,
    trials: usize,
    workers: usize,
    config: Option<&PyConfig>,
) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (spec,))?.extract()?;
    let spec = ScenarioSpec::from_json(&text).map_err(PyValueError::new_err)?;
    let algo: Algo = algo.parse().map_err(to_py)?;
    let run = config_or_default(config);
    let summary = py
        .detach(|| harness::run_batch(&spec, algo, &run.planner, &run.physics, trials, workers))
        .map_err(to_py)?;
    json_loads(py, &summary.to_json())
}

/// Selection score of a child given `(visits, v_upper, v_lower)` of the
/// parent and the child.
#[pyfunction]
#[pyo3(signature = (parent, child, config = None))]
fn ucb_score(parent: (u32, f64, f64), child: (u32, f64, f64), config: Option<&PyConfig>) -> PyResult<f64> {
    if parent.0 == 0 || child.0 == 0 {
        return Err(PyValueError::new_err("visit counts must be positive"));
    }
    let p = Node::with_stats(parent.0, parent.1, parent.2);
    let c = Node::with_stats(child.0, child.1, child.2);
    Ok(planner::ucb_score(&p, &c, &config_or_default(config).planner))
}

#[pymodule]
fn pushsort(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyWorldState>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(is_sorted, m)?)?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(ucb_score, m)?)?;
    m.add("ALGORITHMS", Algo::ALL.map(|a| a.as_str()).to_vec())?;
    m.add("ACTION_COUNT", ACTION_COUNT)?;
    Ok(())
}
