//! Python bindings. Grids cross the boundary as lists of lists of ints and
//! selections as `(x, y, h, w)` tuples; records come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use solar_core::dataset::{self, DatasetError, ManifestParams};
use solar_core::generator::{generate, verify_dataset, VerifyOptions};
use solar_core::grid::{self as g, Grid, Selection, Transform};
use solar_core::harness::agents::{BuiltinFactory, BuiltinKind};
use solar_core::harness::{self, RunOptions};
use solar_core::maker::{Task, TaskParams};
use solar_core::ops::{Action, Operation};
use solar_core::segment::segment_dataset;
use solar_core::{seed, EnvConfig};

type Rows = Vec<Vec<u8>>;
/// Returned grids are widened so pyo3 emits lists of ints rather than `bytes`.
type OutRows = Vec<Vec<u32>>;
type Sel = (usize, usize, usize, usize);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset_err(e: DatasetError) -> PyErr {
    match e {
        DatasetError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn grid(rows: &Rows) -> PyResult<Grid> {
    Grid::from_rows(rows).map_err(value_err)
}

fn out(grid: &Grid) -> OutRows {
    grid.to_rows().into_iter().map(|r| r.into_iter().map(u32::from).collect()).collect()
}

fn sel((x, y, h, w): Sel) -> Selection {
    Selection::new(x, y, h, w)
}

fn task(name: &str) -> PyResult<Task> {
    name.parse().map_err(value_err)
}

fn action(op: u8, s: Sel) -> PyResult<Action> {
    let op = Operation::from_code(op).ok_or_else(|| value_err(format!("unknown operation code {op}")))?;
    Ok(Action::new(op, sel(s)))
}

/// Converts any serializable value to Python objects through the json module.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn transform(rows: Rows, s: Sel, kind: Transform) -> PyResult<OutRows> {
    Ok(out(&g::transform_region(&grid(&rows)?, sel(s), kind).map_err(value_err)?))
}

#[pyfunction]
fn flip_v(grid: Rows, sel: Sel) -> PyResult<OutRows> {
    transform(grid, sel, Transform::FlipV)
}

#[pyfunction]
fn flip_h(grid: Rows, sel: Sel) -> PyResult<OutRows> {
    transform(grid, sel, Transform::FlipH)
}

/// Counter-clockwise quarter turn of a square selection.
#[pyfunction]
fn rotate90(grid: Rows, sel: Sel) -> PyResult<OutRows> {
    transform(grid, sel, Transform::Rotate90)
}

#[pyfunction]
fn rotate270(grid: Rows, sel: Sel) -> PyResult<OutRows> {
    transform(grid, sel, Transform::Rotate270)
}

#[pyfunction]
fn copy_region(grid_rows: Rows, sel: Sel) -> PyResult<OutRows> {
    Ok(out(&g::copy_region(&grid(&grid_rows)?, self::sel(sel)).map_err(value_err)?))
}

#[pyfunction]
fn paste_region(grid_rows: Rows, clip: Rows, sel: Sel) -> PyResult<OutRows> {
    Ok(out(&g::paste_region(&grid(&grid_rows)?, &grid(&clip)?, self::sel(sel)).map_err(value_err)?))
}

#[pyfunction]
#[pyo3(signature = (grid_rows, sel, max_h=10, max_w=10))]
fn resize_grid(grid_rows: Rows, sel: Sel, max_h: usize, max_w: usize) -> PyResult<OutRows> {
    Ok(out(&g::resize_grid(&grid(&grid_rows)?, self::sel(sel), (max_h, max_w)).map_err(value_err)?))
}

/// The grid environment for one problem.
#[pyclass(name = "Env")]
struct PyEnv {
    inner: solar_core::Env,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (input, answer, max_h=10, max_w=10, max_submit_attempts=1))]
    fn new(input: Rows, answer: Rows, max_h: usize, max_w: usize, max_submit_attempts: u32) -> PyResult<Self> {
        let config = EnvConfig { max_dims: (max_h, max_w), max_submit_attempts };
        let inner = solar_core::Env::new(&grid(&input)?, &grid(&answer)?, config).map_err(value_err)?;
        Ok(PyEnv { inner })
    }

    /// Applies an action and returns `(reward, terminated)`.
    fn step(&mut self, op: u8, sel: Sel) -> PyResult<(f64, bool)> {
        self.inner.step(&action(op, sel)?).map_err(value_err)
    }

    /// `None` if the action is valid here, else the reason it is not.
    fn validate(&self, op: u8, sel: Sel) -> PyResult<Option<String>> {
        Ok(self.inner.validate(&action(op, sel)?).err().map(|e| e.to_string()))
    }

    #[getter]
    fn current(&self) -> OutRows {
        out(&self.inner.state().current)
    }

    #[getter]
    fn clipboard(&self) -> Option<OutRows> {
        self.inner.state().clipboard.as_ref().map(out)
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.inner.state().terminated
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.inner.state().step_index
    }

    fn at_answer(&self) -> bool {
        self.inner.at_answer()
    }
}

#[pyfunction]
#[pyo3(signature = (task_name, seed, problem_index=0, max_h=10, max_w=10))]
fn make_problem(
    py: Python<'_>,
    task_name: &str,
    seed: u64,
    problem_index: usize,
    max_h: usize,
    max_w: usize,
) -> PyResult<Py<PyAny>> {
    let t = task(task_name)?;
    let params = TaskParams { max_dims: (max_h, max_w), seed, ..TaskParams::default() };
    let id = format!("{}_{}", t.name(), problem_index);
    let p = t.make_problem(seed::problem_seed(seed, problem_index), &params, id).map_err(value_err)?;
    Ok(to_py(py, &p)?.unbind())
}

/// Gold-standard actions for a problem dict as returned by `make_problem`.
#[pyfunction]
fn gold_actions(py: Python<'_>, task_name: &str, problem: Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (problem,))?.extract()?;
    let p = serde_json::from_str(&text).map_err(value_err)?;
    let actions = task(task_name)?.gold_actions(&p).map_err(value_err)?;
    Ok(to_py(py, &actions)?.unbind())
}

/// Generates and writes a dataset directory; returns the manifest.
#[pyfunction]
#[pyo3(signature = (task_name, problems, per_problem, gold, seed, out, horizon=5, max_h=10, max_w=10))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    py: Python<'_>,
    task_name: &str,
    problems: usize,
    per_problem: usize,
    gold: usize,
    seed: u64,
    out: PathBuf,
    horizon: usize,
    max_h: usize,
    max_w: usize,
) -> PyResult<Py<PyAny>> {
    let t = task(task_name)?;
    let params = TaskParams { max_dims: (max_h, max_w), seed, ..TaskParams::default() };
    let manifest = py
        .detach(|| -> PyResult<_> {
            let gen = generate(t, &params, problems, per_problem, gold).map_err(value_err)?;
            let segs = segment_dataset(&gen.episodes, horizon, params.max_dims).map_err(value_err)?;
            let mp = ManifestParams::new(&params, problems, per_problem, gold, horizon);
            dataset::write_dataset(&out, t, mp, &gen.episodes, &segs, &gen.quarantine).map_err(dataset_err)
        })?;
    Ok(to_py(py, &manifest)?.unbind())
}

/// Reads a dataset directory, verifying digests. Returns a dict with
/// `manifest`, `episodes`, `segments` and `quarantine`.
#[pyfunction]
fn read_dataset(py: Python<'_>, dir: PathBuf) -> PyResult<Py<PyAny>> {
    let ds = py.detach(|| dataset::read_dataset(&dir)).map_err(dataset_err)?;
    let value = serde_json::json!({
        "manifest": ds.manifest,
        "episodes": ds.episodes,
        "segments": ds.segments,
        "quarantine": ds.quarantine,
    });
    Ok(to_py(py, &value)?.unbind())
}

/// Replays every episode of a dataset; returns the list of violations.
#[pyfunction]
fn validate_dataset(py: Python<'_>, dir: PathBuf) -> PyResult<Py<PyAny>> {
    let report = py.detach(|| -> PyResult<_> {
        let ds = dataset::read_dataset(&dir).map_err(dataset_err)?;
        let opts = VerifyOptions {
            config: ds.manifest.params.env_config(),
            expected_gold: Some(ds.manifest.params.expected_gold()),
            task: Some(ds.manifest.task),
        };
        Ok(verify_dataset(&ds.episodes, &opts))
    })?;
    Ok(to_py(py, &report.violations)?.unbind())
}

/// Evaluates a built-in agent (`"oracle"` or `"random"`); returns the metrics.
#[pyfunction]
#[pyo3(signature = (task_name, agent, seed, problems=100, repeats=5, max_steps=20))]
fn evaluate_builtin(
    py: Python<'_>,
    task_name: &str,
    agent: &str,
    seed: u64,
    problems: usize,
    repeats: usize,
    max_steps: usize,
) -> PyResult<Py<PyAny>> {
    let t = task(task_name)?;
    let kind: BuiltinKind = agent.parse().map_err(PyValueError::new_err)?;
    let report = py.detach(|| -> PyResult<_> {
        let set = harness::make_eval_set(t, seed, problems, &TaskParams::default(), None).map_err(value_err)?;
        let factory = BuiltinFactory { kind, task: t, seed, config: EnvConfig::default() };
        harness::evaluate(&factory, &set, repeats, RunOptions { max_steps, config: EnvConfig::default() })
            .map_err(value_err)
    })?;
    Ok(to_py(py, &report.metrics)?.unbind())
}

#[pymodule]
fn solar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_function(wrap_pyfunction!(flip_v, m)?)?;
    m.add_function(wrap_pyfunction!(flip_h, m)?)?;
    m.add_function(wrap_pyfunction!(rotate90, m)?)?;
    m.add_function(wrap_pyfunction!(rotate270, m)?)?;
    m.add_function(wrap_pyfunction!(copy_region, m)?)?;
    m.add_function(wrap_pyfunction!(paste_region, m)?)?;
    m.add_function(wrap_pyfunction!(resize_grid, m)?)?;
    m.add_function(wrap_pyfunction!(make_problem, m)?)?;
    m.add_function(wrap_pyfunction!(gold_actions, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(validate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_builtin, m)?)?;
    m.add("NUM_OPERATIONS", solar_core::ops::NUM_OPERATIONS)?;
    Ok(())
}
