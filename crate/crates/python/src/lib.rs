//! Python bindings for the `evorobo` core crate.
//!
//! Sensori-motor streams cross the boundary as lists of 10-element lists
//! (8 sensors then 2 motors, all in `[0, 1]`), points as `(x, y)` tuples.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;

use evorobo_core as core;
use evorobo_core::sim::SMS_DIM;
use evorobo_core::SimRng;

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_stream(samples: Vec<Vec<f64>>) -> PyResult<core::SensoriMotorStream> {
    samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            <[f64; SMS_DIM]>::try_from(s)
                .map(core::SensoriMotorVector)
                .map_err(|s| PyValueError::new_err(format!("sample {i} has {} values, expected {SMS_DIM}", s.len())))
        })
        .collect()
}

fn from_stream(stream: &core::SensoriMotorStream) -> Vec<Vec<f64>> {
    stream.iter().map(|s| s.0.to_vec()).collect()
}

#[pyclass(name = "Arena", module = "evorobo", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyArena(core::Arena);

#[pymethods]
impl PyArena {
    /// Parses the text arena format.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        core::Arena::parse(text).map(PyArena).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::Arena::from_path(path).map(PyArena).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn cell_size(&self) -> f64 {
        self.0.cell_size()
    }

    #[getter]
    fn free_cells(&self) -> usize {
        self.0.free_cell_count()
    }

    /// `(x, y, heading)` of the start marker.
    #[getter]
    fn start(&self) -> (f64, f64, f64) {
        let p = self.0.start_pose();
        (p.x, p.y, p.heading)
    }

    fn is_free(&self, x: f64, y: f64) -> bool {
        self.0.is_free(core::Point::new(x, y))
    }

    fn raycast(&self, x: f64, y: f64, angle: f64, max_range: f64) -> PyResult<f64> {
        self.0.raycast(core::Point::new(x, y), angle, max_range).map_err(py_err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Arena({}x{}, cell_size={})", self.0.width(), self.0.height(), self.0.cell_size())
    }
}

#[pyclass(name = "Genotype", module = "evorobo", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyGenotype(core::Genotype);

#[pymethods]
impl PyGenotype {
    #[new]
    #[pyo3(signature = (weights, sigma = 0.2))]
    fn new(weights: Vec<f64>, sigma: f64) -> PyResult<Self> {
        core::Genotype::new(weights, sigma).map(PyGenotype).map_err(py_err)
    }

    #[staticmethod]
    fn zeros() -> Self {
        PyGenotype(core::Genotype::zeros())
    }

    /// Fresh genotype with N(0, 0.1) weights.
    #[staticmethod]
    fn random(seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        PyGenotype(core::random_genotype(&mut rng, core::InitScale::default()))
    }

    #[staticmethod]
    fn from_csv_line(line: &str) -> PyResult<Self> {
        core::Genotype::from_csv_line(line).map(PyGenotype).map_err(py_err)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    fn activate(&self, sensors: [f64; 8]) -> (f64, f64) {
        let [l, r] = self.0.activate(&sensors);
        (l, r)
    }

    fn mutate(&self, seed: u64) -> Self {
        PyGenotype(self.0.mutate(&mut SimRng::seed_from_u64(seed)))
    }

    fn to_csv_line(&self) -> String {
        self.0.to_csv_line()
    }

    fn __len__(&self) -> usize {
        self.0.weights().len()
    }
}

#[pyclass(name = "ClusterSet", module = "evorobo", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyClusterSet(core::ClusterSet);

#[pymethods]
impl PyClusterSet {
    #[getter]
    fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.0.len()).map(|i| self.0.center(i).to_vec()).collect()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.0.counts().to_vec()
    }

    #[getter]
    fn total(&self) -> u64 {
        self.0.total()
    }

    fn nearest(&self, x: Vec<f64>) -> PyResult<(usize, f64)> {
        core::nearest_cluster(&self.0, &x).map_err(py_err)
    }

    fn entropy(&self) -> PyResult<f64> {
        core::entropy(&self.0).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn epsilon_means(points: Vec<Vec<f64>>, epsilon: f64) -> PyResult<PyClusterSet> {
    core::epsilon_means(&points, epsilon).map(PyClusterSet).map_err(py_err)
}

#[pyfunction]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<PyClusterSet> {
    core::kmeans(&points, k, &mut SimRng::seed_from_u64(seed))
        .map(PyClusterSet)
        .map_err(py_err)
}

/// Shannon entropy (natural log) of a count vector.
#[pyfunction]
fn entropy(counts: Vec<u64>) -> f64 {
    core::fitness::entropy_of_counts(&counts)
}

#[pyfunction]
#[pyo3(signature = (stream, epsilon = 0.2))]
fn curiosity_fitness(stream: Vec<Vec<f64>>, epsilon: f64) -> PyResult<(f64, PyClusterSet)> {
    let (f, set) = core::curiosity_fitness(&to_stream(stream)?, epsilon).map_err(py_err)?;
    Ok((f, PyClusterSet(set)))
}

#[pyfunction]
fn displacement_fitness(stream: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(core::displacement_fitness(&to_stream(stream)?))
}

/// Mean distance to the `k` nearest archived end points; `empty` when the
/// archive is empty.
#[pyfunction]
#[pyo3(signature = (end_point, archive, k = 15, empty = 0.0))]
fn novelty_fitness(end_point: (f64, f64), archive: Vec<(f64, f64)>, k: usize, empty: f64) -> f64 {
    let mut a = core::NoveltyArchive::new(empty);
    for (x, y) in archive {
        a.push(core::Point::new(x, y));
    }
    core::novelty_fitness(core::Point::new(end_point.0, end_point.1), &a, k)
}

#[pyclass(name = "DiscoveryArchive", module = "evorobo", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyDiscoveryArchive(core::DiscoveryArchive);

#[pymethods]
impl PyDiscoveryArchive {
    #[new]
    #[pyo3(signature = (epsilon = 0.4))]
    fn new(epsilon: f64) -> PyResult<Self> {
        core::DiscoveryArchive::new(epsilon).map(PyDiscoveryArchive).map_err(py_err)
    }

    /// Returns the fitness and the updated archive; this one is unchanged.
    fn fitness(&self, stream: Vec<Vec<f64>>) -> PyResult<(f64, PyDiscoveryArchive)> {
        let (f, next) = core::discovery_fitness(&self.0, &to_stream(stream)?, self.0.epsilon()).map_err(py_err)?;
        Ok((f, PyDiscoveryArchive(next)))
    }

    #[getter]
    fn clusters(&self) -> PyClusterSet {
        PyClusterSet(self.0.clusters().clone())
    }

    #[getter]
    fn total(&self) -> u64 {
        self.0.total()
    }
}

#[pyclass(name = "PatrolGrid", module = "evorobo", skip_from_py_object)]
#[derive(Clone)]
struct PyPatrolGrid(core::PatrolGrid);

#[pymethods]
impl PyPatrolGrid {
    #[new]
    fn new(arena: &PyArena) -> Self {
        PyPatrolGrid(core::PatrolGrid::new(&arena.0))
    }

    fn merge(&mut self, other: &PyPatrolGrid) {
        self.0.merge(&other.0);
    }

    /// Row-major visit counts, walls included as zeros.
    #[getter]
    fn counts(&self) -> Vec<u32> {
        self.0.counts().to_vec()
    }

    #[getter]
    fn total(&self) -> u64 {
        self.0.total()
    }

    fn patrol_percentage(&self, ell: u32) -> f64 {
        core::patrol_percentage(&self.0, ell)
    }

    /// P2 PGM text: walls black, cells with at least `ell` visits white.
    fn heatmap(&self, ell: u32) -> String {
        core::heatmap(&self.0, ell).to_pgm()
    }
}

#[pyclass(name = "Episode", module = "evorobo", frozen)]
struct PyEpisode(core::EpisodeResult);

#[pymethods]
impl PyEpisode {
    #[getter]
    fn stream(&self) -> Vec<Vec<f64>> {
        from_stream(&self.0.stream)
    }

    #[getter]
    fn end_point(&self) -> (f64, f64) {
        (self.0.end_point.x, self.0.end_point.y)
    }

    #[getter]
    fn max_distance(&self) -> f64 {
        self.0.max_distance_from_start
    }

    #[getter]
    fn poses(&self) -> Vec<(f64, f64, f64)> {
        self.0.poses.iter().map(|p| (p.x, p.y, p.heading)).collect()
    }

    #[getter]
    fn patrol(&self) -> PyPatrolGrid {
        PyPatrolGrid(self.0.patrol.clone())
    }

    fn trajectory_csv(&self) -> String {
        self.0.trajectory_csv()
    }

    fn __len__(&self) -> usize {
        self.0.stream.len()
    }
}

#[pyfunction]
#[pyo3(signature = (arena, genotype, steps = 2000))]
fn run_episode(py: Python<'_>, arena: &PyArena, genotype: &PyGenotype, steps: usize) -> PyResult<PyEpisode> {
    let cfg = core::EpisodeConfig::for_arena(&arena.0).with_steps(steps);
    py.detach(|| core::run_episode(&arena.0, &genotype.0, &cfg))
        .map(PyEpisode)
        .map_err(py_err)
}

#[pyclass(name = "RunLog", module = "evorobo", frozen)]
struct PyRunLog(core::RunLog);

#[pymethods]
impl PyRunLog {
    #[getter]
    fn fitness(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.fitness).collect()
    }

    #[getter]
    fn accepted(&self) -> Vec<bool> {
        self.0.records.iter().map(|r| r.accepted).collect()
    }

    #[getter]
    fn restarts(&self) -> Vec<usize> {
        self.0.records.iter().filter(|r| r.restart).map(|r| r.eval).collect()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.sigma).collect()
    }

    #[getter]
    fn end_points(&self) -> Vec<(f64, f64)> {
        self.0.records.iter().map(|r| (r.end_point.x, r.end_point.y)).collect()
    }

    /// Champion genotype with the highest fitness.
    fn best(&self) -> Option<PyGenotype> {
        let w = self.0.best()?.champion.clone()?;
        core::Genotype::new(w, core::controller::INITIAL_SIGMA).ok().map(PyGenotype)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Evolves a controller with the (1+1)-ES. `fitness` is one of
/// `curiosity`, `discovery`, `novelty`, `displacement`.
#[pyfunction]
#[pyo3(signature = (arena, fitness, seed, budget = 2000, steps = 2000))]
fn es_run(py: Python<'_>, arena: &PyArena, fitness: &str, seed: u64, budget: usize, steps: usize) -> PyResult<PyRunLog> {
    let kind: core::FitnessKind = fitness.parse().map_err(py_err)?;
    let es = core::EsConfig::default().with_budget(budget);
    let ep = core::EpisodeConfig::for_arena(&arena.0).with_steps(steps);
    py.detach(|| core::es_run(&arena.0, kind, &es, &ep, seed))
        .map(PyRunLog)
        .map_err(py_err)
}

/// Runs the experiment described by a config file and returns the metrics
/// CSV text. Output files land where the config says.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: PathBuf) -> PyResult<String> {
    let cfg = core::ExperimentConfig::from_path(&config).map_err(py_err)?;
    let report = py.detach(|| core::run_experiment(&cfg)).map_err(py_err)?;
    Ok(core::experiment::metrics_csv(cfg.fitness.name(), &cfg.arena_name(), &report.metrics))
}

#[pyfunction]
fn patrol_percentage(grid: &PyPatrolGrid, ell: u32) -> f64 {
    core::patrol_percentage(&grid.0, ell)
}

#[pyfunction]
fn heatmap(grid: &PyPatrolGrid, ell: u32) -> String {
    core::heatmap(&grid.0, ell).to_pgm()
}

#[pymodule]
fn evorobo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArena>()?;
    m.add_class::<PyGenotype>()?;
    m.add_class::<PyClusterSet>()?;
    m.add_class::<PyDiscoveryArchive>()?;
    m.add_class::<PyPatrolGrid>()?;
    m.add_class::<PyEpisode>()?;
    m.add_class::<PyRunLog>()?;
    m.add_function(wrap_pyfunction!(epsilon_means, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(curiosity_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(discovery_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(displacement_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(novelty_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(es_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(patrol_percentage, m)?)?;
    m.add_function(wrap_pyfunction!(heatmap, m)?)?;
    Ok(())
}

/// Entropy of the archive after absorbing `stream`; the archive is not
/// modified.
#[pyfunction]
fn discovery_fitness(archive: &PyDiscoveryArchive, stream: Vec<Vec<f64>>) -> PyResult<(f64, PyDiscoveryArchive)> {
    archive.fitness(stream)
}
