//! Python bindings. Matrices cross the boundary as nested lists of complex numbers.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use thermaldrift::dilation::verify_against_channel;
use thermaldrift::pauli::CMatrix;
use thermaldrift::sampler::{self, build_grid_ensemble, run_rng, SamplerConfig, ThermalSample};
use thermaldrift::spectra::{self, GapRatioStats, Reference, DEFAULT_MERGE_TOL};
use thermaldrift::{operators, DensityMatrix};

fn to_py(e: thermaldrift::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn density(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    DensityMatrix::new(from_rows(rows)?).map_err(to_py)
}

#[pyclass(name = "PauliWord", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyPauliWord(thermaldrift::PauliWord);

#[pymethods]
impl PyPauliWord {
    #[new]
    fn new(letters: &str) -> PyResult<Self> {
        letters.parse().map(Self).map_err(to_py)
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    #[getter]
    fn weight(&self) -> usize {
        self.0.weight()
    }

    fn commutes_with(&self, other: &PyPauliWord) -> bool {
        self.0.commutes_with(&other.0)
    }

    fn matrix(&self) -> PyResult<Vec<Vec<Complex64>>> {
        self.0.materialize().map(|m| to_rows(&m)).map_err(to_py)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PauliWord('{}')", self.0)
    }
}

#[pyclass(name = "Ensemble", frozen)]
struct PyEnsemble(sampler::Ensemble);

#[pymethods]
impl PyEnsemble {
    #[new]
    fn new(name: &str, words: Vec<String>, bounds: Vec<f64>) -> PyResult<Self> {
        let words = words
            .iter()
            .map(|w| w.parse())
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        sampler::Ensemble::new(name, words, bounds).map(Self).map_err(to_py)
    }

    /// Nearest-neighbour grid ensemble, `model` being "heisenberg" or "tfim".
    #[staticmethod]
    #[pyo3(signature = (model, rows, cols, h = 1.0))]
    fn grid(model: &str, rows: usize, cols: usize, h: f64) -> PyResult<Self> {
        let model = model.parse().map_err(to_py)?;
        build_grid_ensemble(model, rows, cols, h).map(Self).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.0.words().iter().map(|w| w.to_string()).collect()
    }

    #[getter]
    fn bounds(&self) -> Vec<f64> {
        self.0.bounds().to_vec()
    }

    #[getter]
    fn weight_sum(&self) -> f64 {
        self.0.lambda()
    }

    fn hamiltonian(&self, coefficients: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        self.0
            .hamiltonian(&coefficients)
            .map(|h| to_rows(h.matrix()))
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Sample", frozen, get_all)]
struct PySample {
    run_index: u64,
    beta: f64,
    steps: usize,
    coefficients: Vec<f64>,
    endpoint: Vec<i64>,
    /// `(j, m)` per step.
    path: Vec<(usize, i8)>,
    trace_distance: Option<f64>,
    state: Vec<Vec<Complex64>>,
}

impl From<ThermalSample> for PySample {
    fn from(s: ThermalSample) -> Self {
        Self {
            run_index: s.run_index,
            beta: s.beta,
            steps: s.steps,
            path: s.path.iter().map(|p| (p.j, p.m.as_i8())).collect(),
            trace_distance: s.trace_distance,
            state: to_rows(s.state.matrix()),
            coefficients: s.coefficients,
            endpoint: s.endpoint,
        }
    }
}

#[pyclass(name = "GapRatios", frozen, get_all)]
struct PyGapRatios {
    ratios: Vec<f64>,
    mean_r: f64,
    merged_levels: usize,
    excluded_levels: usize,
    l1_poisson: f64,
    l1_goe: f64,
    l1_gue: f64,
}

impl From<GapRatioStats> for PyGapRatios {
    fn from(s: GapRatioStats) -> Self {
        Self {
            mean_r: s.mean_r,
            merged_levels: s.merged_levels,
            excluded_levels: s.excluded_levels,
            l1_poisson: s.l1_distance(Reference::Poisson),
            l1_goe: s.l1_distance(Reference::Goe),
            l1_gue: s.l1_distance(Reference::Gue),
            ratios: s.ratios,
        }
    }
}

/// One sampling run starting from the maximally mixed state.
#[pyfunction]
#[pyo3(signature = (ensemble, beta, steps, seed, run_index = 0, diagnostics = true))]
fn sample(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    beta: f64,
    steps: usize,
    seed: u64,
    run_index: u64,
    diagnostics: bool,
) -> PyResult<PySample> {
    let config = SamplerConfig::new(beta, steps, seed).with_diagnostics(diagnostics);
    py.detach(|| sampler::run_indexed(&ensemble.0, &config, run_index))
        .map(PySample::from)
        .map_err(to_py)
}

/// Runs `0..count` in parallel; results are in run order.
#[pyfunction]
#[pyo3(signature = (ensemble, beta, steps, seed, count, threads = None, diagnostics = true))]
#[allow(clippy::too_many_arguments)]
fn sample_batch(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    beta: f64,
    steps: usize,
    seed: u64,
    count: usize,
    threads: Option<usize>,
    diagnostics: bool,
) -> PyResult<Vec<PySample>> {
    let config = SamplerConfig::new(beta, steps, seed).with_diagnostics(diagnostics);
    let results = py
        .detach(|| sampler::run_batch(&ensemble.0, &config, count, threads))
        .map_err(to_py)?;
    results
        .into_iter()
        .map(|r| r.map(PySample::from).map_err(to_py))
        .collect()
}

#[pyfunction]
fn gibbs_state(hamiltonian: Vec<Vec<Complex64>>, beta: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let h = operators::HermitianOperator::new(from_rows(hamiltonian)?).map_err(to_py)?;
    Ok(to_rows(operators::gibbs_state(&h, beta).matrix()))
}

#[pyfunction]
fn trace_distance(a: Vec<Vec<Complex64>>, b: Vec<Vec<Complex64>>) -> PyResult<f64> {
    operators::trace_distance(&density(a)?, &density(b)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (levels, merge_tol = DEFAULT_MERGE_TOL))]
fn gap_ratios(levels: Vec<f64>, merge_tol: f64) -> PyResult<PyGapRatios> {
    spectra::gap_ratios(&levels, merge_tol).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (state, merge_tol = DEFAULT_MERGE_TOL))]
fn modular_gap_ratios(state: Vec<Vec<Complex64>>, merge_tol: f64) -> PyResult<PyGapRatios> {
    spectra::modular_gap_ratios(&density(state)?, merge_tol)
        .map(Into::into)
        .map_err(to_py)
}

/// Reference gap-ratio density: "poisson", "goe" or "gue".
#[pyfunction]
fn reference_density(kind: &str, r: f64) -> PyResult<f64> {
    let kind: Reference = kind.parse().map_err(to_py)?;
    Ok(spectra::reference_density(kind, r))
}

/// Compares the dilation circuit for `word` with the closed-form instrument on a
/// random state. Returns the largest deviation across probabilities, states,
/// loop probability and completeness.
#[pyfunction]
fn verify_circuit(word: &str, tau: f64, seed: u64) -> PyResult<f64> {
    let word: thermaldrift::PauliWord = word.parse().map_err(to_py)?;
    let rho = DensityMatrix::random(word.num_qubits(), &mut run_rng(seed, 0));
    let r = verify_against_channel(&word, tau, &rho).map_err(to_py)?;
    Ok(r.max_prob_deviation
        .max(r.max_trace_distance)
        .max(r.loop_deviation)
        .max(r.completeness_deviation))
}

#[pymodule]
fn thermaldrift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPauliWord>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyGapRatios>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sample_batch, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_state, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gap_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(modular_gap_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(reference_density, m)?)?;
    m.add_function(wrap_pyfunction!(verify_circuit, m)?)?;
    Ok(())
}
