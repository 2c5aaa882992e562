//! Python bindings for the `qtomo` crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qtomo::adversary::{replace_attack, OutcomeRecord};
use qtomo::estimate::{
    filter_robust_covariance, naive_tomography, rank_truncated_tomography, RobustConfig,
};
use qtomo::haar::{haar_trace_moment as core_moment, sample_haar_state};
use qtomo::linalg::{hs_norm, trace_norm, CMatrix, C64};
use qtomo::measure::{sample_outcomes, UniformPovmSampler};
use qtomo::qtest::{robust_identity_test as core_identity_test, TesterConfig};
use qtomo::rng::seeded;
use qtomo::{HermitianMatrix, OutcomeDistribution, PureState, UniformPovmSample};

type Rows = Vec<Vec<C64>>;

fn err(e: qtomo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_cmatrix(rows: &Rows) -> PyResult<CMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn hermitian(rows: &Rows) -> PyResult<HermitianMatrix> {
    HermitianMatrix::new(to_cmatrix(rows)?).map_err(err)
}

/// A density matrix.
#[pyclass(name = "DensityMatrix", frozen)]
struct PyDensityMatrix {
    inner: qtomo::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Validates a square nested list of complex entries.
    #[new]
    fn new(rows: Rows) -> PyResult<Self> {
        let inner = qtomo::DensityMatrix::from_matrix(to_cmatrix(&rows)?).map_err(err)?;
        Ok(PyDensityMatrix { inner })
    }

    #[staticmethod]
    fn maximally_mixed(d: usize) -> PyResult<Self> {
        let inner = qtomo::DensityMatrix::maximally_mixed(d).map_err(err)?;
        Ok(PyDensityMatrix { inner })
    }

    #[staticmethod]
    fn pure(amplitudes: Vec<C64>) -> PyResult<Self> {
        let v = PureState::normalized(amplitudes.into()).map_err(err)?;
        Ok(PyDensityMatrix {
            inner: qtomo::DensityMatrix::pure(&v),
        })
    }

    /// Random rank-`rank` state with Haar eigenvectors and Dirichlet spectrum.
    #[staticmethod]
    fn random(d: usize, rank: usize, seed: u64) -> PyResult<Self> {
        let inner = qtomo::DensityMatrix::random(d, rank, &mut seeded(seed)).map_err(err)?;
        Ok(PyDensityMatrix { inner })
    }

    #[staticmethod]
    fn haar_pure(d: usize, seed: u64) -> Self {
        let v = sample_haar_state(d, &mut seeded(seed));
        PyDensityMatrix {
            inner: qtomo::DensityMatrix::pure(&v),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Rows {
        to_rows(self.inner.matrix())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        if other.inner.dim() != self.inner.dim() {
            return Err(PyValueError::new_err("dimension mismatch"));
        }
        Ok(qtomo::linalg::trace_distance(&self.inner, &other.inner))
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={})", self.inner.dim())
    }
}

/// Outcomes of the uniform POVM, one unit vector per copy.
#[pyclass(name = "Samples", frozen)]
struct PySamples {
    inner: Vec<UniformPovmSample>,
}

#[pymethods]
impl PySamples {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Amplitudes of sample `i`.
    fn vector(&self, i: usize) -> PyResult<Vec<C64>> {
        let s = self
            .inner
            .get(i)
            .ok_or_else(|| PyValueError::new_err("sample index out of range"))?;
        Ok(s.vector().amplitudes().iter().copied().collect())
    }

    /// Overwrites `floor(gamma n)` random samples with basis vector `basis_index`.
    fn replace_attack(&self, gamma: f64, basis_index: usize, seed: u64) -> PyResult<PySamples> {
        let d = self.inner.first().map_or(1, |s| s.dim());
        let payload = UniformPovmSample::new(PureState::basis(d, basis_index).map_err(err)?);
        let rec = OutcomeRecord::new(self.inner.clone());
        let out = replace_attack(&rec, gamma, &payload, &mut seeded(seed)).map_err(err)?;
        Ok(PySamples {
            inner: out.into_entries(),
        })
    }
}

/// Draws `n` uniform-POVM outcomes from `rho`.
#[pyfunction]
fn measure_uniform_povm(rho: &PyDensityMatrix, n: usize, seed: u64) -> PySamples {
    let sampler = UniformPovmSampler::new(&rho.inner);
    PySamples {
        inner: sampler.sample_n(n, &mut seeded(seed)),
    }
}

/// Linear-inversion estimate `(d+1) Sigma - I`.
#[pyfunction]
fn naive_estimate(samples: &PySamples) -> PyResult<Rows> {
    let h = naive_tomography(&samples.inner).map_err(err)?;
    Ok(to_rows(h.matrix()))
}

/// Best rank-`r` approximation of the naive estimate.
#[pyfunction]
fn rank_truncated_estimate(samples: &PySamples, r: usize) -> PyResult<Rows> {
    let h = rank_truncated_tomography(&samples.inner, r).map_err(err)?;
    Ok(to_rows(h.matrix()))
}

/// Filter-based robust estimate. Returns `(estimate, removed, converged)`.
#[pyfunction]
fn filter_estimate(samples: &PySamples, gamma: f64, seed: u64) -> PyResult<(Rows, usize, bool)> {
    let cfg = RobustConfig::new(gamma).map_err(err)?;
    let out = filter_robust_covariance(&samples.inner, &cfg, &mut seeded(seed)).map_err(err)?;
    let est = out.covariance.to_state_estimate();
    Ok((to_rows(est.matrix()), out.removed, out.converged))
}

/// Trace norm of the Hermitian matrix `a - b`.
#[pyfunction]
fn trace_error(a: Rows, b: Rows) -> PyResult<f64> {
    Ok(trace_norm(&(&hermitian(&a)? - &hermitian(&b)?)))
}

/// Hilbert-Schmidt norm of the Hermitian matrix `a - b`.
#[pyfunction]
fn hs_error(a: Rows, b: Rows) -> PyResult<f64> {
    Ok(hs_norm(&(&hermitian(&a)? - &hermitian(&b)?)))
}

/// `E[<u|M|u>^k]` over Haar-random `u`.
#[pyfunction]
fn haar_trace_moment(m: Rows, k: usize) -> PyResult<f64> {
    core_moment(&hermitian(&m)?, k).map_err(err)
}

/// Draws `n` labels from the distribution `probs`.
#[pyfunction]
fn sample_labels(probs: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<usize>> {
    let p = OutcomeDistribution::new(probs).map_err(err)?;
    Ok(sample_outcomes(&p, n, &mut seeded(seed)))
}

/// Robust identity test of labels against `reference`.
/// Returns `(accept, statistic, threshold)`.
#[pyfunction]
#[pyo3(signature = (outcomes, reference, gamma, epsilon, seed, calibration_trials = 200))]
fn robust_identity_test(
    outcomes: Vec<usize>,
    reference: Vec<f64>,
    gamma: f64,
    epsilon: f64,
    seed: u64,
    calibration_trials: usize,
) -> PyResult<(bool, f64, f64)> {
    let q = OutcomeDistribution::new(reference).map_err(err)?;
    let mut cfg = TesterConfig::new(gamma, epsilon).map_err(err)?;
    cfg.calibration_trials = calibration_trials;
    let v = core_identity_test(&outcomes, &q, &cfg, &mut seeded(seed)).map_err(err)?;
    Ok((v.accept, v.statistic, v.threshold))
}

/// Corruption level below which no identity tester can succeed.
#[pyfunction]
fn critical_epsilon(gamma: f64, d: usize, trace_h_sup: f64) -> PyResult<f64> {
    qtomo::lowerbound::critical_epsilon(gamma, d, trace_h_sup).map_err(err)
}

/// Runs the command-line harness on `argv` (without the program name) and
/// returns the CSV text.
#[pyfunction]
fn run_experiment(argv: Vec<String>) -> PyResult<String> {
    let cfg = qtomo::harness::parse_cli(argv).map_err(err)?;
    let rows = qtomo::harness::run_experiment(&cfg).map_err(err)?;
    let mut buf = Vec::new();
    qtomo::harness::write_csv(&rows, &mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn qtomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PySamples>()?;
    m.add_function(wrap_pyfunction!(measure_uniform_povm, m)?)?;
    m.add_function(wrap_pyfunction!(naive_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(rank_truncated_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(filter_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(trace_error, m)?)?;
    m.add_function(wrap_pyfunction!(hs_error, m)?)?;
    m.add_function(wrap_pyfunction!(haar_trace_moment, m)?)?;
    m.add_function(wrap_pyfunction!(sample_labels, m)?)?;
    m.add_function(wrap_pyfunction!(robust_identity_test, m)?)?;
    m.add_function(wrap_pyfunction!(critical_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
