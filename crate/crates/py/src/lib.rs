//! Python bindings for the `multiport` crate.
//!
//! Matrices cross the boundary as nested lists of Python `complex`,
//! indexed `[output][input]`; phases are radians.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use multiport::io;
use multiport::matrix::parse_phase as core_parse_phase;
use multiport::{
    Error, FringeModel, NormAxis, OptimizerConfig, PhaseShifts, Stage, TransferMatrix, Weighting,
};

type Grid = [[f64; 3]; 3];

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::TooManyFailures { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for multiport::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(
    name = "TransferMatrix",
    module = "multiport_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyTransferMatrix {
    inner: TransferMatrix,
}

impl From<TransferMatrix> for PyTransferMatrix {
    fn from(inner: TransferMatrix) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyTransferMatrix {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        Ok(TransferMatrix::from_rows(rows).py()?.into())
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        TransferMatrix::identity(dim).into()
    }

    /// Input `i` leaves from output `perm[i]`.
    #[staticmethod]
    fn permutation(perm: Vec<usize>) -> PyResult<Self> {
        Ok(TransferMatrix::permutation(&perm).py()?.into())
    }

    #[staticmethod]
    fn ideal_tritter() -> Self {
        multiport::ideal_tritter().into()
    }

    #[staticmethod]
    #[pyo3(signature = (dim, seed=0))]
    fn random_unitary(dim: usize, seed: u64) -> PyResult<Self> {
        Ok(multiport::random_unitary(dim, seed).py()?.into())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(io::parse_matrix(text).py()?.into())
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&io::MatrixJson::from_matrix(&self.inner)).py()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.inner.rows()
    }

    fn get(&self, output: usize, input: usize) -> PyResult<Complex64> {
        let n = self.inner.dim();
        if output >= n || input >= n {
            return Err(to_py(Error::IndexOutOfRange {
                index: output.max(input),
                dim: n,
            }));
        }
        Ok(self.inner.get(output, input))
    }

    fn conj(&self) -> Self {
        self.inner.conj().into()
    }

    fn transpose(&self) -> Self {
        self.inner.transpose().into()
    }

    fn unitarity_deviation(&self) -> f64 {
        self.inner.unitarity_deviation()
    }

    #[pyo3(signature = (tol=1e-9))]
    fn is_unitary(&self, tol: f64) -> bool {
        self.inner.is_unitary(tol)
    }

    fn __matmul__(&self, other: &Self) -> PyResult<Self> {
        Ok(self.inner.matmul(&other.inner).py()?.into())
    }

    fn __repr__(&self) -> String {
        format!("TransferMatrix(dim={})\n{}", self.inner.dim(), self.inner)
    }
}

#[pyclass(
    name = "VisibilityMatrix",
    module = "multiport_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyVisibilityMatrix {
    inner: multiport::VisibilityMatrix,
}

#[pymethods]
impl PyVisibilityMatrix {
    /// Rows are input pairs (01, 02, 12), columns output pairs in the same order.
    #[new]
    #[pyo3(signature = (vals, sigma=None))]
    fn new(vals: [[f64; 3]; 3], sigma: Option<[[f64; 3]; 3]>) -> PyResult<Self> {
        let mut inner = multiport::VisibilityMatrix::new(vals).py()?;
        if let Some(s) = sigma {
            inner = inner.with_sigma(s).py()?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: io::VisibilityJson = serde_json_from(text)?;
        Ok(Self {
            inner: doc.to_matrix().py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&io::VisibilityJson::from_matrix(&self.inner)).py()
    }

    #[getter]
    fn vals(&self) -> [[f64; 3]; 3] {
        *self.inner.vals()
    }

    #[getter]
    fn sigma(&self) -> Option<[[f64; 3]; 3]> {
        self.inner.sigma().copied()
    }

    #[getter]
    fn undefined(&self) -> [[bool; 3]; 3] {
        *self.inner.undefined()
    }

    fn __repr__(&self) -> String {
        format!("VisibilityMatrix({:?})", self.inner.vals())
    }
}

#[pyclass(
    name = "AmplitudeDistribution",
    module = "multiport_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
pub struct PyAmplitudeDistribution {
    inner: multiport::AmplitudeDistribution,
}

#[pymethods]
impl PyAmplitudeDistribution {
    /// Measured probabilities `[output][input]`; the normalisation axis is
    /// detected from the data.
    #[new]
    #[pyo3(signature = (probs, sigma=None))]
    fn new(probs: Vec<Vec<f64>>, sigma: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        Ok(Self {
            inner: multiport::AmplitudeDistribution::measured(probs, sigma).py()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: io::AmplitudeJson = serde_json_from(text)?;
        Ok(Self {
            inner: doc.to_distribution().py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&io::AmplitudeJson::from_distribution(&self.inner)).py()
    }

    #[getter]
    fn probs(&self) -> Vec<Vec<f64>> {
        self.inner.probs().to_vec()
    }

    #[getter]
    fn sigma(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.sigma().map(|s| s.to_vec())
    }

    /// `"rows"` or `"columns"`: the axis along which probabilities sum to one.
    #[getter]
    fn axis(&self) -> &'static str {
        match self.inner.axis() {
            NormAxis::Rows => "rows",
            NormAxis::Columns => "columns",
        }
    }
}

fn serde_json_from<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| to_py(Error::from(e)))
}

#[pyclass(
    name = "ReconstructionResult",
    module = "multiport_py",
    frozen,
    skip_from_py_object
)]
pub struct PyReconstructionResult {
    #[pyo3(get)]
    matrix: PyTransferMatrix,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    similarity: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    restarts_used: usize,
    #[pyo3(get)]
    best_hits: usize,
    #[pyo3(get)]
    defined_entries: usize,
    #[pyo3(get)]
    history: Vec<f64>,
    /// `(phi1, phi2)` for composed reconstructions.
    #[pyo3(get)]
    phases: Option<(f64, f64)>,
}

#[pymethods]
impl PyReconstructionResult {
    fn __repr__(&self) -> String {
        format!(
            "ReconstructionResult(objective={:.6}, similarity={:.4}, converged={})",
            self.objective, self.similarity, self.converged
        )
    }
}

fn result(
    r: multiport::ReconstructionResult,
    phases: Option<PhaseShifts>,
) -> PyReconstructionResult {
    PyReconstructionResult {
        matrix: r.matrix.into(),
        objective: r.objective,
        similarity: r.similarity,
        converged: r.converged,
        restarts_used: r.restarts_used,
        best_hits: r.best_hits,
        defined_entries: r.defined_entries,
        history: r.history,
        phases: phases.map(|p| (p.phi1, p.phi2)),
    }
}

fn config(
    restarts: usize,
    max_iters: usize,
    ftol: f64,
    seed: u64,
    stage: &str,
    weighting: &str,
    amplitude_weight: f64,
) -> PyResult<OptimizerConfig> {
    let stage = match stage {
        "phases_only" => Stage::PhasesOnly,
        "full" => Stage::Full,
        "both" => Stage::Both,
        s => return Err(PyValueError::new_err(format!("unknown stage {s:?}"))),
    };
    let weighting = match weighting {
        "uniform" => Weighting::Uniform,
        "inverse_variance" => Weighting::InverseVariance,
        w => return Err(PyValueError::new_err(format!("unknown weighting {w:?}"))),
    };
    let cfg = OptimizerConfig {
        restarts,
        max_iters,
        ftol,
        seed,
        stage,
        weighting,
        amplitude_weight,
    };
    cfg.validate().py()?;
    Ok(cfg)
}

#[pyfunction]
fn compose_biased(uf: &PyTransferMatrix, phi1: f64, phi2: f64) -> PyResult<PyTransferMatrix> {
    Ok(
        multiport::compose_biased(&uf.inner, PhaseShifts::new(phi1, phi2))
            .py()?
            .into(),
    )
}

#[pyfunction]
fn compose_unbiased(uf: &PyTransferMatrix, phi1: f64, phi2: f64) -> PyResult<PyTransferMatrix> {
    Ok(
        multiport::compose_unbiased(&uf.inner, PhaseShifts::new(phi1, phi2))
            .py()?
            .into(),
    )
}

/// `ub · diag(1, e^{iφ1}, e^{iφ2}) · uf`.
#[pyfunction]
fn compose_general(
    ub: &PyTransferMatrix,
    phi1: f64,
    phi2: f64,
    uf: &PyTransferMatrix,
) -> PyResult<PyTransferMatrix> {
    Ok(
        multiport::compose_general(&ub.inner, PhaseShifts::new(phi1, phi2), &uf.inner)
            .py()?
            .into(),
    )
}

/// Real-bordered form and the removed `(left, right)` gauge phases.
#[pyfunction]
fn real_border(u: &PyTransferMatrix) -> PyResult<(PyTransferMatrix, Vec<f64>, Vec<f64>)> {
    let (m, g) = multiport::real_border(&u.inner).py()?;
    Ok((m.into(), g.left, g.right))
}

#[pyfunction]
fn fidelity(a: &PyTransferMatrix, b: &PyTransferMatrix) -> PyResult<f64> {
    multiport::fidelity(&a.inner, &b.inner).py()
}

/// `(fidelity, conjugated)` after real-bordering both matrices.
#[pyfunction]
fn compare_up_to_gauge(a: &PyTransferMatrix, b: &PyTransferMatrix) -> PyResult<(f64, bool)> {
    multiport::compare_up_to_gauge(&a.inner, &b.inner).py()
}

#[pyfunction]
fn visibility_matrix(u: &PyTransferMatrix) -> PyResult<PyVisibilityMatrix> {
    Ok(PyVisibilityMatrix {
        inner: multiport::visibility_matrix(&u.inner).py()?,
    })
}

#[pyfunction]
fn amplitude_distribution(u: &PyTransferMatrix) -> PyAmplitudeDistribution {
    PyAmplitudeDistribution {
        inner: multiport::amplitude_distribution(&u.inner),
    }
}

#[pyfunction]
fn similarity(a: &PyVisibilityMatrix, b: &PyVisibilityMatrix) -> f64 {
    multiport::similarity(&a.inner, &b.inner)
}

#[pyfunction]
fn coincidence_probabilities(
    u: &PyTransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> PyResult<(f64, f64)> {
    Ok((
        multiport::coincidence_distinguishable(&u.inner, i, j, k, l).py()?,
        multiport::coincidence_indistinguishable(&u.inner, i, j, k, l).py()?,
    ))
}

/// Expected coincidences at each delay (μm).
#[pyfunction]
#[pyo3(signature = (u, i, j, k, l, delays, sigma=None, rate=1.0))]
#[allow(clippy::too_many_arguments)]
fn fringe(
    u: &PyTransferMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    delays: Vec<f64>,
    sigma: Option<f64>,
    rate: f64,
) -> PyResult<Vec<f64>> {
    let sigma = sigma.unwrap_or_else(|| {
        FringeModel::sigma_from_fwhm(multiport::interference::COHERENCE_LENGTH_UM)
    });
    let fm = FringeModel::new(sigma, rate).py()?;
    let pts = multiport::fringe(&u.inner, i, j, k, l, &delays, &fm).py()?;
    Ok(pts.into_iter().map(|p| p.expected).collect())
}

#[pyfunction]
#[pyo3(signature = (
    target, amp, restarts=64, max_iters=2000, ftol=1e-10, seed=0,
    stage="both", weighting="uniform",
    amplitude_weight=multiport::reconstruction::DEFAULT_AMPLITUDE_WEIGHT
))]
#[allow(clippy::too_many_arguments)]
fn reconstruct_direct(
    py: Python<'_>,
    target: &PyVisibilityMatrix,
    amp: &PyAmplitudeDistribution,
    restarts: usize,
    max_iters: usize,
    ftol: f64,
    seed: u64,
    stage: &str,
    weighting: &str,
    amplitude_weight: f64,
) -> PyResult<PyReconstructionResult> {
    let cfg = config(
        restarts,
        max_iters,
        ftol,
        seed,
        stage,
        weighting,
        amplitude_weight,
    )?;
    let (t, a) = (target.inner.clone(), amp.inner.clone());
    let r = py
        .detach(|| multiport::reconstruct_direct(&t, &a, &cfg))
        .py()?;
    Ok(result(r, None))
}

#[pyfunction]
#[pyo3(signature = (uf, ub, target, restarts=64, seed=0, weighting="uniform"))]
fn reconstruct_composed(
    py: Python<'_>,
    uf: &PyTransferMatrix,
    ub: &PyTransferMatrix,
    target: &PyVisibilityMatrix,
    restarts: usize,
    seed: u64,
    weighting: &str,
) -> PyResult<PyReconstructionResult> {
    let cfg = config(restarts, 2000, 1e-10, seed, "both", weighting, 0.0)?;
    let (f, b, t) = (uf.inner.clone(), ub.inner.clone(), target.inner.clone());
    let (ph, _, r) = py
        .detach(|| multiport::reconstruct_composed(&f, &b, &t, &cfg))
        .py()?;
    Ok(result(r, Some(ph)))
}

/// Monte-Carlo `(magnitude σ, phase σ)` matrices for a direct reconstruction.
#[pyfunction]
#[pyo3(signature = (target, amp, samples=200, restarts=64, seed=0))]
fn estimate_uncertainty(
    py: Python<'_>,
    target: &PyVisibilityMatrix,
    amp: &PyAmplitudeDistribution,
    samples: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<(Grid, Grid)> {
    let cfg = OptimizerConfig {
        restarts,
        seed,
        ..Default::default()
    };
    let (t, a) = (target.inner.clone(), amp.inner.clone());
    let s = py
        .detach(|| multiport::estimate_uncertainty(&t, &a, &cfg, samples))
        .py()?;
    Ok((s.mag, s.phase))
}

/// Radians from a literal such as `"0.383pi"` or `"1.2"`.
#[pyfunction]
fn parse_phase(text: &str) -> PyResult<f64> {
    core_parse_phase(text).py()
}

/// The bundled measurement tables, keyed by name.
#[pyfunction]
fn fixtures(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let fx = multiport::fixtures::FixtureSet::load().py()?;
    let d = PyDict::new(py);
    for (name, m) in [
        ("v", &fx.v),
        ("u_f", &fx.u_f),
        ("u_b", &fx.u_b),
        ("w", &fx.w),
    ] {
        d.set_item(name, PyTransferMatrix::from(m.matrix.clone()))?;
    }
    for (name, v) in [("v_m", &fx.v_m), ("v_f", &fx.v_f), ("v_b", &fx.v_b)] {
        d.set_item(name, PyVisibilityMatrix { inner: v.clone() })?;
    }
    for (name, a) in [("u_m", &fx.u_m), ("u_f2", &fx.u_f2), ("u_b2", &fx.u_b2)] {
        d.set_item(name, PyAmplitudeDistribution { inner: a.clone() })?;
    }
    d.set_item("phases", (fx.phases.phi1, fx.phases.phi2))?;
    Ok(d)
}

#[pymodule]
fn multiport_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransferMatrix>()?;
    m.add_class::<PyVisibilityMatrix>()?;
    m.add_class::<PyAmplitudeDistribution>()?;
    m.add_class::<PyReconstructionResult>()?;
    m.add_function(wrap_pyfunction!(compose_biased, m)?)?;
    m.add_function(wrap_pyfunction!(compose_unbiased, m)?)?;
    m.add_function(wrap_pyfunction!(compose_general, m)?)?;
    m.add_function(wrap_pyfunction!(real_border, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(compare_up_to_gauge, m)?)?;
    m.add_function(wrap_pyfunction!(visibility_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(coincidence_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(fringe, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_direct, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_composed, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_uncertainty, m)?)?;
    m.add_function(wrap_pyfunction!(parse_phase, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
