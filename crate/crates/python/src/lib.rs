//! Python bindings. Signals are passed as lists of channels (one inner list
//! per channel, one entry per sample); partitions are 0-based.

use cca_core::{
    BlockPartition, CcaConfig, CcaError, CopulaFamily, CopulaModel, FastIcaConfig, FitReport,
    MarginSpec, MixingSpec, PartitionMode, PseudoObservations, SeparationModel, SignalMatrix,
    SourceModel,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: CcaError) -> PyErr {
    match e {
        CcaError::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn signal(channels: &[Vec<f64>]) -> PyResult<SignalMatrix> {
    SignalMatrix::from_channels(channels).map_err(py_err)
}

fn uniforms(channels: &[Vec<f64>]) -> PyResult<PseudoObservations> {
    PseudoObservations::from_channels(channels).map_err(py_err)
}

fn square(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!(
            "{what} must be a non-empty square matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn family(name: &str) -> PyResult<CopulaFamily> {
    name.parse().map_err(py_err)
}

/// A copula model: product, Gaussian, Clayton, Gumbel, or a factorial
/// combination of these over disjoint channel blocks.
#[pyclass(module = "copula_ca", name = "Copula", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyCopula {
    inner: CopulaModel,
}

#[pymethods]
impl PyCopula {
    #[staticmethod]
    fn product(dim: usize) -> Self {
        Self {
            inner: CopulaModel::product(dim),
        }
    }

    /// Gaussian copula with the given correlation matrix.
    #[staticmethod]
    fn gaussian(rho: Vec<Vec<f64>>) -> PyResult<Self> {
        let rho = square(&rho, "correlation")?;
        Ok(Self {
            inner: CopulaModel::gaussian(rho).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn gaussian_pair(r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CopulaModel::gaussian_pair(r).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (theta, dim = 2))]
    fn clayton(theta: f64, dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CopulaModel::clayton(theta, dim).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn gumbel(theta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CopulaModel::gumbel(theta).map_err(py_err)?,
        })
    }

    /// Block-product copula; `blocks[k]` acts on the channels `partition[k]`.
    #[staticmethod]
    fn factorial(partition: Vec<Vec<usize>>, blocks: Vec<PyRef<'_, PyCopula>>) -> PyResult<Self> {
        if blocks.len() != partition.len() {
            return Err(PyValueError::new_err(format!(
                "{} block models for {} blocks",
                blocks.len(),
                partition.len()
            )));
        }
        if partition.iter().any(|b| b.windows(2).any(|w| w[0] >= w[1])) {
            return Err(PyValueError::new_err(
                "list the channels of each block in ascending order",
            ));
        }
        let n = partition.iter().map(Vec::len).sum();
        let p = BlockPartition::new(n, partition.clone()).map_err(py_err)?;
        // the core orders blocks canonically; carry each model with its block
        let models = p
            .blocks()
            .iter()
            .map(|b| {
                let k = partition.iter().position(|u| u == b).expect("same blocks");
                blocks[k].inner.clone()
            })
            .collect();
        Ok(Self {
            inner: CopulaModel::factorial(p, models).map_err(py_err)?,
        })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family_name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn theta(&self) -> Option<f64> {
        self.inner.theta()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// Correlation matrix of a Gaussian copula, else `None`.
    #[getter]
    fn correlation(&self) -> Option<Vec<Vec<f64>>> {
        match &self.inner {
            CopulaModel::Gaussian(g) => Some(rows_of(g.correlation())),
            _ => None,
        }
    }

    /// Block models of a factorial copula as `(channels, Copula)` pairs.
    fn blocks(&self) -> Vec<(Vec<usize>, PyCopula)> {
        match &self.inner {
            CopulaModel::Factorial(f) => f
                .iter()
                .map(|(b, m)| (b.clone(), PyCopula { inner: m.clone() }))
                .collect(),
            other => vec![((0..other.dim()).collect(), self.clone())],
        }
    }

    fn cdf(&self, u: Vec<f64>) -> PyResult<f64> {
        self.inner.cdf(&u).map_err(py_err)
    }

    fn density(&self, u: Vec<f64>) -> PyResult<f64> {
        self.inner.density(&u).map_err(py_err)
    }

    fn log_density(&self, u: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density(&u).map_err(py_err)
    }

    /// `t` draws as a list of channels in (0, 1).
    #[pyo3(signature = (t, seed = 0))]
    fn sample(&self, t: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(cca_core::sample_copula(&self.inner, t, seed)
            .map_err(py_err)?
            .to_channels())
    }

    /// Empirical cross-entropy `−mean log c(u)` in nats.
    fn entropy(&self, u: Vec<Vec<f64>>) -> PyResult<f64> {
        cca_core::copula_entropy(&self.inner, &uniforms(&u)?).map_err(py_err)
    }

    fn __eq__(&self, other: &PyCopula) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Copula({:?})", self.inner)
    }
}

/// Outcome of `cca_fit`.
#[pyclass(module = "copula_ca", name = "FitReport", frozen)]
pub struct PyFitReport {
    separation: SeparationModel,
    report: FitReport,
}

#[pymethods]
impl PyFitReport {
    /// Demixing matrix `W` (rows are components).
    #[getter]
    fn demixing(&self) -> Vec<Vec<f64>> {
        rows_of(&self.separation.demixing())
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.separation.mean().iter().copied().collect()
    }

    #[getter]
    fn partition(&self) -> Vec<Vec<usize>> {
        self.report.partition.blocks().to_vec()
    }

    #[getter]
    fn copula(&self) -> PyCopula {
        PyCopula {
            inner: self.report.copula.clone(),
        }
    }

    #[getter]
    fn mutual_information(&self) -> f64 {
        self.report.mutual_information
    }

    #[getter]
    fn copula_entropy(&self) -> f64 {
        self.report.copula_entropy
    }

    #[getter]
    fn divergence(&self) -> f64 {
        self.report.divergence
    }

    #[getter]
    fn log_likelihood(&self) -> f64 {
        self.report.log_likelihood
    }

    #[getter]
    fn ica_iterations(&self) -> usize {
        self.report.ica_iterations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.report.seed
    }

    #[getter]
    fn density_floor_hit(&self) -> bool {
        self.report.density_floor_hit
    }

    /// Recovered sources `W(x − mean)` for observations `x`.
    fn sources(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self
            .separation
            .apply(&signal(&x)?)
            .map_err(py_err)?
            .to_channels())
    }

    fn __repr__(&self) -> String {
        format!(
            "FitReport(partition={}, family={}, I={:.6}, H={:.6}, D={:.6}, L={:.6})",
            self.report.partition,
            self.report.copula.family_name(),
            self.report.mutual_information,
            self.report.copula_entropy,
            self.report.divergence,
            self.report.log_likelihood
        )
    }
}

/// Two-phase fit: FastICA separation, then a factorial copula on the sources.
///
/// `families` limits the candidate families for multi-channel blocks;
/// `partition` fixes the blocks instead of detecting them from Kendall's tau.
#[pyfunction]
#[pyo3(signature = (x, families = None, partition = None, tau_threshold = 0.1, seed = 0, max_iter = 200, tol = 1e-6))]
fn cca_fit(
    x: Vec<Vec<f64>>,
    families: Option<Vec<String>>,
    partition: Option<Vec<Vec<usize>>>,
    tau_threshold: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> PyResult<PyFitReport> {
    let x = signal(&x)?;
    let families = match families {
        None => CopulaFamily::ALL.to_vec(),
        Some(names) => names.iter().map(|n| family(n)).collect::<PyResult<_>>()?,
    };
    let partition = match partition {
        None => PartitionMode::Auto,
        Some(p) => PartitionMode::Explicit(BlockPartition::new(x.n_channels(), p).map_err(py_err)?),
    };
    let config = CcaConfig {
        families,
        partition,
        tau_threshold,
        ica: FastIcaConfig {
            max_iter,
            tol,
            ..Default::default()
        },
        seed,
    };
    let (separation, report) = cca_core::cca_fit(&x, &config).map_err(py_err)?;
    Ok(PyFitReport { separation, report })
}

/// Maximum-likelihood fit of one family to pseudo-observations.
#[pyfunction]
fn fit_copula(u: Vec<Vec<f64>>, family_name: &str) -> PyResult<PyCopula> {
    let inner = cca_core::fit_copula(&uniforms(&u)?, family(family_name)?).map_err(py_err)?;
    Ok(PyCopula { inner })
}

/// Best family of `menu` by penalized likelihood.
#[pyfunction]
#[pyo3(signature = (u, menu = None))]
fn select_family(u: Vec<Vec<f64>>, menu: Option<Vec<String>>) -> PyResult<String> {
    let menu = match menu {
        None => CopulaFamily::ALL.to_vec(),
        Some(names) => names.iter().map(|n| family(n)).collect::<PyResult<_>>()?,
    };
    let f = cca_core::select_family(&uniforms(&u)?, &menu).map_err(py_err)?;
    Ok(f.name().to_owned())
}

/// Rank/(T+1) pseudo-observations of each channel.
#[pyfunction]
fn pseudo_observations(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(cca_core::pseudo_observations(&signal(&x)?).to_channels())
}

#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    cca_core::kendall_tau(&x, &y).map_err(py_err)
}

/// Gaussian-copula estimate of the mutual information between channels (nats).
#[pyfunction]
fn mutual_information(x: Vec<Vec<f64>>) -> PyResult<f64> {
    cca_core::mutual_information(&signal(&x)?).map_err(py_err)
}

/// Distance of a square matrix from a scaled permutation, in [0, 1].
#[pyfunction]
fn amari_index(p: Vec<Vec<f64>>) -> PyResult<f64> {
    cca_core::amari_index(&square(&p, "matrix")?).map_err(py_err)
}

/// Linear mixture `A·S`.
#[pyfunction]
fn mix(s: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let a = square(&a, "mixing matrix")?;
    Ok(cca_core::mix(&signal(&s)?, &a)
        .map_err(py_err)?
        .to_channels())
}

/// Draws sources from `copula` with the named margins and mixes them.
///
/// `mixing` is "random", "identity" or a square matrix. Returns
/// `(sources, mixing_matrix, observations)`.
/// Channel lists of the sources, rows of the mixing matrix, channel lists of the mixtures.
type Synthesized = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

#[pyfunction]
#[pyo3(signature = (copula, margins, t, seed = 0, mixing = None))]
fn synthesize(
    copula: &PyCopula,
    margins: Vec<String>,
    t: usize,
    seed: u64,
    mixing: Option<&Bound<'_, PyAny>>,
) -> PyResult<Synthesized> {
    let margins = margins
        .iter()
        .map(|m| m.parse::<MarginSpec>().map_err(py_err))
        .collect::<PyResult<Vec<_>>>()?;
    let model = SourceModel::new(copula.inner.clone(), margins).map_err(py_err)?;
    let spec = match mixing {
        None => MixingSpec::Random,
        Some(obj) => match obj.extract::<String>() {
            Ok(s) if s == "random" => MixingSpec::Random,
            Ok(s) if s == "identity" => MixingSpec::Identity,
            Ok(s) => return Err(PyValueError::new_err(format!("unknown mixing {s:?}"))),
            Err(_) => {
                MixingSpec::Matrix(square(&obj.extract::<Vec<Vec<f64>>>()?, "mixing matrix")?)
            }
        },
    };
    let data = cca_core::synthesize(&model, &spec, t, seed).map_err(py_err)?;
    Ok((
        data.sources.to_channels(),
        rows_of(&data.mixing),
        data.observations.to_channels(),
    ))
}

#[pymodule]
mod copula_ca {
    #[pymodule_export]
    use super::{
        amari_index, cca_fit, fit_copula, kendall_tau, mix, mutual_information,
        pseudo_observations, select_family, synthesize, PyCopula, PyFitReport,
    };
}
