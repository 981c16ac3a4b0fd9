use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{CcaError, Result};
use crate::normal::{bivariate_norm_cdf, norm_quantile};

const SYMMETRY_TOL: f64 = 1e-12;
const MIN_EIGENVALUE: f64 = 1e-10;

/// Gaussian copula with correlation matrix `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCopula {
    rho: DMatrix<f64>,
    /// `ρ⁻¹ − I`
    precision_minus_identity: DMatrix<f64>,
    log_det: f64,
    cholesky: DMatrix<f64>,
}

impl GaussianCopula {
    /// `rho` must be symmetric with unit diagonal and smallest eigenvalue above 1e-10.
    pub fn new(rho: DMatrix<f64>) -> Result<Self> {
        let d = rho.nrows();
        if d == 0 || !rho.is_square() {
            return Err(CcaError::InvalidParameter(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(CcaError::InvalidParameter(
                "correlation matrix has non-finite entries".into(),
            ));
        }
        for i in 0..d {
            if (rho[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(CcaError::InvalidParameter(format!(
                    "correlation diagonal entry {} is {}, expected 1",
                    i + 1,
                    rho[(i, i)]
                )));
            }
            for j in 0..i {
                if (rho[(i, j)] - rho[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(CcaError::InvalidParameter(
                        "correlation matrix is not symmetric".into(),
                    ));
                }
            }
        }
        let min_ev = SymmetricEigen::new(rho.clone()).eigenvalues.min();
        if min_ev.is_nan() || min_ev <= MIN_EIGENVALUE {
            return Err(CcaError::InvalidParameter(format!(
                "correlation matrix is not positive definite: smallest eigenvalue {min_ev:e}"
            )));
        }
        let chol = Cholesky::new(rho.clone()).ok_or_else(|| {
            CcaError::InvalidParameter("correlation matrix has no Cholesky factor".into())
        })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        let precision_minus_identity = chol.inverse() - DMatrix::<f64>::identity(d, d);
        let cholesky = chol.unpack();
        Ok(Self {
            rho,
            precision_minus_identity,
            log_det,
            cholesky,
        })
    }

    pub fn bivariate(r: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]))
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.rho
    }

    /// `ln |ρ|`
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower Cholesky factor of `ρ`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    /// Closed-form differential entropy of the copula density, `½ ln |ρ|`.
    pub fn exact_entropy(&self) -> f64 {
        0.5 * self.log_det
    }

    pub(crate) fn cdf(&self, u: &[f64]) -> Result<f64> {
        match self.dim() {
            1 => Ok(u[0]),
            2 => Ok(bivariate_norm_cdf(
                norm_quantile(u[0]),
                norm_quantile(u[1]),
                self.rho[(0, 1)],
            )),
            d => Err(CcaError::Unsupported(format!(
                "Gaussian copula CDF is implemented for d <= 2, got d = {d}"
            ))),
        }
    }

    pub(crate) fn log_density(&self, u: &[f64]) -> f64 {
        let q: Vec<f64> = u.iter().map(|&v| norm_quantile(v)).collect();
        let m = &self.precision_minus_identity;
        let mut quad = 0.0;
        for i in 0..q.len() {
            let mut row = 0.0;
            for j in 0..q.len() {
                row += m[(i, j)] * q[j];
            }
            quad += q[i] * row;
        }
        -0.5 * self.log_det - 0.5 * quad
    }
}
