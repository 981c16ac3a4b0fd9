use nalgebra::{DMatrix, SymmetricEigen};

use super::{ClaytonCopula, CopulaFamily, CopulaModel, GaussianCopula, GumbelCopula};
use crate::copulas::kendall_tau;
use crate::error::{CcaError, Result};
use crate::marginals::PseudoObservations;
use crate::optimize::golden_section_max;
use crate::signal::symmetrize;

pub const MIN_FIT_SAMPLES: usize = 100;
const EIGEN_FLOOR: f64 = 1e-8;
const THETA_TOL: f64 = 1e-6;

/// Mean log density `(1/T) Σ_t log c(u_t)`; block models sum their blocks.
pub fn mean_log_density(model: &CopulaModel, u: &PseudoObservations) -> Result<f64> {
    if u.dim() != model.dim() {
        return Err(CcaError::DimensionMismatch(format!(
            "data has {} channels, copula has dimension {}",
            u.dim(),
            model.dim()
        )));
    }
    match model {
        CopulaModel::Product(_) => Ok(0.0),
        CopulaModel::Factorial(f) => {
            let mut acc = 0.0;
            for (idx, block) in f.iter() {
                acc += mean_log_density(block, &u.select_channels(idx))?;
            }
            Ok(acc)
        }
        other => {
            let mut buf = Vec::with_capacity(u.dim());
            let mut acc = 0.0;
            for col in u.values().column_iter() {
                buf.clear();
                buf.extend(col.iter().copied());
                acc += other.log_density_unchecked(&buf);
            }
            Ok(acc / u.n_samples() as f64)
        }
    }
}

/// Average Kendall's tau over all channel pairs.
fn mean_pairwise_tau(u: &PseudoObservations) -> Result<f64> {
    let chans = u.to_channels();
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..chans.len() {
        for j in i + 1..chans.len() {
            sum += kendall_tau(&chans[i], &chans[j])?;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Correlation matrix of normal scores, symmetrized, eigenvalue-floored and
/// rescaled to unit diagonal.
pub(crate) fn normal_score_correlation(u: &PseudoObservations) -> DMatrix<f64> {
    let q = u.normal_scores();
    let t = q.ncols() as f64;
    let mean = q.column_mean();
    let mut centered = q;
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / t;
    let sd = cov.diagonal().map(f64::sqrt);
    let mut corr = DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        cov[(i, j)] / (sd[i] * sd[j])
    });
    symmetrize(&mut corr);
    corr
}

fn regularize_correlation(corr: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(corr);
    let floored = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    let d = m.diagonal().map(f64::sqrt);
    let n = m.nrows();
    m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] / (d[i] * d[j])
        }
    });
    symmetrize(&mut m);
    m
}

/// Maximum-likelihood fit of one copula family to pseudo-observations.
///
/// Archimedean families start from Kendall-tau inversion and refine the
/// mean log density by golden-section search on `[θ₀/4, 4θ₀]`, clipped to
/// the family domain.
pub fn fit_copula(u: &PseudoObservations, family: CopulaFamily) -> Result<CopulaModel> {
    if u.n_samples() < MIN_FIT_SAMPLES {
        return Err(CcaError::InsufficientSamples {
            required: MIN_FIT_SAMPLES,
            actual: u.n_samples(),
        });
    }
    let d = u.dim();
    if family != CopulaFamily::Product && d < 2 {
        return Err(CcaError::Unsupported(format!(
            "{family} copula needs dimension >= 2, got {d}"
        )));
    }
    match family {
        CopulaFamily::Product => Ok(CopulaModel::Product(d)),
        CopulaFamily::Gaussian => {
            let rho = regularize_correlation(normal_score_correlation(u));
            Ok(CopulaModel::Gaussian(GaussianCopula::new(rho)?))
        }
        CopulaFamily::Clayton => {
            let tau = mean_pairwise_tau(u)?;
            if tau.is_nan() || tau <= 0.0 {
                return Err(CcaError::FamilyDomain(format!(
                    "Clayton copula needs positive dependence, sample Kendall tau is {tau:.4}"
                )));
            }
            let theta0 = 2.0 * tau / (1.0 - tau);
            let (theta, _) = golden_section_max(
                |th| match ClaytonCopula::new(th, d) {
                    Ok(c) => {
                        mean_log_density(&CopulaModel::Clayton(c), u).unwrap_or(f64::NEG_INFINITY)
                    }
                    Err(_) => f64::NEG_INFINITY,
                },
                theta0 / 4.0,
                4.0 * theta0,
                THETA_TOL,
            );
            CopulaModel::clayton(theta, d)
        }
        CopulaFamily::Gumbel => {
            if d != 2 {
                return Err(CcaError::Unsupported(format!(
                    "Gumbel copula is bivariate only, got dimension {d}"
                )));
            }
            let tau = mean_pairwise_tau(u)?;
            let theta0 = 1.0 / (1.0 - tau);
            let lo = (theta0 / 4.0).max(1.0);
            let hi = (4.0 * theta0).max(lo);
            let (theta, _) = golden_section_max(
                |th| match GumbelCopula::new(th) {
                    Ok(g) => {
                        mean_log_density(&CopulaModel::Gumbel(g), u).unwrap_or(f64::NEG_INFINITY)
                    }
                    Err(_) => f64::NEG_INFINITY,
                },
                lo,
                hi,
                THETA_TOL,
            );
            CopulaModel::gumbel(theta)
        }
    }
}
