//! Parametric copula families: evaluation, sampling, entropy and fitting.
//!
//! Archimedean families are parameterized through the generator
//! `Φ(t; θ)` with `C(u) = Φ⁻¹(Σ Φ(u_i; θ))`:
//!
//! * Clayton: `Φ(t) = (t^{-θ} − 1) / θ`, `θ > 0`, any dimension.
//! * Gumbel: `Φ(t) = (−ln t)^θ`, `θ ≥ 1`, bivariate only.
//!
//! The Gaussian copula density is evaluated on normal scores `q = Φ⁻¹(u)`:
//! `c(u) = |ρ|^{-1/2} exp(−½ qᵀ(ρ⁻¹ − I)q)`.

mod archimedean;
mod fit;
mod gaussian;
pub(crate) mod sample;
mod tau;

use std::fmt;
use std::str::FromStr;

use crate::error::{CcaError, Result};
use crate::marginals::PseudoObservations;
use crate::signal::BlockPartition;

pub use archimedean::{ClaytonCopula, GumbelCopula};
pub(crate) use fit::normal_score_correlation;
pub use fit::{fit_copula, mean_log_density};
pub use gaussian::GaussianCopula;
pub use sample::sample_copula;
pub use tau::kendall_tau;

/// Copula families that can be fitted to data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopulaFamily {
    Product,
    Gaussian,
    Clayton,
    Gumbel,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 4] = [Self::Product, Self::Gaussian, Self::Clayton, Self::Gumbel];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Product => "product",
            Self::Gaussian => "gaussian",
            Self::Clayton => "clayton",
            Self::Gumbel => "gumbel",
        }
    }

    /// Number of free parameters for a block of dimension `d`.
    pub fn parameter_count(&self, d: usize) -> usize {
        match self {
            Self::Product => 0,
            Self::Gaussian => d * (d.saturating_sub(1)) / 2,
            Self::Clayton | Self::Gumbel => 1,
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = CcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "product" | "independence" => Ok(Self::Product),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "clayton" => Ok(Self::Clayton),
            "gumbel" => Ok(Self::Gumbel),
            other => Err(CcaError::InvalidParameter(format!(
                "unknown copula family {other:?}"
            ))),
        }
    }
}

/// Block-diagonal copula: independent blocks, each with its own model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialCopula {
    partition: BlockPartition,
    blocks: Vec<CopulaModel>,
}

impl FactorialCopula {
    pub fn new(partition: BlockPartition, blocks: Vec<CopulaModel>) -> Result<Self> {
        if partition.n_blocks() != blocks.len() {
            return Err(CcaError::DimensionMismatch(format!(
                "partition has {} blocks but {} block models were given",
                partition.n_blocks(),
                blocks.len()
            )));
        }
        for (idx, model) in partition.blocks().iter().zip(&blocks) {
            if matches!(model, CopulaModel::Factorial(_)) {
                return Err(CcaError::InvalidParameter(
                    "factorial copulas cannot be nested".into(),
                ));
            }
            if model.dim() != idx.len() {
                return Err(CcaError::DimensionMismatch(format!(
                    "block {:?} has {} channels but its model has dimension {}",
                    idx.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    idx.len(),
                    model.dim()
                )));
            }
        }
        Ok(Self { partition, blocks })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn block_models(&self) -> &[CopulaModel] {
        &self.blocks
    }

    /// `(channel indices, model)` per block.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &CopulaModel)> {
        self.partition.blocks().iter().zip(&self.blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaModel {
    Product(usize),
    Gaussian(GaussianCopula),
    Clayton(ClaytonCopula),
    Gumbel(GumbelCopula),
    Factorial(FactorialCopula),
}

impl CopulaModel {
    pub fn product(dim: usize) -> Self {
        Self::Product(dim)
    }

    pub fn gaussian(rho: nalgebra::DMatrix<f64>) -> Result<Self> {
        GaussianCopula::new(rho).map(Self::Gaussian)
    }

    /// Bivariate Gaussian copula with correlation `r`.
    pub fn gaussian_pair(r: f64) -> Result<Self> {
        GaussianCopula::bivariate(r).map(Self::Gaussian)
    }

    pub fn clayton(theta: f64, dim: usize) -> Result<Self> {
        ClaytonCopula::new(theta, dim).map(Self::Clayton)
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        GumbelCopula::new(theta).map(Self::Gumbel)
    }

    pub fn factorial(partition: BlockPartition, blocks: Vec<CopulaModel>) -> Result<Self> {
        FactorialCopula::new(partition, blocks).map(Self::Factorial)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Product(d) => *d,
            Self::Gaussian(g) => g.dim(),
            Self::Clayton(c) => c.dim(),
            Self::Gumbel(_) => 2,
            Self::Factorial(f) => f.partition.n_channels(),
        }
    }

    /// Family name; `"factorial"` for block models.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Product(_) => "product",
            Self::Gaussian(_) => "gaussian",
            Self::Clayton(_) => "clayton",
            Self::Gumbel(_) => "gumbel",
            Self::Factorial(_) => "factorial",
        }
    }

    /// `None` for factorial models.
    pub fn family(&self) -> Option<CopulaFamily> {
        match self {
            Self::Product(_) => Some(CopulaFamily::Product),
            Self::Gaussian(_) => Some(CopulaFamily::Gaussian),
            Self::Clayton(_) => Some(CopulaFamily::Clayton),
            Self::Gumbel(_) => Some(CopulaFamily::Gumbel),
            Self::Factorial(_) => None,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Self::Factorial(f) => f.blocks.iter().map(CopulaModel::parameter_count).sum(),
            other => other
                .family()
                .map_or(0, |fam| fam.parameter_count(other.dim())),
        }
    }

    /// Scalar dependence parameter of Archimedean models.
    pub fn theta(&self) -> Option<f64> {
        match self {
            Self::Clayton(c) => Some(c.theta()),
            Self::Gumbel(g) => Some(g.theta()),
            _ => None,
        }
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(CcaError::DimensionMismatch(format!(
                "point has {} coordinates, copula has dimension {}",
                u.len(),
                self.dim()
            )));
        }
        if let Some(bad) = u.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(CcaError::Domain(format!(
                "copula argument {bad} is not strictly inside (0, 1)"
            )));
        }
        Ok(())
    }

    /// Copula CDF `C(u)`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        self.cdf_unchecked(u)
    }

    fn cdf_unchecked(&self, u: &[f64]) -> Result<f64> {
        Ok(match self {
            Self::Product(_) => u.iter().product(),
            Self::Gaussian(g) => g.cdf(u)?,
            Self::Clayton(c) => c.cdf(u),
            Self::Gumbel(g) => g.cdf(u[0], u[1]),
            Self::Factorial(f) => {
                let mut acc = 1.0;
                for (idx, model) in f.iter() {
                    let sub: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
                    acc *= model.cdf_unchecked(&sub)?;
                }
                acc
            }
        })
    }

    /// Copula density `c(u) = ∂ⁿC / ∂u₁…∂uₙ`.
    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self.density_unchecked(u))
    }

    pub(crate) fn density_unchecked(&self, u: &[f64]) -> f64 {
        match self {
            Self::Product(_) => 1.0,
            Self::Factorial(f) => {
                let mut acc = 1.0;
                for (idx, model) in f.iter() {
                    let sub: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
                    acc *= model.density_unchecked(&sub);
                }
                acc
            }
            other => other.log_density_unchecked(u).exp(),
        }
    }

    /// Natural log of the copula density.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self.log_density_unchecked(u))
    }

    pub(crate) fn log_density_unchecked(&self, u: &[f64]) -> f64 {
        match self {
            Self::Product(_) => 0.0,
            Self::Gaussian(g) => g.log_density(u),
            Self::Clayton(c) => c.log_density(u),
            Self::Gumbel(g) => g.log_density(u[0], u[1]),
            Self::Factorial(f) => {
                let mut acc = 0.0;
                for (idx, model) in f.iter() {
                    let sub: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
                    acc += model.log_density_unchecked(&sub);
                }
                acc
            }
        }
    }
}

/// Free-function form of [`CopulaModel::cdf`].
pub fn copula_cdf(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    model.cdf(u)
}

/// Free-function form of [`CopulaModel::density`].
pub fn copula_density(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    model.density(u)
}

/// Empirical cross-entropy `−(1/T) Σ_t log c(u_t)` of the model under the data.
///
/// Factorial models return the sum of their block entropies.
pub fn copula_entropy(model: &CopulaModel, u: &PseudoObservations) -> Result<f64> {
    let h = -mean_log_density(model, u)?;
    // avoid reporting -0.0 for the product copula
    Ok(if h == 0.0 { 0.0 } else { h })
}
