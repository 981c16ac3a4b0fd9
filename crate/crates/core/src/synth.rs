//! Ground-truth synthetic data: copula-coupled sources with chosen margins,
//! linearly mixed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::copulas::sample::sample_with;
use crate::copulas::CopulaModel;
use crate::error::{CcaError, Result};
use crate::marginals::MarginSpec;
use crate::rng::seeded;
use crate::signal::{mix, reciprocal_condition, SignalMatrix};

/// Random mixing matrices are redrawn until `σ_min/σ_max` reaches this value.
pub const MIN_MIXING_RCOND: f64 = 0.1;

/// Joint law of the sources: a copula plus one margin per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    copula: CopulaModel,
    margins: Vec<MarginSpec>,
}

impl SourceModel {
    pub fn new(copula: CopulaModel, margins: Vec<MarginSpec>) -> Result<Self> {
        if copula.dim() != margins.len() {
            return Err(CcaError::DimensionMismatch(format!(
                "copula has dimension {}, {} margins given",
                copula.dim(),
                margins.len()
            )));
        }
        for m in &margins {
            m.validate()?;
        }
        Ok(Self { copula, margins })
    }

    pub fn copula(&self) -> &CopulaModel {
        &self.copula
    }

    pub fn margins(&self) -> &[MarginSpec] {
        &self.margins
    }

    pub fn n_channels(&self) -> usize {
        self.margins.len()
    }

    /// Draws `t` source vectors: copula uniforms pushed through each margin's quantile.
    pub fn sample_with<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<SignalMatrix> {
        let mut u = sample_with(&self.copula, t, rng);
        for (i, margin) in self.margins.iter().enumerate() {
            u.row_mut(i).apply(|v| *v = margin.quantile(*v));
        }
        SignalMatrix::new(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MixingSpec {
    Identity,
    /// Standard normal entries, redrawn until well conditioned.
    Random,
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub sources: SignalMatrix,
    pub mixing: DMatrix<f64>,
    pub observations: SignalMatrix,
}

pub fn random_mixing<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        if reciprocal_condition(&a) >= MIN_MIXING_RCOND {
            return a;
        }
    }
}

/// Draws mixing matrix (when random) and then `t` sources from one seeded stream.
pub fn synthesize(
    model: &SourceModel,
    mixing: &MixingSpec,
    t: usize,
    seed: u64,
) -> Result<SyntheticData> {
    if t == 0 {
        return Err(CcaError::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let n = model.n_channels();
    let mut rng = seeded(seed);
    let a = match mixing {
        MixingSpec::Identity => DMatrix::identity(n, n),
        MixingSpec::Random => random_mixing(n, &mut rng),
        MixingSpec::Matrix(m) => {
            if m.shape() != (n, n) {
                return Err(CcaError::DimensionMismatch(format!(
                    "mixing matrix is {}x{}, model has {n} channels",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if reciprocal_condition(m) <= crate::signal::RANK_TOL {
                return Err(CcaError::InvalidParameter(
                    "mixing matrix is singular".into(),
                ));
            }
            m.clone()
        }
    };
    let sources = model.sample_with(t, &mut rng)?;
    let observations = mix(&sources, &a)?;
    Ok(SyntheticData {
        sources,
        mixing: a,
        observations,
    })
}
