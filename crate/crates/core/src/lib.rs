//! Copula component analysis.
//!
//! Blind source separation that keeps the residual dependence between
//! recovered components: FastICA finds a demixing matrix, rank-based
//! pseudo-observations feed parametric copulas (product, Gaussian, Clayton,
//! Gumbel, and block-factorial combinations of them), and the fit is reported
//! through the KL decomposition `D = I + H` and the average log-likelihood.

pub mod copulas;
pub mod error;
pub mod ica;
pub mod inference;
pub mod marginals;
pub mod normal;
pub mod optimize;
pub mod rng;
pub mod signal;
pub mod synth;

pub use copulas::{
    copula_cdf, copula_density, copula_entropy, fit_copula, kendall_tau, mean_log_density,
    sample_copula, CopulaFamily, CopulaModel, FactorialCopula,
};
pub use error::{CcaError, Result};
pub use ica::{
    fastica, mutual_information, normalize_components, FastIcaConfig, IcaFit, Nonlinearity,
};
pub use inference::{
    average_log_likelihood, cca_fit, detect_partition, fit_dependence, kl_decomposition,
    select_family, CcaConfig, FitReport, KlDecomposition, LogLikelihood, PartitionMode,
};
pub use marginals::{
    marginal_quantile, pseudo_observations, sample_margin, MarginSpec, MarginalModel,
    PseudoObservations,
};
pub use signal::{
    amari_index, center_and_whiten, mix, BlockPartition, SeparationModel, SignalMatrix,
};
pub use synth::{synthesize, MixingSpec, SourceModel, SyntheticData};
