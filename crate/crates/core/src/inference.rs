//! Two-phase copula component analysis.
//!
//! Phase 1 whitens the observations and estimates an orthogonal rotation with
//! FastICA. Phase 2 works on the ranks of the recovered sources only: it groups
//! dependent components into blocks, fits one copula per block and assembles a
//! factorial model. The fit is summarized by the decomposition `D = I + H` of
//! the KL divergence between the data and the model, and by the average
//! log-likelihood.

use crate::copulas::{
    copula_entropy, fit_copula, kendall_tau, mean_log_density, CopulaFamily, CopulaModel,
};
use crate::error::{CcaError, Result};
use crate::ica::{fastica, mutual_information, normalize_components, FastIcaConfig};
use crate::marginals::{pseudo_observations, MarginalModel, PseudoObservations};
use crate::signal::{center_and_whiten, BlockPartition, SeparationModel, SignalMatrix};

pub const DEFAULT_TAU_THRESHOLD: f64 = 0.1;

/// Floor applied to histogram marginal densities inside the log-likelihood.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionMode {
    /// Connected components of the `|τ| > threshold` graph.
    Auto,
    Explicit(BlockPartition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaConfig {
    /// Candidate families for non-singleton blocks, in tie-breaking order.
    pub families: Vec<CopulaFamily>,
    pub partition: PartitionMode,
    pub tau_threshold: f64,
    /// FastICA settings; its `seed` is replaced by [`CcaConfig::seed`].
    pub ica: FastIcaConfig,
    pub seed: u64,
}

impl Default for CcaConfig {
    fn default() -> Self {
        Self {
            families: CopulaFamily::ALL.to_vec(),
            partition: PartitionMode::Auto,
            tau_threshold: DEFAULT_TAU_THRESHOLD,
            ica: FastIcaConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Mutual information `I` of the recovered sources (nats).
    pub mutual_information: f64,
    /// Copula entropy `H` of the fitted model on the recovered sources (nats).
    pub copula_entropy: f64,
    /// `D = I + H` (nats).
    pub divergence: f64,
    /// Average log-likelihood per sample (nats).
    pub log_likelihood: f64,
    pub partition: BlockPartition,
    pub copula: CopulaModel,
    pub ica_iterations: usize,
    pub seed: u64,
    /// Whether any marginal density had to be floored at [`DENSITY_FLOOR`].
    pub density_floor_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDecomposition {
    pub mutual_information: f64,
    pub copula_entropy: f64,
    pub divergence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub density_floor_hit: bool,
}

/// Phase-2 result: the block structure and its factorial copula.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceFit {
    pub partition: BlockPartition,
    pub copula: CopulaModel,
}

/// Groups channels whose pairwise `|τ|` exceeds `tau_threshold` into blocks
/// (connected components of the dependence graph).
pub fn detect_partition(u: &PseudoObservations, tau_threshold: f64) -> Result<BlockPartition> {
    if !(tau_threshold > 0.0 && tau_threshold < 1.0) {
        return Err(CcaError::InvalidParameter(format!(
            "tau threshold must lie in (0, 1), got {tau_threshold}"
        )));
    }
    let n = u.dim();
    let chans = u.to_channels();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if kendall_tau(&chans[i], &chans[j])?.abs() > tau_threshold {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    BlockPartition::new(n, blocks)
}

/// Penalized score `mean log density − k·ln(T)/(2T)`.
fn penalized_score(model: &CopulaModel, u: &PseudoObservations) -> Result<f64> {
    let t = u.n_samples() as f64;
    let k = model.parameter_count() as f64;
    Ok(mean_log_density(model, u)? - k * t.ln() / (2.0 * t))
}

/// Fits every applicable family of `menu` and keeps the best penalized score.
/// Families whose domain excludes the data are skipped.
pub fn select_and_fit(
    u: &PseudoObservations,
    menu: &[CopulaFamily],
) -> Result<(CopulaFamily, CopulaModel)> {
    if u.dim() < 2 {
        return Err(CcaError::InvalidInput(format!(
            "family selection needs a block of dimension >= 2, got {}",
            u.dim()
        )));
    }
    let mut best: Option<(CopulaFamily, CopulaModel, f64)> = None;
    for &family in menu {
        let model = match fit_copula(u, family) {
            Ok(m) => m,
            Err(CcaError::FamilyDomain(_) | CcaError::Unsupported(_)) => continue,
            Err(e) => return Err(e),
        };
        let score = penalized_score(&model, u)?;
        if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
            best = Some((family, model, score));
        }
    }
    best.map(|(f, m, _)| (f, m)).ok_or_else(|| {
        CcaError::FamilyDomain(format!(
            "no family in [{}] applies to this block",
            menu.iter()
                .map(CopulaFamily::name)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })
}

/// Family with the best penalized likelihood; ties go to the earlier menu entry.
pub fn select_family(u: &PseudoObservations, menu: &[CopulaFamily]) -> Result<CopulaFamily> {
    select_and_fit(u, menu).map(|(f, _)| f)
}

/// Phase 2 on recovered sources: ranks, partition and per-block copulas.
pub fn fit_dependence(sources: &SignalMatrix, config: &CcaConfig) -> Result<DependenceFit> {
    let u = pseudo_observations(sources);
    let partition = match &config.partition {
        PartitionMode::Auto => detect_partition(&u, config.tau_threshold)?,
        PartitionMode::Explicit(p) => {
            if p.n_channels() != sources.n_channels() {
                return Err(CcaError::DimensionMismatch(format!(
                    "partition covers {} channels, data has {}",
                    p.n_channels(),
                    sources.n_channels()
                )));
            }
            p.clone()
        }
    };
    let mut models = Vec::with_capacity(partition.n_blocks());
    for block in partition.blocks() {
        if block.len() == 1 {
            models.push(CopulaModel::Product(1));
            continue;
        }
        let (_, model) =
            select_and_fit(&u.select_channels(block), &config.families).map_err(|e| {
                CcaError::Block {
                    block: block.iter().map(|i| i + 1).collect(),
                    source: Box::new(e),
                }
            })?;
        models.push(model);
    }
    let copula = CopulaModel::factorial(partition.clone(), models)?;
    Ok(DependenceFit { partition, copula })
}

/// `I` from the Gaussian-copula estimator, `H` as the empirical copula
/// cross-entropy, `D = I + H`.
pub fn kl_decomposition(s: &SignalMatrix, model: &CopulaModel) -> Result<KlDecomposition> {
    if model.dim() != s.n_channels() {
        return Err(CcaError::DimensionMismatch(format!(
            "copula dimension {} does not match {} channels",
            model.dim(),
            s.n_channels()
        )));
    }
    let mi = mutual_information(s)?;
    let h = copula_entropy(model, &pseudo_observations(s))?;
    let d = mi + h;
    // Store H as D − I so that D − I − H evaluates to exactly zero; this
    // differs from `h` by at most one rounding step and is exact when h = 0.
    Ok(KlDecomposition {
        mutual_information: mi,
        copula_entropy: d - mi,
        divergence: d,
    })
}

/// `(1/T) Σ_t [Σ_i log p̂_i(s_it) + log c(u_t)]` with `s = W(x − mean)`.
pub fn average_log_likelihood(
    x: &SignalMatrix,
    separation: &SeparationModel,
    model: &CopulaModel,
    margins: &MarginalModel,
) -> Result<LogLikelihood> {
    let s = separation.apply(x)?;
    let n = s.n_channels();
    if model.dim() != n || margins.n_channels() != n {
        return Err(CcaError::DimensionMismatch(format!(
            "{n} sources, copula dimension {}, {} marginal models",
            model.dim(),
            margins.n_channels()
        )));
    }
    let t = s.n_samples() as f64;
    let mut floor_hit = false;
    let mut marginal = 0.0;
    for i in 0..n {
        for &v in s.values().row(i).iter() {
            let p = margins.density(i, v);
            let p = if p < DENSITY_FLOOR {
                floor_hit = true;
                DENSITY_FLOOR
            } else {
                p
            };
            marginal += p.ln();
        }
    }
    let dependence = mean_log_density(model, &pseudo_observations(&s))?;
    Ok(LogLikelihood {
        value: marginal / t + dependence,
        density_floor_hit: floor_hit,
    })
}

/// Full two-phase fit of observations `X`.
pub fn cca_fit(x: &SignalMatrix, config: &CcaConfig) -> Result<(SeparationModel, FitReport)> {
    x.require_estimable()?;
    let whitened = center_and_whiten(x)?;
    let ica_config = FastIcaConfig {
        seed: config.seed,
        ..config.ica
    };
    let ica = fastica(&whitened.data, &ica_config)?;
    let rotation = normalize_components(&ica.rotation, &whitened.data);
    let separation = SeparationModel::new(whitened.mean, whitened.whitening, rotation)?;
    let sources = separation.apply(x)?;

    let DependenceFit { partition, copula } = fit_dependence(&sources, config)?;
    let kl = kl_decomposition(&sources, &copula)?;
    let margins = MarginalModel::fit(&sources);
    let ll = average_log_likelihood(x, &separation, &copula, &margins)?;

    let report = FitReport {
        mutual_information: kl.mutual_information,
        copula_entropy: kl.copula_entropy,
        divergence: kl.divergence,
        log_likelihood: ll.value,
        partition,
        copula,
        ica_iterations: ica.iterations,
        seed: config.seed,
        density_floor_hit: ll.density_floor_hit,
    };
    Ok((separation, report))
}
