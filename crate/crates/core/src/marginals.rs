//! Rank-based probability-integral transforms, empirical quantiles, histogram
//! marginal densities and margin samplers.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CcaError, Result};
use crate::normal::{norm_cdf, norm_quantile};
use crate::rng::{open_unit, seeded};
use crate::signal::SignalMatrix;

/// Points in the open unit hypercube, `d` channels by `T` samples.
///
/// When produced by [`pseudo_observations`] on untied data, each channel is a
/// permutation of `{1/(T+1), …, T/(T+1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    values: DMatrix<f64>,
}

impl PseudoObservations {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CcaError::InvalidInput(
                "pseudo-observations must be non-empty".into(),
            ));
        }
        if let Some(bad) = values.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(CcaError::Domain(format!(
                "pseudo-observation {bad} is outside (0, 1)"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        let s = SignalMatrix::from_channels(channels)?;
        Self::new(s.into_inner())
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn to_channels(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.channel(i)).collect()
    }

    /// Sample `t` as a point in `(0,1)^d`.
    pub fn point(&self, t: usize) -> Vec<f64> {
        self.values.column(t).iter().copied().collect()
    }

    pub fn select_channels(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
        }
    }

    /// Standard normal scores `Φ⁻¹(u)`.
    pub fn normal_scores(&self) -> DMatrix<f64> {
        self.values.map(norm_quantile)
    }
}

/// Average ranks (1-based) of `xs`, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Per-channel `rank / (T + 1)` with average ranks for ties.
pub fn pseudo_observations(s: &SignalMatrix) -> PseudoObservations {
    let t = s.n_samples();
    let denom = (t + 1) as f64;
    let mut values = DMatrix::zeros(s.n_channels(), t);
    for i in 0..s.n_channels() {
        let ranks = average_ranks(&s.channel(i));
        for (j, r) in ranks.into_iter().enumerate() {
            values[(i, j)] = r / denom;
        }
    }
    PseudoObservations { values }
}

/// Equal-width histogram density of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl Histogram {
    /// Freedman–Diaconis bin width `2·IQR·T^{-1/3}`; falls back to Scott's rule
    /// when the IQR vanishes and to a single unit-width bin for constant data.
    fn fit(sorted: &[f64]) -> Self {
        let t = sorted.len();
        let (min, max) = (sorted[0], sorted[t - 1]);
        let range = max - min;
        if range == 0.0 {
            return Self {
                edges: vec![min - 0.5, min + 0.5],
                probabilities: vec![1.0],
            };
        }
        let iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
        let mut width = 2.0 * iqr / (t as f64).cbrt();
        if width.is_nan() || width <= 0.0 {
            let mean = sorted.iter().sum::<f64>() / t as f64;
            let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t as f64).sqrt();
            width = 3.49 * sd / (t as f64).cbrt();
        }
        let bins = ((range / width).ceil() as usize).clamp(1, t.max(1));
        let width = range / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| min + k as f64 * width).collect();
        edges[bins] = max;
        let mut counts = vec![0usize; bins];
        for &x in sorted {
            counts[bin_of(&edges, x).expect("sample lies within its own range")] += 1;
        }
        let probabilities = counts.into_iter().map(|c| c as f64 / t as f64).collect();
        Self {
            edges,
            probabilities,
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Density at `x`; zero outside the support or in an empty bin.
    pub fn density(&self, x: f64) -> f64 {
        match bin_of(&self.edges, x) {
            Some(k) => self.probabilities[k] / (self.edges[k + 1] - self.edges[k]),
            None => 0.0,
        }
    }
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let bins = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[bins]) {
        return None;
    }
    // last bin is closed on the right
    let k = edges.partition_point(|e| *e <= x);
    Some(k.saturating_sub(1).min(bins - 1))
}

/// Linear interpolation between order statistics at fraction `q` of `[0, T-1]`.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical marginal model: sorted samples plus a histogram density per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel {
    sorted: Vec<Vec<f64>>,
    histograms: Vec<Histogram>,
}

impl MarginalModel {
    pub fn fit(s: &SignalMatrix) -> Self {
        let sorted: Vec<Vec<f64>> = (0..s.n_channels())
            .map(|i| {
                let mut c = s.channel(i);
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let histograms = sorted.iter().map(|c| Histogram::fit(c)).collect();
        Self { sorted, histograms }
    }

    pub fn n_channels(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_values(&self, channel: usize) -> &[f64] {
        &self.sorted[channel]
    }

    pub fn histogram(&self, channel: usize) -> &Histogram {
        &self.histograms[channel]
    }

    /// Histogram density of `channel` at `x`.
    pub fn density(&self, channel: usize, x: f64) -> f64 {
        self.histograms[channel].density(x)
    }
}

/// Inverse of the rank transform: interpolates order statistics at position
/// `q·(T+1)`, clamping to the extreme order statistics.
pub fn marginal_quantile(model: &MarginalModel, channel: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(CcaError::Domain(format!(
            "quantile level {q} is outside (0, 1)"
        )));
    }
    let sorted = model.sorted.get(channel).ok_or_else(|| {
        CcaError::InvalidInput(format!(
            "channel {channel} out of range for {} channels",
            model.n_channels()
        ))
    })?;
    let t = sorted.len();
    let pos = q * (t + 1) as f64;
    if pos <= 1.0 {
        return Ok(sorted[0]);
    }
    if pos >= t as f64 {
        return Ok(sorted[t - 1]);
    }
    let lo = pos.floor();
    let frac = pos - lo;
    let k = lo as usize - 1;
    Ok(sorted[k] + frac * (sorted[k + 1] - sorted[k]))
}

/// Named marginal distributions used for synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginSpec {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std: f64 },
    Laplace { loc: f64, scale: f64 },
}

impl MarginSpec {
    /// Builds a margin from its name and positional parameters
    /// (`uniform low high`, `gaussian mean std`, `laplace loc scale`).
    /// Without parameters each family is standardized to zero mean, unit variance.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let spec = match (name.to_ascii_lowercase().as_str(), params) {
            ("uniform", []) => Self::unit_variance_uniform(),
            ("uniform", [low, high]) => Self::Uniform {
                low: *low,
                high: *high,
            },
            ("gaussian" | "normal", []) => Self::Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            ("gaussian" | "normal", [mean, std]) => Self::Gaussian {
                mean: *mean,
                std: *std,
            },
            ("laplace", []) => Self::Laplace {
                loc: 0.0,
                scale: std::f64::consts::FRAC_1_SQRT_2,
            },
            ("laplace", [loc, scale]) => Self::Laplace {
                loc: *loc,
                scale: *scale,
            },
            (n @ ("uniform" | "gaussian" | "normal" | "laplace"), p) => {
                return Err(CcaError::InvalidParameter(format!(
                    "margin {n} takes 0 or 2 parameters, got {}",
                    p.len()
                )))
            }
            (other, _) => {
                return Err(CcaError::InvalidParameter(format!(
                    "unknown margin {other:?}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unit_variance_uniform() -> Self {
        let h = 3f64.sqrt();
        Self::Uniform { low: -h, high: h }
    }

    pub fn validate(&self) -> Result<()> {
        let (scale, what) = match *self {
            Self::Uniform { low, high } => (high - low, "uniform width"),
            Self::Gaussian { std, .. } => (std, "gaussian std"),
            Self::Laplace { scale, .. } => (scale, "laplace scale"),
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CcaError::InvalidParameter(format!(
                "{what} must be positive, got {scale}"
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Gaussian { .. } => "gaussian",
            Self::Laplace { .. } => "laplace",
        }
    }

    pub fn params(&self) -> [f64; 2] {
        match *self {
            Self::Uniform { low, high } => [low, high],
            Self::Gaussian { mean, std } => [mean, std],
            Self::Laplace { loc, scale } => [loc, scale],
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Self::Gaussian { mean, std } => norm_cdf((x - mean) / std),
            Self::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
        }
    }

    /// Quantile function; `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform { low, high } => low + u * (high - low),
            Self::Gaussian { mean, std } => mean + std * norm_quantile(u),
            Self::Laplace { loc, scale } => {
                if u < 0.5 {
                    loc + scale * (2.0 * u).ln()
                } else {
                    loc - scale * (2.0 * (1.0 - u)).ln()
                }
            }
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            _ => self.quantile(open_unit(rng)),
        }
    }
}

impl FromStr for MarginSpec {
    type Err = CcaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s, &[])
    }
}

/// `T` i.i.d. draws from a named margin; deterministic per seed.
pub fn sample_margin(name: &str, params: &[f64], t: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = MarginSpec::from_name(name, params)?;
    if t == 0 {
        return Err(CcaError::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = seeded(seed);
    Ok((0..t).map(|_| spec.sample_with(&mut rng)).collect())
}
