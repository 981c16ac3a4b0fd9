//! Signal containers, linear mixing, centering/whitening and the Amari index.
//!
//! Every matrix of signals is stored channel-major: row `i` holds channel `i`
//! and column `t` holds time sample `t`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CcaError, Result};

/// Orthogonality tolerance for rotations, `‖R·Rᵀ − I‖_max`.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

/// Relative eigenvalue floor below which a covariance is considered rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// `n` channels by `T` samples of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    values: DMatrix<f64>,
}

impl SignalMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CcaError::InvalidInput(format!(
                "signal matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for t in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, t)].is_finite() {
                    return Err(CcaError::NonFinite {
                        channel: i,
                        sample: t,
                    });
                }
            }
        }
        Ok(Self { values })
    }

    /// Builds a matrix from one vector per channel.
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        let n = channels.len();
        let t = channels.first().map_or(0, Vec::len);
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != t) {
            return Err(CcaError::DimensionMismatch(format!(
                "channel {i} has {} samples, expected {t}",
                c.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, t, |i, j| channels[i][j]))
    }

    pub fn n_channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn to_channels(&self) -> Vec<Vec<f64>> {
        (0..self.n_channels()).map(|i| self.channel(i)).collect()
    }

    /// Applies `f` to every entry of the given channels.
    pub fn map_channels<F: Fn(usize, f64) -> f64>(&self, f: F) -> Result<Self> {
        let mut values = self.values.clone();
        for (i, mut row) in values.row_iter_mut().enumerate() {
            row.apply(|v| *v = f(i, *v));
        }
        Self::new(values)
    }

    /// Keeps only the listed channels, in order.
    pub fn select_channels(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
        }
    }

    /// Errors unless there are enough samples to estimate second-order statistics.
    pub fn require_estimable(&self) -> Result<()> {
        let required = (self.n_channels() + 1).max(10);
        if self.n_samples() < required {
            return Err(CcaError::InsufficientSamples {
                required,
                actual: self.n_samples(),
            });
        }
        Ok(())
    }

    pub fn channel_means(&self) -> DVector<f64> {
        self.values.column_mean()
    }

    /// Sample covariance with the `1/T` normalization used throughout the crate.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.channel_means();
        let mut centered = self.values.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let mut cov = &centered * centered.transpose() / self.n_samples() as f64;
        symmetrize(&mut cov);
        cov
    }
}

/// Centering vector, whitening transform and orthogonal rotation.
///
/// The demixing matrix is `W = rotation · whitening`, applied to centered data.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationModel {
    mean: DVector<f64>,
    whitening: DMatrix<f64>,
    rotation: DMatrix<f64>,
}

impl SeparationModel {
    pub fn new(
        mean: DVector<f64>,
        whitening: DMatrix<f64>,
        rotation: DMatrix<f64>,
    ) -> Result<Self> {
        let n = mean.len();
        if whitening.shape() != (n, n) || rotation.shape() != (n, n) {
            return Err(CcaError::DimensionMismatch(format!(
                "separation model with mean of length {n} needs {n}x{n} matrices, got {:?} and {:?}",
                whitening.shape(),
                rotation.shape()
            )));
        }
        let dev = orthogonality_defect(&rotation);
        if dev > ORTHOGONALITY_TOL {
            return Err(CcaError::InvalidParameter(format!(
                "rotation is not orthogonal: max |R·Rᵀ − I| = {dev:e}"
            )));
        }
        let model = Self {
            mean,
            whitening,
            rotation,
        };
        let rcond = reciprocal_condition(&model.demixing());
        if rcond <= RANK_TOL {
            return Err(CcaError::InvalidParameter(format!(
                "demixing matrix is singular: reciprocal condition number {rcond:e}"
            )));
        }
        Ok(model)
    }

    /// A model that leaves centered data untouched.
    pub fn identity(mean: DVector<f64>) -> Self {
        let n = mean.len();
        Self {
            mean,
            whitening: DMatrix::identity(n, n),
            rotation: DMatrix::identity(n, n),
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn demixing(&self) -> DMatrix<f64> {
        &self.rotation * &self.whitening
    }

    /// Recovers sources `W·(x − mean)`.
    pub fn apply(&self, x: &SignalMatrix) -> Result<SignalMatrix> {
        if x.n_channels() != self.mean.len() {
            return Err(CcaError::DimensionMismatch(format!(
                "model has {} channels, data has {}",
                self.mean.len(),
                x.n_channels()
            )));
        }
        let mut centered = x.values().clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        SignalMatrix::new(self.demixing() * centered)
    }
}

/// Disjoint, covering, ordered blocks of 0-based channel indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// Validates and canonicalizes: indices sorted within blocks, blocks
    /// sorted by their smallest index.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        for b in &blocks {
            if b.is_empty() {
                return Err(CcaError::InvalidInput(
                    "partition contains an empty block".into(),
                ));
            }
            for &i in b {
                if i >= n {
                    return Err(CcaError::InvalidInput(format!(
                        "partition index {} out of range for {n} channels",
                        i + 1
                    )));
                }
                if seen[i] {
                    return Err(CcaError::InvalidInput(format!(
                        "channel {} appears in more than one block",
                        i + 1
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CcaError::InvalidInput(format!(
                "partition does not cover channel {}",
                missing + 1
            )));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Parses the `1,2|3` grammar: blocks separated by `|`, 1-indexed channels by `,`.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let blocks = text
            .split('|')
            .map(|block| {
                block
                    .split(',')
                    .map(|tok| {
                        let tok = tok.trim();
                        match tok.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(CcaError::InvalidInput(format!(
                                "invalid channel index {tok:?} in partition {text:?}"
                            ))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, blocks)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_channels(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Blocks as 1-based index lists.
    pub fn one_based(&self) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|i| i + 1).collect())
            .collect()
    }
}

impl std::fmt::Display for BlockPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .one_based()
            .iter()
            .map(|b| b.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// Linear mixing `A·S`.
pub fn mix(sources: &SignalMatrix, mixing: &DMatrix<f64>) -> Result<SignalMatrix> {
    if !mixing.is_square() || mixing.ncols() != sources.n_channels() {
        return Err(CcaError::DimensionMismatch(format!(
            "mixing matrix is {}x{}, sources have {} channels",
            mixing.nrows(),
            mixing.ncols(),
            sources.n_channels()
        )));
    }
    SignalMatrix::new(mixing * sources.values())
}

/// Output of [`center_and_whiten`].
#[derive(Debug, Clone)]
pub struct Whitened {
    pub data: SignalMatrix,
    pub mean: DVector<f64>,
    pub whitening: DMatrix<f64>,
}

/// Removes channel means and applies the symmetric inverse square root of the
/// sample covariance, so the output has identity covariance.
pub fn center_and_whiten(x: &SignalMatrix) -> Result<Whitened> {
    let n = x.n_channels();
    if x.n_samples() < n + 1 {
        return Err(CcaError::InsufficientSamples {
            required: n + 1,
            actual: x.n_samples(),
        });
    }
    let mean = x.channel_means();
    let cov = x.covariance();
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    let threshold = RANK_TOL * max_ev.max(0.0);
    if min_ev.is_nan() || min_ev <= threshold || max_ev <= 0.0 {
        return Err(CcaError::DegenerateInput {
            eigenvalue: min_ev,
            threshold,
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let mut whitening = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    symmetrize(&mut whitening);

    let mut centered = x.values().clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut z = &whitening * centered;
    // re-center to remove rounding drift
    let drift = z.column_mean();
    for mut col in z.column_iter_mut() {
        col -= &drift;
    }
    Ok(Whitened {
        data: SignalMatrix::new(z)?,
        mean,
        whitening,
    })
}

/// Amari index of a global system matrix `P = W_est·A`, normalized to [0, 1].
///
/// Zero exactly when `P` is a scaled permutation.
pub fn amari_index(p: &DMatrix<f64>) -> Result<f64> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(CcaError::DimensionMismatch(format!(
            "amari index needs a square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let n = p.nrows();
    if n == 1 {
        return if p[(0, 0)] == 0.0 {
            Err(CcaError::InvalidInput(
                "amari index of a zero matrix".into(),
            ))
        } else {
            Ok(0.0)
        };
    }
    let a = p.abs();
    let mut total = 0.0;
    for i in 0..n {
        let row = a.row(i);
        let m = row.max();
        if m == 0.0 {
            return Err(CcaError::InvalidInput(format!(
                "row {} of the system matrix is zero",
                i + 1
            )));
        }
        total += row.sum() / m - 1.0;
    }
    for j in 0..n {
        let col = a.column(j);
        let m = col.max();
        if m == 0.0 {
            return Err(CcaError::InvalidInput(format!(
                "column {} of the system matrix is zero",
                j + 1
            )));
        }
        total += col.sum() / m - 1.0;
    }
    Ok(total / (2.0 * n as f64 * (n as f64 - 1.0)))
}

/// `‖M·Mᵀ − I‖_max`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m * m.transpose() - DMatrix::<f64>::identity(n, n))
        .abs()
        .max()
}

/// Ratio of smallest to largest singular value.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}
