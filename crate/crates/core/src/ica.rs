//! FastICA rotation estimation and a Gaussian-copula mutual-information estimate.

use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::copulas::GaussianCopula;
use crate::error::{CcaError, Result};
use crate::marginals::pseudo_observations;
use crate::rng::seeded;
use crate::signal::{orthogonality_defect, SignalMatrix};

/// Contrast nonlinearity `g` of the fixed-point update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Cube,
}

impl Nonlinearity {
    /// Returns `(g(y), g'(y))`.
    fn eval(&self, y: f64) -> (f64, f64) {
        match self {
            Self::Tanh => {
                let g = y.tanh();
                (g, 1.0 - g * g)
            }
            Self::Cube => (y * y * y, 3.0 * y * y),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = CcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" | "logcosh" => Ok(Self::Tanh),
            "cube" => Ok(Self::Cube),
            other => Err(CcaError::InvalidParameter(format!(
                "unknown nonlinearity {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIcaConfig {
    pub nonlinearity: Nonlinearity,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        Self {
            nonlinearity: Nonlinearity::Tanh,
            tol: 1e-6,
            max_iter: 200,
            seed: 0,
        }
    }
}

/// Converged FastICA rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaFit {
    pub rotation: DMatrix<f64>,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Symmetric decorrelation `W ← (W·Wᵀ)^{-1/2}·W`.
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(1e-14).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose() * w
}

/// Estimates the orthogonal rotation of whitened data that maximizes
/// non-Gaussianity, using the symmetric fixed-point iteration.
///
/// Convergence is declared when every row of the new rotation is parallel to
/// its predecessor up to `tol`, i.e. `max_i |1 − |⟨w_new_i, w_i⟩|| < tol`.
pub fn fastica(z: &SignalMatrix, config: &FastIcaConfig) -> Result<IcaFit> {
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(CcaError::InvalidParameter(format!(
            "tol must be positive, got {}",
            config.tol
        )));
    }
    if config.max_iter == 0 {
        return Err(CcaError::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    let n = z.n_channels();
    let dev = (z.covariance() - DMatrix::<f64>::identity(n, n))
        .abs()
        .max();
    if dev > 1e-6 {
        return Err(CcaError::InvalidInput(format!(
            "FastICA expects whitened input, covariance deviates from identity by {dev:e}"
        )));
    }

    let mut rng = seeded(config.seed);
    let init = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let data = z.values();
    let t = z.n_samples() as f64;
    let mut delta = f64::INFINITY;
    for iter in 1..=config.max_iter {
        let y = &w * data;
        let mut g = DMatrix::zeros(n, z.n_samples());
        let mut mean_dg = vec![0.0; n];
        for (idx, v) in y.iter().enumerate() {
            let (gv, dgv) = config.nonlinearity.eval(*v);
            g[idx] = gv;
            // column-major: idx % n is the component
            mean_dg[idx % n] += dgv;
        }
        let mut update = g * data.transpose() / t;
        for i in 0..n {
            let scale = mean_dg[i] / t;
            for j in 0..n {
                update[(i, j)] -= scale * w[(i, j)];
            }
        }
        let w_new = symmetric_decorrelation(&update);
        delta = (0..n)
            .map(|i| (1.0 - w_new.row(i).dot(&w.row(i)).abs()).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if delta < config.tol {
            debug_assert!(orthogonality_defect(&w) <= 1e-6);
            return Ok(IcaFit {
                rotation: w,
                iterations: iter,
                final_delta: delta,
            });
        }
    }
    Err(CcaError::NonConvergence {
        iterations: config.max_iter,
        last_delta: delta,
    })
}

/// Resolves the sign/scale indeterminacy: each recovered component gets unit
/// sample variance and each row's largest-magnitude loading is made positive.
pub fn normalize_components(rotation: &DMatrix<f64>, z: &SignalMatrix) -> DMatrix<f64> {
    let y = rotation * z.values();
    let t = z.n_samples() as f64;
    let mut out = rotation.clone();
    for i in 0..out.nrows() {
        let row = y.row(i);
        let mean = row.sum() / t;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        if var > 0.0 {
            out.row_mut(i).scale_mut(1.0 / var.sqrt());
        }
        let lead =
            out.row(i).iter().copied().fold(
                0.0_f64,
                |best, v| if v.abs() > best.abs() { v } else { best },
            );
        if lead < 0.0 {
            out.row_mut(i).neg_mut();
        }
    }
    out
}

/// Determinant below which the normal-score correlation is treated as singular.
pub const MI_DET_FLOOR: f64 = 1e-12;

/// Gaussian-copula plug-in mutual information in nats: `−½ ln det ρ̂`, where
/// `ρ̂` is the correlation of normal scores of the pseudo-observations.
///
/// Rank-based, so invariant under strictly increasing per-channel maps. This
/// is exact for Gaussian dependence and a lower-order proxy otherwise.
pub fn mutual_information(s: &SignalMatrix) -> Result<f64> {
    const MIN_SAMPLES: usize = 100;
    if s.n_samples() < MIN_SAMPLES {
        return Err(CcaError::InsufficientSamples {
            required: MIN_SAMPLES,
            actual: s.n_samples(),
        });
    }
    if s.n_channels() < 2 {
        return Ok(0.0);
    }
    let u = pseudo_observations(s);
    let rho = crate::copulas::normal_score_correlation(&u);
    let det = rho.determinant();
    if det.is_nan() || det < MI_DET_FLOOR {
        return Err(CcaError::NearDegenerateDependence { determinant: det });
    }
    Ok((-0.5 * det.ln()).max(0.0))
}

/// Closed-form mutual information of a Gaussian copula, `−½ ln |ρ|`.
pub fn gaussian_mutual_information(g: &GaussianCopula) -> f64 {
    -0.5 * g.log_det()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::{sample_copula, CopulaModel};
    use crate::marginals::MarginSpec;
    use crate::rng::open_unit;
    use crate::signal::{amari_index, center_and_whiten, mix};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn independent(spec: MarginSpec, n: usize, t: usize, seed: u64) -> SignalMatrix {
        let mut rng = seeded(seed);
        SignalMatrix::new(DMatrix::from_fn(n, t, |_, _| spec.sample_with(&mut rng))).unwrap()
    }

    fn rot45() -> DMatrix<f64> {
        let c = FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[c, -c, c, c])
    }

    #[test]
    fn recovers_rotated_uniforms() {
        let s = independent(MarginSpec::unit_variance_uniform(), 2, 5000, 1);
        let x = mix(&s, &rot45()).unwrap();
        let z = center_and_whiten(&x).unwrap();
        let fit = fastica(&z.data, &FastIcaConfig::default()).unwrap();
        assert!(orthogonality_defect(&fit.rotation) <= 1e-6);
        let p = &fit.rotation * &z.whitening * rot45();
        assert!(
            amari_index(&p).unwrap() < 0.05,
            "amari {}",
            amari_index(&p).unwrap()
        );
    }

    #[test]
    fn independent_laplace_gives_signed_permutation() {
        let s = independent(MarginSpec::from_name("laplace", &[]).unwrap(), 2, 5000, 2);
        let z = center_and_whiten(&s).unwrap();
        let fit = fastica(
            &z.data,
            &FastIcaConfig {
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let p = &fit.rotation * &z.whitening;
        assert!(amari_index(&p).unwrap() < 0.05);
    }

    #[test]
    fn gaussian_sources_hit_non_convergence() {
        // pinned draw for which the fixed-point iteration keeps wandering
        let s = independent(
            MarginSpec::Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            2,
            2000,
            5,
        );
        let z = center_and_whiten(&s).unwrap();
        let cfg = FastIcaConfig {
            tol: 1e-6,
            max_iter: 50,
            ..Default::default()
        };
        match fastica(&z.data, &cfg) {
            Err(CcaError::NonConvergence {
                iterations,
                last_delta,
            }) => {
                assert_eq!(iterations, 50);
                assert!(last_delta >= 1e-6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unwhitened_input_and_bad_config() {
        let s = independent(
            MarginSpec::Gaussian {
                mean: 0.0,
                std: 3.0,
            },
            2,
            500,
            5,
        );
        assert!(fastica(&s, &FastIcaConfig::default()).is_err());
        let z = center_and_whiten(&s).unwrap().data;
        assert!(fastica(
            &z,
            &FastIcaConfig {
                tol: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(fastica(
            &z,
            &FastIcaConfig {
                max_iter: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn seed_determinism() {
        let s = independent(MarginSpec::from_name("laplace", &[]).unwrap(), 3, 2000, 6);
        let z = center_and_whiten(&s).unwrap().data;
        let cfg = FastIcaConfig {
            seed: 99,
            ..Default::default()
        };
        let a = fastica(&z, &cfg).unwrap();
        let b = fastica(&z, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cube_nonlinearity_separates_uniforms() {
        let s = independent(MarginSpec::unit_variance_uniform(), 2, 5000, 7);
        let x = mix(&s, &rot45()).unwrap();
        let z = center_and_whiten(&x).unwrap();
        let cfg = FastIcaConfig {
            nonlinearity: Nonlinearity::Cube,
            ..Default::default()
        };
        let fit = fastica(&z.data, &cfg).unwrap();
        assert!(amari_index(&(&fit.rotation * &z.whitening * rot45())).unwrap() < 0.05);
    }

    fn check_canonical(r: &DMatrix<f64>, z: &SignalMatrix) {
        let y = r * z.values();
        for i in 0..r.nrows() {
            let row = y.row(i);
            let mean = row.sum() / row.len() as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
            assert!((var - 1.0).abs() < 1e-10);
            let lead =
                r.row(i)
                    .iter()
                    .copied()
                    .fold(0.0_f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn normalize_components_rules() {
        let s = independent(MarginSpec::from_name("laplace", &[]).unwrap(), 3, 1000, 8);
        let z = center_and_whiten(&s).unwrap().data;
        // random orthogonal matrix
        let mut rng = seeded(9);
        let q = symmetric_decorrelation(&DMatrix::from_fn(3, 3, |_, _| {
            StandardNormal.sample(&mut rng)
        }));
        let canon = normalize_components(&q, &z);
        check_canonical(&canon, &z);
        // idempotent
        assert!((normalize_components(&canon, &z) - &canon).abs().max() < 1e-12);
        // a negated row is flipped back
        let mut flipped = canon.clone();
        flipped.row_mut(1).neg_mut();
        assert!((normalize_components(&flipped, &z) - &canon).abs().max() < 1e-12);
    }

    #[test]
    fn mi_of_independent_channels() {
        let s = independent(MarginSpec::unit_variance_uniform(), 3, 10_000, 10);
        assert!(mutual_information(&s).unwrap() <= 0.02);
    }

    #[test]
    fn mi_of_correlated_gaussian_pair() {
        let r: f64 = 0.7;
        let mut rng = seeded(11);
        let mut m = DMatrix::zeros(2, 10_000);
        for t in 0..10_000 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            m[(0, t)] = a;
            m[(1, t)] = r * a + (1.0 - r * r).sqrt() * b;
        }
        let oracle = -0.5 * (1.0 - r * r).ln();
        let est = mutual_information(&SignalMatrix::new(m).unwrap()).unwrap();
        assert!((est - oracle).abs() < 0.02, "{est} vs {oracle}");
    }

    #[test]
    fn mi_duplicated_channel_errors() {
        let xs: Vec<f64> = {
            let mut rng = seeded(12);
            (0..500).map(|_| open_unit(&mut rng)).collect()
        };
        let s = SignalMatrix::from_channels(&[xs.clone(), xs]).unwrap();
        assert!(matches!(
            mutual_information(&s),
            Err(CcaError::NearDegenerateDependence { .. })
        ));
        let short = independent(MarginSpec::unit_variance_uniform(), 2, 50, 1);
        assert!(matches!(
            mutual_information(&short),
            Err(CcaError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn mi_invariant_under_monotone_maps() {
        let u = sample_copula(&CopulaModel::clayton(2.0, 2).unwrap(), 2000, 13).unwrap();
        let s = SignalMatrix::new(u.values().clone()).unwrap();
        let g = s
            .map_channels(|i, v| if i == 0 { v.ln() } else { v.powi(3) + v })
            .unwrap();
        assert_eq!(
            mutual_information(&s).unwrap(),
            mutual_information(&g).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn mi_vanishes_after_shuffling(seed in 0u64..10_000) {
            let u = sample_copula(&CopulaModel::gaussian_pair(0.8).unwrap(), 10_000, seed).unwrap();
            let mut chans = u.to_channels();
            let mut rng = seeded(seed ^ 0x5eed);
            for c in chans.iter_mut() {
                c.shuffle(&mut rng);
            }
            let s = SignalMatrix::from_channels(&chans).unwrap();
            prop_assert!(mutual_information(&s).unwrap() <= 0.02);
        }
    }
}
