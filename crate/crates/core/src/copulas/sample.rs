use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use super::{ClaytonCopula, CopulaModel, GaussianCopula, GumbelCopula};
use crate::error::Result;
use crate::marginals::PseudoObservations;
use crate::normal::norm_cdf;
use crate::rng::{clamp_open, open_unit, seeded};

/// Root-finding tolerance for Gumbel conditional inversion.
const GUMBEL_INVERSION_TOL: f64 = 1e-10;

/// Draws `t` samples from the copula; deterministic per seed.
pub fn sample_copula(model: &CopulaModel, t: usize, seed: u64) -> Result<PseudoObservations> {
    let mut rng = seeded(seed);
    PseudoObservations::new(sample_with(model, t, &mut rng))
}

/// `dim × t` draws using the caller's generator.
pub(crate) fn sample_with<R: Rng + ?Sized>(
    model: &CopulaModel,
    t: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    match model {
        CopulaModel::Product(d) => DMatrix::from_fn(*d, t, |_, _| open_unit(rng)),
        CopulaModel::Gaussian(g) => sample_gaussian(g, t, rng),
        CopulaModel::Clayton(c) => sample_clayton(c, t, rng),
        CopulaModel::Gumbel(g) => sample_gumbel(g, t, rng),
        CopulaModel::Factorial(f) => {
            let mut out = DMatrix::zeros(model.dim(), t);
            for (idx, block) in f.iter() {
                let draws = sample_with(block, t, rng);
                for (r, &i) in idx.iter().enumerate() {
                    out.row_mut(i).copy_from(&draws.row(r));
                }
            }
            out
        }
    }
}

fn sample_gaussian<R: Rng + ?Sized>(g: &GaussianCopula, t: usize, rng: &mut R) -> DMatrix<f64> {
    let d = g.dim();
    let l = g.cholesky_factor();
    let mut out = DMatrix::zeros(d, t);
    for j in 0..t {
        let eps = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let z = l * eps;
        for i in 0..d {
            out[(i, j)] = clamp_open(norm_cdf(z[i]));
        }
    }
    out
}

/// Marshall–Olkin: `V ~ Gamma(1/θ, 1)`, `E_i ~ Exp(1)`, `U_i = (1 + E_i/V)^{-1/θ}`.
fn sample_clayton<R: Rng + ?Sized>(c: &ClaytonCopula, t: usize, rng: &mut R) -> DMatrix<f64> {
    let th = c.theta();
    let frailty = Gamma::new(1.0 / th, 1.0).expect("theta validated positive");
    let mut out = DMatrix::zeros(c.dim(), t);
    for j in 0..t {
        let v: f64 = frailty.sample(rng);
        for i in 0..c.dim() {
            let e: f64 = Exp1.sample(rng);
            out[(i, j)] = clamp_open((-(e / v).ln_1p() / th).exp());
        }
    }
    out
}

/// Conditional inversion: draw `u`, `w`, then solve `∂C/∂u(u, v) = w` for `v`.
fn sample_gumbel<R: Rng + ?Sized>(g: &GumbelCopula, t: usize, rng: &mut R) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2, t);
    for j in 0..t {
        let u = open_unit(rng);
        let w = open_unit(rng);
        out[(0, j)] = u;
        out[(1, j)] = invert_conditional(g, u, w);
    }
    out
}

fn invert_conditional(g: &GumbelCopula, u: f64, w: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // the conditional CDF increases in v; bisect with a relative stopping rule
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.conditional_cdf(u, mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= GUMBEL_INVERSION_TOL * hi {
            break;
        }
    }
    clamp_open(0.5 * (lo + hi))
}
