use crate::error::{CcaError, Result};

/// Clayton copula, generator `Φ(t) = (t^{-θ} − 1)/θ`, `θ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaytonCopula {
    theta: f64,
    dim: usize,
}

impl ClaytonCopula {
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(CcaError::InvalidParameter(format!(
                "Clayton theta must be positive and finite, got {theta}"
            )));
        }
        if dim < 2 {
            return Err(CcaError::InvalidParameter(format!(
                "Clayton copula needs dimension >= 2, got {dim}"
            )));
        }
        Ok(Self { theta, dim })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Kendall's tau `θ / (θ + 2)`.
    pub fn kendall_tau(&self) -> f64 {
        self.theta / (self.theta + 2.0)
    }

    /// `ln(Σ u_i^{-θ} − d + 1)`, computed through `expm1`/`ln_1p` so the
    /// small-θ limit stays accurate.
    fn log_core(&self, u: &[f64]) -> f64 {
        u.iter()
            .map(|&v| (-self.theta * v.ln()).exp_m1())
            .sum::<f64>()
            .ln_1p()
    }

    pub(crate) fn cdf(&self, u: &[f64]) -> f64 {
        (-self.log_core(u) / self.theta).exp()
    }

    pub(crate) fn log_density(&self, u: &[f64]) -> f64 {
        let d = u.len();
        let th = self.theta;
        let norm: f64 = (0..d).map(|k| (k as f64).mul_add(th, 1.0).ln()).sum();
        let log_u: f64 = u.iter().map(|v| v.ln()).sum();
        norm - (th + 1.0) * log_u - (1.0 / th + d as f64) * self.log_core(u)
    }
}

/// Bivariate Gumbel copula, generator `Φ(t) = (−ln t)^θ`, `θ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelCopula {
    theta: f64,
}

impl GumbelCopula {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(CcaError::InvalidParameter(format!(
                "Gumbel theta must be finite and >= 1, got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Kendall's tau `1 − 1/θ`.
    pub fn kendall_tau(&self) -> f64 {
        1.0 - 1.0 / self.theta
    }

    /// `ln A` with `A = (x^θ + y^θ)^{1/θ}`, via log-sum-exp.
    fn log_a(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (self.theta * x.ln(), self.theta * y.ln());
        let m = a.max(b);
        (m + ((a - m).exp() + (b - m).exp()).ln()) / self.theta
    }

    pub(crate) fn cdf(&self, u: f64, v: f64) -> f64 {
        let (x, y) = (-u.ln(), -v.ln());
        (-self.log_a(x, y).exp()).exp()
    }

    pub(crate) fn log_density(&self, u: f64, v: f64) -> f64 {
        let th = self.theta;
        let (x, y) = (-u.ln(), -v.ln());
        let log_a = self.log_a(x, y);
        let a = log_a.exp();
        // c = C · (xy)^{θ−1} / (uv) · A^{1−2θ} · (A + θ − 1)
        -a + (th - 1.0) * (x.ln() + y.ln()) + x + y + (1.0 - 2.0 * th) * log_a + (a + th - 1.0).ln()
    }

    /// Conditional CDF `∂C/∂u (u, v) = C(u, v) · (x/A)^{θ−1} / u`.
    pub(crate) fn conditional_cdf(&self, u: f64, v: f64) -> f64 {
        let (x, y) = (-u.ln(), -v.ln());
        let log_a = self.log_a(x, y);
        let log_c = -log_a.exp();
        (log_c + (self.theta - 1.0) * (x.ln() - log_a) + x).exp()
    }
}
