//! Dirichlet distribution: sampling via gamma draws, exact log-density, and
//! the log-density gradient in the concentration parameters.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_gamma, standard_normal};
use crate::seed::Rng;

/// Concentration floor applied when a component would otherwise degenerate.
pub const ALPHA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    alpha: Vec<f64>,
    /// True when any component was clamped up to the floor.
    clamped: bool,
}

impl Dirichlet {
    /// Build from raw concentrations; non-positive entries are clamped to
    /// [`ALPHA_FLOOR`] and the instance remembers that it happened.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Validation("dirichlet needs at least two components".into()));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("non-finite dirichlet concentration".into()));
        }
        let clamped = alpha.iter().any(|a| *a < ALPHA_FLOOR);
        let alpha = alpha.into_iter().map(|a| a.max(ALPHA_FLOOR)).collect();
        Ok(Self { alpha, clamped })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// One draw from the distribution (normalized gamma variates).
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        loop {
            let gammas: Vec<f64> = self.alpha.iter().map(|a| sample_gamma(*a, rng)).collect();
            let total: f64 = gammas.iter().sum();
            if total > 0.0 && total.is_finite() {
                return gammas.into_iter().map(|g| g / total).collect();
            }
            // All-zero draws are possible for tiny concentrations; retry.
        }
    }

    /// Exact log-density at a simplex point (components floored at 1e-12
    /// inside the log to tolerate boundary samples).
    pub fn log_pdf(&self, w: &[f64]) -> f64 {
        let total: f64 = self.alpha.iter().sum();
        let mut lp = ln_gamma(total);
        for (a, x) in self.alpha.iter().zip(w) {
            lp -= ln_gamma(*a);
            lp += (a - 1.0) * x.max(1e-12).ln();
        }
        lp
    }

    /// d log_pdf / d alpha_i at `w`: psi(sum alpha) - psi(alpha_i) + ln w_i.
    /// Components that sit on the clamp floor get a zero partial.
    pub fn dlogpdf_dalpha(&self, w: &[f64]) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        let psi_total = digamma(total);
        self.alpha
            .iter()
            .zip(w)
            .map(|(a, x)| {
                if *a <= ALPHA_FLOOR {
                    0.0
                } else {
                    psi_total - digamma(*a) + x.max(1e-12).ln()
                }
            })
            .collect()
    }
}

/// Gamma(shape, 1) sampling: Marsaglia–Tsang squeeze for shape >= 1, with
/// the standard power-of-uniform boost below 1.
pub fn sample_gamma(shape: f64, rng: &mut Rng) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.gen::<f64>().max(1e-300);
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v3 = v * v * v;
        let u: f64 = rng.gen();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v3;
        }
        if u.max(1e-300).ln() < 0.5 * x * x + d * (1.0 - v3 + v3.ln()) {
            return d * v3;
        }
    }
}
