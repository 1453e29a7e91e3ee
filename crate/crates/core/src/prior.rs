//! Prior hyperparameters of the model.

use serde::{Deserialize, Serialize};

use crate::distributions::{InvGammaParams, TruncNormalParams};
use crate::error::{Error, Result};
use crate::latent_cov::beta_upper_bound;

/// Hyperparameters. Defaults are the level-factor values used for German
/// government yields: `ρ ~ N(0.98, 0.001², −1, 1)`, `β | σ² ~ N(0.95,
/// σ²·0.015², −1, √((V−σ²)/V))`, `σ² ~ IG(0.5, 2)`, `V = 120`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub mu_beta: f64,
    /// Standard deviation multiplier: `Var(β | σ²) = σ² · sigma_beta²`.
    pub sigma_beta: f64,
    pub mu_rho: f64,
    /// Standard deviation of the `ρ` prior.
    pub sigma_rho: f64,
    /// Inverse-gamma shape.
    pub a: f64,
    /// Inverse-gamma scale.
    pub b: f64,
    /// Target long-run variance of the modeled series.
    pub target_var: f64,
    /// Mean of the latent intercept process. Only 0 is supported; center the
    /// data instead.
    pub theta: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mu_beta: 0.95,
            sigma_beta: 0.015,
            mu_rho: 0.98,
            sigma_rho: 0.001,
            a: 0.5,
            b: 2.0,
            target_var: 120.0,
            theta: 0.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_beta", self.sigma_beta),
            ("sigma_rho", self.sigma_rho),
            ("a", self.a),
            ("b", self.b),
            ("target_var", self.target_var),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("prior.{name} must be positive, got {v}")));
            }
        }
        if !self.mu_beta.is_finite() || !self.mu_rho.is_finite() {
            return Err(Error::param("prior means must be finite"));
        }
        if self.theta != 0.0 {
            return Err(Error::param(format!(
                "prior.theta must be 0 (center the data instead), got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn rho_prior(&self) -> Result<TruncNormalParams> {
        TruncNormalParams::new(self.mu_rho, self.sigma_rho * self.sigma_rho, -1.0, 1.0)
    }

    /// `β | σ²` prior, truncated to `(−1, √((V−σ²)/V))`.
    pub fn beta_prior(&self, sigma_sq: f64) -> Result<TruncNormalParams> {
        let upper = beta_upper_bound(sigma_sq, self.target_var)?;
        TruncNormalParams::new(
            self.mu_beta,
            sigma_sq * self.sigma_beta * self.sigma_beta,
            -1.0,
            upper,
        )
    }

    pub fn sigma_sq_prior(&self) -> Result<InvGammaParams> {
        InvGammaParams::new(self.a, self.b)
    }
}
