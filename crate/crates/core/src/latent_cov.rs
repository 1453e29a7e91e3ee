//! AR(1) structure of the latent intercept process and the long-run variance
//! constraint that ties its innovation variance to `(ρ, β, σ²)`.
//!
//! The latent process follows `α_t = ρ α_{t−1} + η_t`, `η_t ~ N(0, τ²)`,
//! started in its stationary distribution. Its precision matrix is
//! tridiagonal, which is the representation kept here.

use crate::distributions::BandedSym;
use crate::error::{Error, Result};

/// Pivot guard: `β` closer than this to the admissible bound is rejected,
/// since `τ²` would underflow toward zero.
pub const BETA_BOUND_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArCovParams {
    pub rho: f64,
    pub tau_sq: f64,
}

impl ArCovParams {
    pub fn new(rho: f64, tau_sq: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::param(format!("latent AR(1) needs |rho| < 1, got {rho}")));
        }
        if !(tau_sq > 0.0 && tau_sq.is_finite()) {
            return Err(Error::param(format!("latent AR(1) needs tau_sq > 0, got {tau_sq}")));
        }
        Ok(Self { rho, tau_sq })
    }

    /// Stationary variance `τ² / (1 − ρ²)`.
    pub fn marginal_variance(&self) -> f64 {
        self.tau_sq / (1.0 - self.rho * self.rho)
    }

    /// Closed-form covariance `τ² ρ^{|i−j|} / (1 − ρ²)`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.marginal_variance() * self.rho.powi(i.abs_diff(j) as i32)
    }
}

/// Prior precision of `(α_1, …, α_n)` under a stationary latent AR(1).
#[derive(Debug, Clone)]
pub struct LatentCovariance {
    params: ArCovParams,
    precision: BandedSym,
    log_det_precision: f64,
}

impl LatentCovariance {
    pub fn params(&self) -> ArCovParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.precision.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> &BandedSym {
        &self.precision
    }

    /// `ln det Σ⁻¹ = ln(1 − ρ²) − n ln τ²`.
    pub fn log_det_precision(&self) -> f64 {
        self.log_det_precision
    }
}

pub fn build_latent_covariance(p: ArCovParams, n: usize) -> Result<LatentCovariance> {
    let p = ArCovParams::new(p.rho, p.tau_sq)?;
    if n == 0 {
        return Err(Error::param("latent covariance needs n >= 1"));
    }
    let inv_tau = 1.0 / p.tau_sq;
    let precision = if n == 1 {
        BandedSym::tridiagonal(vec![(1.0 - p.rho * p.rho) * inv_tau], vec![])?
    } else {
        let mut diag = vec![(1.0 + p.rho * p.rho) * inv_tau; n];
        diag[0] = inv_tau;
        diag[n - 1] = inv_tau;
        BandedSym::tridiagonal(diag, vec![-p.rho * inv_tau; n - 1])?
    };
    let log_det_precision = (1.0 - p.rho * p.rho).ln() - n as f64 * p.tau_sq.ln();
    Ok(LatentCovariance {
        params: p,
        precision,
        log_det_precision,
    })
}

/// Upper truncation of `β` that keeps `τ²` positive: `√((V − σ²)/V)`.
pub fn beta_upper_bound(sigma_sq: f64, target_var: f64) -> Result<f64> {
    if !(target_var > 0.0 && target_var.is_finite()) {
        return Err(Error::param(format!("target variance must be positive, got {target_var}")));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::param(format!("sigma_sq must be positive, got {sigma_sq}")));
    }
    if sigma_sq >= target_var {
        return Err(Error::Constraint {
            message: format!(
                "sigma_sq = {sigma_sq} must be below the target long-run variance {target_var}"
            ),
            upper_bound: 0.0,
        });
    }
    Ok(((target_var - sigma_sq) / target_var).sqrt())
}

/// Long-run variance of `x` implied by `(ρ, β, σ², τ²)`:
/// `σ²/(1−β²) + τ²(1+ρβ) / ((1−ρβ)(1−β²)(1−ρ²))`.
pub fn long_run_variance(rho: f64, beta: f64, sigma_sq: f64, tau_sq: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) || !(beta.abs() < 1.0) {
        return Err(Error::param(format!(
            "long-run variance needs |rho| < 1 and |beta| < 1, got rho={rho}, beta={beta}"
        )));
    }
    if !(sigma_sq > 0.0) || !(tau_sq >= 0.0) {
        return Err(Error::param(format!(
            "long-run variance needs sigma_sq > 0 and tau_sq >= 0, got {sigma_sq}, {tau_sq}"
        )));
    }
    let rb = rho * beta;
    let one_b2 = 1.0 - beta * beta;
    Ok(sigma_sq / one_b2 + tau_sq * (1.0 + rb) / ((1.0 - rb) * one_b2 * (1.0 - rho * rho)))
}

/// The `τ²` that makes the long-run variance equal `target_var` exactly.
///
/// Admissible `β` lies in `(−u, u)` with `u = √((V − σ²)/V)`; values within
/// [`BETA_BOUND_EPS`] of either end are rejected.
pub fn solve_tau_sq(rho: f64, beta: f64, sigma_sq: f64, target_var: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::param(format!("solve_tau_sq needs |rho| < 1, got {rho}")));
    }
    let upper = beta_upper_bound(sigma_sq, target_var)?;
    if !(beta.abs() < upper - BETA_BOUND_EPS) {
        return Err(Error::Constraint {
            message: format!("beta = {beta} outside the admissible interval (-{upper}, {upper})"),
            upper_bound: upper,
        });
    }
    let rb = rho * beta;
    let one_b2 = 1.0 - beta * beta;
    let tau_sq = (target_var - sigma_sq / one_b2) * (1.0 - rb) * one_b2 * (1.0 - rho * rho)
        / (1.0 + rb);
    if !(tau_sq > 0.0) {
        return Err(Error::Numeric(format!("tau_sq underflow: {tau_sq}")));
    }
    Ok(tau_sq)
}
