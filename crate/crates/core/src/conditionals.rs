//! Full conditional distributions of the latent intercepts `α̃`, of `ρ`, `β`
//! and `σ²`, and the joint log target used by the Metropolis-Hastings step.
//!
//! Indexing: the data are `x_0, …, x_t` with `x_0` held fixed. The latent
//! vector `α̃ = (α_1, …, α_{t+h})` is stored 0-based, so `alpha[j]` is
//! `α_{j+1}` and enters the likelihood of `x_{j+1}` through
//! `Δ_j = x_{j+1} − β x_j`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    normal_ln_pdf, std_normal, BandedLdl, BandedSym, InvGammaParams, TruncNormalParams,
    LN_SQRT_2PI,
};
use crate::error::{Error, Result};
use crate::latent_cov::{build_latent_covariance, solve_tau_sq, ArCovParams, LatentCovariance};
use crate::prior::PriorConfig;

/// Observed series `x_0, …, x_t`, centered on the prior long-run mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BtvcData {
    x: Vec<f64>,
}

impl BtvcData {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::param(format!("series needs at least 3 observations, got {}", x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("series value at index {i} is not finite")));
        }
        Ok(Self { x })
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Number of transitions `t` (the series has `t + 1` points).
    pub fn t(&self) -> usize {
        self.x.len() - 1
    }

    pub fn last(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
}

/// One joint state of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtvcState {
    pub alpha_tilde: Vec<f64>,
    pub beta: f64,
    pub sigma_sq: f64,
    pub rho: f64,
    pub tau_sq: f64,
}

impl BtvcState {
    /// Latent intercepts of the observed period, `α_1, …, α_t`.
    pub fn alpha_observed(&self, t: usize) -> &[f64] {
        &self.alpha_tilde[..t]
    }

    /// Latent intercepts beyond the data, `α_{t+1}, …, α_{t+h}`.
    pub fn alpha_future(&self, t: usize) -> &[f64] {
        &self.alpha_tilde[t..]
    }

    /// Checks the state invariants against the configured target variance.
    pub fn check_admissible(&self, target_var: f64) -> Result<()> {
        let scalars = [self.beta, self.sigma_sq, self.rho, self.tau_sq];
        if scalars.iter().any(|v| !v.is_finite()) || self.alpha_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in state {}", self.summary())));
        }
        let tau = solve_tau_sq(self.rho, self.beta, self.sigma_sq, target_var)?;
        if (tau - self.tau_sq).abs() > 1e-9 * tau.max(1e-300) {
            return Err(Error::Numeric(format!(
                "tau_sq {} inconsistent with long-run constraint ({tau})",
                self.tau_sq
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "beta={} sigma_sq={} rho={} tau_sq={} len(alpha)={}",
            self.beta,
            self.sigma_sq,
            self.rho,
            self.tau_sq,
            self.alpha_tilde.len()
        )
    }
}

/// `Δ̃ = (x_1 − βx_0, …, x_t − βx_{t−1}, 0, …, 0)` of length `t + h`.
pub fn delta_vector(data: &BtvcData, beta: f64, h: usize) -> Vec<f64> {
    let x = data.values();
    x.windows(2)
        .map(|w| w[1] - beta * w[0])
        .chain(std::iter::repeat_n(0.0, h))
        .collect()
}

/// Gaussian full conditional of `α̃`, kept in precision form.
#[derive(Debug, Clone)]
pub struct AlphaPosterior {
    mean: Vec<f64>,
    precision: BandedSym,
    factor: BandedLdl,
}

impl AlphaPosterior {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &BandedSym {
        &self.precision
    }

    pub fn factor(&self) -> &BandedLdl {
        &self.factor
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.len()).map(|_| std_normal(rng)).collect();
        let dev = self.factor.solve_sqrt_t(&z);
        dev.iter().zip(&self.mean).map(|(d, m)| d + m).collect()
    }

    /// Marginal variance of entry `i`, via one linear solve.
    pub fn marginal_variance(&self, i: usize) -> f64 {
        let mut e = vec![0.0; self.len()];
        e[i] = 1.0;
        self.factor.solve(&e)[i]
    }
}

/// `α̃ | β, σ², x ~ N(μ_post, Σ_post)` with
/// `Σ_post⁻¹ = Σ̃⁻¹ + σ⁻² diag(I_t, 0)` and `μ_post = Σ_post Δ̃ / σ²`.
pub fn alpha_full_conditional(
    data: &BtvcData,
    beta: f64,
    sigma_sq: f64,
    cov: &LatentCovariance,
) -> Result<AlphaPosterior> {
    let t = data.t();
    let n = cov.len();
    if n < t {
        return Err(Error::param(format!(
            "latent covariance has length {n}, needs at least t = {t}"
        )));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::param(format!("sigma_sq must be positive, got {sigma_sq}")));
    }
    let inv_s = 1.0 / sigma_sq;
    let mut precision = cov.precision().clone();
    for i in 0..t {
        precision.add_diag(i, inv_s);
    }
    let factor = precision.ldl()?;
    let rhs: Vec<f64> = delta_vector(data, beta, n - t).iter().map(|d| d * inv_s).collect();
    let mean = factor.solve(&rhs);
    Ok(AlphaPosterior {
        mean,
        precision,
        factor,
    })
}

/// Conditional of `ρ` given the latent path and `τ²`:
/// variance `(Σ α_{k−1}²/τ² + σ_ρ⁻²)⁻¹`, mean `(Σ α_k α_{k−1}/τ² + μ_ρ/σ_ρ²)·var`,
/// truncation inherited from the prior.
pub fn rho_conditional(alpha: &[f64], tau_sq: f64, prior: &TruncNormalParams) -> Result<TruncNormalParams> {
    if alpha.len() < 2 {
        return Err(Error::param("rho conditional needs at least two latent values"));
    }
    if !(tau_sq > 0.0) {
        return Err(Error::param(format!("tau_sq must be positive, got {tau_sq}")));
    }
    let (mut chi, mut eta) = (0.0, 0.0);
    for w in alpha.windows(2) {
        chi += w[0] * w[0];
        eta += w[1] * w[0];
    }
    let var = 1.0 / (chi / tau_sq + 1.0 / prior.variance);
    let mean = (eta / tau_sq + prior.mean / prior.variance) * var;
    TruncNormalParams::new(mean, var, prior.lower, prior.upper)
}

/// Conditional of `β` given `α`, `σ²` and the data:
/// variance `(Σ x_{j}²/σ² + (σσ_β)⁻²)⁻¹`, mean
/// `(Σ (x_{j+1} − α_{j+1}) x_j / σ² + μ_β/(σ²σ_β²))·var`, truncated to
/// `(−1, √((V−σ²)/V))`.
pub fn beta_conditional(
    data: &BtvcData,
    alpha: &[f64],
    sigma_sq: f64,
    prior: &PriorConfig,
) -> Result<TruncNormalParams> {
    let t = data.t();
    if alpha.len() < t {
        return Err(Error::param(format!("beta conditional needs {t} latent values, got {}", alpha.len())));
    }
    let base = prior.beta_prior(sigma_sq)?;
    let x = data.values();
    let (mut chi, mut eta) = (0.0, 0.0);
    for j in 0..t {
        chi += x[j] * x[j];
        eta += (x[j + 1] - alpha[j]) * x[j];
    }
    let var = 1.0 / (chi / sigma_sq + 1.0 / base.variance);
    let mean = (eta / sigma_sq + base.mean / base.variance) * var;
    TruncNormalParams::new(mean, var, base.lower, base.upper)
}

/// Approximate inverse-gamma conditional of `σ²` (the truncation normalizer of
/// the `β | σ²` prior is dropped): shape `(t+1)/2 + a`, scale
/// `κ/2 + b + (β − μ_β)²/(2σ_β²)` with `κ` the residual sum of squares.
pub fn sigma_sq_conditional(
    data: &BtvcData,
    alpha: &[f64],
    beta: f64,
    prior: &PriorConfig,
) -> Result<InvGammaParams> {
    let t = data.t();
    if alpha.len() < t {
        return Err(Error::param(format!("sigma_sq conditional needs {t} latent values, got {}", alpha.len())));
    }
    let x = data.values();
    let kappa: f64 = (0..t)
        .map(|j| {
            let e = x[j + 1] - alpha[j] - beta * x[j];
            e * e
        })
        .sum();
    let db = beta - prior.mu_beta;
    InvGammaParams::new(
        (t as f64 + 1.0) / 2.0 + prior.a,
        kappa / 2.0 + prior.b + db * db / (2.0 * prior.sigma_beta * prior.sigma_beta),
    )
}

/// Gaussian log likelihood `Σ ln φ(x_{j+1} | α_{j+1} + β x_j, σ²)`.
pub fn log_likelihood(data: &BtvcData, alpha: &[f64], beta: f64, sigma_sq: f64) -> f64 {
    let x = data.values();
    (0..data.t())
        .map(|j| normal_ln_pdf(x[j + 1], alpha[j] + beta * x[j], sigma_sq))
        .sum()
}

/// Log density of the latent path under its stationary AR(1) prior.
pub fn log_latent_prior(alpha: &[f64], cov: &LatentCovariance) -> f64 {
    let n = alpha.len() as f64;
    -n * LN_SQRT_2PI + 0.5 * cov.log_det_precision() - 0.5 * cov.precision().quad_form(alpha)
}

/// Unnormalized log of `p(ρ, β, σ² | α̃, x)`:
/// `ln p(x | β, σ², α) + ln p(α̃ | ρ, τ²(ρ, β, σ²)) + ln p(ρ) + ln p(β | σ²) + ln p(σ²)`.
///
/// Each prior enters once. `τ²` is recomputed from the long-run constraint;
/// inadmissible states return `f64::NEG_INFINITY` rather than an error.
pub fn log_target(state: &BtvcState, data: &BtvcData, prior: &PriorConfig) -> f64 {
    let t = data.t();
    if state.alpha_tilde.len() < t || !(state.sigma_sq > 0.0) {
        return f64::NEG_INFINITY;
    }
    let Ok(tau_sq) = solve_tau_sq(state.rho, state.beta, state.sigma_sq, prior.target_var) else {
        return f64::NEG_INFINITY;
    };
    let Ok(ar) = ArCovParams::new(state.rho, tau_sq) else {
        return f64::NEG_INFINITY;
    };
    let Ok(cov) = build_latent_covariance(ar, state.alpha_tilde.len()) else {
        return f64::NEG_INFINITY;
    };
    let (Ok(rho_p), Ok(beta_p), Ok(sig_p)) = (
        prior.rho_prior(),
        prior.beta_prior(state.sigma_sq),
        prior.sigma_sq_prior(),
    ) else {
        return f64::NEG_INFINITY;
    };
    let v = log_likelihood(data, &state.alpha_tilde[..t], state.beta, state.sigma_sq)
        + log_latent_prior(&state.alpha_tilde, &cov)
        + rho_p.ln_pdf(state.rho)
        + beta_p.ln_pdf(state.beta)
        + sig_p.ln_pdf(state.sigma_sq);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}
