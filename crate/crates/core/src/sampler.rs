//! Metropolis-Hastings-within-Gibbs sampler.
//!
//! Each iteration draws `α̃` exactly from its Gaussian full conditional, then
//! proposes `(ρ, σ², β)` jointly from the product of their conditionals with
//! `τ²`, `β` and `σ²` taken from the current state. `τ²` follows from the
//! long-run variance constraint, and the block is accepted or rejected with
//! the usual Hastings correction.
//!
//! Optional shear moves follow the block: `β` takes a random-walk step and
//! the observed intercepts shift by `−Δβ·x_k`, which leaves every residual
//! `x_{k+1} − α_k − β x_k` unchanged. Only the priors enter the ratio, so the
//! move crosses the `β`-`α̃` ridge that the Gibbs sweep traverses slowly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conditionals::{
    alpha_full_conditional, beta_conditional, log_target, rho_conditional, sigma_sq_conditional,
    BtvcData, BtvcState,
};
use crate::diagnostics::ParamDiagnostics;
use crate::distributions::{sample_inv_gamma, sample_trunc_normal, std_normal};
use crate::error::{Error, Result};
use crate::latent_cov::{beta_upper_bound, build_latent_covariance, solve_tau_sq, ArCovParams};
use crate::prior::PriorConfig;
use crate::seed::derived_rng;

/// Consecutive inadmissible proposals tolerated before giving up.
pub const MAX_INADMISSIBLE_RUN: usize = 10_000;

/// How the latent intercepts beyond the data enter an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FutureLatent {
    /// The MH block conditions on the observed intercepts only; the future
    /// ones are then drawn forward from `α_t` under the accepted `(ρ, τ²)`.
    /// They carry no likelihood, so the joint posterior is unchanged, but
    /// the `β`-`τ²` coupling through hundreds of data-free values is gone.
    #[default]
    Forward,
    /// The whole `α̃` is drawn in the Gibbs step and conditioned on by the MH
    /// block. Mixes much more slowly for long horizons.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Months of latent intercepts sampled beyond the data.
    pub horizon: usize,
    pub future_latent: FutureLatent,
    /// Shear moves per iteration; 0 runs the plain Gibbs/MH kernel.
    pub shear_moves: usize,
    /// Step size of a shear move in units of the `β` prior SD, `σ·sigma_beta`.
    pub shear_scale: f64,
    pub prior: PriorConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            thinning: 1,
            seed: 42,
            horizon: 480,
            future_latent: FutureLatent::Forward,
            shear_moves: 5,
            shear_scale: 1.0,
            prior: PriorConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("sampler.iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::param(format!(
                "sampler.burn_in ({}) must be below sampler.iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::param("sampler.thinning must be at least 1"));
        }
        if !(self.shear_scale > 0.0 && self.shear_scale.is_finite()) {
            return Err(Error::param(format!(
                "sampler.shear_scale must be positive, got {}",
                self.shear_scale
            )));
        }
        self.prior.validate()
    }

    /// Number of states a run retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub beta: ParamDiagnostics,
    pub sigma_sq: ParamDiagnostics,
    pub rho: ParamDiagnostics,
    pub tau_sq: ParamDiagnostics,
}

impl Diagnostics {
    pub fn from_states(states: &[BtvcState]) -> Result<Self> {
        let col = |f: fn(&BtvcState) -> f64| states.iter().map(f).collect::<Vec<_>>();
        Ok(Self {
            beta: ParamDiagnostics::from_chain(&col(|s| s.beta))?,
            sigma_sq: ParamDiagnostics::from_chain(&col(|s| s.sigma_sq))?,
            rho: ParamDiagnostics::from_chain(&col(|s| s.rho))?,
            tau_sq: ParamDiagnostics::from_chain(&col(|s| s.tau_sq))?,
        })
    }
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub states: Vec<BtvcState>,
    /// Number of observed transitions the chain was fitted on.
    pub t: usize,
    pub horizon: usize,
    /// Last observation, the anchor of predictive paths.
    pub last_x: f64,
    /// Accepted and total `(ρ, σ², β)` block proposals.
    pub accepted: usize,
    pub proposals: usize,
    pub shear_accepted: usize,
    pub shear_proposals: usize,
}

impl PosteriorDraws {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn shear_acceptance_rate(&self) -> f64 {
        if self.shear_proposals == 0 {
            0.0
        } else {
            self.shear_accepted as f64 / self.shear_proposals as f64
        }
    }

    pub fn diagnostics(&self) -> Result<Diagnostics> {
        Diagnostics::from_states(&self.states)
    }
}

/// Starting state: no-intercept OLS for `β` and `σ²`, `ρ` at its prior mean,
/// `α̃ = 0`.
pub fn initial_state(data: &BtvcData, horizon: usize, prior: &PriorConfig) -> Result<BtvcState> {
    let x = data.values();
    let t = data.t();
    let sxx: f64 = x[..t].iter().map(|v| v * v).sum();
    let sxy: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    let ols = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = x.windows(2).map(|w| (w[1] - ols * w[0]).powi(2)).sum();
    let mut sigma_sq = rss / (t as f64 - 1.0);
    let v = prior.target_var;
    if !(sigma_sq > 0.0) || sigma_sq >= v {
        // A degenerate or explosive fit; start well inside the admissible set.
        sigma_sq = if sigma_sq > 0.0 { 0.5 * v } else { 0.01 * v };
    }
    let upper = beta_upper_bound(sigma_sq, v)?;
    let margin = 1e-3_f64.min(0.5 * upper);
    let beta = ols.clamp(-upper + margin, upper - margin);
    let rho = prior.mu_rho.clamp(-0.999, 0.999);
    let tau_sq = solve_tau_sq(rho, beta, sigma_sq, v)?;
    Ok(BtvcState {
        alpha_tilde: vec![0.0; t + horizon],
        beta,
        sigma_sq,
        rho,
        tau_sq,
    })
}

/// `ln q(to | from)`: density of proposing `to`'s `(ρ, σ², β)` when the chain
/// sits at `from`. Both states must share the latent path.
pub fn log_proposal_density(to: &BtvcState, from: &BtvcState, data: &BtvcData, prior: &PriorConfig) -> f64 {
    let t = data.t();
    let alpha = &from.alpha_tilde;
    let Ok(rho_p) = prior.rho_prior() else {
        return f64::NEG_INFINITY;
    };
    let terms = (|| -> Result<f64> {
        let q_rho = rho_conditional(alpha, from.tau_sq, &rho_p)?;
        let q_sig = sigma_sq_conditional(data, &alpha[..t], from.beta, prior)?;
        let q_beta = beta_conditional(data, &alpha[..t], from.sigma_sq, prior)?;
        Ok(q_rho.ln_pdf(to.rho) + q_sig.ln_pdf(to.sigma_sq) + q_beta.ln_pdf(to.beta))
    })();
    terms.unwrap_or(f64::NEG_INFINITY)
}

/// Log Hastings ratio of moving from `old` to `new`, which share `α̃`.
pub fn log_acceptance_ratio(old: &BtvcState, new: &BtvcState, data: &BtvcData, prior: &PriorConfig) -> f64 {
    let lp_new = log_target(new, data, prior);
    if lp_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let r = lp_new - log_target(old, data, prior) + log_proposal_density(old, new, data, prior)
        - log_proposal_density(new, old, data, prior);
    if r.is_nan() {
        f64::NEG_INFINITY
    } else {
        r
    }
}

/// Draws `(ρ', σ²', β')` around `cur`. `None` when the proposal violates the
/// long-run constraint.
fn propose<R: Rng + ?Sized>(
    cur: &BtvcState,
    data: &BtvcData,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<Option<BtvcState>> {
    let t = data.t();
    let alpha = &cur.alpha_tilde;
    let q_rho = rho_conditional(alpha, cur.tau_sq, &prior.rho_prior()?)?;
    let rho = sample_trunc_normal(&q_rho, rng);
    let q_sig = sigma_sq_conditional(data, &alpha[..t], cur.beta, prior)?;
    let sigma_sq = sample_inv_gamma(&q_sig, rng)?;
    let q_beta = beta_conditional(data, &alpha[..t], cur.sigma_sq, prior)?;
    let beta = sample_trunc_normal(&q_beta, rng);
    Ok(solve_tau_sq(rho, beta, sigma_sq, prior.target_var).ok().map(|tau_sq| BtvcState {
        alpha_tilde: alpha.clone(),
        beta,
        sigma_sq,
        rho,
        tau_sq,
    }))
}

/// Shear move: `β' = β + δ`, `α'_k = α_k − δ x_k` for the observed
/// intercepts, `τ²'` from the constraint. The map has unit Jacobian and a
/// symmetric step, so the ratio is the target ratio. Returns whether the
/// move was accepted.
fn shear<R: Rng + ?Sized>(
    state: &mut BtvcState,
    data: &BtvcData,
    prior: &PriorConfig,
    scale: f64,
    rng: &mut R,
) -> bool {
    let delta = scale * prior.sigma_beta * state.sigma_sq.sqrt() * std_normal(rng);
    let beta = state.beta + delta;
    let Ok(tau_sq) = solve_tau_sq(state.rho, beta, state.sigma_sq, prior.target_var) else {
        return false;
    };
    let mut cand = BtvcState {
        alpha_tilde: state.alpha_tilde.clone(),
        beta,
        sigma_sq: state.sigma_sq,
        rho: state.rho,
        tau_sq,
    };
    for (a, x) in cand.alpha_tilde.iter_mut().zip(&data.values()[..data.t()]) {
        *a -= delta * x;
    }
    let r = log_target(&cand, data, prior) - log_target(state, data, prior);
    let u: f64 = rng.random();
    if u.ln() < r {
        *state = cand;
        true
    } else {
        false
    }
}

/// Appends `α_{k+1} = ρ α_k + τ z` until the path has length `n`.
fn extend_forward<R: Rng + ?Sized>(state: &mut BtvcState, n: usize, rng: &mut R) {
    let tau = state.tau_sq.sqrt();
    while state.alpha_tilde.len() < n {
        let prev = state.alpha_tilde.last().copied().unwrap_or(0.0);
        state.alpha_tilde.push(state.rho * prev + tau * std_normal(rng));
    }
}

/// Runs one chain from [`initial_state`]. Deterministic given `cfg.seed`.
pub fn run_chain(data: &BtvcData, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let init = initial_state(data, cfg.horizon, &cfg.prior)?;
    run_chain_from(data, cfg, init)
}

/// Runs one chain from a given admissible state.
pub fn run_chain_from(data: &BtvcData, cfg: &SamplerConfig, init: BtvcState) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let prior = &cfg.prior;
    let t = data.t();
    let n = t + cfg.horizon;
    if init.alpha_tilde.len() != n {
        return Err(Error::param(format!(
            "initial latent path has length {}, expected {n}",
            init.alpha_tilde.len()
        )));
    }
    init.check_admissible(prior.target_var)?;
    let mut rng = derived_rng(cfg.seed, "chain", 0);
    let mut state = init;
    let mut states = Vec::with_capacity(cfg.retained());
    let (mut accepted, mut proposals, mut bad_run) = (0usize, 0usize, 0usize);
    let (mut shear_accepted, mut shear_proposals) = (0usize, 0usize);

    let joint = cfg.future_latent == FutureLatent::Joint;
    let block = if joint { n } else { t };
    for i in 0..cfg.iterations {
        let cov = build_latent_covariance(ArCovParams::new(state.rho, state.tau_sq)?, block)?;
        let alpha = alpha_full_conditional(data, state.beta, state.sigma_sq, &cov)?.sample(&mut rng);
        state.alpha_tilde.truncate(block);
        state.alpha_tilde.copy_from_slice(&alpha);

        proposals += 1;
        match propose(&state, data, prior, &mut rng)? {
            None => bad_run += 1,
            Some(cand) => {
                let r = log_acceptance_ratio(&state, &cand, data, prior);
                if r == f64::NEG_INFINITY {
                    bad_run += 1;
                } else {
                    bad_run = 0;
                    let u: f64 = rng.random();
                    if u.ln() < r {
                        state = cand;
                        accepted += 1;
                    }
                }
            }
        }
        if bad_run > MAX_INADMISSIBLE_RUN {
            return Err(Error::Divergence {
                iterations: bad_run,
                last_state: state.summary(),
            });
        }
        for _ in 0..cfg.shear_moves {
            shear_proposals += 1;
            if shear(&mut state, data, prior, cfg.shear_scale, &mut rng) {
                shear_accepted += 1;
            }
        }
        if !joint {
            extend_forward(&mut state, n, &mut rng);
        }
        state.check_admissible(prior.target_var)?;

        if i >= cfg.burn_in && (i - cfg.burn_in + 1) % cfg.thinning == 0 {
            states.push(state.clone());
        }
    }
    Ok(PosteriorDraws {
        states,
        t,
        horizon: cfg.horizon,
        last_x: data.last(),
        accepted,
        proposals,
        shear_accepted,
        shear_proposals,
    })
}
