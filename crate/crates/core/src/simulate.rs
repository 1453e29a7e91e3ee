//! Synthetic series from the generative model.
//!
//! The pair `(α_0, x_0)` is drawn from its exact stationary distribution:
//! `Var α = τ²/(1−ρ²)`, `Cov(α_0, x_0) = Var α/(1−ρβ)`, `Var x = V`.
//! Afterwards `α_{k} = ρ α_{k−1} + u_k`, `x_k = α_k + β x_{k−1} + ε_k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::distributions::std_normal;
use crate::factors::YieldPanel;
use crate::error::{Error, Result};
use crate::latent_cov::{long_run_variance, solve_tau_sq};

/// True parameters of a simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub rho: f64,
    pub beta: f64,
    pub sigma_sq: f64,
    /// Target long-run variance; `τ²` is solved from it unless `tau_sq` is set.
    pub target_var: f64,
    /// Explicit latent innovation variance. `0` gives a linear AR(1).
    pub tau_sq: Option<f64>,
    /// Number of observations, including the stationary starting value.
    pub length: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            rho: 0.98,
            beta: 0.95,
            sigma_sq: 1.0,
            target_var: 120.0,
            tau_sq: None,
            length: 240,
        }
    }
}

impl SimulationConfig {
    pub fn resolved_tau_sq(&self) -> Result<f64> {
        match self.tau_sq {
            Some(t) if t >= 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(Error::param(format!("tau_sq must be non-negative, got {t}"))),
            None => solve_tau_sq(self.rho, self.beta, self.sigma_sq, self.target_var),
        }
    }

    /// Stationary variance of the generated series.
    pub fn implied_variance(&self) -> Result<f64> {
        long_run_variance(self.rho, self.beta, self.sigma_sq, self.resolved_tau_sq()?)
    }
}

/// A simulated series with its latent intercepts (`alpha[k]` drives `x[k+1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSeries {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tau_sq: f64,
}

pub fn simulate_series<R: Rng + ?Sized>(cfg: &SimulationConfig, rng: &mut R) -> Result<SimulatedSeries> {
    if cfg.length < 2 {
        return Err(Error::param("simulation length must be at least 2"));
    }
    if !(cfg.sigma_sq > 0.0) {
        return Err(Error::param(format!("sigma_sq must be positive, got {}", cfg.sigma_sq)));
    }
    if !(cfg.rho.abs() < 1.0 && cfg.beta.abs() < 1.0) {
        return Err(Error::Constraint {
            message: format!("rho ({}) and beta ({}) must lie in (-1, 1)", cfg.rho, cfg.beta),
            upper_bound: 1.0,
        });
    }
    let tau_sq = cfg.resolved_tau_sq()?;
    let var_x = long_run_variance(cfg.rho, cfg.beta, cfg.sigma_sq, tau_sq)?;
    let var_a = tau_sq / (1.0 - cfg.rho * cfg.rho);
    let cov = var_a / (1.0 - cfg.rho * cfg.beta);

    // Bivariate draw via the 2×2 Cholesky of [[var_x, cov], [cov, var_a]].
    let z1 = std_normal(rng);
    let z2 = std_normal(rng);
    let x0 = var_x.sqrt() * z1;
    let cond_var = (var_a - cov * cov / var_x).max(0.0);
    let mut a = cov / var_x.sqrt() * z1 + cond_var.sqrt() * z2;

    let (tau, sigma) = (tau_sq.sqrt(), cfg.sigma_sq.sqrt());
    let mut x = Vec::with_capacity(cfg.length);
    let mut alpha = Vec::with_capacity(cfg.length - 1);
    x.push(x0);
    for _ in 1..cfg.length {
        a = cfg.rho * a + tau * std_normal(rng);
        let prev = x[x.len() - 1];
        x.push(a + cfg.beta * prev + sigma * std_normal(rng));
        alpha.push(a);
    }
    Ok(SimulatedSeries { x, alpha, tau_sq })
}

/// Synthetic yield panel: `r(τ) = μ(τ) + ξ_1(τ)·level + ξ_2(τ)·slope + noise`
/// with fixed orthonormal loadings, the level factor from the model above
/// and the slope from a zero-constant AR(1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanelConfig {
    pub months: usize,
    /// First month, `YYYY-MM`.
    pub start: String,
    pub maturities: Vec<f64>,
    pub slope_gamma: f64,
    pub slope_sd: f64,
    /// Standard deviation of independent per-cell measurement noise.
    pub noise_sd: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            months: 240,
            start: "1997-01".into(),
            maturities: (1..=20).map(f64::from).collect(),
            slope_gamma: 0.9,
            slope_sd: 0.5,
            noise_sd: 0.03,
        }
    }
}

/// Mean curve and the two loading vectors used by [`simulate_panel`].
pub fn panel_shape(maturities: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = maturities.len();
    let mean: Vec<f64> = maturities.iter().map(|t| 2.0 + 1.5 * (1.0 - (-t / 3.0).exp())).collect();
    let level = vec![1.0 / (m as f64).sqrt(); m];
    // Slope shape (1 − e^{−τ/λ})/(τ/λ), made orthogonal to the level vector.
    let raw: Vec<f64> = maturities.iter().map(|t| (1.0 - (-t / 2.0).exp()) / (t / 2.0)).collect();
    let avg = raw.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = raw.iter().map(|v| avg - v).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    let slope = centered.iter().map(|v| v / norm).collect();
    (mean, level, slope)
}

fn month_label(start: &str, offset: usize) -> Result<String> {
    let bad = || Error::param(format!("start month {start:?} is not of the form YYYY-MM"));
    let (y, m) = start.split_once('-').ok_or_else(bad)?;
    let y: usize = y.parse().map_err(|_| bad())?;
    let m: usize = m.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) {
        return Err(bad());
    }
    let idx = y * 12 + (m - 1) + offset;
    Ok(format!("{:04}-{:02}", idx / 12, idx % 12 + 1))
}

/// A synthetic panel plus the factor series that generated it.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: YieldPanel,
    pub level: SimulatedSeries,
    pub slope: Vec<f64>,
}

pub fn simulate_panel<R: Rng + ?Sized>(
    level_cfg: &SimulationConfig,
    panel_cfg: &PanelConfig,
    rng: &mut R,
) -> Result<SimulatedPanel> {
    let t = panel_cfg.months;
    if t < 2 {
        return Err(Error::param("panel needs at least 2 months"));
    }
    if !(panel_cfg.slope_gamma.abs() < 1.0) || panel_cfg.slope_sd < 0.0 || panel_cfg.noise_sd < 0.0 {
        return Err(Error::param("slope_gamma must lie in (-1, 1) and standard deviations must be non-negative"));
    }
    let level = simulate_series(&SimulationConfig { length: t, ..*level_cfg }, rng)?;
    let g = panel_cfg.slope_gamma;
    let mut slope = vec![panel_cfg.slope_sd / (1.0 - g * g).sqrt() * std_normal(rng)];
    for _ in 1..t {
        let prev = slope[slope.len() - 1];
        slope.push(g * prev + panel_cfg.slope_sd * std_normal(rng));
    }
    let mats = &panel_cfg.maturities;
    let (mean, xi1, xi2) = panel_shape(mats);
    let mut values = Vec::with_capacity(t * mats.len());
    for i in 0..t {
        for j in 0..mats.len() {
            values.push(mean[j] + xi1[j] * level.x[i] + xi2[j] * slope[i] + panel_cfg.noise_sd * std_normal(rng));
        }
    }
    let dates = (0..t).map(|i| month_label(&panel_cfg.start, i)).collect::<Result<Vec<_>>>()?;
    let panel = YieldPanel::new(dates, mats.clone(), DMatrix::from_row_slice(t, mats.len(), &values))?;
    Ok(SimulatedPanel { panel, level, slope })
}
