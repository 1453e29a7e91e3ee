//! Yield-curve forecasting strategies, selectable by name.
//!
//! Every strategy forecasts the first two principal-component factors of a
//! training window and maps them back to full curves. The registry holds
//! trait objects keyed by name so the CLI and the backtest can pick models
//! from configuration.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::conditionals::BtvcData;
use crate::error::{Error, Result};
use crate::factors::{fit_ols_ar1, PcaDecomposition, YieldPanel};
use crate::forecast::{point_forecast, simulate_paths};
use crate::sampler::{run_chain, SamplerConfig};
use crate::seed::derive_seed;

/// Everything a model sees at one forecast origin.
pub struct ForecastContext<'a> {
    /// The full panel. Models must only read rows before `window_len`; the
    /// rest is there for test doubles that cheat on purpose.
    pub panel: &'a YieldPanel,
    pub window_len: usize,
    pub pca: &'a PcaDecomposition,
    /// Level and slope factor series over the training window.
    pub level: &'a [f64],
    pub slope: &'a [f64],
    pub horizons: &'a [usize],
    pub seed: u64,
}

impl ForecastContext<'_> {
    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    fn curves(&self, factors: impl Iterator<Item = (f64, f64)>) -> Result<Vec<Vec<f64>>> {
        factors.map(|(l, s)| self.pca.reconstruct_curve(l, s)).collect()
    }
}

pub trait CurveModel: Send + Sync {
    /// Registry key, e.g. `btvc`.
    fn name(&self) -> &str;

    /// Label used in rendered tables.
    fn display_name(&self) -> &str {
        self.name()
    }

    /// One curve (all panel maturities) per entry of `ctx.horizons`.
    fn forecast(&self, ctx: &ForecastContext) -> Result<Vec<Vec<f64>>>;
}

fn last(series: &[f64]) -> Result<f64> {
    series.last().copied().ok_or_else(|| Error::param("empty factor series"))
}

/// Level factor from the Bayesian time-varying-constant AR(1), slope from a
/// zero-constant OLS AR(1). The level point forecast is the mean of the
/// simulated predictive paths.
pub struct BtvcModel {
    pub sampler: SamplerConfig,
    /// Shift subtracted from the level factor before fitting.
    pub center: f64,
}

impl CurveModel for BtvcModel {
    fn name(&self) -> &str {
        "btvc"
    }

    fn display_name(&self) -> &str {
        "BTVC-AR(1) factor model"
    }

    fn forecast(&self, ctx: &ForecastContext) -> Result<Vec<Vec<f64>>> {
        let h = ctx.max_horizon();
        let cfg = SamplerConfig {
            horizon: h,
            seed: derive_seed(ctx.seed, "btvc-chain", 0),
            ..self.sampler
        };
        let data = BtvcData::new(ctx.level.iter().map(|v| v - self.center).collect())?;
        let draws = run_chain(&data, &cfg)?;
        let paths = simulate_paths(&(&draws).into(), h, derive_seed(ctx.seed, "btvc-paths", 0))?;
        let level = point_forecast(&paths);
        let slope = fit_ols_ar1(ctx.slope, true)?;
        let s_t = last(ctx.slope)?;
        ctx.curves(
            ctx.horizons
                .iter()
                .map(|&j| (level[j - 1] + self.center, slope.forecast_mean(s_t, j))),
        )
    }
}

/// Linear AR(1) on the level factor (with or without intercept) and a
/// zero-constant AR(1) on the slope.
pub struct Ar1Model {
    pub intercept: bool,
}

impl CurveModel for Ar1Model {
    fn name(&self) -> &str {
        if self.intercept {
            "ar1"
        } else {
            "ar1-restricted"
        }
    }

    fn display_name(&self) -> &str {
        if self.intercept {
            "AR(1) factor model"
        } else {
            "Restricted AR(1) factor model"
        }
    }

    fn forecast(&self, ctx: &ForecastContext) -> Result<Vec<Vec<f64>>> {
        let level = fit_ols_ar1(ctx.level, !self.intercept)?;
        let slope = fit_ols_ar1(ctx.slope, true)?;
        let (l_t, s_t) = (last(ctx.level)?, last(ctx.slope)?);
        ctx.curves(
            ctx.horizons
                .iter()
                .map(|&j| (level.forecast_mean(l_t, j), slope.forecast_mean(s_t, j))),
        )
    }
}

/// Dynamic Nelson-Siegel, PCA variant: both factors follow AR(1) with
/// intercept.
pub struct DnsModel;

impl CurveModel for DnsModel {
    fn name(&self) -> &str {
        "dns"
    }

    fn display_name(&self) -> &str {
        "Dynamic Nelson-Siegel model"
    }

    fn forecast(&self, ctx: &ForecastContext) -> Result<Vec<Vec<f64>>> {
        let level = fit_ols_ar1(ctx.level, false)?;
        let slope = fit_ols_ar1(ctx.slope, false)?;
        let (l_t, s_t) = (last(ctx.level)?, last(ctx.slope)?);
        ctx.curves(
            ctx.horizons
                .iter()
                .map(|&j| (level.forecast_mean(l_t, j), slope.forecast_mean(s_t, j))),
        )
    }
}

/// Models keyed by name.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<dyn CurveModel>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `btvc`, `dns`, `ar1` and `ar1-restricted`.
    pub fn with_builtin(sampler: SamplerConfig, center: f64) -> Self {
        let mut r = Self::new();
        r.register(Arc::new(BtvcModel { sampler, center }));
        r.register(Arc::new(DnsModel));
        r.register(Arc::new(Ar1Model { intercept: true }));
        r.register(Arc::new(Ar1Model { intercept: false }));
        r
    }

    /// Adds or replaces a model under its own name.
    pub fn register(&mut self, model: Arc<dyn CurveModel>) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn CurveModel>> {
        self.models.get(name).cloned().ok_or_else(|| {
            Error::param(format!(
                "unknown model {name:?}; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    /// Resolves names in the given order, rejecting duplicates.
    pub fn select(&self, names: &[String]) -> Result<Vec<Arc<dyn CurveModel>>> {
        let mut seen = std::collections::BTreeSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(n.as_str()) {
                    return Err(Error::param(format!("model {n:?} selected twice")));
                }
                self.get(n)
            })
            .collect()
    }
}
