//! Expanding-window out-of-sample evaluation.
//!
//! Origin `k` trains on the first `initial_window + k` months and forecasts
//! each horizon; the number of origins is `T − initial_window − buffer` with
//! `buffer = max(end_buffer, max horizon)`. Errors are `r − r̂` and are
//! aggregated per (model, horizon, maturity) into mean, sample standard
//! deviation (`N − 1`) and root mean squared error.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{pca, PcaDecomposition, YieldPanel, MIN_PANEL_ROWS};
use crate::models::{CurveModel, ForecastContext};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestConfig {
    /// Months in the first training window.
    pub initial_window: usize,
    /// Forecast horizons in months.
    pub horizons: Vec<usize>,
    /// Maturities (years) reported in the tables.
    pub report_maturities: Vec<f64>,
    /// Months held back at the end of the panel.
    pub end_buffer: usize,
    /// Refit the principal components at every origin instead of fixing
    /// them on the initial window.
    pub refit_pca: bool,
    /// MCMC budget per origin for the Bayesian model.
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_window: 120,
            horizons: vec![1, 3, 6, 12],
            report_maturities: vec![1.0, 3.0, 5.0, 10.0],
            end_buffer: 12,
            refit_pca: true,
            iterations: 4_000,
            burn_in: 1_000,
        }
    }
}

impl BacktestConfig {
    pub fn buffer(&self) -> usize {
        self.end_buffer.max(self.horizons.iter().copied().max().unwrap_or(0))
    }

    /// Number of forecast origins for a panel of `t` months.
    pub fn origins(&self, t: usize) -> Result<usize> {
        self.validate()?;
        let used = self.initial_window + self.buffer();
        if t <= used {
            return Err(Error::param(format!(
                "panel of {t} months is too short: needs more than initial_window + buffer = {used}"
            )));
        }
        Ok(t - used)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::param("backtest.horizons must be non-empty and positive"));
        }
        if self.report_maturities.is_empty() {
            return Err(Error::param("backtest.report_maturities must be non-empty"));
        }
        if self.initial_window < MIN_PANEL_ROWS {
            return Err(Error::param(format!(
                "backtest.initial_window must be at least {MIN_PANEL_ROWS}"
            )));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::param("backtest.burn_in must be below backtest.iterations"));
        }
        Ok(())
    }
}

/// Aggregated errors of one (model, horizon, maturity) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model: String,
    pub horizon: usize,
    pub maturity: f64,
    pub mean: f64,
    pub sd: f64,
    pub rmse: f64,
    pub n: usize,
}

/// Mean, sample SD and RMSE of a set of forecast errors.
pub fn error_stats(errors: &[f64]) -> (f64, f64, f64) {
    let n = errors.len() as f64;
    if errors.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = errors.iter().sum::<f64>() / n;
    let sd = if errors.len() > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    (mean, sd, rmse)
}

/// An origin at which a model produced no forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub model: String,
    pub origin: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// `(name, display name)` in selection order.
    pub models: Vec<(String, String)>,
    pub cells: Vec<ReportCell>,
    pub gaps: Vec<Gap>,
    pub origins: usize,
    pub config: BacktestConfig,
    pub data_fingerprint: String,
}

impl BacktestReport {
    pub fn cell(&self, model: &str, horizon: usize, maturity: f64) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.horizon == horizon && (c.maturity - maturity).abs() < 1e-9)
    }
}

type OriginResult = Vec<std::result::Result<Vec<Vec<f64>>, String>>;

fn factor_series(pca: &PcaDecomposition, window: &YieldPanel, refit: bool) -> (Vec<f64>, Vec<f64>) {
    if refit {
        return (pca.factor(0), pca.factor(1));
    }
    let rates = window.rates();
    (0..window.len())
        .map(|i| {
            let row: Vec<f64> = rates.row(i).iter().copied().collect();
            let s = pca.project(&row);
            (s[0], s[1])
        })
        .unzip()
}

pub fn run_backtest(
    panel: &YieldPanel,
    models: &[Arc<dyn CurveModel>],
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<BacktestReport> {
    if models.is_empty() {
        return Err(Error::param("no models selected for the backtest"));
    }
    let origins = cfg.origins(panel.len())?;
    let columns: Vec<usize> = cfg
        .report_maturities
        .iter()
        .map(|&m| panel.maturity_index(m))
        .collect::<Result<_>>()?;
    let fixed = if cfg.refit_pca {
        None
    } else {
        Some(pca(&panel.head(cfg.initial_window)?, 2)?)
    };

    let results: Vec<Result<OriginResult>> = (0..origins)
        .into_par_iter()
        .map(|k| {
            let w = cfg.initial_window + k;
            let window = panel.head(w)?;
            let refit;
            let decomposition = match &fixed {
                Some(p) => p,
                None => {
                    refit = pca(&window, 2)?;
                    &refit
                }
            };
            let (level, slope) = factor_series(decomposition, &window, cfg.refit_pca);
            let ctx = ForecastContext {
                panel,
                window_len: w,
                pca: decomposition,
                level: &level,
                slope: &slope,
                horizons: &cfg.horizons,
                seed: derive_seed(seed, "origin", k as u64),
            };
            Ok(models
                .iter()
                .map(|m| {
                    let curves = m.forecast(&ctx).map_err(|e| e.to_string())?;
                    if curves.len() != cfg.horizons.len() {
                        return Err(format!("model returned {} curves", curves.len()));
                    }
                    Ok(cfg
                        .horizons
                        .iter()
                        .zip(&curves)
                        .map(|(&h, curve)| {
                            columns
                                .iter()
                                .map(|&j| panel.rates()[(w - 1 + h, j)] - curve[j])
                                .collect()
                        })
                        .collect())
                })
                .collect())
        })
        .collect();

    // errors[model][horizon][maturity] in origin order.
    let mut errors = vec![vec![vec![Vec::with_capacity(origins); columns.len()]; cfg.horizons.len()]; models.len()];
    let mut gaps = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        for (mi, r) in res?.into_iter().enumerate() {
            match r {
                Ok(e) => {
                    for (hi, row) in e.into_iter().enumerate() {
                        for (ji, v) in row.into_iter().enumerate() {
                            errors[mi][hi][ji].push(v);
                        }
                    }
                }
                Err(message) => gaps.push(Gap {
                    model: models[mi].name().to_string(),
                    origin: panel.dates()[cfg.initial_window + k - 1].clone(),
                    message,
                }),
            }
        }
    }

    let mut cells = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        for (hi, &h) in cfg.horizons.iter().enumerate() {
            for (ji, &mat) in cfg.report_maturities.iter().enumerate() {
                let e = &errors[mi][hi][ji];
                if e.is_empty() {
                    continue;
                }
                let (mean, sd, rmse) = error_stats(e);
                cells.push(ReportCell {
                    model: m.name().to_string(),
                    horizon: h,
                    maturity: mat,
                    mean,
                    sd,
                    rmse,
                    n: e.len(),
                });
            }
        }
    }
    Ok(BacktestReport {
        models: models
            .iter()
            .map(|m| (m.name().to_string(), m.display_name().to_string()))
            .collect(),
        cells,
        gaps,
        origins,
        config: cfg.clone(),
        data_fingerprint: panel.fingerprint(),
    })
}

/// Fixed four-decimal formatting; negative zero prints as zero.
pub fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

pub const REPORT_CSV_HEADER: &str = "model,horizon,maturity,mean,sd,rmse,n";

pub fn render_csv(report: &BacktestReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_CSV_HEADER);
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.model,
            c.horizon,
            c.maturity,
            fmt4(c.mean),
            fmt4(c.sd),
            fmt4(c.rmse),
            c.n
        );
    }
    out
}

/// Parses [`render_csv`] output back into cells.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportCell>> {
    let bad = |line: usize, msg: String| Error::Data {
        path: "report".into(),
        line: line as u64,
        message: msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == REPORT_CSV_HEADER => {}
        _ => return Err(bad(1, "missing report header".into())),
    }
    lines
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(i + 1, format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 1, e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| bad(i + 1, e.to_string()));
            Ok(ReportCell {
                model: f[0].to_string(),
                horizon: int(f[1])?,
                maturity: num(f[2])?,
                mean: num(f[3])?,
                sd: num(f[4])?,
                rmse: num(f[5])?,
                n: int(f[6])?,
            })
        })
        .collect()
}

fn horizon_label(h: usize) -> String {
    if h == 1 {
        "1 month".into()
    } else {
        format!("{h} months")
    }
}

/// Aligned text tables, one per horizon: maturity rows with Mean, Std. Dev.
/// and RMSE columns, grouped by model. Models without cells are omitted.
pub fn render_text(report: &BacktestReport) -> String {
    let mut out = String::new();
    let rule = "-".repeat(46);
    for &h in &report.config.horizons {
        let _ = writeln!(out, "Out-of-sample forecast errors, horizon {}", horizon_label(h));
        let _ = writeln!(out, "{:<10}{:>12}{:>12}{:>12}", "Maturity", "Mean", "Std. Dev.", "RMSE");
        let _ = writeln!(out, "{rule}");
        for (name, display) in &report.models {
            let rows: Vec<&ReportCell> = report
                .cells
                .iter()
                .filter(|c| &c.model == name && c.horizon == h)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{display} (N = {})", rows[0].n);
            for c in rows {
                let _ = writeln!(
                    out,
                    "{:<10}{:>12}{:>12}{:>12}",
                    format!("{} year", c.maturity),
                    fmt4(c.mean),
                    fmt4(c.sd),
                    fmt4(c.rmse)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{rule}\n");
    }
    if !report.gaps.is_empty() {
        let _ = writeln!(out, "Gaps ({}):", report.gaps.len());
        for g in &report.gaps {
            let _ = writeln!(out, "  {} at {}: {}", g.model, g.origin, g.message);
        }
    }
    out
}
