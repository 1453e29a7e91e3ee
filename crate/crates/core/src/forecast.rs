//! Predictive paths, point forecasts and per-horizon summaries.
//!
//! Path `m` uses state `m` of the chain: `x_{t+j} = α_{t+j} + β x_{t+j−1} + ε`,
//! `ε ~ N(0, σ²)`, anchored at the last observation. Each path draws its
//! noise from its own stream derived from `(seed, "path", m)`, so the result
//! does not depend on thread scheduling.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::std_normal;
use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::conditionals::BtvcState;
use crate::seed::derived_rng;

/// Probabilities reported in every horizon summary.
pub const QUANTILE_PROBS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Simulated future values, one row per posterior state.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPaths {
    pub paths: Vec<Vec<f64>>,
    pub origin: usize,
}

impl ForecastPaths {
    pub fn new(paths: Vec<Vec<f64>>, origin: usize) -> Result<Self> {
        let h = paths.first().map(Vec::len).unwrap_or(0);
        if paths.is_empty() || h == 0 {
            return Err(Error::param("forecast paths must be non-empty"));
        }
        if paths.iter().any(|p| p.len() != h) {
            return Err(Error::param("forecast paths have unequal lengths"));
        }
        Ok(Self { paths, origin })
    }

    pub fn horizon(&self) -> usize {
        self.paths[0].len()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Values at horizon `j` (1-based) across paths.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[j - 1]).collect()
    }
}

/// The part of a posterior state that drives prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveState {
    pub beta: f64,
    pub sigma_sq: f64,
    pub rho: f64,
    pub tau_sq: f64,
    /// `α_{t+1}, …, α_{t+h}`.
    pub alpha_future: Vec<f64>,
}

/// Posterior states reduced to what forecasting needs, plus the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    pub states: Vec<PredictiveState>,
    /// Index of the last observation.
    pub origin: usize,
    pub last_x: f64,
}

impl PredictiveState {
    pub fn from_state(s: &BtvcState, t: usize) -> Self {
        Self {
            beta: s.beta,
            sigma_sq: s.sigma_sq,
            rho: s.rho,
            tau_sq: s.tau_sq,
            alpha_future: s.alpha_future(t).to_vec(),
        }
    }
}

impl From<&PosteriorDraws> for PredictiveDraws {
    fn from(d: &PosteriorDraws) -> Self {
        Self {
            states: d.states.iter().map(|s| PredictiveState::from_state(s, d.t)).collect(),
            origin: d.t,
            last_x: d.last_x,
        }
    }
}

impl PredictiveDraws {
    /// Shortest available latent tail across states.
    pub fn horizon(&self) -> usize {
        self.states.iter().map(|s| s.alpha_future.len()).min().unwrap_or(0)
    }
}

pub fn simulate_paths(draws: &PredictiveDraws, h: usize, seed: u64) -> Result<ForecastPaths> {
    if h == 0 {
        return Err(Error::param("forecast horizon must be positive"));
    }
    if draws.states.is_empty() {
        return Err(Error::param("no posterior states to simulate from"));
    }
    if h > draws.horizon() {
        return Err(Error::param(format!(
            "horizon {h} exceeds the {} latent intercepts sampled beyond the data; refit with sampler.horizon >= {h}",
            draws.horizon()
        )));
    }
    let paths: Vec<Vec<f64>> = draws
        .states
        .par_iter()
        .enumerate()
        .map(|(m, s)| {
            let mut rng = derived_rng(seed, "path", m as u64);
            let sigma = s.sigma_sq.sqrt();
            let mut prev = draws.last_x;
            s.alpha_future[..h]
                .iter()
                .map(|a| {
                    prev = a + s.beta * prev + sigma * std_normal(&mut rng);
                    prev
                })
                .collect()
        })
        .collect();
    ForecastPaths::new(paths, draws.origin)
}

/// Writes one row per state: `beta,sigma_sq,rho,tau_sq,alpha_t+1,…`.
/// Values use the shortest representation that parses back exactly.
pub fn write_draws_csv<W: Write>(draws: &PredictiveDraws, mut w: W) -> std::io::Result<()> {
    let h = draws.horizon();
    write!(w, "beta,sigma_sq,rho,tau_sq")?;
    for j in 1..=h {
        write!(w, ",alpha_t+{j}")?;
    }
    writeln!(w)?;
    for s in &draws.states {
        write!(w, "{},{},{},{}", s.beta, s.sigma_sq, s.rho, s.tau_sq)?;
        for a in &s.alpha_future[..h] {
            write!(w, ",{a}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads [`write_draws_csv`] output. The anchor comes from the data.
pub fn read_draws_csv<R: Read>(reader: R, source: &str, origin: usize, last_x: f64) -> Result<PredictiveDraws> {
    let bad = |line: u64, message: String| Error::Data {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let expect = ["beta", "sigma_sq", "rho", "tau_sq"];
    if header.len() < 4 || header.iter().take(4).ne(expect) {
        return Err(bad(1, format!("header must start with {}", expect.join(","))));
    }
    let width = header.len();
    let mut states = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(bad(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let v = rec
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| bad(line, format!("{c:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        states.push(PredictiveState {
            beta: v[0],
            sigma_sq: v[1],
            rho: v[2],
            tau_sq: v[3],
            alpha_future: v[4..].to_vec(),
        });
    }
    if states.is_empty() {
        return Err(bad(1, "draws file has no rows".into()));
    }
    Ok(PredictiveDraws { states, origin, last_x })
}

/// Arithmetic mean across paths at each horizon.
pub fn point_forecast(paths: &ForecastPaths) -> Vec<f64> {
    let m = paths.len() as f64;
    let mut acc = vec![0.0; paths.horizon()];
    for p in &paths.paths {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / m).collect()
}

/// Empirical quantile by linear interpolation between order statistics:
/// with `n` sorted values `v_0 ≤ … ≤ v_{n−1}` and `h = (n−1)p`, the result is
/// `v_⌊h⌋ + (h − ⌊h⌋)(v_⌊h⌋+1 − v_⌊h⌋)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub sd: f64,
    /// Values at [`QUANTILE_PROBS`].
    pub quantiles: [f64; 7],
}

impl HorizonSummary {
    pub fn from_values(horizon: usize, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("cannot summarize an empty sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite forecast value at horizon {horizon}")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            horizon,
            mean,
            sd,
            quantiles: QUANTILE_PROBS.map(|p| quantile_sorted(&sorted, p)),
        })
    }
}

pub fn summarize_horizon(paths: &ForecastPaths, j: usize) -> Result<HorizonSummary> {
    if j == 0 || j > paths.horizon() {
        return Err(Error::param(format!(
            "horizon {j} outside 1..={}",
            paths.horizon()
        )));
    }
    HorizonSummary::from_values(j, &paths.column(j))
}

/// Summaries for every horizon `1..=h`.
pub fn fan_chart(paths: &ForecastPaths) -> Result<Vec<HorizonSummary>> {
    (1..=paths.horizon()).map(|j| summarize_horizon(paths, j)).collect()
}

pub const FAN_CHART_HEADER: &str = "horizon,mean,sd,q01,q05,q25,q50,q75,q95,q99";

/// Writes summaries as fan-chart CSV with six decimals.
pub fn write_fan_chart<W: Write>(rows: &[HorizonSummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{FAN_CHART_HEADER}")?;
    for r in rows {
        write!(w, "{},{:.6},{:.6}", r.horizon, r.mean, r.sd)?;
        for q in r.quantiles {
            write!(w, ",{q:.6}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
