//! Command implementations behind the `btvc` binary. Each command reads its
//! inputs, writes its outputs into one directory and records them in a
//! `manifest_<command>.json` with content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backtest::{render_csv, render_text, run_backtest};
use crate::conditionals::BtvcData;
use crate::config::{RunConfig, SimulateKind};
use crate::error::{Error, Result};
use crate::factors::{fit_ols_ar1, pca, PcaDecomposition, YieldPanel};
use crate::forecast::{
    fan_chart, point_forecast, read_draws_csv, simulate_paths, write_draws_csv, HorizonSummary, PredictiveDraws,
    QUANTILE_PROBS,
};
use crate::models::ModelRegistry;
use crate::sampler::{run_chain, Diagnostics};
use crate::seed::{derive_seed, derived_rng};
use crate::simulate::{simulate_panel, simulate_series};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub data_hash: Option<String>,
    /// File name to SHA-256 of its content.
    pub outputs: BTreeMap<String, String>,
}

/// Collects output files for one command and writes its manifest last.
struct OutputDir<'a> {
    dir: &'a Path,
    command: &'static str,
    files: BTreeMap<String, String>,
}

impl<'a> OutputDir<'a> {
    fn create(dir: &'a Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            command,
            files: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    fn finish(self, cfg: &RunConfig, data_hash: Option<String>) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            command: self.command.to_string(),
            version: VERSION.to_string(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            data_hash,
            outputs: self.files.clone(),
        };
        let name = format!("manifest_{}.json", self.command);
        let path = self.dir.join(&name);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let mut out: Vec<PathBuf> = self.files.keys().map(|f| self.dir.join(f)).collect();
        out.push(path);
        Ok(out)
    }
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Reads the `x` column of a CSV file.
pub fn read_series(bytes: &[u8], source: &str) -> Result<Vec<f64>> {
    let bad = |line: u64, message: String| Error::Data {
        path: source.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let col = header
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| bad(1, "no column named `x`".into()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(bad(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let v: f64 = rec[col]
            .parse()
            .map_err(|_| bad(line, format!("{:?} is not a number", &rec[col])))?;
        if !v.is_finite() {
            return Err(bad(line, "value is not finite".into()));
        }
        out.push(v);
    }
    Ok(out)
}

/// The modeled series plus, for panel input, the factor structure.
pub struct ModelInput {
    /// Level factor (panel) or raw series, before centering.
    pub series: Vec<f64>,
    pub panel: Option<(YieldPanel, PcaDecomposition)>,
    pub data_hash: String,
}

pub fn load_input(cfg: &RunConfig) -> Result<ModelInput> {
    let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p, e));
    if let Some(path) = &cfg.data.panel {
        let bytes = read(path)?;
        let panel = YieldPanel::from_reader(bytes.as_slice(), &path.display().to_string())?;
        let decomposition = pca(&panel, 2)?;
        return Ok(ModelInput {
            series: decomposition.factor(0),
            panel: Some((panel, decomposition)),
            data_hash: sha256_hex(&bytes),
        });
    }
    if let Some(path) = &cfg.data.series {
        let bytes = read(path)?;
        return Ok(ModelInput {
            series: read_series(&bytes, &path.display().to_string())?,
            panel: None,
            data_hash: sha256_hex(&bytes),
        });
    }
    Err(Error::Config("set data.panel or data.series".into()))
}

fn require_panel(cfg: &RunConfig) -> Result<(YieldPanel, String)> {
    let path = cfg
        .data
        .panel
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs data.panel".into()))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let panel = YieldPanel::from_reader(bytes.as_slice(), &path.display().to_string())?;
    Ok((panel, sha256_hex(&bytes)))
}

fn centered(cfg: &RunConfig, series: &[f64]) -> Result<BtvcData> {
    BtvcData::new(series.iter().map(|v| v - cfg.data.center).collect())
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut dir = OutputDir::create(out, "simulate")?;
    let mut rng = derived_rng(cfg.seed, "simulate", 0);
    let sim = &cfg.simulate;
    let tau_sq = match sim.kind {
        SimulateKind::Series => {
            let s = simulate_series(&sim.level, &mut rng)?;
            let mut text = String::from("x\n");
            for v in &s.x {
                text.push_str(&format!("{v}\n"));
            }
            dir.write("series.csv", text.as_bytes())?;
            s.tau_sq
        }
        SimulateKind::Panel => {
            let p = simulate_panel(&sim.level, &sim.panel, &mut rng)?;
            let mut buf = Vec::new();
            p.panel.write_csv(&mut buf).map_err(|e| Error::io(out.join("panel.csv"), e))?;
            dir.write("panel.csv", &buf)?;
            p.level.tau_sq
        }
    };
    let truth = serde_json::json!({
        "rho": sim.level.rho,
        "beta": sim.level.beta,
        "sigma_sq": sim.level.sigma_sq,
        "tau_sq": tau_sq,
        "target_var": sim.level.target_var,
        "implied_variance": sim.level.implied_variance()?,
    });
    dir.write("truth.json", &to_json(&truth))?;
    dir.finish(cfg, None)
}

#[derive(Serialize)]
struct FitSummary {
    retained: usize,
    acceptance_rate: f64,
    observations: usize,
    horizon: usize,
    last_x: f64,
    center: f64,
    diagnostics: Diagnostics,
}

pub fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let input = load_input(cfg)?;
    let data = centered(cfg, &input.series)?;
    let draws = run_chain(&data, &cfg.sampler_config())?;
    let mut dir = OutputDir::create(out, "fit")?;
    let predictive = PredictiveDraws::from(&draws);
    let mut buf = Vec::new();
    write_draws_csv(&predictive, &mut buf).map_err(|e| Error::io(out.join("draws.csv"), e))?;
    dir.write("draws.csv", &buf)?;
    let summary = FitSummary {
        retained: draws.states.len(),
        acceptance_rate: draws.acceptance_rate(),
        observations: data.values().len(),
        horizon: draws.horizon,
        last_x: data.last(),
        center: cfg.data.center,
        diagnostics: draws.diagnostics()?,
    };
    dir.write("diagnostics.json", &to_json(&summary))?;
    dir.finish(cfg, Some(input.data_hash))
}

fn summary_row(s: &HorizonSummary) -> String {
    let mut row = format!("{},{:.6},{:.6}", s.horizon, s.mean, s.sd);
    for q in s.quantiles {
        row.push_str(&format!(",{q:.6}"));
    }
    row
}

pub fn cmd_forecast(cfg: &RunConfig, out: &Path, draws_path: Option<&Path>) -> Result<Vec<PathBuf>> {
    let input = load_input(cfg)?;
    let data = centered(cfg, &input.series)?;
    let default_draws = out.join("draws.csv");
    let draws_path = draws_path.unwrap_or(&default_draws);
    let bytes = fs::read(draws_path).map_err(|e| Error::io(draws_path, e))?;
    let draws = read_draws_csv(bytes.as_slice(), &draws_path.display().to_string(), data.t(), data.last())?;
    let h = cfg.forecast.horizons.iter().copied().max().unwrap_or(1);
    let mut paths = simulate_paths(&draws, h, derive_seed(cfg.seed, "forecast", 0))?;
    for p in &mut paths.paths {
        for v in p.iter_mut() {
            *v += cfg.data.center;
        }
    }

    let mut dir = OutputDir::create(out, "forecast")?;
    let mut fan = Vec::new();
    crate::forecast::write_fan_chart(&fan_chart(&paths)?, &mut fan).map_err(|e| Error::io(out.join("fan_chart.csv"), e))?;
    dir.write("fan_chart.csv", &fan)?;

    if let Some((panel, decomposition)) = &input.panel {
        let slope_series = decomposition.factor(1);
        let slope = fit_ols_ar1(&slope_series, true)?;
        let s_t = slope_series[slope_series.len() - 1];
        let slope_paths = slope.simulate_paths(s_t, h, paths.len(), derive_seed(cfg.seed, "slope-paths", 0))?;
        let level_mean = point_forecast(&paths);
        let cols: Vec<usize> = cfg
            .forecast
            .maturities
            .iter()
            .map(|&m| panel.maturity_index(m))
            .collect::<Result<_>>()?;

        let mut point = String::from("horizon");
        for m in &cfg.forecast.maturities {
            point.push_str(&format!(",m{m}"));
        }
        point.push('\n');
        let mut dist = String::from("horizon,maturity,mean,sd,q01,q05,q25,q50,q75,q95,q99\n");
        for &j in &cfg.forecast.horizons {
            let curve = decomposition.reconstruct_curve(level_mean[j - 1], slope.forecast_mean(s_t, j))?;
            point.push_str(&j.to_string());
            for &c in &cols {
                point.push_str(&format!(",{:.6}", curve[c]));
            }
            point.push('\n');
            let curves: Vec<Vec<f64>> = paths
                .paths
                .iter()
                .zip(&slope_paths.paths)
                .map(|(l, s)| decomposition.reconstruct_curve(l[j - 1], s[j - 1]))
                .collect::<Result<_>>()?;
            for (&c, m) in cols.iter().zip(&cfg.forecast.maturities) {
                let values: Vec<f64> = curves.iter().map(|cv| cv[c]).collect();
                let s = HorizonSummary::from_values(j, &values)?;
                let row = summary_row(&s);
                let (head, rest) = row.split_once(',').expect("row has fields");
                dist.push_str(&format!("{head},{m},{rest}\n"));
            }
        }
        dir.write("curve_forecast.csv", point.as_bytes())?;
        dir.write("curve_distribution.csv", dist.as_bytes())?;
    }
    debug_assert_eq!(QUANTILE_PROBS.len(), 7);
    dir.finish(cfg, Some(input.data_hash))
}

pub fn cmd_backtest(cfg: &RunConfig, out: &Path, models: &[String]) -> Result<Vec<PathBuf>> {
    let (panel, data_hash) = require_panel(cfg)?;
    let registry = ModelRegistry::with_builtin(cfg.backtest_sampler_config(), cfg.data.center);
    let names = if models.is_empty() { &cfg.models[..] } else { models };
    let selected = registry.select(names)?;
    let report = run_backtest(&panel, &selected, &cfg.backtest, derive_seed(cfg.seed, "backtest", 0))?;
    let mut dir = OutputDir::create(out, "backtest")?;
    dir.write("backtest_report.csv", render_csv(&report).as_bytes())?;
    dir.write("backtest_report.txt", render_text(&report).as_bytes())?;
    dir.finish(cfg, Some(data_hash))
}

pub fn cmd_pca(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let (panel, data_hash) = require_panel(cfg)?;
    let d = pca(&panel, 2)?;
    let mut dir = OutputDir::create(out, "pca")?;
    let mut loadings = String::from("maturity,mean,pc1,pc2\n");
    for (j, m) in panel.maturities().iter().enumerate() {
        loadings.push_str(&format!(
            "{m},{:.8},{:.8},{:.8}\n",
            d.mean[j],
            d.loadings[(j, 0)],
            d.loadings[(j, 1)]
        ));
    }
    dir.write("pca_loadings.csv", loadings.as_bytes())?;
    let mut scores = String::from("date,pc1,pc2\n");
    for (i, date) in panel.dates().iter().enumerate() {
        scores.push_str(&format!("{date},{:.8},{:.8}\n", d.scores[(i, 0)], d.scores[(i, 1)]));
    }
    dir.write("pca_scores.csv", scores.as_bytes())?;
    let summary = serde_json::json!({
        "eigenvalues": d.eigenvalues,
        "explained": d.explained,
        "explained_total": d.explained.iter().sum::<f64>(),
        "warnings": d.warnings,
    });
    dir.write("pca_summary.json", &to_json(&summary))?;
    dir.finish(cfg, Some(data_hash))
}
