//! Run configuration: one TOML document holding every setting a command
//! needs. Unknown keys are rejected and every section has defaults, so an
//! empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::BacktestConfig;
use crate::error::{Error, Result};
use crate::prior::PriorConfig;
use crate::sampler::{FutureLatent, SamplerConfig};
use crate::simulate::{PanelConfig, SimulationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Yield panel CSV (`date,m1,m2,…`).
    pub panel: Option<PathBuf>,
    /// Univariate series CSV with a column named `x`. Used when no panel is set.
    pub series: Option<PathBuf>,
    /// Shift subtracted from the modeled series so its long-run mean is 0.
    pub center: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            panel: None,
            series: None,
            center: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Months of latent intercepts sampled beyond the data; bounds the
    /// longest forecast.
    pub horizon: usize,
    pub future_latent: FutureLatent,
    pub shear_moves: usize,
    pub shear_scale: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            iterations: d.iterations,
            burn_in: d.burn_in,
            thinning: d.thinning,
            horizon: d.horizon,
            future_latent: d.future_latent,
            shear_moves: d.shear_moves,
            shear_scale: d.shear_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    /// Horizons (months) of the curve forecast tables.
    pub horizons: Vec<usize>,
    /// Maturities (years) reported in curve forecasts.
    pub maturities: Vec<f64>,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizons: vec![1, 3, 6, 12, 60, 120, 480],
            maturities: vec![1.0, 3.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateKind {
    #[default]
    Series,
    Panel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub kind: SimulateKind,
    pub level: SimulationConfig,
    pub panel: PanelConfig,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            kind: SimulateKind::Series,
            level: SimulationConfig::default(),
            panel: PanelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Models compared by `backtest`.
    pub models: Vec<String>,
    pub data: DataConfig,
    pub prior: PriorConfig,
    pub sampler: SamplerSection,
    pub forecast: ForecastSection,
    pub backtest: BacktestConfig,
    pub simulate: SimulateSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            models: vec!["btvc".into(), "dns".into(), "ar1".into(), "ar1-restricted".into()],
            data: DataConfig::default(),
            prior: PriorConfig::default(),
            sampler: SamplerSection::default(),
            forecast: ForecastSection::default(),
            backtest: BacktestConfig::default(),
            simulate: SimulateSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file; relative data and output paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.panel.as_mut().map(fix);
        cfg.data.series.as_mut().map(fix);
        fix(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.sampler_config().validate()?;
        self.backtest.validate()?;
        if self.models.is_empty() {
            return Err(Error::param("models must name at least one model"));
        }
        if self.forecast.horizons.is_empty() || self.forecast.horizons.contains(&0) {
            return Err(Error::param("forecast.horizons must be non-empty and positive"));
        }
        if !self.data.center.is_finite() {
            return Err(Error::param("data.center must be finite"));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.sampler.iterations,
            burn_in: self.sampler.burn_in,
            thinning: self.sampler.thinning,
            seed: self.seed,
            horizon: self.sampler.horizon,
            future_latent: self.sampler.future_latent,
            shear_moves: self.sampler.shear_moves,
            shear_scale: self.sampler.shear_scale,
            prior: self.prior,
        }
    }

    /// Sampler settings for one backtest origin.
    pub fn backtest_sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.backtest.iterations,
            burn_in: self.backtest.burn_in,
            ..self.sampler_config()
        }
    }

    /// SHA-256 of the canonical JSON form. The output directory and the
    /// directories of data files are left out so the hash does not depend on
    /// where a run happens; file contents are hashed separately.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.dir = PathBuf::new();
        for p in [&mut canon.data.panel, &mut canon.data.series].into_iter().flatten() {
            *p = p.file_name().map(PathBuf::from).unwrap_or_default();
        }
        let json = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
