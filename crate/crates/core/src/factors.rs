//! Yield panels, principal-component factors and the linear AR(1)
//! baselines built on them.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::std_normal;
use crate::error::{Error, Result};
use crate::forecast::ForecastPaths;
use crate::seed::derived_rng;

/// Minimum number of monthly observations in a panel.
pub const MIN_PANEL_ROWS: usize = 24;

/// Monthly yield curves: `rates[(i, j)]` is the rate in percentage points at
/// `dates[i]` for maturity `maturities[j]` (years).
#[derive(Debug, Clone, PartialEq)]
pub struct YieldPanel {
    dates: Vec<String>,
    maturities: Vec<f64>,
    rates: DMatrix<f64>,
}

fn valid_month(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 7 || b[4] != b'-' || !b[..4].iter().chain(&b[5..]).all(u8::is_ascii_digit) {
        return false;
    }
    matches!(s[5..].parse::<u32>(), Ok(1..=12))
}

impl YieldPanel {
    pub fn new(dates: Vec<String>, maturities: Vec<f64>, rates: DMatrix<f64>) -> Result<Self> {
        if rates.nrows() != dates.len() || rates.ncols() != maturities.len() {
            return Err(Error::param(format!(
                "panel is {}x{} but has {} dates and {} maturities",
                rates.nrows(),
                rates.ncols(),
                dates.len(),
                maturities.len()
            )));
        }
        if dates.len() < MIN_PANEL_ROWS {
            return Err(Error::param(format!(
                "panel needs at least {MIN_PANEL_ROWS} months, got {}",
                dates.len()
            )));
        }
        if maturities.is_empty() {
            return Err(Error::param("panel has no maturities"));
        }
        if maturities.windows(2).any(|w| !(w[0] < w[1])) || maturities.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::param("maturities must be positive and strictly increasing"));
        }
        if let Some(d) = dates.iter().find(|d| !valid_month(d)) {
            return Err(Error::param(format!("date {d:?} is not of the form YYYY-MM")));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("dates must be strictly increasing"));
        }
        if rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("panel contains non-finite rates"));
        }
        Ok(Self {
            dates,
            maturities,
            rates,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// The first `rows` months.
    pub fn head(&self, rows: usize) -> Result<Self> {
        if rows > self.len() {
            return Err(Error::param(format!("window of {rows} months exceeds panel length {}", self.len())));
        }
        Self::new(
            self.dates[..rows].to_vec(),
            self.maturities.clone(),
            self.rates.rows(0, rows).into_owned(),
        )
    }

    /// Column index of a maturity, matched to 1e-9 years.
    pub fn maturity_index(&self, maturity: f64) -> Result<usize> {
        self.maturities
            .iter()
            .position(|m| (m - maturity).abs() < 1e-9)
            .ok_or_else(|| Error::param(format!("maturity {maturity} not in panel")))
    }

    /// Reads `date,m1,m2,…` CSV. `source` names the input in errors.
    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let data_err = |line: u64, message: String| Error::Data {
            path: source.to_string(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
        if header.get(0) != Some("date") {
            return Err(data_err(1, "first column must be named `date`".into()));
        }
        let maturities = header
            .iter()
            .skip(1)
            .map(|h| {
                h.strip_prefix('m')
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| data_err(1, format!("column {h:?} is not of the form m<years>")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let width = header.len();
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                data_err(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != width {
                return Err(data_err(line, format!("expected {width} fields, found {}", rec.len())));
            }
            let date = &rec[0];
            if !valid_month(date) {
                return Err(data_err(line, format!("date {date:?} is not of the form YYYY-MM")));
            }
            dates.push(date.to_string());
            for (j, cell) in rec.iter().enumerate().skip(1) {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| data_err(line, format!("cell {j} ({cell:?}) is not a number")))?;
                if !v.is_finite() {
                    return Err(data_err(line, format!("cell {j} is not finite")));
                }
                values.push(v);
            }
        }
        let rates = DMatrix::from_row_slice(dates.len(), maturities.len(), &values);
        Self::new(dates, maturities, rates).map_err(|e| data_err(0, e.to_string()))
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(f), &path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "date")?;
        for m in &self.maturities {
            write!(w, ",m{m}")?;
        }
        writeln!(w)?;
        for (i, d) in self.dates.iter().enumerate() {
            write!(w, "{d}")?;
            for j in 0..self.maturities.len() {
                write!(w, ",{:.6}", self.rates[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Covariance PCA of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    /// Mean curve `μ(τ)`.
    pub mean: DVector<f64>,
    /// `M × K`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// `T × K`, centered data times loadings.
    pub scores: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Eigen-decomposition of the sample covariance (`T − 1` denominator) of the
/// centered, unscaled rates. Columns are ordered by descending eigenvalue and
/// signed so the entry at the longest maturity is non-negative.
pub fn pca(panel: &YieldPanel, k: usize) -> Result<PcaDecomposition> {
    let x = panel.rates();
    let (t, m) = (x.nrows(), x.ncols());
    if k == 0 || k > m.min(t - 1) {
        return Err(Error::param(format!("components must lie in 1..={}, got {k}", m.min(t - 1))));
    }
    let mean = DVector::from_fn(m, |j, _| x.column(j).mean());
    let centered = DMatrix::from_fn(t, m, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (t as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut warnings = Vec::new();
    if !(total > 0.0) {
        warnings.push("panel has zero variance; loadings are arbitrary".to_string());
    }
    let mut loadings = DMatrix::zeros(m, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        if v[m - 1] < 0.0 {
            v = -v;
        }
        loadings.set_column(c, &v);
        let lambda = eig.eigenvalues[idx].max(0.0);
        if total > 0.0 && lambda <= 1e-12 * total {
            warnings.push(format!("component {} has (numerically) zero variance", c + 1));
        }
        eigenvalues.push(lambda);
    }
    let scores = &centered * &loadings;
    let explained = eigenvalues
        .iter()
        .map(|l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    Ok(PcaDecomposition {
        mean,
        loadings,
        scores,
        eigenvalues,
        explained,
        warnings,
    })
}

impl PcaDecomposition {
    pub fn components(&self) -> usize {
        self.loadings.ncols()
    }

    /// Score series of component `c` (0-based).
    pub fn factor(&self, c: usize) -> Vec<f64> {
        self.scores.column(c).iter().copied().collect()
    }

    /// `μ + Σ_k scores[k] ξ_k`.
    pub fn reconstruct_scores(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() > self.components() {
            return Err(Error::param(format!(
                "{} scores given for {} components",
                scores.len(),
                self.components()
            )));
        }
        let mut curve: Vec<f64> = self.mean.iter().copied().collect();
        for (k, s) in scores.iter().enumerate() {
            for (j, c) in curve.iter_mut().enumerate() {
                *c += s * self.loadings[(j, k)];
            }
        }
        Ok(curve)
    }

    /// `r̂(τ) = μ(τ) + ξ_1(τ)·level + ξ_2(τ)·slope`.
    pub fn reconstruct_curve(&self, level: f64, slope: f64) -> Result<Vec<f64>> {
        if self.components() < 2 {
            return Err(Error::param("curve reconstruction needs two components"));
        }
        self.reconstruct_scores(&[level, slope])
    }

    /// Scores of a curve: `(r − μ)ᵀ ξ`.
    pub fn project(&self, curve: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|k| {
                curve
                    .iter()
                    .enumerate()
                    .map(|(j, r)| (r - self.mean[j]) * self.loadings[(j, k)])
                    .sum()
            })
            .collect()
    }
}

/// OLS fit of `x_k = c + γ x_{k−1} + η_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Fit {
    pub constant: f64,
    pub gamma: f64,
    /// `RSS / (n − p)` with `p` the number of fitted coefficients.
    pub residual_var: f64,
    pub observations: usize,
}

pub fn fit_ols_ar1(series: &[f64], fix_constant_zero: bool) -> Result<Ar1Fit> {
    if series.len() < 3 {
        return Err(Error::param(format!("AR(1) fit needs at least 3 points, got {}", series.len())));
    }
    let y = &series[1..];
    let x = &series[..series.len() - 1];
    let n = y.len() as f64;
    let (constant, gamma, p) = if fix_constant_zero {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        if !(sxx > 0.0) {
            return Err(Error::param("AR(1) regressor has zero variance"));
        }
        (0.0, x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx, 1.0)
    } else {
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if !(sxx > 1e-300) {
            return Err(Error::param("AR(1) regressor has zero variance"));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let g = sxy / sxx;
        (my - g * mx, g, 2.0)
    };
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - constant - gamma * a).powi(2)).sum();
    let residual_var = if n > p { rss / (n - p) } else { 0.0 };
    Ok(Ar1Fit {
        constant,
        gamma,
        residual_var,
        observations: y.len(),
    })
}

impl Ar1Fit {
    /// Iterated `h`-step mean `c(1−γ^h)/(1−γ) + γ^h x_t`.
    pub fn forecast_mean(&self, x_t: f64, h: usize) -> f64 {
        let gh = self.gamma.powi(h as i32);
        let geometric = if (1.0 - self.gamma).abs() < 1e-12 {
            h as f64
        } else {
            (1.0 - gh) / (1.0 - self.gamma)
        };
        self.constant * geometric + gh * x_t
    }

    /// `σ̆²/(1−γ²)`, infinite when `|γ| ≥ 1`.
    pub fn implied_long_run_variance(&self) -> f64 {
        if self.gamma.abs() < 1.0 {
            self.residual_var / (1.0 - self.gamma * self.gamma)
        } else {
            f64::INFINITY
        }
    }

    /// `n` simulated paths of length `h` from `x_t`, one derived stream per path.
    pub fn simulate_paths(&self, x_t: f64, h: usize, n: usize, seed: u64) -> Result<ForecastPaths> {
        if h == 0 || n == 0 {
            return Err(Error::param("AR(1) path simulation needs h > 0 and at least one path"));
        }
        let sd = self.residual_var.max(0.0).sqrt();
        let paths = (0..n)
            .map(|m| {
                let mut rng = derived_rng(seed, "ar1-path", m as u64);
                let mut prev = x_t;
                (0..h)
                    .map(|_| {
                        prev = self.constant + self.gamma * prev + sd * std_normal(&mut rng);
                        prev
                    })
                    .collect()
            })
            .collect();
        ForecastPaths::new(paths, 0)
    }
}

/// Mean forecasts of the first two principal components, each an
/// independent AR(1) with intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnsFit {
    pub level: Ar1Fit,
    pub slope: Ar1Fit,
    pub level_t: f64,
    pub slope_t: f64,
}

impl DnsFit {
    pub fn fit(pca: &PcaDecomposition) -> Result<Self> {
        if pca.components() < 2 {
            return Err(Error::param("dynamic Nelson-Siegel needs two components"));
        }
        let level = pca.factor(0);
        let slope = pca.factor(1);
        Ok(Self {
            level: fit_ols_ar1(&level, false)?,
            slope: fit_ols_ar1(&slope, false)?,
            level_t: level[level.len() - 1],
            slope_t: slope[slope.len() - 1],
        })
    }

    /// `(level, slope)` mean forecasts at each horizon.
    pub fn forecast(&self, horizons: &[usize]) -> Vec<(f64, f64)> {
        horizons
            .iter()
            .map(|&h| (self.level.forecast_mean(self.level_t, h), self.slope.forecast_mean(self.slope_t, h)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn month(i: usize) -> String {
        format!("{:04}-{:02}", 2000 + i / 12, i % 12 + 1)
    }

    fn panel(rows: usize, f: impl Fn(usize, usize) -> f64, mats: &[f64]) -> YieldPanel {
        YieldPanel::new(
            (0..rows).map(month).collect(),
            mats.to_vec(),
            DMatrix::from_fn(rows, mats.len(), f),
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let p = panel(30, |i, j| i as f64 * 0.1 + j as f64, &[1.0, 2.5, 10.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = YieldPanel::from_reader(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.dates(), p.dates());
        assert_eq!(back.maturities(), p.maturities());
        assert!((back.rates() - p.rates()).amax() < 1e-6);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let mut text = String::from("date,m1,m2\n");
        for i in 0..30 {
            if i == 4 {
                text.push_str(&format!("{},1.0\n", month(i)));
            } else {
                text.push_str(&format!("{},1.0,2.0\n", month(i)));
            }
        }
        let err = YieldPanel::from_reader(text.as_bytes(), "p.csv").unwrap_err();
        match err {
            Error::Data { line, .. } => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            YieldPanel::from_reader(text.as_bytes(), "p.csv").unwrap_err().exit_code(),
            2
        );
    }

    #[test]
    fn bad_inputs() {
        let bad_header = "date,x1\n2000-01,1\n";
        assert!(YieldPanel::from_reader(bad_header.as_bytes(), "p").is_err());
        let mut short = String::from("date,m1\n");
        for i in 0..10 {
            short.push_str(&format!("{},1\n", month(i)));
        }
        assert!(YieldPanel::from_reader(short.as_bytes(), "p").is_err());
        assert!(!valid_month("2000-13"));
        assert!(!valid_month("2000-1"));
        assert!(valid_month("1999-12"));
    }

    #[test]
    fn axis_aligned_panel() {
        // Columns with variances 4 and 1, uncorrelated by construction.
        let a = [2.0, -2.0, 2.0, -2.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let p = panel(24, |i, j| if j == 0 { a[i % 4] } else { b[i % 4] }, &[1.0, 2.0]);
        let d = pca(&p, 2).unwrap();
        assert_relative_eq!(d.explained[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(d.explained[1], 0.2, epsilon = 1e-12);
        assert_relative_eq!(d.loadings[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.loadings[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ar1_exact_recursions() {
        let mut x = vec![4.0];
        for _ in 0..10 {
            x.push(0.5 * x.last().unwrap());
        }
        let f = fit_ols_ar1(&x, true).unwrap();
        assert_relative_eq!(f.gamma, 0.5, epsilon = 1e-14);
        assert!(f.residual_var < 1e-25);
        let mut x = vec![0.0];
        for _ in 0..10 {
            x.push(1.0 + 0.5 * x.last().unwrap());
        }
        let f = fit_ols_ar1(&x, false).unwrap();
        assert_relative_eq!(f.constant, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.gamma, 0.5, epsilon = 1e-12);
        assert!(fit_ols_ar1(&[2.0, 2.0, 2.0, 2.0], false).is_err());
        assert!(fit_ols_ar1(&[0.0, 0.0, 0.0], true).is_err());
    }

    #[test]
    fn ar1_forecast_examples() {
        let f = Ar1Fit { constant: 2.0, gamma: 0.0, residual_var: 1.0, observations: 10 };
        assert_eq!(f.forecast_mean(5.0, 1), 2.0);
        assert_eq!(f.forecast_mean(5.0, 7), 2.0);
        let f = Ar1Fit { constant: 0.3, gamma: 0.9, residual_var: 1.0, observations: 10 };
        assert_relative_eq!(f.forecast_mean(5.0, 1), 0.3 + 0.9 * 5.0, epsilon = 1e-14);
        assert_relative_eq!(f.forecast_mean(5.0, 5000), 3.0, epsilon = 1e-9);
        let unit = Ar1Fit { constant: 0.1, gamma: 1.0, residual_var: 1.0, observations: 10 };
        assert_relative_eq!(unit.forecast_mean(1.0, 10), 2.0, epsilon = 1e-12);
        assert_eq!(unit.implied_long_run_variance(), f64::INFINITY);
    }

    #[test]
    fn reconstruction_properties() {
        let p = panel(40, |i, j| (i as f64 * 0.3 + j as f64).sin() + j as f64, &[1.0, 2.0, 3.0, 5.0]);
        let d = pca(&p, 4).unwrap();
        assert_eq!(d.reconstruct_curve(0.0, 0.0).unwrap(), d.mean.iter().copied().collect::<Vec<_>>());
        for i in [0, 17, 39] {
            let s: Vec<f64> = d.scores.row(i).iter().copied().collect();
            let r = d.reconstruct_scores(&s).unwrap();
            for j in 0..4 {
                assert_relative_eq!(r[j], p.rates()[(i, j)], epsilon = 1e-8);
            }
            let proj = d.project(&r);
            for k in 0..4 {
                assert_relative_eq!(proj[k], s[k], epsilon = 1e-8);
            }
        }
        let a = d.reconstruct_curve(0.7, -0.2).unwrap();
        let b = d.reconstruct_curve(-1.1, 0.5).unwrap();
        let ab = d.reconstruct_curve(-0.4, 0.3).unwrap();
        for j in 0..4 {
            assert_relative_eq!(ab[j], a[j] + b[j] - d.mean[j], epsilon = 1e-12);
        }
        assert!(pca(&p, 5).is_err());
        assert!(pca(&p, 0).is_err());
    }

    #[test]
    fn dns_forecasts_both_factors() {
        let p = panel(60, |i, j| 3.0 + (i as f64 * 0.1).sin() * (1.0 + 0.1 * j as f64) + 0.2 * (i as f64 * 0.37).cos() * j as f64, &[1.0, 2.0, 5.0, 10.0]);
        let d = pca(&p, 2).unwrap();
        let dns = DnsFit::fit(&d).unwrap();
        let f = dns.forecast(&[1, 12]);
        assert_relative_eq!(f[0].0, dns.level.constant + dns.level.gamma * dns.level_t, epsilon = 1e-12);
        assert_relative_eq!(f[1].1, dns.slope.forecast_mean(dns.slope_t, 12), epsilon = 1e-12);
    }
}
