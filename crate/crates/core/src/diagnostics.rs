//! Chain diagnostics: effective sample size by Geyer's initial monotone
//! sequence estimator and split-chain potential scale reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effective sample size of one scalar chain. `Ok(None)` for a constant chain.
pub fn effective_sample_size(chain: &[f64]) -> Result<Option<f64>> {
    let n = chain.len();
    if n < 4 {
        return Err(Error::param(format!("ESS needs at least 4 draws, got {n}")));
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 1e-300 * mean.abs().max(1.0)) {
        return Ok(None);
    }
    // Pair sums Γ_k = ρ_{2k} + ρ_{2k+1}, kept while positive and forced to
    // be non-increasing.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / (n as f64).log10().max(1.0));
    Ok(Some(n as f64 / tau))
}

/// Split-R̂: the chain is cut into two halves treated as separate chains.
/// `Ok(None)` when the within-half variance vanishes.
pub fn split_rhat(chain: &[f64]) -> Result<Option<f64>> {
    let n = chain.len() / 2;
    if n < 2 {
        return Err(Error::param(format!("split R-hat needs at least 4 draws, got {}", chain.len())));
    }
    let halves = [&chain[..n], &chain[chain.len() - n..]];
    let stats: Vec<(f64, f64)> = halves
        .iter()
        .map(|h| {
            let m = h.iter().sum::<f64>() / n as f64;
            let v = h.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (m, v)
        })
        .collect();
    let w = (stats[0].1 + stats[1].1) / 2.0;
    if !(w > 0.0) {
        return Ok(None);
    }
    let grand = (stats[0].0 + stats[1].0) / 2.0;
    let b = n as f64 * stats.iter().map(|(m, _)| (m - grand).powi(2)).sum::<f64>();
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Ok(Some((var_plus / w).sqrt()))
}

/// Diagnostics for one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub mean: f64,
    pub sd: f64,
    pub ess: Option<f64>,
    pub rhat: Option<f64>,
}

impl ParamDiagnostics {
    pub fn from_chain(chain: &[f64]) -> Result<Self> {
        let n = chain.len();
        if n < 4 {
            return Err(Error::param(format!("diagnostics need at least 4 retained draws, got {n}")));
        }
        let mean = chain.iter().sum::<f64>() / n as f64;
        let sd = (chain.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        Ok(Self {
            mean,
            sd,
            ess: effective_sample_size(chain)?,
            rhat: split_rhat(chain)?,
        })
    }
}
