//! Seeded samplers and log densities for the distributions used by the
//! priors and full conditionals: truncated normal, inverse gamma and
//! multivariate normal (dense or banded, covariance or precision form).

mod banded;
mod mvn;
mod trunc_normal;

pub use banded::{BandedLdl, BandedSym};
pub use mvn::{logpdf_mv_normal, sample_mv_normal, FactoredMvNormal, MatrixKind, MvNormalSpec, SymMatrix};
pub use trunc_normal::{sample_trunc_normal, TruncNormalParams};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate for large `z`.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Log density of `N(mean, variance)` at `x`.
pub fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -LN_SQRT_2PI - 0.5 * variance.ln() - 0.5 * r * r / variance
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Inverse gamma with shape `a` and scale `b`: density ∝ x^{-(a+1)} e^{-b/x}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!(
                "inverse gamma needs positive finite shape and scale, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    /// Mean `b / (a - 1)`, defined for `a > 1`.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }
}

/// Draw from an inverse gamma as the reciprocal of a gamma draw.
pub fn sample_inv_gamma<R: Rng + ?Sized>(p: &InvGammaParams, rng: &mut R) -> Result<f64> {
    let gamma = Gamma::new(p.shape, 1.0 / p.scale)
        .map_err(|e| Error::param(format!("inverse gamma: {e}")))?;
    loop {
        let g: f64 = gamma.sample(rng);
        // A gamma draw can underflow to zero for tiny shapes; redraw.
        if g > 0.0 {
            let x = 1.0 / g;
            if x.is_finite() {
                return Ok(x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use statrs::function::gamma::gamma_ur;

    #[test]
    fn inv_gamma_moments() {
        let p = InvGammaParams::new(3.0, 4.0).unwrap();
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_inv_gamma(&p, &mut rng).unwrap()).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // b/(a-1) = 2, b²/((a-1)²(a-2)) = 4
        assert!((mean - 2.0).abs() / 2.0 < 0.02, "mean {mean}");
        assert!((var - 4.0).abs() / 4.0 < 0.10, "var {var}");
    }

    #[test]
    fn inv_gamma_ks() {
        // CDF of IG(a, b) at x is Q(a, b/x), the regularized upper gamma.
        let p = InvGammaParams::new(2.5, 1.5).unwrap();
        let mut rng = rng_from_seed(12);
        let n = 10_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_inv_gamma(&p, &mut rng).unwrap()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = gamma_ur(p.shape, p.scale / x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn inv_gamma_rejects_bad_params() {
        assert!(InvGammaParams::new(0.0, 1.0).is_err());
        assert!(InvGammaParams::new(1.0, -1.0).is_err());
        assert!(InvGammaParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn inv_gamma_ln_pdf_integrates_to_one() {
        let p = InvGammaParams::new(2.0, 3.0).unwrap();
        let (lo, hi, m) = (1e-4, 400.0, 400_000);
        let h = (hi - lo) / m as f64;
        let total: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * p.ln_pdf(lo + i as f64 * h).exp()
            })
            .sum::<f64>()
            * h;
        // Mass beyond 400 is ≈ b²/(2·400²) ≈ 3e-5.
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn normal_quantile_round_trips() {
        for &z in &[-8.0, -3.0, -0.5, 0.0, 0.7, 2.5] {
            let p = std_normal_cdf(z);
            assert!((std_normal_quantile(p) - z).abs() < 1e-9, "z={z}");
        }
        // Upper tail goes through the survival function.
        for &z in &[3.0, 6.0, 20.0] {
            assert!((-std_normal_quantile(std_normal_sf(z)) - z).abs() < 1e-9, "z={z}");
        }
        assert!((std_normal_sf(5.0) - std_normal_cdf(-5.0)).abs() < 1e-20);
    }
}
