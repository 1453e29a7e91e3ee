use rand::Rng;

use super::{normal_ln_pdf, std_normal_cdf, std_normal_quantile, std_normal_sf};
use crate::error::{Error, Result};

/// Below this normal mass inside the interval the inverse-CDF route loses
/// precision and the tail rejection sampler takes over.
const MIN_INVERSION_MASS: f64 = 1e-10;

/// Normal distribution with `mean` and `variance` restricted to `(lower, upper)`.
/// Either bound may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormalParams {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncNormalParams {
    pub fn new(mean: f64, variance: f64, lower: f64, upper: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::param(format!("truncated normal mean must be finite, got {mean}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::param(format!(
                "truncated normal variance must be positive, got {variance}"
            )));
        }
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::param(format!(
                "truncation bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self {
            mean,
            variance,
            lower,
            upper,
        })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn standardized(&self) -> (f64, f64) {
        let s = self.sd();
        ((self.lower - self.mean) / s, (self.upper - self.mean) / s)
    }

    /// Normal probability mass inside the interval.
    pub fn mass(&self) -> f64 {
        let (a, b) = self.standardized();
        if a >= 0.0 {
            std_normal_sf(a) - std_normal_sf(b)
        } else if b <= 0.0 {
            std_normal_cdf(b) - std_normal_cdf(a)
        } else {
            1.0 - std_normal_cdf(a) - std_normal_sf(b)
        }
    }

    /// Log of the normal mass inside the interval, accurate deep in the tails.
    pub fn ln_mass(&self) -> f64 {
        let m = self.mass();
        if m > 0.0 {
            return m.ln();
        }
        // Mass underflowed: Mills-ratio asymptote at the bound nearest the mean.
        let (a, b) = self.standardized();
        let z = if a > 0.0 { a } else { -b };
        -0.5 * z * z - z.ln() - super::LN_SQRT_2PI
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        normal_ln_pdf(x, self.mean, self.variance) - self.ln_mass()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

/// Draw from a truncated normal. The result lies strictly inside the bounds.
pub fn sample_trunc_normal<R: Rng + ?Sized>(p: &TruncNormalParams, rng: &mut R) -> f64 {
    let (a, b) = p.standardized();
    let s = p.sd();
    let use_rejection = p.mass() < MIN_INVERSION_MASS;
    loop {
        let z = if use_rejection {
            sample_std_rejection(a, b, rng)
        } else {
            sample_std_inversion(a, b, rng)
        };
        let x = p.mean + s * z;
        if p.contains(x) {
            return x;
        }
    }
}

/// Inverse-CDF draw of a standard normal restricted to `(a, b)`; works in
/// whichever tail keeps the probabilities away from 1.
fn sample_std_inversion<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if a >= 0.0 {
        let (qa, qb) = (std_normal_sf(a), std_normal_sf(b));
        -std_normal_quantile(qb + u * (qa - qb))
    } else {
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        std_normal_quantile(pa + u * (pb - pa))
    }
}

/// Rejection sampling for intervals with negligible normal mass.
fn sample_std_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return -sample_std_rejection(-b, -a, rng);
    }
    if a < 0.0 {
        // Narrow interval around zero: uniform proposal.
        return uniform_proposal(a, b, 0.0, rng);
    }
    if b.is_finite() && (b - a) * (b + a) <= 2.0 {
        return uniform_proposal(a, b, a, rng);
    }
    // Translated exponential proposal with the optimal rate.
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = -(1.0 - rng.random::<f64>()).ln() / lambda;
        let z = a + e;
        if z >= b {
            continue;
        }
        let u: f64 = rng.random();
        if u.ln() <= -0.5 * (z - lambda) * (z - lambda) {
            return z;
        }
    }
}

/// Uniform proposal on `(a, b)` accepted with `exp((m² − z²)/2)`, where `m`
/// is the point of the interval nearest zero.
fn uniform_proposal<R: Rng + ?Sized>(a: f64, b: f64, m: f64, rng: &mut R) -> f64 {
    loop {
        let z = a + (b - a) * rng.random::<f64>();
        let u: f64 = rng.random();
        if u.ln() <= 0.5 * (m * m - z * z) {
            return z;
        }
    }
}
