//! Dense brute-force reference computations. Everything here is built from
//! explicit matrices and textbook densities, independent of the banded
//! kernels in the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use btvc::conditionals::{
    alpha_full_conditional, beta_conditional, rho_conditional, sigma_sq_conditional, BtvcData,
};
use btvc::latent_cov::{build_latent_covariance, ArCovParams};
use btvc::prior::PriorConfig;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * var.ln() - (x - mean).powi(2) / (2.0 * var)
}

/// `ln Γ(x)` by Lanczos (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * LN_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn ln_inv_gamma(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Normal mass of `(lo, hi)` by composite Simpson on a ±14 sd window.
pub fn normal_mass(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let sd = var.sqrt();
    let a = lo.max(mean - 14.0 * sd);
    let b = hi.min(mean + 14.0 * sd);
    if b <= a {
        return 0.0;
    }
    let m = 20_000;
    let h = (b - a) / m as f64;
    let f = |x: f64| ln_normal(x, mean, var).exp();
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn ar_cov_dense(n: usize, rho: f64, tau_sq: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        tau_sq * rho.powi((i as i32 - j as i32).abs()) / (1.0 - rho * rho)
    })
}

/// Posterior mean and covariance of `α̃` by explicit dense inversion.
pub fn dense_alpha_posterior(
    x: &[f64],
    beta: f64,
    sigma_sq: f64,
    rho: f64,
    tau_sq: f64,
    h: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let t = x.len() - 1;
    let n = t + h;
    let prior_inv = ar_cov_dense(n, rho, tau_sq).try_inverse().unwrap();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..t {
        d[(i, i)] = 1.0 / sigma_sq;
    }
    let post_cov = (prior_inv + d).try_inverse().unwrap();
    let delta = DVector::from_fn(n, |i, _| if i < t { x[i + 1] - beta * x[i] } else { 0.0 });
    let mean = &post_cov * delta / sigma_sq;
    (mean, post_cov)
}

/// Dense evaluation of every factor of the joint conditional target.
pub fn dense_log_target(
    x: &[f64],
    alpha: &[f64],
    beta: f64,
    sigma_sq: f64,
    rho: f64,
    prior: &PriorConfig,
) -> f64 {
    let t = x.len() - 1;
    let v = prior.target_var;
    // τ² from the long-run variance equation, solved by bisection.
    let lrv = |tau: f64| {
        sigma_sq / (1.0 - beta * beta)
            + tau * (1.0 + rho * beta) / ((1.0 - rho * beta) * (1.0 - beta * beta) * (1.0 - rho * rho))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while lrv(hi) < v {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lrv(mid) < v {
            lo = mid
        } else {
            hi = mid
        }
    }
    let tau_sq = 0.5 * (lo + hi);

    let mut lik = 0.0;
    for j in 0..t {
        lik += ln_normal(x[j + 1], alpha[j] + beta * x[j], sigma_sq);
    }
    let n = alpha.len();
    let cov = ar_cov_dense(n, rho, tau_sq);
    let inv = cov.clone().try_inverse().unwrap();
    let a = DVector::from_column_slice(alpha);
    let latent = -0.5 * n as f64 * LN_2PI - 0.5 * cov.determinant().ln()
        - 0.5 * (a.transpose() * inv * &a)[(0, 0)];

    let rho_var = prior.sigma_rho.powi(2);
    let ln_rho = ln_normal(rho, prior.mu_rho, rho_var) - normal_mass(prior.mu_rho, rho_var, -1.0, 1.0).ln();
    let upper = ((v - sigma_sq) / v).sqrt();
    let beta_var = sigma_sq * prior.sigma_beta.powi(2);
    let ln_beta = ln_normal(beta, prior.mu_beta, beta_var)
        - normal_mass(prior.mu_beta, beta_var, -1.0, upper).ln();
    let ln_sigma = ln_inv_gamma(sigma_sq, prior.a, prior.b);
    lik + latent + ln_rho + ln_beta + ln_sigma
}

/// Max relative deviation between two log-density grids after normalizing
/// each to unit sum.
pub fn grid_deviation(ln_a: &[f64], ln_b: &[f64]) -> f64 {
    let norm = |v: &[f64]| {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
        v.iter().map(|x| (x - m).exp() / s).collect::<Vec<_>>()
    };
    let (a, b) = (norm(ln_a), norm(ln_b));
    a.iter().zip(&b).map(|(p, q)| (p / q - 1.0).abs()).fold(0.0, f64::max)
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// A random small problem instance: data, a latent path and parameters.
pub struct Instance {
    pub data: BtvcData,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub sigma_sq: f64,
    pub rho: f64,
    pub tau_sq: f64,
    pub h: usize,
    pub prior: PriorConfig,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let t = rng.random_range(3..=8);
    let h = rng.random_range(0..=3);
    let mut x = vec![rng.random_range(-2.0..2.0)];
    for _ in 0..t {
        let prev = *x.last().unwrap();
        x.push(0.7 * prev + rng.random_range(-1.0..1.0));
    }
    let alpha: Vec<f64> = (0..t + h).map(|_| rng.random_range(-0.8..0.8)).collect();
    let prior = PriorConfig {
        mu_beta: rng.random_range(0.2..0.9),
        sigma_beta: rng.random_range(0.2..1.0),
        mu_rho: rng.random_range(-0.5..0.9),
        sigma_rho: rng.random_range(0.1..0.6),
        a: rng.random_range(0.5..3.0),
        b: rng.random_range(0.5..3.0),
        target_var: rng.random_range(20.0..60.0),
        theta: 0.0,
    };
    Instance {
        data: BtvcData::new(x).unwrap(),
        alpha,
        beta: rng.random_range(0.1..0.9),
        sigma_sq: rng.random_range(0.3..2.0),
        rho: rng.random_range(-0.8..0.9),
        tau_sq: rng.random_range(0.2..2.0),
        h,
        prior,
    }
}

/// Standard error of a chain mean by non-overlapping batch means.
pub fn batch_means_se(chain: &[f64], batches: usize) -> f64 {
    let len = chain.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| chain[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

/// `ln N(y; 0, S)` for a small dense `S` via a hand-rolled Cholesky.
pub fn ln_mvn_zero_mean(y: &[f64], s: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = s[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    let mut logdet = 0.0;
    for i in 0..n {
        let mut acc = y[i];
        for k in 0..i {
            acc -= l[i][k] * z[k];
        }
        z[i] = acc / l[i][i];
        logdet += 2.0 * l[i][i].ln();
    }
    -0.5 * n as f64 * LN_2PI - 0.5 * logdet - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

/// Posterior means of `(ρ, β, σ²)` with the latent path integrated out,
/// by midpoint quadrature over the admissible box.
pub fn grid_posterior_means(x: &[f64], prior: &PriorConfig, m: usize) -> [f64; 3] {
    let t = x.len() - 1;
    let v = prior.target_var;
    let rho_mass = normal_mass(prior.mu_rho, prior.sigma_rho.powi(2), -1.0, 1.0);
    let mut logs = Vec::with_capacity(m * m * m);
    let mut pts = Vec::with_capacity(m * m * m);
    for i in 0..m {
        let sigma_sq = v * (i as f64 + 0.5) / m as f64;
        let upper = ((v - sigma_sq) / v).sqrt();
        let beta_var = sigma_sq * prior.sigma_beta.powi(2);
        let beta_mass = normal_mass(prior.mu_beta, beta_var, -1.0, upper);
        for j in 0..m {
            // β on (−upper, upper): the long-run constraint needs τ² > 0.
            let beta = -upper + 2.0 * upper * (j as f64 + 0.5) / m as f64;
            let jac = 2.0 * upper;
            for k in 0..m {
                let rho = -1.0 + 2.0 * (k as f64 + 0.5) / m as f64;
                let tau_sq = (v - sigma_sq / (1.0 - beta * beta)) * (1.0 - rho * beta) * (1.0 - beta * beta)
                    * (1.0 - rho * rho)
                    / (1.0 + rho * beta);
                let s: Vec<Vec<f64>> = (0..t)
                    .map(|a| {
                        (0..t)
                            .map(|b| {
                                let c = tau_sq * rho.powi((a as i32 - b as i32).abs()) / (1.0 - rho * rho);
                                if a == b { c + sigma_sq } else { c }
                            })
                            .collect()
                    })
                    .collect();
                let y: Vec<f64> = (0..t).map(|a| x[a + 1] - beta * x[a]).collect();
                let l = ln_mvn_zero_mean(&y, &s)
                    + ln_normal(rho, prior.mu_rho, prior.sigma_rho.powi(2))
                    - rho_mass.ln()
                    + ln_normal(beta, prior.mu_beta, beta_var)
                    - beta_mass.ln()
                    + ln_inv_gamma(sigma_sq, prior.a, prior.b)
                    + jac.ln();
                logs.push(l);
                pts.push([rho, beta, sigma_sq]);
            }
        }
    }
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = [0.0; 3];
    let mut z = 0.0;
    for (l, p) in logs.iter().zip(&pts) {
        let w = (l - mx).exp();
        z += w;
        for d in 0..3 {
            acc[d] += w * p[d];
        }
    }
    acc.map(|a| a / z)
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix given as rows.
/// Returns eigenpairs sorted by descending eigenvalue; vectors are columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = idx.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| idx.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Explicit sample covariance (`T − 1` denominator) of row-major data.
pub fn sample_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t = rows.len();
    let m = rows[0].len();
    let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t as f64).collect();
    let cov = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (t as f64 - 1.0))
                .collect()
        })
        .collect();
    (mean, cov)
}

/// Largest deviation of the library PCA from the Jacobi oracle, loadings and
/// scores compared up to column sign.
pub fn pca_oracle_deviation(rows: &[Vec<f64>], pca: &btvc::factors::PcaDecomposition) -> f64 {
    let (mean, cov) = sample_covariance(rows);
    let (_, vecs) = jacobi_eigen(&cov);
    let mut worst: f64 = 0.0;
    for k in 0..pca.components() {
        let col: Vec<f64> = (0..mean.len()).map(|j| vecs[j][k]).collect();
        let sign = if col.iter().zip(pca.loadings.column(k).iter()).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for j in 0..mean.len() {
            worst = worst.max((sign * col[j] - pca.loadings[(j, k)]).abs());
        }
        for (i, r) in rows.iter().enumerate() {
            let s: f64 = r.iter().zip(&mean).zip(&col).map(|((x, m), v)| (x - m) * v).sum::<f64>() * sign;
            worst = worst.max((s - pca.scores[(i, k)]).abs());
        }
    }
    worst
}

pub fn month_label(i: usize) -> String {
    format!("{:04}-{:02}", 1990 + i / 12, i % 12 + 1)
}

/// Largest deviations of the banded latent posterior from dense inversion,
/// relative to the largest dense entry: `(mean, covariance)`.
pub fn alpha_posterior_deviation(inst: &Instance) -> (f64, f64) {
    let n = inst.data.t() + inst.h;
    let cov = build_latent_covariance(ArCovParams::new(inst.rho, inst.tau_sq).unwrap(), n).unwrap();
    let post = alpha_full_conditional(&inst.data, inst.beta, inst.sigma_sq, &cov).unwrap();
    let (mean, dense_cov) =
        dense_alpha_posterior(inst.data.values(), inst.beta, inst.sigma_sq, inst.rho, inst.tau_sq, inst.h);
    let banded_cov = post.factor().inverse_dense();
    let mean_dev = (0..n).map(|i| (post.mean()[i] - mean[i]).abs()).fold(0.0, f64::max) / mean.amax().max(1.0);
    let cov_dev = (banded_cov - &dense_cov).amax() / dense_cov.amax();
    (mean_dev, cov_dev)
}

pub fn rho_grid_deviation(inst: &Instance) -> f64 {
    let prior = inst.prior.rho_prior().unwrap();
    let c = rho_conditional(&inst.alpha, inst.tau_sq, &prior).unwrap();
    let sd = c.variance.sqrt();
    let g = grid((c.mean - 4.0 * sd).max(-1.0), (c.mean + 4.0 * sd).min(1.0), 200);
    let analytic: Vec<f64> = g.iter().map(|&r| c.ln_pdf(r)).collect();
    let brute: Vec<f64> = g
        .iter()
        .map(|&r| {
            let mut l = ln_normal(r, inst.prior.mu_rho, inst.prior.sigma_rho.powi(2));
            for w in inst.alpha.windows(2) {
                l += ln_normal(w[1], r * w[0], inst.tau_sq);
            }
            l
        })
        .collect();
    grid_deviation(&analytic, &brute)
}

pub fn beta_grid_deviation(inst: &Instance) -> f64 {
    let x = inst.data.values();
    let c = beta_conditional(&inst.data, &inst.alpha, inst.sigma_sq, &inst.prior).unwrap();
    let sd = c.variance.sqrt();
    let g = grid((c.mean - 4.0 * sd).max(c.lower), (c.mean + 4.0 * sd).min(c.upper), 200);
    let analytic: Vec<f64> = g.iter().map(|&b| c.ln_pdf(b)).collect();
    let brute: Vec<f64> = g
        .iter()
        .map(|&b| {
            let mut l = ln_normal(b, inst.prior.mu_beta, inst.sigma_sq * inst.prior.sigma_beta.powi(2));
            for j in 0..inst.data.t() {
                l += ln_normal(x[j + 1], inst.alpha[j] + b * x[j], inst.sigma_sq);
            }
            l
        })
        .collect();
    grid_deviation(&analytic, &brute)
}

/// The inverse-gamma form omits the σ²-dependent truncation mass of the β
/// prior, so the brute-force side uses the untruncated normal kernel.
pub fn sigma_sq_grid_deviation(inst: &Instance) -> f64 {
    let x = inst.data.values();
    let c = sigma_sq_conditional(&inst.data, &inst.alpha, inst.beta, &inst.prior).unwrap();
    let mean = c.mean().unwrap();
    let g = grid(0.1 * mean, 4.0 * mean, 200);
    let analytic: Vec<f64> = g.iter().map(|&s| c.ln_pdf(s)).collect();
    let brute: Vec<f64> = g
        .iter()
        .map(|&s| {
            let mut l = ln_inv_gamma(s, inst.prior.a, inst.prior.b)
                + ln_normal(inst.beta, inst.prior.mu_beta, s * inst.prior.sigma_beta.powi(2));
            for j in 0..inst.data.t() {
                l += ln_normal(x[j + 1], inst.alpha[j] + inst.beta * x[j], s);
            }
            l
        })
        .collect();
    grid_deviation(&analytic, &brute)
}
