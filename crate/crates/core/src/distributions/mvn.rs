use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{std_normal, BandedLdl, BandedSym, LN_SQRT_2PI};
use crate::error::{Error, Result};

/// Whether the matrix of an [`MvNormalSpec`] is the covariance or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Covariance,
    Precision,
}

#[derive(Debug, Clone)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    Banded(BandedSym),
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.nrows(),
            SymMatrix::Banded(b) => b.dim(),
        }
    }
}

/// Multivariate normal given by its mean and either covariance or precision.
#[derive(Debug, Clone)]
pub struct MvNormalSpec {
    pub mean: Vec<f64>,
    pub matrix: SymMatrix,
    pub kind: MatrixKind,
}

impl MvNormalSpec {
    pub fn new(mean: Vec<f64>, matrix: SymMatrix, kind: MatrixKind) -> Result<Self> {
        if let SymMatrix::Dense(m) = &matrix {
            if m.nrows() != m.ncols() {
                return Err(Error::param("mvn matrix must be square"));
            }
            if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(Error::param("mvn matrix must be symmetric"));
            }
        }
        if matrix.dim() != mean.len() {
            return Err(Error::param(format!(
                "mvn mean has length {} but matrix is {}x{}",
                mean.len(),
                matrix.dim(),
                matrix.dim()
            )));
        }
        Ok(Self { mean, matrix, kind })
    }

    /// Factorize once for repeated sampling and density evaluation.
    pub fn factorize(&self) -> Result<FactoredMvNormal> {
        let factor = match &self.matrix {
            SymMatrix::Banded(b) => Factor::Banded(b.ldl()?),
            SymMatrix::Dense(m) => {
                let chol = m.clone().cholesky().ok_or_else(|| first_bad_pivot(m))?;
                Factor::Dense(chol.l())
            }
        };
        Ok(FactoredMvNormal {
            mean: self.mean.clone(),
            kind: self.kind,
            factor,
        })
    }
}

/// Locate the failing pivot of a dense Cholesky for the error message.
fn first_bad_pivot(m: &DMatrix<f64>) -> Error {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Error::NotPositiveDefinite { pivot: j, value: d };
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Error::Numeric("dense Cholesky failed without a nonpositive pivot".into())
}

#[derive(Debug, Clone)]
enum Factor {
    /// Lower Cholesky factor `C` with `A = C Cᵀ`.
    Dense(DMatrix<f64>),
    Banded(BandedLdl),
}

/// A multivariate normal with its matrix already factorized.
#[derive(Debug, Clone)]
pub struct FactoredMvNormal {
    mean: Vec<f64>,
    kind: MatrixKind,
    factor: Factor,
}

impl FactoredMvNormal {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Deterministic map from standard normals `z` to a draw.
    ///
    /// Covariance form: `μ + C z`. Precision form: `μ + C^{-T} z`. The banded
    /// factor uses `C = L D^{1/2}`, so both storage paths give the same draw
    /// for the same `z`.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        let dev = match (&self.factor, self.kind) {
            (Factor::Banded(f), MatrixKind::Covariance) => f.mul_sqrt(z),
            (Factor::Banded(f), MatrixKind::Precision) => f.solve_sqrt_t(z),
            (Factor::Dense(c), MatrixKind::Covariance) => {
                (c * DVector::from_column_slice(z)).as_slice().to_vec()
            }
            (Factor::Dense(c), MatrixKind::Precision) => {
                let ct = c.transpose();
                let mut y = DVector::from_column_slice(z);
                ct.solve_upper_triangular_mut(&mut y);
                y.as_slice().to_vec()
            }
        };
        dev.iter().zip(&self.mean).map(|(d, m)| d + m).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| std_normal(rng)).collect();
        self.transform(&z)
    }

    /// `ln det` of the covariance.
    pub fn log_det_cov(&self) -> f64 {
        let ld = match &self.factor {
            Factor::Banded(f) => f.log_det(),
            Factor::Dense(c) => 2.0 * c.diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        };
        match self.kind {
            MatrixKind::Covariance => ld,
            MatrixKind::Precision => -ld,
        }
    }

    /// Exact log density, normalizing constant included.
    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::param(format!(
                "point has dimension {}, distribution has {}",
                x.len(),
                self.dim()
            )));
        }
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let maha = match (&self.factor, self.kind) {
            (Factor::Banded(f), MatrixKind::Covariance) => {
                let mut y = r.clone();
                f.forward(&mut y);
                y.iter().zip(f.pivots()).map(|(v, d)| v * v / d).sum()
            }
            (Factor::Banded(f), MatrixKind::Precision) => {
                // rᵀ L D Lᵀ r
                let y = f.mul_lt(&r);
                y.iter().zip(f.pivots()).map(|(v, d)| v * v * d).sum()
            }
            (Factor::Dense(c), MatrixKind::Covariance) => {
                let mut y = DVector::from_vec(r);
                c.solve_lower_triangular_mut(&mut y);
                y.norm_squared()
            }
            (Factor::Dense(c), MatrixKind::Precision) => {
                let y = c.transpose() * DVector::from_vec(r);
                y.norm_squared()
            }
        };
        let n = self.dim() as f64;
        Ok(-n * LN_SQRT_2PI - 0.5 * self.log_det_cov() - 0.5 * maha)
    }
}

pub fn sample_mv_normal<R: Rng + ?Sized>(spec: &MvNormalSpec, rng: &mut R) -> Result<Vec<f64>> {
    Ok(spec.factorize()?.sample(rng))
}

pub fn logpdf_mv_normal(spec: &MvNormalSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.mean.len() {
        return Err(Error::param(format!(
            "point has dimension {}, distribution has {}",
            x.len(),
            spec.mean.len()
        )));
    }
    spec.factorize()?.ln_pdf(x)
}
