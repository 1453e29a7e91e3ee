//! Symmetric banded matrices and their root-free `L D Lᵀ` factorization.
//!
//! Storage is by diagonals: `bands[k][j]` holds entry `(j + k, j)` of the
//! lower triangle, so `bands[0]` is the main diagonal and `bands[w]` the
//! outermost stored sub-diagonal. Everything outside the band is zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric matrix with bandwidth `w` (entries with `|i - j| > w` are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSym {
    /// Zero matrix of size `n` and bandwidth `w` (clamped to `n - 1`).
    pub fn zeros(n: usize, w: usize) -> Self {
        let w = w.min(n.saturating_sub(1));
        let bands = (0..=w).map(|k| vec![0.0; n - k]).collect();
        Self { n, bands }
    }

    /// Tridiagonal matrix from its diagonal and first sub-diagonal.
    pub fn tridiagonal(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::param("tridiagonal matrix must be non-empty"));
        }
        if off.len() + 1 != n {
            return Err(Error::param(format!(
                "off-diagonal has length {}, expected {}",
                off.len(),
                n - 1
            )));
        }
        let bands = if n == 1 { vec![diag] } else { vec![diag, off] };
        Ok(Self { n, bands })
    }

    /// Extract the band of a dense symmetric matrix. Fails if any entry
    /// outside the band is nonzero.
    pub fn from_dense(m: &DMatrix<f64>, w: usize) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::param("banded matrix must be square"));
        }
        let mut out = Self::zeros(n, w);
        for i in 0..n {
            for j in 0..=i {
                let v = m[(i, j)];
                if i - j <= out.bandwidth() {
                    out.bands[i - j][j] = v;
                } else if v != 0.0 {
                    return Err(Error::param(format!(
                        "entry ({i}, {j}) = {v} lies outside bandwidth {w}"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bandwidth() {
            0.0
        } else {
            self.bands[k][lo]
        }
    }

    /// Add `v` to diagonal entry `i`.
    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.bands[0][i] += v;
    }

    pub fn diag(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(d, xi)| d * xi).collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (j, &a) in band.iter().enumerate() {
                y[j + k] += a * x[j];
                y[j] += a * x[j + k];
            }
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc: f64 = self.bands[0].iter().zip(x).map(|(d, xi)| d * xi * xi).sum();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            let off: f64 = band.iter().enumerate().map(|(j, a)| a * x[j] * x[j + k]).sum();
            acc += 2.0 * off;
        }
        acc
    }

    /// Root-free `L D Lᵀ` factorization in `O(n w²)`.
    pub fn ldl(&self) -> Result<BandedLdl> {
        let n = self.n;
        let w = self.bandwidth();
        // l[k][j] = L(j + k, j), unit diagonal implicit.
        let mut l: Vec<Vec<f64>> = (0..=w).map(|k| vec![0.0; n - k]).collect();
        let mut d = vec![0.0; n];
        for j in 0..n {
            let start = j.saturating_sub(w);
            let mut dj = self.bands[0][j];
            for k in start..j {
                let ljk = l[j - k][k];
                dj -= ljk * ljk * d[k];
            }
            if !(dj > 0.0) || !dj.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: dj });
            }
            d[j] = dj;
            let last = (j + w).min(n - 1);
            for i in (j + 1)..=last {
                let mut v = self.bands[i - j][j];
                for k in i.saturating_sub(w)..j {
                    v -= l[i - k][k] * l[j - k][k] * d[k];
                }
                l[i - j][j] = v / dj;
            }
        }
        Ok(BandedLdl { n, w, l, d })
    }
}

/// Factor `A = L D Lᵀ` of a banded SPD matrix.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    w: usize,
    l: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pivots of `D`.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// `ln det A = Σ ln d_j`.
    pub fn log_det(&self) -> f64 {
        self.d.iter().map(|d| d.ln()).sum()
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut v = b[i];
            for k in i.saturating_sub(self.w)..i {
                v -= self.l[i - k][k] * b[k];
            }
            b[i] = v;
        }
    }

    /// Solve `Lᵀ x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut v = y[i];
            let last = (i + self.w).min(self.n - 1);
            for k in (i + 1)..=last {
                v -= self.l[k - i][i] * y[k];
            }
            y[i] = v;
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        self.backward(&mut x);
        x
    }

    /// `Lᵀ x`.
    pub fn mul_lt(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let last = (j + self.w).min(self.n - 1);
                x[j] + ((j + 1)..=last).map(|i| self.l[i - j][j] * x[i]).sum::<f64>()
            })
            .collect()
    }

    /// `L D^{1/2} z`: maps standard normals to `N(0, A)`.
    pub fn mul_sqrt(&self, z: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = z.iter().zip(&self.d).map(|(zi, di)| zi * di.sqrt()).collect();
        let mut out = s.clone();
        for i in 0..self.n {
            for k in i.saturating_sub(self.w)..i {
                out[i] += self.l[i - k][k] * s[k];
            }
        }
        out
    }

    /// `L^{-T} D^{-1/2} z`: maps standard normals to `N(0, A⁻¹)`.
    pub fn solve_sqrt_t(&self, z: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = z.iter().zip(&self.d).map(|(zi, di)| zi / di.sqrt()).collect();
        self.backward(&mut y);
        y
    }

    /// Dense `A⁻¹`, column by column. Test and diagnostics use only.
    pub fn inverse_dense(&self) -> DMatrix<f64> {
        let mut inv = DMatrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}
