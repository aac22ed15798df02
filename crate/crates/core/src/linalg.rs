//! Sparse symmetric storage, preconditioned conjugate gradients and a banded
//! Cholesky factorization for repeated solves on a fixed pattern.

use crate::error::{Error, Result};
use crate::par;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; columns are sorted per row.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.vals[k] * x[self.cols[k]];
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        par::fill(y, |i| self.row_dot(i, x));
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    /// `xᵀ M y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        par::sum_by(self.n, |i| x[i] * self.row_dot(i, y))
    }

    /// `self + diag(d)`.
    pub fn with_added_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    out.vals[k] += d[i];
                }
            }
        }
        out
    }

    /// The principal submatrix on `index` (ascending), in local numbering.
    pub fn restrict(&self, index: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in index.iter().enumerate() {
            local[i] = k;
        }
        let rows = index
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter(|&(c, _)| local[c] != usize::MAX)
                    .map(|(c, v)| (local[c], v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// Stops when `‖b − a x‖₂ ≤ tol·‖b‖₂`; exceeding `max_iter` is an error that
/// carries the residual reached.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    let b_norm = par::dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = par::dot(&r, &z);
    let mut res = 1.0;
    for it in 0..max_iter {
        a.apply_into(&p, &mut ap);
        let alpha = rz / par::dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = par::dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            // Recompute from scratch so the reported residual is the true one.
            let ax = a.apply(&x);
            let true_res = par::sum_by(n, |i| (b[i] - ax[i]).powi(2)).sqrt() / b_norm;
            if true_res <= tol {
                return Ok(CgOutcome {
                    x,
                    iterations: it + 1,
                    relative_residual: true_res,
                });
            }
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: res,
    })
}

/// `L Lᵀ` factorization of a symmetric banded matrix.
///
/// Row `i` of `L` is stored in `band[i*(bw+1) .. (i+1)*(bw+1)]`, column `j`
/// (with `i - bw ≤ j ≤ i`) at offset `j + bw - i`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = (0..n)
            .flat_map(|i| a.row(i).map(move |(c, _)| i.abs_diff(c)))
            .max()
            .unwrap_or(0);
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * w + j + bw - i] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = band[i * w + j + bw - i];
                for k in jlo..j {
                    s -= band[i * w + k + bw - i] * band[j * w + k + bw - j];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + j + bw - i] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + k + bw - i] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[k * w + i + bw - k] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        y
    }
}
