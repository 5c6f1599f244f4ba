//! Dense kernels: a row-major matrix, small least-squares solves and
//! symmetric eigenvalues.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!("{} values for a {rows}x{cols} matrix", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// `scale` times the `size`x`size` identity.
    pub fn scaled_identity(size: usize, scale: f64) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.data[i * size + i] = scale;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Column-major copy: column `j` occupies `[j*rows, (j+1)*rows)`.
    pub fn to_column_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            let row = self.row(r);
            for (c, &v) in row.iter().enumerate() {
                out[c * self.rows + r] = v;
            }
        }
        out
    }

    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, &v) in out.iter_mut().zip(self.row(r)) {
                *acc += v * v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sq(&self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `X v` for dense `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `X v` touching only the listed coordinates of `v`.
    pub fn matvec_sparse(&self, idx: &[usize], vals: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                idx.iter().zip(vals).map(|(&j, &v)| row[j] * v).sum()
            })
            .collect()
    }

    /// `Xᵀ v`, accumulated row by row.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &coef) in v.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            for (acc, &x) in out.iter_mut().zip(self.row(r)) {
                *acc += coef * x;
            }
        }
        out
    }

    /// `XᵀX / scale` (p x p, row-major).
    pub fn gram(&self, scale: f64) -> Vec<f64> {
        let p = self.cols;
        let mut g = vec![0.0; p * p];
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                let gi = &mut g[i * p..(i + 1) * p];
                for j in i..p {
                    gi[j] += xi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in i..p {
                let v = g[i * p + j] / scale;
                g[i * p + j] = v;
                g[j * p + i] = v;
            }
        }
        g
    }

    /// Copy with column `extra` appended.
    pub fn with_column(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.rows {
            return dim_err(format!("appended column has {} rows, expected {}", extra.len(), self.rows));
        }
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.push(extra[r]);
        }
        Ok(Self { rows: self.rows, cols, data })
    }

    /// Copy keeping only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Self { rows: self.rows, cols: cols.len(), data }
    }

    /// Same matrix with columns permuted: new column `c` is old column `perm[c]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        self.select_columns(perm)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least squares of `y` on the columns `support` of `x`.
///
/// Householder QR when the restricted design has full column rank; otherwise
/// the minimum-norm solution from the SVD pseudo-inverse. Returns the
/// coefficients aligned with `support` and `‖y - X_S b‖₂` recomputed from the
/// coefficients.
pub fn least_squares_on_support(x: &Matrix, y: &[f64], support: &[usize]) -> (Vec<f64>, f64) {
    let n = x.rows();
    let s = support.len();
    if s == 0 {
        return (Vec::new(), norm(y));
    }
    let a = DMatrix::from_fn(n, s, |r, c| x.get(r, support[c]));
    let b = DVector::from_column_slice(y);
    let coef = solve_full_rank(&a, &b).unwrap_or_else(|| min_norm_solve(&a, &b));
    let fitted = &a * &coef;
    let resid: f64 = b.iter().zip(fitted.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
    (coef.iter().copied().collect(), resid.sqrt())
}

fn solve_full_rank(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * 16.0;
    if scale == 0.0 || (0..r.ncols()).any(|i| r[(i, i)].abs() <= tol) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Eigenvalues of the symmetric `m`x`m` row-major matrix `a`, ascending.
///
/// Householder reduction to tridiagonal form followed by the implicit QL
/// iteration with Wilkinson shifts. `a` is overwritten.
pub fn symmetric_eigenvalues(a: &mut [f64], m: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * m);
    let mut d = vec![0.0; m];
    let mut e = vec![0.0; m];
    tridiagonalize(a, m, &mut d, &mut e);
    tridiagonal_ql(&mut d, &mut e);
    d.sort_by(|x, y| x.total_cmp(y));
    d
}

fn tridiagonalize(a: &mut [f64], m: usize, d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * m + j;
    for i in (1..m).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[at(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[at(i, l)];
            } else {
                for k in 0..=l {
                    a[at(i, k)] /= scale;
                    h += a[at(i, k)] * a[at(i, k)];
                }
                let f = a[at(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[at(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[at(j, k)] * a[at(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[at(k, j)] * a[at(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[at(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[at(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[at(j, k)] -= f * e[k] + g * a[at(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[at(i, l)];
        }
        d[i] = h;
    }
    for i in 0..m {
        d[i] = a[at(i, i)];
    }
    // shift so that e[i] couples d[i] and d[i+1]
    for i in 1..m {
        e[i - 1] = e[i];
    }
    if m > 0 {
        e[m - 1] = 0.0;
    }
}

fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) {
    let m = d.len();
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
}
