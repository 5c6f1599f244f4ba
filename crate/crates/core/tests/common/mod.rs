#![allow(dead_code)]

use sparsereg::model::{sample_beta_star, BetaKind};
use sparsereg::{Dimensions, Instance, Matrix};

pub fn instance(n: usize, p: usize, k: usize, sigma2: f64, seed: u64) -> Instance {
    let dims = Dimensions::new(n, p, k, sigma2).unwrap();
    let b = sample_beta_star(p, k, BetaKind::Binary, 1.0, seed).unwrap();
    Instance::generate(dims, b, seed).unwrap()
}

/// Solves the normal equations `(AᵀA) b = Aᵀy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &Matrix, y: &[f64], cols: &[usize]) -> Vec<f64> {
    let m = cols.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in 0..x.rows() {
        for i in 0..m {
            let xi = x.get(r, cols[i]);
            for j in 0..m {
                a[i][j] += xi * x.get(r, cols[j]);
            }
            a[i][m] += xi * y[r];
        }
    }
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=m {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..m).map(|i| a[i][m] / a[i][i]).collect()
}

pub fn residual_sq(x: &Matrix, y: &[f64], cols: &[usize], coef: &[f64]) -> f64 {
    (0..x.rows())
        .map(|r| {
            let fit: f64 = cols.iter().zip(coef).map(|(&c, &b)| x.get(r, c) * b).sum();
            (y[r] - fit).powi(2)
        })
        .sum()
}
