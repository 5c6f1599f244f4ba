//! Deviating-local-minimum triplets.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Result};
use crate::linalg::{norm_sq, Matrix};
use crate::model::SparseVector;

/// Vectors `a, b, c` carried by pairwise disjoint index sets `S₁, S₂, S₃`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlmTriplet {
    pub a: SparseVector,
    pub b: SparseVector,
    pub c: SparseVector,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s3: Vec<usize>,
    pub alpha: f64,
    /// Sparsity scale: `|S₁| + |S₂| + |S₃| ≤ 3k`.
    pub k: usize,
}

impl DlmTriplet {
    pub fn validate(&self, p: usize) -> Result<()> {
        let sets = [&self.s1, &self.s2, &self.s3];
        for (v, s) in [&self.a, &self.b, &self.c].into_iter().zip(sets) {
            if v.len() != p {
                return dim_err(format!("triplet vector has length {}, X has {p} columns", v.len()));
            }
            if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) || s.iter().any(|&i| i >= p) {
                return param_err("index sets must be nonempty, strictly increasing and inside 0..p");
            }
            if v.support().iter().any(|i| s.binary_search(i).is_err()) {
                return param_err("vector support escapes its index set");
            }
        }
        let mut all: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return param_err("index sets must be pairwise disjoint");
        }
        if self.s1.len() != self.s2.len() {
            return param_err("|S1| must equal |S2|");
        }
        if all.len() > 3 * self.k {
            return param_err(format!("|S1|+|S2|+|S3| = {} exceeds 3k = {}", all.len(), 3 * self.k));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return param_err(format!("alpha = {} must lie in (0,1)", self.alpha));
        }
        Ok(())
    }

    fn slack(&self, n: usize) -> f64 {
        let a2 = self.a.l2_norm().powi(2);
        let b2 = self.b.l2_norm().powi(2);
        self.alpha * (a2 / self.s1.len() as f64 + b2 / self.s2.len() as f64) * n as f64
    }
}

/// Whether removing any one coordinate of `a` on `S₁` and any one of `b` on
/// `S₂` lowers `‖Xa + Xb + Xc‖₂²` by at most the `α` slack.
pub fn dlm_check(x: &Matrix, t: &DlmTriplet) -> Result<bool> {
    t.validate(x.cols())?;
    let n = x.rows();
    let total: Vec<f64> = [&t.a, &t.b, &t.c]
        .iter()
        .map(|v| v.apply(x))
        .fold(vec![0.0; n], |acc, u| acc.iter().zip(&u).map(|(p, q)| p + q).collect());
    let rhs = norm_sq(&total) - t.slack(n);
    let mut reduced = vec![0.0; n];
    for &i in &t.s1 {
        let ai = t.a.get(i);
        for &j in &t.s2 {
            let bj = t.b.get(j);
            for (r, (row, &u)) in reduced.iter_mut().zip((0..n).zip(&total)) {
                *r = u - ai * x.get(row, i) - bj * x.get(row, j);
            }
            if norm_sq(&reduced) < rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `‖X(a+b)‖² + 2(Xc)ᵀX(a+b) ≤ (α + 4δ)(‖a‖² + ‖b‖²) n`.
pub fn dlm_aggregate_bound(x: &Matrix, t: &DlmTriplet, delta_3k: f64) -> Result<bool> {
    t.validate(x.cols())?;
    let n = x.rows() as f64;
    let xa = t.a.apply(x);
    let xb = t.b.apply(x);
    let xc = t.c.apply(x);
    let ab: Vec<f64> = xa.iter().zip(&xb).map(|(u, v)| u + v).collect();
    let lhs = norm_sq(&ab) + 2.0 * crate::linalg::dot(&xc, &ab);
    let rhs = (t.alpha + 4.0 * delta_3k) * (t.a.l2_norm().powi(2) + t.b.l2_norm().powi(2)) * n;
    Ok(lhs <= rhs)
}

/// `[X | W/σ]`: the design with the scaled noise appended as column `p`.
pub fn augment_with_noise(x: &Matrix, w: &[f64], sigma: f64) -> Result<Matrix> {
    if !(sigma > 0.0) {
        return param_err("augmentation needs sigma > 0");
    }
    let col: Vec<f64> = w.iter().map(|v| v / sigma).collect();
    x.with_column(&col)
}
