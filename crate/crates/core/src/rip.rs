//! Restricted isometry constants, their consequences, and quadratic-form
//! concentration probes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, check_budget, par_fold};
use crate::error::{dim_err, param_err, Result};
use crate::landscape::SearchMode;
use crate::linalg::{dot, norm, norm_sq, symmetric_eigenvalues, Matrix};
use crate::model::SparseVector;
use crate::rng::{self, streams, Normal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub k: usize,
    /// `max_S max(λ_max − 1, 1 − λ_min)` of `X_SᵀX_S / n`.
    pub delta: f64,
    pub exact: bool,
    pub supports_checked: u128,
    pub worst_support: Vec<usize>,
}

fn deviation(sub: &mut [f64], k: usize) -> f64 {
    let ev = symmetric_eigenvalues(sub, k);
    (ev[k - 1] - 1.0).max(1.0 - ev[0])
}

fn keep_worse(acc: &mut (f64, Vec<usize>), d: f64, s: &[usize]) {
    if d > acc.0 || (d == acc.0 && s < acc.1.as_slice()) {
        *acc = (d, s.to_vec());
    }
}

/// Exact mode scans every size-`k` support (refusing above `budget`); sampled
/// mode scans `budget` random supports and returns a lower bound.
pub fn rip_constant(x: &Matrix, k: usize, mode: SearchMode, budget: u128, seed: u64) -> Result<RipEstimate> {
    let (n, p) = (x.rows(), x.cols());
    if k == 0 || k > p {
        return dim_err(format!("k = {k} must lie in [1, p = {p}]"));
    }
    let scale = n as f64;
    let (worst, checked) = match mode {
        SearchMode::Exact => {
            let total = binomial(p, k);
            check_budget(total, budget)?;
            let gram = x.gram(scale);
            let worst = par_fold(
                p,
                k,
                || (f64::NEG_INFINITY, Vec::new()),
                |acc, _, s| {
                    let mut sub: Vec<f64> = s.iter().flat_map(|&i| s.iter().map(move |&j| (i, j))).map(|(i, j)| gram[i * p + j]).collect();
                    keep_worse(acc, deviation(&mut sub, k), s);
                },
                |mut a, b| {
                    keep_worse(&mut a, b.0, &b.1);
                    a
                },
            );
            (worst, total)
        }
        SearchMode::Sampled => {
            let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
            let mut sampler = rng::stream(seed, streams::SAMPLING);
            let mut worst = (f64::NEG_INFINITY, Vec::new());
            for _ in 0..budget {
                let s = rng::sample_subset(&mut sampler, p, k);
                let mut sub = vec![0.0; k * k];
                for a in 0..k {
                    for b in a..k {
                        let v = dot(&cols[s[a]], &cols[s[b]]) / scale;
                        sub[a * k + b] = v;
                        sub[b * k + a] = v;
                    }
                }
                keep_worse(&mut worst, deviation(&mut sub, k), &s);
            }
            (worst, budget)
        }
    };
    Ok(RipEstimate {
        k,
        delta: worst.0.max(0.0),
        exact: mode == SearchMode::Exact,
        supports_checked: checked,
        worst_support: worst.1,
    })
}

/// Verdicts of the three consequences of `k`-RIP; `None` where the
/// preconditions of a part do not hold for this pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RipConsequences {
    /// `|(Xv)ᵀXw| ≤ (1+δ)‖v‖‖w‖n ≤ 2‖v‖‖w‖n`.
    pub inner_product: Option<bool>,
    /// `‖Xw‖² + 4‖v−w‖‖w‖n + 2‖v−w‖²n ≥ ‖Xv‖² ≥ ‖Xw‖² − 4‖v−w‖‖w‖n`.
    pub perturbation: Option<bool>,
    /// `|(Xv)ᵀXw| ≤ δ(‖v‖² + ‖w‖²)n` for disjoint supports.
    pub near_orthogonality: Option<bool>,
}

pub fn check_rip_consequences(x: &Matrix, v: &SparseVector, w: &SparseVector, k: usize, delta: f64) -> Result<RipConsequences> {
    let (n, p) = (x.rows() as f64, x.cols());
    if v.len() != p || w.len() != p {
        return dim_err("vectors must have length p");
    }
    if !(0.0..1.0).contains(&delta) {
        return param_err(format!("delta = {delta} must lie in [0, 1)"));
    }
    let xv = v.apply(x);
    let xw = w.apply(x);
    let (nv, nw) = (v.l2_norm(), w.l2_norm());
    let ip = dot(&xv, &xw);
    let sparse = v.nnz() <= k && w.nnz() <= k;
    let mut union: Vec<usize> = v.support().iter().chain(w.support()).copied().collect();
    union.sort_unstable();
    union.dedup();
    let common = sparse && union.len() <= k && k <= p;
    let disjoint = union.len() == v.nnz() + w.nnz();

    let inner_product = sparse.then(|| ip.abs() <= (1.0 + delta) * nv * nw * n && (1.0 + delta) * nv * nw * n <= 2.0 * nv * nw * n);
    let perturbation = common.then(|| {
        let diff: Vec<f64> = v.to_dense().iter().zip(w.to_dense()).map(|(a, b)| a - b).collect();
        let nd = norm(&diff);
        let (sv, sw) = (norm_sq(&xv), norm_sq(&xw));
        sw + 4.0 * nd * nw * n + 2.0 * nd * nd * n >= sv && sv >= sw - 4.0 * nd * nw * n
    });
    let near_orthogonality = (common && disjoint).then(|| ip.abs() <= delta * (nv * nv + nw * nw) * n);
    Ok(RipConsequences { inner_product, perturbation, near_orthogonality })
}

/// Empirical tail of `|VᵀAV − tr A|` for standard normal `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProbe {
    pub trials: usize,
    pub trace: f64,
    pub mean: f64,
    pub frobenius: f64,
    pub opnorm: f64,
    pub t_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
}

impl QuadraticProbe {
    /// CSV with columns `t,empirical_tail,frobenius,opnorm`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,empirical_tail,frobenius,opnorm")?;
        for (t, e) in self.t_grid.iter().zip(&self.empirical_tail) {
            writeln!(out, "{t},{e},{},{}", self.frobenius, self.opnorm)?;
        }
        Ok(())
    }

    /// `2 exp(−d min(t²/‖A‖_F², t/‖A‖))` at each grid point, for overlay.
    pub fn reference_tail(&self, d: f64) -> Vec<f64> {
        self.t_grid.iter().map(|&t| hanson_wright_bound(t, d, self.frobenius, self.opnorm)).collect()
    }
}

pub fn hanson_wright_bound(t: f64, d: f64, frobenius: f64, opnorm: f64) -> f64 {
    if frobenius == 0.0 {
        return 0.0;
    }
    (2.0 * (-d * (t * t / (frobenius * frobenius)).min(t / opnorm)).exp()).min(1.0)
}

/// Largest singular value by power iteration on `AᵀA`, to relative tolerance `1e-10`.
pub fn operator_norm(a: &Matrix, seed: u64) -> f64 {
    let m = a.cols();
    if m == 0 || a.frobenius_norm() == 0.0 {
        return 0.0;
    }
    let mut g = Normal::new(rng::stream(seed, streams::SAMPLING));
    let mut v: Vec<f64> = (0..m).map(|_| g.sample()).collect();
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        let s = norm(&v);
        v.iter_mut().for_each(|x| *x /= s);
        let av = a.matvec(&v);
        let next = a.tr_matvec(&av);
        let rayleigh = dot(&v, &next);
        v = next;
        if (rayleigh - estimate).abs() <= 1e-10 * rayleigh.abs() {
            estimate = rayleigh;
            break;
        }
        estimate = rayleigh;
    }
    estimate.max(0.0).sqrt()
}

pub fn quadratic_form_probe(a: &Matrix, trials: usize, t_grid: &[f64], seed: u64) -> Result<QuadraticProbe> {
    let m = a.rows();
    if a.cols() != m {
        return dim_err(format!("matrix is {}x{}, expected square", m, a.cols()));
    }
    if !a.is_finite() {
        return Err(crate::Error::Numeric("matrix has non-finite entries".into()));
    }
    if trials < 1000 {
        return param_err(format!("trials = {trials} must be at least 1000"));
    }
    let trace: f64 = (0..m).map(|i| a.get(i, i)).sum();
    let mut g = Normal::new(rng::stream(seed, streams::DESIGN));
    let mut v = vec![0.0; m];
    let mut counts = vec![0usize; t_grid.len()];
    let mut total = 0.0;
    for _ in 0..trials {
        g.fill(&mut v);
        let q = dot(&v, &a.matvec(&v));
        total += q;
        let dev = (q - trace).abs();
        for (c, &t) in counts.iter_mut().zip(t_grid) {
            if dev > t {
                *c += 1;
            }
        }
    }
    Ok(QuadraticProbe {
        trials,
        trace,
        mean: total / trials as f64,
        frobenius: a.frobenius_norm(),
        opnorm: operator_norm(a, seed),
        t_grid: t_grid.to_vec(),
        empirical_tail: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
    })
}

/// `[[I, γI], [γI, 0]]` with `m`x`m` blocks.
pub fn kronecker_block_matrix(m: usize, gamma: f64) -> Matrix {
    let mut a = Matrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        a.set(i, i, 1.0);
        a.set(i, m + i, gamma);
        a.set(m + i, i, gamma);
    }
    a
}
