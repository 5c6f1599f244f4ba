//! Binary fits to pure noise and the convex-mix certificate of LASSO failure.

use serde::{Deserialize, Serialize};

use super::{better, SearchMode};
use crate::combinatorics::{binomial, check_budget};
use crate::error::{dim_err, param_err, Result};
use crate::linalg::{dot, norm, norm_sq, Matrix};
use crate::model::{Instance, SparseVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFitOptions {
    pub mode: SearchMode,
    pub budget: u128,
    /// Constant `c` of the reference bound.
    pub c: f64,
    /// Variance of one entry of the target; the sample variance when absent.
    pub variance: Option<f64>,
    /// Columns allowed in the fit; all columns when absent.
    pub candidates: Option<Vec<usize>>,
}

impl Default for NoiseFitOptions {
    fn default() -> Self {
        Self { mode: SearchMode::Exact, budget: 10_000_000, c: 1.0, variance: None, candidates: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub beta_binary: SparseVector,
    /// `n^{-1/2} ‖Y' − Xβ‖₂`.
    pub scaled_residual: f64,
    /// `exp(1/(2c)) √(k' + Var) exp(−k' log p / n)`, for comparison only.
    pub reference_bound: f64,
    pub exact: bool,
}

/// `exp(1/(2c)) √(k' + var) exp(−k' log p / n)`.
pub fn noise_fit_bound(c: f64, k_prime: usize, variance: f64, n: usize, p: usize) -> f64 {
    (1.0 / (2.0 * c)).exp() * (k_prime as f64 + variance).sqrt() * (-(k_prime as f64) * (p as f64).ln() / n as f64).exp()
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Best exactly-`k'`-sparse 0/1 vector for the target `yp`: exhaustive over
/// the candidate columns, or greedy forward selection adding one column per step.
pub fn pure_noise_best_fit(yp: &[f64], x: &Matrix, k_prime: usize, opts: &NoiseFitOptions) -> Result<NoiseFit> {
    let (n, p) = (x.rows(), x.cols());
    if yp.len() != n {
        return dim_err(format!("target has length {}, X has {n} rows", yp.len()));
    }
    let cand: Vec<usize> = match &opts.candidates {
        Some(c) => c.clone(),
        None => (0..p).collect(),
    };
    if cand.iter().any(|&j| j >= p) || cand.windows(2).any(|w| w[0] >= w[1]) {
        return dim_err("candidate columns must be strictly increasing and inside 0..p");
    }
    if k_prime == 0 || k_prime > cand.len() {
        return param_err(format!("k' = {k_prime} must lie in [1, {}]", cand.len()));
    }
    if !(opts.c > 0.0) {
        return param_err("c must be positive");
    }
    let m = cand.len();
    let cols: Vec<Vec<f64>> = cand.iter().map(|&j| x.column(j)).collect();
    let xty: Vec<f64> = cols.iter().map(|c| dot(c, yp)).collect();
    let chosen: Vec<usize> = match opts.mode {
        SearchMode::Exact => {
            check_budget(binomial(m, k_prime), opts.budget)?;
            let mut gram = vec![0.0; m * m];
            for a in 0..m {
                for b in a..m {
                    let v = dot(&cols[a], &cols[b]);
                    gram[a * m + b] = v;
                    gram[b * m + a] = v;
                }
            }
            // ‖y − Σ_T X_j‖² − ‖y‖² = Σ_{i,j∈T} G_ij − 2 Σ_{j∈T} X_jᵀy
            let score = |t: &[usize]| {
                let mut s = 0.0;
                for &i in t {
                    s -= 2.0 * xty[i];
                    for &j in t {
                        s += gram[i * m + j];
                    }
                }
                s
            };
            let best = crate::combinatorics::par_fold(
                m,
                k_prime,
                || None::<(f64, Vec<usize>)>,
                |acc, _, t| {
                    let v = score(t);
                    if acc.as_ref().is_none_or(|(bv, bt)| better((v, t), (*bv, bt))) {
                        *acc = Some((v, t.to_vec()));
                    }
                },
                |a, b| match (a, b) {
                    (Some(a), Some(b)) => Some(if better((b.0, &b.1), (a.0, &a.1)) { b } else { a }),
                    (a, None) => a,
                    (None, b) => b,
                },
            );
            best.map(|(_, t)| t).unwrap_or_default()
        }
        SearchMode::Sampled => {
            let mut resid = yp.to_vec();
            let mut picked = Vec::with_capacity(k_prime);
            let mut used = vec![false; m];
            for _ in 0..k_prime {
                // ‖r − X_j‖² = ‖r‖² − 2X_jᵀr + ‖X_j‖²
                let mut best: Option<(f64, usize)> = None;
                for j in (0..m).filter(|&j| !used[j]) {
                    let v = norm_sq(&cols[j]) - 2.0 * dot(&cols[j], &resid);
                    if best.is_none_or(|(bv, _)| v < bv) {
                        best = Some((v, j));
                    }
                }
                let (_, j) = best.expect("k' ≤ candidates");
                used[j] = true;
                picked.push(j);
                for (r, c) in resid.iter_mut().zip(&cols[j]) {
                    *r -= c;
                }
            }
            picked.sort_unstable();
            picked
        }
    };
    let support: Vec<usize> = chosen.iter().map(|&i| cand[i]).collect();
    let beta = SparseVector::new(p, support.iter().map(|&j| (j, 1.0)))?;
    let fit = beta.apply(x);
    let resid: Vec<f64> = yp.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let variance = opts.variance.unwrap_or_else(|| sample_variance(yp));
    Ok(NoiseFit {
        beta_binary: beta,
        scaled_residual: norm(&resid) / (n as f64).sqrt(),
        reference_bound: noise_fit_bound(opts.c, k_prime, variance, n, p),
        exact: opts.mode == SearchMode::Exact,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `exp(k log p / (5n))`.
    pub c1: f64,
    /// `1 − 4C₁√(σ²/k)`.
    pub lambda_mix: f64,
    /// `λβ* + (1−λ)β`; empty when the construction does not apply.
    pub alpha_vec: Vec<f64>,
    pub l1_norm: f64,
    /// `k − 2C₁σ√k`.
    pub l1_target: f64,
    /// `n^{-1/2} ‖Y − Xα‖₂`.
    pub scaled_residual: f64,
    pub sigma: f64,
    pub valid: bool,
    pub exact_search: bool,
    /// Support of the binary `k/2`-sparse vector mixed in.
    pub mixed_support: Vec<usize>,
    pub reason: Option<String>,
}

pub fn certificate_lambda(c1: f64, sigma: f64, k: usize) -> f64 {
    1.0 - 4.0 * c1 * (sigma * sigma / k as f64).sqrt()
}

/// `‖λβ* + (1−λ)β‖₁` for binary `β*` with `k` ones and binary `β` with `k/2` ones on disjoint supports.
pub fn certificate_l1_norm(k: usize, lambda: f64) -> f64 {
    k as f64 * (1.0 + lambda) / 2.0
}

/// Mixes `β*` with the best binary `k/2`-sparse vector off its support.
///
/// The vector `β` minimises `‖Y' − Xβ‖₂` for `Y' = Xβ* + W/(1−λ)`, which is
/// the same as minimising `‖Y − Xα‖₂` since `Y − Xα = (1−λ)(Y' − Xβ)`.
/// `search` picks exhaustive or greedy selection.
pub fn build_certificate(instance: &Instance, search: SearchMode, budget: u128) -> Result<CertificateReport> {
    let dims = instance.dims;
    let (n, p) = (dims.n, dims.p);
    let truth = &instance.beta_star;
    let k = truth.nnz();
    if !truth.is_binary() || k == 0 {
        return param_err("certificate needs a binary, nonzero beta_star");
    }
    if k % 2 != 0 {
        return param_err(format!("certificate needs even k, got {k}"));
    }
    let sigma = dims.sigma();
    let c1 = (k as f64 * (p as f64).ln() / (5.0 * n as f64)).exp();
    let lambda = certificate_lambda(c1, sigma, k);
    let mut report = CertificateReport {
        c1,
        lambda_mix: lambda,
        alpha_vec: Vec::new(),
        l1_norm: f64::NAN,
        l1_target: k as f64 - 2.0 * c1 * sigma * (k as f64).sqrt(),
        scaled_residual: f64::NAN,
        sigma,
        valid: false,
        exact_search: search == SearchMode::Exact,
        mixed_support: Vec::new(),
        reason: None,
    };
    if !(sigma > 0.0) {
        report.reason = Some("construction needs sigma2 > 0".into());
        return Ok(report);
    }
    if lambda <= 0.0 {
        report.reason = Some(format!("lambda_mix = {lambda} is not positive (4*C1*sqrt(sigma2/k) >= 1)"));
        return Ok(report);
    }
    let signal = truth.apply(&instance.x);
    let yp: Vec<f64> = signal.iter().zip(&instance.w).map(|(s, w)| s + w / (1.0 - lambda)).collect();
    let outside: Vec<usize> = (0..p).filter(|j| truth.support().binary_search(j).is_err()).collect();
    let opts = NoiseFitOptions { mode: search, budget, candidates: Some(outside), ..NoiseFitOptions::default() };
    let fit = pure_noise_best_fit(&yp, &instance.x, k / 2, &opts)?;
    let mut alpha = vec![0.0; p];
    for &j in truth.support() {
        alpha[j] = lambda;
    }
    for &j in fit.beta_binary.support() {
        alpha[j] = 1.0 - lambda;
    }
    let fitted = instance.x.matvec(&alpha);
    let resid: Vec<f64> = instance.y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    report.l1_norm = alpha.iter().map(|a| a.abs()).sum();
    report.scaled_residual = norm(&resid) / (n as f64).sqrt();
    report.valid = report.scaled_residual <= sigma;
    if !report.valid {
        report.reason = Some(format!("scaled residual {} exceeds sigma {}", report.scaled_residual, sigma));
    }
    report.mixed_support = fit.beta_binary.support().to_vec();
    report.alpha_vec = alpha;
    Ok(report)
}
