//! LASSO and box-constrained LASSO by cyclic coordinate descent.
//!
//! The objective is `n⁻¹‖Y − Xβ‖₂² + λ‖β‖₁`, optionally over `β ∈ [0,1]^p`.
//! Note the `n⁻¹` (not `(2n)⁻¹`) normalization: the zero-solution threshold is
//! `λ_max = maxⱼ |(2/n) Xⱼᵀ Y|`. No alternative scaling is offered.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Error, Result};
use crate::linalg::{dot, norm_sq, Matrix};
use crate::model::{Dimensions, SparseVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Restrict to `β ∈ [0,1]^p`.
    pub box_constrained: bool,
    /// Convergence when the largest coordinate change of a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self { lambda: 0.0, box_constrained: false, tol: 1e-8, max_sweeps: 100_000 }
    }
}

impl LassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn boxed(mut self, box_constrained: bool) -> Self {
        self.box_constrained = box_constrained;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return param_err(format!("lambda = {} must be finite and nonnegative", self.lambda));
        }
        if !(self.tol > 0.0) {
            return param_err(format!("tol = {} must be positive", self.tol));
        }
        if self.max_sweeps == 0 {
            return param_err("max_sweeps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoResult {
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    pub sweeps: usize,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub converged: bool,
}

impl LassoResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_sparse(&self) -> SparseVector {
        SparseVector::from_dense(&self.beta_hat)
    }
}

/// Column-major copy of the design with squared column norms.
struct Columns {
    n: usize,
    p: usize,
    data: Vec<f64>,
    sq: Vec<f64>,
}

impl Columns {
    fn new(x: &Matrix) -> Self {
        let data = x.to_column_major();
        let n = x.rows();
        let sq = data.chunks_exact(n.max(1)).map(norm_sq).collect();
        Self { n, p: x.cols(), data, sq }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

/// `(2/n) z`, the gradient scale shared by the update, `λ_max` and the KKT check.
#[inline]
fn scaled(z: f64, n: usize) -> f64 {
    2.0 * z / n as f64
}

/// Exact minimizer over one coordinate given `z = Xⱼᵀ rⱼ` with `rⱼ` the
/// residual excluding coordinate `j`.
#[inline]
fn coordinate_update(z: f64, col_sq: f64, lambda: f64, n: usize, box_constrained: bool) -> f64 {
    let g = scaled(z, n);
    if g.abs() <= lambda {
        return 0.0;
    }
    let v = (z - z.signum() * lambda * n as f64 / 2.0) / col_sq;
    if box_constrained {
        v.clamp(0.0, 1.0)
    } else {
        v
    }
}

fn check_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return dim_err(format!("Y has length {}, X has {} rows", y.len(), x.rows()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entries in X or Y".into()));
    }
    Ok(())
}

/// `maxⱼ |(2/n) Xⱼᵀ Y|`: every `λ` at or above it has `β̂ = 0`.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let cols = Columns::new(x);
    (0..cols.p).map(|j| scaled(dot(cols.col(j), y), cols.n).abs()).fold(0.0, f64::max)
}

/// `n⁻¹‖Y − Xβ‖₂² + λ‖β‖₁`.
pub fn objective(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let fit = x.matvec(beta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    rss / x.rows() as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

pub fn solve_lasso(x: &Matrix, y: &[f64], config: &LassoConfig) -> Result<LassoResult> {
    check_inputs(x, y)?;
    config.validate()?;
    let cols = Columns::new(x);
    Ok(coordinate_descent(&cols, x, y, config, vec![0.0; x.cols()]))
}

/// Warm-started sequence of solves along strictly decreasing `lambdas`.
pub fn solve_lasso_path(x: &Matrix, y: &[f64], lambdas: &[f64], config: &LassoConfig) -> Result<Vec<LassoResult>> {
    check_inputs(x, y)?;
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return param_err("lambda path must be strictly decreasing");
    }
    let cols = Columns::new(x);
    let mut start = vec![0.0; x.cols()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = LassoConfig { lambda, ..*config };
        cfg.validate()?;
        let res = coordinate_descent(&cols, x, y, &cfg, start);
        start = res.beta_hat.clone();
        out.push(res);
    }
    Ok(out)
}

fn coordinate_descent(cols: &Columns, x: &Matrix, y: &[f64], cfg: &LassoConfig, mut beta: Vec<f64>) -> LassoResult {
    let (n, p) = (cols.n, cols.p);
    let lambda = cfg.lambda;
    for (j, b) in beta.iter_mut().enumerate() {
        if cols.sq[j] == 0.0 {
            *b = 0.0;
        } else if cfg.box_constrained {
            *b = b.clamp(0.0, 1.0);
        }
    }
    let fit = x.matvec(&beta);
    let mut resid: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let sq = cols.sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = cols.col(j);
            let old = beta[j];
            let z = dot(col, &resid) + sq * old;
            let new = coordinate_update(z, sq, lambda, n, cfg.box_constrained);
            let delta = new - old;
            if delta != 0.0 {
                for (r, &c) in resid.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        trace.push(norm_sq(&resid) / n as f64 + lambda * l1);
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    let kkt = kkt_residual(x, y, &beta, lambda, cfg.box_constrained);
    LassoResult { beta_hat: beta, lambda, sweeps, objective_trace: trace, kkt_residual: kkt, converged }
}

/// Optimality violation of `beta`; zero exactly at a minimizer.
///
/// With `gⱼ = (2/n) Xⱼᵀ(Xβ − Y)`: unconstrained coordinates contribute
/// `|gⱼ + λ sign βⱼ|` when `βⱼ ≠ 0` and `max(0, |gⱼ| − λ)` at zero. Under the
/// box, `hⱼ = gⱼ + λ` must vanish in the interior, be `≥ 0` at 0 and `≤ 0` at
/// 1; infeasible coordinates give `+∞`.
pub fn kkt_residual(x: &Matrix, y: &[f64], beta: &[f64], lambda: f64, box_constrained: bool) -> f64 {
    let n = x.rows();
    let fit = x.matvec(beta);
    let r: Vec<f64> = fit.iter().zip(y).map(|(a, b)| a - b).collect();
    let grad = x.tr_matvec(&r);
    let mut worst: f64 = 0.0;
    for (&b, &gz) in beta.iter().zip(&grad) {
        let g = scaled(gz, n);
        let v = if box_constrained {
            let h = g + lambda;
            if !(0.0..=1.0).contains(&b) {
                f64::INFINITY
            } else if b == 0.0 {
                (-h).max(0.0)
            } else if b == 1.0 {
                h.max(0.0)
            } else {
                h.abs()
            }
        } else if b != 0.0 {
            (g + lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// `(σ/√k) exp(−k log p / (5n))`, the smallest tuning covered by the failure bound.
pub fn lambda_threshold(dims: &Dimensions) -> Result<f64> {
    if !(dims.sigma2 > 0.0) {
        return param_err("lambda threshold needs sigma2 > 0");
    }
    Ok(lambda_threshold_value(dims.sigma(), dims.k as f64, dims.p as f64, dims.n as f64))
}

pub fn lambda_threshold_value(sigma: f64, k: f64, p: f64, n: f64) -> f64 {
    sigma / k.sqrt() * (-k * p.ln() / (5.0 * n)).exp()
}

/// `exp(k log p / (5n)) σ`, the LASSO error floor in the low-sample regime.
pub fn failure_lower_bound(sigma: f64, k: usize, p: usize, n: usize) -> f64 {
    (k as f64 * (p as f64).ln() / (5.0 * n as f64)).exp() * sigma
}

/// For binary exactly-`k`-sparse `β*`: `‖β‖₁ ≤ k − C₁σ√k` implies `‖β − β*‖₂ ≥ C₁σ`.
/// Returns whether the implication holds for this `β` (it always should).
pub fn l1_shrinkage_implies_distance(beta: &[f64], beta_star: &SparseVector, sigma: f64, c1: f64) -> Result<bool> {
    if beta.len() != beta_star.len() {
        return dim_err("beta and beta_star lengths differ");
    }
    if !beta_star.is_binary() || beta_star.nnz() == 0 {
        return param_err("beta_star must be binary and nonzero");
    }
    let k = beta_star.nnz() as f64;
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let premise = l1 <= k - c1 * sigma * k.sqrt();
    let dist = crate::model::l2_distance(beta, beta_star);
    Ok(!premise || dist >= c1 * sigma)
}
