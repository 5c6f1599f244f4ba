//! Problem instances `Y = Xβ* + W`, sparse vectors, recovery metrics and the
//! sample-size thresholds of the model.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{self, streams, Normal};

/// Sizes and noise level of a regression problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
}

impl Dimensions {
    /// Validates `1 ≤ k < n`, `p ≥ 2`, `k ≤ p` and `sigma2 ≥ 0`. Sparsity above
    /// `p/3` is accepted with a warning; see [`Dimensions::require_landscape`].
    pub fn new(n: usize, p: usize, k: usize, sigma2: f64) -> Result<Self> {
        if p < 2 {
            return dim_err(format!("p = {p} must be at least 2"));
        }
        if k == 0 || k > p {
            return dim_err(format!("k = {k} must lie in [1, p = {p}]"));
        }
        if k >= n {
            return dim_err(format!("k = {k} must be smaller than n = {n}"));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return param_err(format!("sigma2 = {sigma2} must be finite and nonnegative"));
        }
        if 3 * k > p {
            log::warn!("k = {k} exceeds p/3 = {}; landscape and RIP checks will refuse", p / 3);
        }
        Ok(Self { n, p, k, sigma2 })
    }

    /// Landscape and RIP analyses assume `k ≤ p/3`.
    pub fn require_landscape(&self) -> Result<()> {
        if 3 * self.k > self.p {
            return dim_err(format!("k = {} exceeds p/3 for p = {}", self.k, self.p));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Vector of length `len` stored as strictly increasing indices with nonzero values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    len: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(len: usize) -> Self {
        Self { len, indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(index, value)` pairs in any order. Zero values are dropped;
    /// duplicate or out-of-range indices are errors.
    pub fn new(len: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        pairs.sort_by_key(|&(i, _)| i);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return dim_err("duplicate index in sparse vector");
        }
        if let Some(&(i, _)) = pairs.last() {
            if i >= len {
                return dim_err(format!("index {i} out of range for length {len}"));
            }
        }
        if pairs.iter().any(|(_, v)| !v.is_finite()) {
            return Err(crate::Error::Numeric("non-finite sparse entry".into()));
        }
        let (indices, values) = pairs.into_iter().unzip();
        Ok(Self { len, indices, values })
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self { len: dense.len(), indices, values }
    }

    /// Sets coordinate `i`, inserting or removing the entry as needed.
    pub fn set(&mut self, i: usize, value: f64) {
        assert!(i < self.len);
        match self.indices.binary_search(&i) {
            Ok(pos) if value == 0.0 => {
                self.indices.remove(pos);
                self.values.remove(pos);
            }
            Ok(pos) => self.values[pos] = value,
            Err(_) if value == 0.0 => {}
            Err(pos) => {
                self.indices.insert(pos, i);
                self.values.insert(pos, value);
            }
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.indices.binary_search(&i).map(|pos| self.values[pos]).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Support, sorted.
    pub fn support(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Smallest nonzero magnitude, `None` for the zero vector.
    pub fn min_magnitude(&self) -> Option<f64> {
        self.values.iter().map(|v| v.abs()).min_by(|a, b| a.total_cmp(b))
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// `X β` for this vector.
    pub fn apply(&self, x: &Matrix) -> Vec<f64> {
        x.matvec_sparse(&self.indices, &self.values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    /// All nonzero values equal to 1.
    Binary,
    /// Random signs, magnitudes `min_magnitude + |N(0,1)|`.
    UnitMin,
}

impl std::str::FromStr for BetaKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Self::Binary),
            "unit_min" => Ok(Self::UnitMin),
            other => param_err(format!("unknown beta kind '{other}' (binary | unit_min)")),
        }
    }
}

impl std::fmt::Display for BetaKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::UnitMin => "unit_min",
        })
    }
}

/// Exactly `k`-sparse signal on a uniformly random support.
///
/// The support comes from stream [`streams::SUPPORT`] of `seed`, signs and
/// magnitudes from [`streams::VALUES`].
pub fn sample_beta_star(p: usize, k: usize, kind: BetaKind, min_magnitude: f64, seed: u64) -> Result<SparseVector> {
    if k == 0 || k > p {
        return dim_err(format!("cannot place k = {k} nonzeros in length p = {p}"));
    }
    if kind == BetaKind::UnitMin && !(min_magnitude >= 1.0 && min_magnitude.is_finite()) {
        return param_err(format!("min_magnitude = {min_magnitude} must be at least 1"));
    }
    let support = rng::sample_subset(&mut rng::stream(seed, streams::SUPPORT), p, k);
    let values: Vec<f64> = match kind {
        BetaKind::Binary => vec![1.0; k],
        BetaKind::UnitMin => {
            let mut g = Normal::new(rng::stream(seed, streams::VALUES));
            (0..k)
                .map(|_| {
                    let magnitude = min_magnitude + g.sample().abs();
                    let sign = if rng::uniform(g.rng_mut()) < 0.5 { -1.0 } else { 1.0 };
                    sign * magnitude
                })
                .collect()
        }
    };
    SparseVector::new(p, support.into_iter().zip(values))
}

/// One regression problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub dims: Dimensions,
    pub x: Matrix,
    pub beta_star: SparseVector,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl Instance {
    /// Draws `X` (row-major, stream [`streams::DESIGN`]) and `W` (stream
    /// [`streams::NOISE`]) and sets `Y = Xβ* + W`.
    pub fn generate(dims: Dimensions, beta_star: SparseVector, seed: u64) -> Result<Self> {
        if beta_star.len() != dims.p {
            return dim_err(format!("beta_star has length {}, expected p = {}", beta_star.len(), dims.p));
        }
        let mut data = vec![0.0; dims.n * dims.p];
        Normal::new(rng::stream(seed, streams::DESIGN)).fill(&mut data);
        let x = Matrix::from_row_major(dims.n, dims.p, data)?;
        let sigma = dims.sigma();
        let mut noise = Normal::new(rng::stream(seed, streams::NOISE));
        let w: Vec<f64> = (0..dims.n).map(|_| sigma * noise.sample()).collect();
        let signal = beta_star.apply(&x);
        let y = signal.iter().zip(&w).map(|(s, e)| s + e).collect();
        Ok(Self { dims, x, beta_star, w, y, seed })
    }

    /// Instance with an explicit design and noise (used for structured test designs).
    pub fn from_parts(dims: Dimensions, x: Matrix, beta_star: SparseVector, w: Vec<f64>, seed: u64) -> Result<Self> {
        if x.rows() != dims.n || x.cols() != dims.p || w.len() != dims.n || beta_star.len() != dims.p {
            return dim_err("instance parts disagree with dimensions");
        }
        let signal = beta_star.apply(&x);
        let y = signal.iter().zip(&w).map(|(s, e)| s + e).collect();
        Ok(Self { dims, x, beta_star, w, y, seed })
    }

    /// `‖Y - Xβ‖₂` for a sparse `β`.
    pub fn residual_norm(&self, beta: &SparseVector) -> f64 {
        let fit = beta.apply(&self.x);
        self.y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn noise_norm(&self) -> f64 {
        norm(&self.w)
    }
}

/// Alias matching the operation name used throughout the docs.
pub fn gen_instance(dims: Dimensions, beta_star: SparseVector, seed: u64) -> Result<Instance> {
    Instance::generate(dims, beta_star, seed)
}

/// How close an estimate is to the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub l2_error: f64,
    pub support_exact: bool,
    pub overlap: usize,
    pub hamming: usize,
    pub stable: bool,
}

/// `stable` means `l2_error ≤ stability_c · sigma`.
pub fn recovery_report(beta_hat: &[f64], beta_star: &SparseVector, sigma: f64, stability_c: f64) -> Result<RecoveryReport> {
    if beta_hat.len() != beta_star.len() {
        return dim_err(format!("estimate has length {}, truth has {}", beta_hat.len(), beta_star.len()));
    }
    let truth = beta_star.to_dense();
    let l2_error = beta_hat.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let (mut overlap, mut hamming) = (0, 0);
    for (a, b) in beta_hat.iter().zip(&truth) {
        match (*a != 0.0, *b != 0.0) {
            (true, true) => overlap += 1,
            (true, false) | (false, true) => hamming += 1,
            _ => {}
        }
    }
    Ok(RecoveryReport {
        l2_error,
        support_exact: hamming == 0,
        overlap,
        hamming,
        stable: l2_error <= stability_c * sigma,
    })
}

/// Sample-size thresholds and the standard LASSO tuning of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `2k log p / log(2k/σ² + 1)`; absent when `σ² = 0`.
    pub n_star: Option<f64>,
    /// `k log p`.
    pub n_alg: f64,
    n: usize,
    p: usize,
    sigma: f64,
}

impl Thresholds {
    pub fn of(dims: &Dimensions) -> Self {
        let (k, p) = (dims.k as f64, dims.p as f64);
        Self {
            n_star: n_star(k, p, dims.sigma2),
            n_alg: n_alg(k, p),
            n: dims.n,
            p: dims.p,
            sigma: dims.sigma(),
        }
    }

    /// `A σ sqrt(log p / n)`.
    pub fn lambda_star(&self, a: f64) -> f64 {
        lambda_star(a, self.sigma, self.p, self.n)
    }
}

pub fn thresholds(dims: &Dimensions) -> Thresholds {
    Thresholds::of(dims)
}

/// `2k log p / log(2k/σ² + 1)`, `None` when `σ² = 0`. Real-valued arguments.
pub fn n_star(k: f64, p: f64, sigma2: f64) -> Option<f64> {
    (sigma2 > 0.0).then(|| 2.0 * k * p.ln() / (2.0 * k / sigma2 + 1.0).ln())
}

/// `k log p`.
pub fn n_alg(k: f64, p: f64) -> f64 {
    k * p.ln()
}

/// `A σ sqrt(log p / n)`.
pub fn lambda_star(a: f64, sigma: f64, p: usize, n: usize) -> f64 {
    a * sigma * ((p as f64).ln() / n as f64).sqrt()
}

/// Smallest integer `n` with `n ≥ factor · k log p`.
pub fn n_for_ratio(factor: f64, k: usize, p: usize) -> usize {
    (factor * k as f64 * (p as f64).ln()).ceil() as usize
}

/// `‖a - b‖₂` for a dense estimate against a sparse truth.
pub fn l2_distance(a: &[f64], b: &SparseVector) -> f64 {
    let bd = b.to_dense();
    let diff: Vec<f64> = a.iter().zip(&bd).map(|(x, y)| x - y).collect();
    dot(&diff, &diff).sqrt()
}
