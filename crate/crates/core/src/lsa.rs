//! Local search over `k`-sparse supports.
//!
//! Each step removes one coordinate `i ∈ S` and puts the best single weight
//! `q` on some column `j` (any `j`, including `i` itself), taking the
//! swap with the smallest residual. The search stops when no swap strictly
//! lowers `‖Y − Xβ‖₂²`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Error, Result};
use crate::linalg::{dot, least_squares_on_support, norm_sq, Matrix};
use crate::model::SparseVector;
use crate::rng::{self, streams, Normal};

const RELATIVE_SLACK: f64 = 1e-12;
/// Absolute slack as a fraction of `‖Y‖²`; keeps round-off-sized residuals from
/// producing moves when the fit is already exact.
const ABSOLUTE_SLACK: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq)]
pub struct LsaState {
    pub beta: SparseVector,
    pub residual: Vec<f64>,
    pub residual_sq: f64,
}

impl LsaState {
    pub fn new(x: &Matrix, y: &[f64], beta: SparseVector) -> Result<Self> {
        if beta.len() != x.cols() {
            return dim_err(format!("beta has length {}, X has {} columns", beta.len(), x.cols()));
        }
        if y.len() != x.rows() {
            return dim_err(format!("Y has length {}, X has {} rows", y.len(), x.rows()));
        }
        let mut state = Self { beta, residual: Vec::new(), residual_sq: 0.0 };
        state.refresh(x, y);
        Ok(state)
    }

    /// Recomputes the residual from scratch.
    pub fn refresh(&mut self, x: &Matrix, y: &[f64]) {
        let fit = self.beta.apply(x);
        self.residual = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        self.residual_sq = norm_sq(&self.residual);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub i: usize,
    pub j: usize,
    pub q: f64,
    pub new_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaOptions {
    pub max_iterations: usize,
    pub refresh_every: usize,
    /// Noise variance, used only for the iteration bound.
    pub sigma2: Option<f64>,
    /// Sparsity level for the bound; defaults to the size of the initial support.
    pub sparsity: Option<usize>,
}

impl Default for LsaOptions {
    fn default() -> Self {
        Self { max_iterations: 1_000_000, refresh_every: 100, sigma2: None, sparsity: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaResult {
    pub beta_hat: SparseVector,
    pub iterations: usize,
    pub trace: Vec<Move>,
    /// `4k‖Y − Xβ₀‖²/(σ²n)`, infinite without noise.
    pub bound: f64,
    pub initial_residual_sq: f64,
    pub final_residual_sq: f64,
    pub hit_cap: bool,
    pub warning: Option<String>,
}

impl LsaResult {
    /// One JSON object per accepted move.
    pub fn write_trace_jsonl(&self, mut out: impl Write) -> Result<()> {
        for (iter, m) in self.trace.iter().enumerate() {
            let rec = serde_json::json!({ "iter": iter + 1, "i": m.i, "j": m.j, "q": m.q, "residual_sq": m.new_sq });
            writeln!(out, "{rec}")?;
        }
        Ok(())
    }
}

/// Column-major design with cached squared column norms.
pub struct Columns {
    n: usize,
    p: usize,
    data: Vec<f64>,
    sq: Vec<f64>,
}

impl Columns {
    pub fn new(x: &Matrix) -> Self {
        let n = x.rows();
        let data = x.to_column_major();
        let sq = data.chunks_exact(n.max(1)).map(norm_sq).collect();
        Self { n, p: x.cols(), data, sq }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn sq_norms(&self) -> &[f64] {
        &self.sq
    }
}

/// Best single swap from `state`, or `None` when the support is empty.
pub fn best_move(state: &LsaState, x: &Matrix, y: &[f64]) -> Option<Move> {
    debug_assert_eq!(y.len(), x.rows());
    best_move_cached(state, &Columns::new(x))
}

pub fn best_move_cached(state: &LsaState, cols: &Columns) -> Option<Move> {
    let mut best: Option<Move> = None;
    let mut r_i = vec![0.0; cols.n];
    for (i, b_i) in state.beta.iter() {
        for ((dst, &r), &c) in r_i.iter_mut().zip(&state.residual).zip(cols.col(i)) {
            *dst = r + b_i * c;
        }
        let base = norm_sq(&r_i);
        for j in 0..cols.p {
            let sq = cols.sq[j];
            if sq == 0.0 {
                continue;
            }
            let z = dot(cols.col(j), &r_i);
            let q = z / sq;
            let new_sq = (base - z * q).max(0.0);
            if best.is_none_or(|m| new_sq < m.new_sq) {
                best = Some(Move { i, j, q, new_sq });
            }
        }
    }
    best
}

/// `β ← β − βᵢeᵢ + q eⱼ`, with the residual updated in place.
pub fn apply_move(state: &mut LsaState, mv: &Move, x: &Matrix) {
    let b_i = state.beta.get(mv.i);
    let mut beta = state.beta.clone();
    beta.set(mv.i, 0.0);
    let b_j = beta.get(mv.j);
    beta.set(mv.j, b_j + mv.q);
    for (r, row) in state.residual.iter_mut().zip(0..x.rows()) {
        *r += b_i * x.get(row, mv.i) - mv.q * x.get(row, mv.j);
    }
    state.beta = beta;
    state.residual_sq = norm_sq(&state.residual);
}

fn apply_move_cached(state: &mut LsaState, mv: &Move, cols: &Columns) {
    let b_i = state.beta.get(mv.i);
    state.beta.set(mv.i, 0.0);
    let b_j = state.beta.get(mv.j);
    state.beta.set(mv.j, b_j + mv.q);
    for ((r, &ci), &cj) in state.residual.iter_mut().zip(cols.col(mv.i)).zip(cols.col(mv.j)) {
        *r += b_i * ci - mv.q * cj;
    }
    state.residual_sq = norm_sq(&state.residual);
}

/// `4k‖Y − Xβ₀‖²/(σ²n)`; infinite when `σ² = 0`.
pub fn iteration_bound(k: usize, initial_residual_sq: f64, sigma2: f64, n: usize) -> f64 {
    if sigma2 > 0.0 {
        4.0 * k as f64 * initial_residual_sq / (sigma2 * n as f64)
    } else {
        f64::INFINITY
    }
}

pub fn run_lsa(x: &Matrix, y: &[f64], beta0: &SparseVector, options: &LsaOptions) -> Result<LsaResult> {
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entries in X or Y".into()));
    }
    if options.refresh_every == 0 {
        return param_err("refresh_every must be at least 1");
    }
    let mut state = LsaState::new(x, y, beta0.clone())?;
    let k = options.sparsity.unwrap_or(beta0.nnz());
    let initial = state.residual_sq;
    let bound = iteration_bound(k, initial, options.sigma2.unwrap_or(0.0), x.rows());
    let mut result = LsaResult {
        beta_hat: beta0.clone(),
        iterations: 0,
        trace: Vec::new(),
        bound,
        initial_residual_sq: initial,
        final_residual_sq: initial,
        hit_cap: false,
        warning: None,
    };
    if beta0.nnz() == 0 {
        let msg = "initial vector has empty support; local search cannot insert without removing".to_string();
        log::warn!("{msg}");
        result.warning = Some(msg);
        return Ok(result);
    }
    let cols = Columns::new(x);
    let floor = ABSOLUTE_SLACK * norm_sq(y);
    let mut since_refresh = 0;
    let mut rechecked = false;
    loop {
        if result.trace.len() >= options.max_iterations {
            result.hit_cap = true;
            let msg = format!("iteration cap {} reached", options.max_iterations);
            log::warn!("{msg}");
            result.warning = Some(msg);
            break;
        }
        let Some(mv) = best_move_cached(&state, &cols) else { break };
        let threshold = state.residual_sq * (1.0 - RELATIVE_SLACK) - floor;
        if mv.new_sq < threshold {
            let mut next = state.clone();
            apply_move_cached(&mut next, &mv, &cols);
            if next.residual_sq < threshold {
                state = next;
                result.trace.push(Move { new_sq: state.residual_sq, ..mv });
                since_refresh += 1;
                rechecked = false;
                if since_refresh >= options.refresh_every {
                    state.refresh(x, y);
                    since_refresh = 0;
                }
                continue;
            }
        }
        // confirm against a freshly computed residual before stopping
        if rechecked || since_refresh == 0 {
            break;
        }
        state.refresh(x, y);
        since_refresh = 0;
        rechecked = true;
    }
    state.refresh(x, y);
    result.iterations = result.trace.len();
    result.final_residual_sq = state.residual_sq;
    result.beta_hat = state.beta;
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Least-squares values on `k` uniformly random columns.
    RandomSupport,
    /// Least-squares values on the `k` columns most correlated with `Y`.
    TopCorrelation,
    /// Standard normal values on `k` uniformly random columns, no fitting.
    ZeroPaddedRandom,
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_support" => Ok(Self::RandomSupport),
            "top_correlation" => Ok(Self::TopCorrelation),
            "zero_padded_random" => Ok(Self::ZeroPaddedRandom),
            other => param_err(format!(
                "unknown init mode '{other}' (random_support | top_correlation | zero_padded_random)"
            )),
        }
    }
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RandomSupport => "random_support",
            Self::TopCorrelation => "top_correlation",
            Self::ZeroPaddedRandom => "zero_padded_random",
        })
    }
}

/// Starting vector with exactly `k` nonzeros; exact zeros are nudged to `1e-6`.
pub fn default_init(x: &Matrix, y: &[f64], k: usize, mode: InitMode, seed: u64) -> Result<SparseVector> {
    let p = x.cols();
    if k == 0 || k > p {
        return dim_err(format!("cannot place k = {k} nonzeros among p = {p} columns"));
    }
    if y.len() != x.rows() {
        return dim_err(format!("Y has length {}, X has {} rows", y.len(), x.rows()));
    }
    let mut sampler = rng::stream(seed, streams::SAMPLING);
    let (support, values) = match mode {
        InitMode::RandomSupport => {
            let s = rng::sample_subset(&mut sampler, p, k);
            let (v, _) = least_squares_on_support(x, y, &s);
            (s, v)
        }
        InitMode::TopCorrelation => {
            let corr = x.tr_matvec(y);
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
            let mut s = order[..k].to_vec();
            s.sort_unstable();
            let (v, _) = least_squares_on_support(x, y, &s);
            (s, v)
        }
        InitMode::ZeroPaddedRandom => {
            let s = rng::sample_subset(&mut sampler, p, k);
            let mut g = Normal::new(sampler);
            let v = (0..k).map(|_| g.sample()).collect();
            (s, v)
        }
    };
    let entries = support.into_iter().zip(values).map(|(i, v)| (i, if v == 0.0 || !v.is_finite() { 1e-6 } else { v }));
    SparseVector::new(p, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_beta_star, BetaKind, Dimensions, Instance};

    fn instance(n: usize, p: usize, k: usize, sigma2: f64, seed: u64) -> Instance {
        let dims = Dimensions::new(n, p, k, sigma2).unwrap();
        let b = sample_beta_star(p, k, BetaKind::Binary, 1.0, seed).unwrap();
        Instance::generate(dims, b, seed).unwrap()
    }

    fn brute_force(x: &Matrix, y: &[f64], beta: &SparseVector) -> Option<Move> {
        let mut best: Option<Move> = None;
        for &i in beta.support() {
            for j in 0..x.cols() {
                let mut b = beta.to_dense();
                b[i] = 0.0;
                let fit = x.matvec(&b);
                let r: Vec<f64> = y.iter().zip(&fit).map(|(a, c)| a - c).collect();
                let xj = x.column(j);
                let q = dot(&xj, &r) / norm_sq(&xj);
                let e: f64 = r.iter().zip(&xj).map(|(a, c)| (a - q * c).powi(2)).sum();
                if best.is_none_or(|m| e < m.new_sq) {
                    best = Some(Move { i, j, q, new_sq: e });
                }
            }
        }
        best
    }

    #[test]
    fn best_move_matches_triple_loop() {
        for seed in 0..10 {
            let inst = instance(40, 10, 2, 0.5, seed);
            let b0 = default_init(&inst.x, &inst.y, 2, InitMode::ZeroPaddedRandom, seed).unwrap();
            let st = LsaState::new(&inst.x, &inst.y, b0.clone()).unwrap();
            let fast = best_move(&st, &inst.x, &inst.y).unwrap();
            let slow = brute_force(&inst.x, &inst.y, &b0).unwrap();
            assert_eq!((fast.i, fast.j), (slow.i, slow.j));
            assert!((fast.q - slow.q).abs() < 1e-10);
            assert!((fast.new_sq - slow.new_sq).abs() < 1e-9 * slow.new_sq.max(1.0));
        }
    }

    #[test]
    fn exact_fit_makes_no_moves() {
        let inst = instance(30, 40, 3, 0.0, 3);
        let st = LsaState::new(&inst.x, &inst.y, inst.beta_star.clone()).unwrap();
        assert!(best_move(&st, &inst.x, &inst.y).unwrap().new_sq < 1e-12);
        let res = run_lsa(&inst.x, &inst.y, &inst.beta_star, &LsaOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.beta_hat, inst.beta_star);
        assert!(res.bound.is_infinite());
    }

    #[test]
    fn refit_move_has_closed_form() {
        // single column, so the only candidate is j = i
        let x = Matrix::from_row_major(3, 2, vec![1.0, 0.0, 2.0, 0.0, -1.0, 0.0]).unwrap();
        let y = [1.0, 1.0, 1.0];
        let b0 = SparseVector::new(2, [(0, 5.0)]).unwrap();
        let st = LsaState::new(&x, &y, b0).unwrap();
        let mv = best_move(&st, &x, &y).unwrap();
        assert_eq!((mv.i, mv.j), (0, 0));
        assert!((mv.q - 2.0 / 6.0).abs() < 1e-15);
        let mut st2 = st.clone();
        apply_move(&mut st2, &mv, &x);
        assert_eq!(st2.beta.support(), &[0]);
        assert!((st2.beta.get(0) - mv.q).abs() < 1e-15);
    }

    #[test]
    fn incremental_residual_matches_recomputation() {
        let inst = instance(60, 50, 4, 0.5, 11);
        let b0 = default_init(&inst.x, &inst.y, 4, InitMode::RandomSupport, 1).unwrap();
        let mut st = LsaState::new(&inst.x, &inst.y, b0).unwrap();
        for _ in 0..20 {
            let mv = best_move(&st, &inst.x, &inst.y).unwrap();
            let size = st.beta.nnz();
            let j_new = !st.beta.support().contains(&mv.j);
            apply_move(&mut st, &mv, &inst.x);
            if j_new && mv.q != 0.0 {
                assert_eq!(st.beta.nnz(), size);
            }
            let mut fresh = st.clone();
            fresh.refresh(&inst.x, &inst.y);
            let diff = st.residual.iter().zip(&fresh.residual).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-10);
        }
    }

    #[test]
    fn trace_is_strictly_decreasing_and_output_is_local_min() {
        for seed in 0..5 {
            let inst = instance(20, 16, 3, 0.5, seed);
            let b0 = default_init(&inst.x, &inst.y, 3, InitMode::ZeroPaddedRandom, seed).unwrap();
            let res = run_lsa(&inst.x, &inst.y, &b0, &LsaOptions::default()).unwrap();
            let mut prev = res.initial_residual_sq;
            for m in &res.trace {
                assert!(m.new_sq < prev);
                prev = m.new_sq;
            }
            assert_eq!(res.iterations, res.trace.len());
            if res.beta_hat.nnz() > 0 {
                let best = brute_force(&inst.x, &inst.y, &res.beta_hat).unwrap();
                assert!(best.new_sq >= res.final_residual_sq * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn bound_formula() {
        assert!((iteration_bound(10, 5000.0, 1.0, 500) - 400.0).abs() < 1e-12);
        assert!(iteration_bound(10, 5000.0, 0.0, 500).is_infinite());
    }

    #[test]
    fn empty_support_is_flagged() {
        let inst = instance(20, 10, 2, 0.5, 1);
        let res = run_lsa(&inst.x, &inst.y, &SparseVector::zeros(10), &LsaOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.warning.is_some());
    }

    #[test]
    fn cap_is_reported() {
        let inst = instance(40, 30, 3, 0.5, 2);
        let b0 = default_init(&inst.x, &inst.y, 3, InitMode::ZeroPaddedRandom, 9).unwrap();
        let opts = LsaOptions { max_iterations: 1, ..LsaOptions::default() };
        let res = run_lsa(&inst.x, &inst.y, &b0, &opts).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.hit_cap);
    }

    #[test]
    fn init_modes() {
        let inst = instance(40, 30, 3, 0.5, 5);
        for mode in [InitMode::RandomSupport, InitMode::TopCorrelation, InitMode::ZeroPaddedRandom] {
            let a = default_init(&inst.x, &inst.y, 3, mode, 7).unwrap();
            assert_eq!(a.nnz(), 3);
            assert_eq!(a, default_init(&inst.x, &inst.y, 3, mode, 7).unwrap());
            assert_eq!(mode, mode.to_string().parse().unwrap());
        }
        // orthogonal columns, noiseless: top correlations are exactly the support
        let mut x = Matrix::zeros(6, 6);
        for i in 0..6 {
            x.set(i, i, 1.0);
        }
        let y = [0.0, 2.0, 0.0, 0.0, 3.0, 0.0];
        let b = default_init(&x, &y, 2, InitMode::TopCorrelation, 0).unwrap();
        assert_eq!(b.support(), &[1, 4]);
        assert!((b.values()[0] - 2.0).abs() < 1e-12 && (b.values()[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_jsonl_lines() {
        let inst = instance(30, 20, 2, 0.5, 4);
        let b0 = default_init(&inst.x, &inst.y, 2, InitMode::ZeroPaddedRandom, 4).unwrap();
        let res = run_lsa(&inst.x, &inst.y, &b0, &LsaOptions::default()).unwrap();
        let mut buf = Vec::new();
        res.write_trace_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), res.iterations);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("residual_sq").is_some() && v.get("iter").is_some());
        }
    }
}
