//! Sweeps over sample sizes and seeds with reproducible CSV output.
//!
//! Trial `(n_index, seed_index)` uses the seed
//! `t = mix64(mix64(master_seed, n_index), seed_index)`; the signal, the
//! instance and the local-search start are drawn from `mix64(t, 1)`,
//! `mix64(t, 2)` and `mix64(t, 3)`. The CSV `seed` column holds `t`, so any row
//! can be regenerated on its own, and adding or removing methods never changes
//! the instances.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::lasso::{lambda_threshold, solve_lasso, LassoConfig};
use crate::lsa::{default_init, run_lsa, InitMode, LsaOptions};
use crate::model::{lambda_star, recovery_report, sample_beta_star, BetaKind, Dimensions, Instance};
use crate::rng::mix64;

pub const CSV_HEADER: &str = "seed,n,p,k,sigma2,method,lambda,l2_error,support_exact,overlap,stable,iterations,runtime_ms,error";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    LassoBox,
    Lsa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::LassoBox => "lasso_box",
            Self::Lsa => "lsa",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Self::Lasso),
            "lasso_box" => Ok(Self::LassoBox),
            "lsa" => Ok(Self::Lsa),
            other => param_err(format!("unknown method '{other}' (lasso | lasso_box | lsa)")),
        }
    }
}

/// Tuning parameter for the LASSO methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed(f64),
    /// `A σ √(log p / n)`.
    LambdaStar(f64),
    /// `(σ/√k) exp(−k log p / (5n))`.
    LambdaThreshold,
}

impl LambdaRule {
    pub fn value(&self, dims: &Dimensions) -> Result<f64> {
        match *self {
            Self::Fixed(v) => Ok(v),
            Self::LambdaStar(a) => Ok(lambda_star(a, dims.sigma(), dims.p, dims.n)),
            Self::LambdaThreshold => lambda_threshold(dims),
        }
    }
}

impl std::str::FromStr for LambdaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Parameter(format!("bad number '{v}' in lambda rule")));
        match s.split_once(':') {
            Some(("fixed", v)) => Ok(Self::Fixed(num(v)?)),
            Some(("lambda_star", v)) => Ok(Self::LambdaStar(num(v)?)),
            None if s == "lambda_threshold" => Ok(Self::LambdaThreshold),
            _ => param_err(format!("unknown lambda rule '{s}' (fixed:<x> | lambda_star:<A> | lambda_threshold)")),
        }
    }
}

impl std::fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "fixed:{v}"),
            Self::LambdaStar(a) => write!(f, "lambda_star:{a}"),
            Self::LambdaThreshold => f.write_str("lambda_threshold"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
    pub n_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub lambda_rule: LambdaRule,
    pub seeds: usize,
    pub master_seed: u64,
    pub stability_c: f64,
    pub beta_kind: BetaKind,
    pub lsa_init: InitMode,
    /// Wall-clock timings make output non-reproducible, so they are opt-in.
    pub record_runtime: bool,
}

impl GridSpec {
    pub fn new(p: usize, k: usize, sigma2: f64, n_values: Vec<usize>) -> Self {
        Self {
            p,
            k,
            sigma2,
            n_values,
            methods: vec![Method::Lasso, Method::LassoBox, Method::Lsa],
            lambda_rule: LambdaRule::LambdaStar(3.0),
            seeds: 10,
            master_seed: 0,
            stability_c: 1.0,
            beta_kind: BetaKind::Binary,
            lsa_init: InitMode::RandomSupport,
            record_runtime: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return param_err("n_values is empty");
        }
        for &n in &self.n_values {
            Dimensions::new(n, self.p, self.k, self.sigma2)?;
        }
        if self.seeds == 0 {
            return param_err("seeds must be at least 1");
        }
        if self.methods.is_empty() {
            return param_err("methods is empty");
        }
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        if m.len() != self.methods.len() {
            return param_err("methods contains duplicates");
        }
        if !(self.stability_c > 0.0) {
            return param_err("stability_c must be positive");
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 12] = [
        "p",
        "k",
        "sigma2",
        "n_values",
        "methods",
        "lambda_rule",
        "seeds",
        "master_seed",
        "stability_c",
        "beta_kind",
        "lsa_init",
        "record_runtime",
    ];

    /// Sets one field from its config-file spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Parameter(format!("invalid value '{v}' for {key}")))
        }
        let value = value.trim();
        match key {
            "p" => self.p = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "sigma2" => self.sigma2 = parse(key, value)?,
            "n_values" => {
                self.n_values = value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect::<Result<_>>()?
            }
            "methods" => self.methods = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            "lambda_rule" => self.lambda_rule = value.parse()?,
            "seeds" => self.seeds = parse(key, value)?,
            "master_seed" => self.master_seed = parse(key, value)?,
            "stability_c" => self.stability_c = parse(key, value)?,
            "beta_kind" => self.beta_kind = value.parse()?,
            "lsa_init" => self.lsa_init = value.parse()?,
            "record_runtime" => self.record_runtime = parse(key, value)?,
            other => return param_err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. `p`, `k`, `sigma2`
    /// and `n_values` are required.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut grid = Self::new(0, 0, f64::NAN, Vec::new());
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return param_err(format!("line {}: duplicate key '{key}'", lineno + 1));
            }
            grid.set(key, value).map_err(|e| Error::Parameter(format!("line {}: {e}", lineno + 1)))?;
        }
        for required in ["p", "k", "sigma2", "n_values"] {
            if !seen.contains(required) {
                return param_err(format!("missing required key '{required}'"));
            }
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn to_config(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "sigma2 = {:?}", self.sigma2);
        let _ = writeln!(s, "n_values = {}", join(self.n_values.iter().map(|n| n.to_string()).collect()));
        let _ = writeln!(s, "methods = {}", join(self.methods.iter().map(|m| m.name().to_string()).collect()));
        let _ = writeln!(s, "lambda_rule = {}", self.lambda_rule);
        let _ = writeln!(s, "seeds = {}", self.seeds);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "stability_c = {:?}", self.stability_c);
        let _ = writeln!(s, "beta_kind = {}", self.beta_kind);
        let _ = writeln!(s, "lsa_init = {}", self.lsa_init);
        let _ = writeln!(s, "record_runtime = {}", self.record_runtime);
        s
    }
}

pub fn trial_seed(master: u64, n_index: usize, seed_index: usize) -> u64 {
    mix64(mix64(master, n_index as u64), seed_index as u64)
}

/// Seeds for the signal, the instance and the local-search start of one trial.
pub fn derived_seeds(trial: u64) -> (u64, u64, u64) {
    (mix64(trial, 1), mix64(trial, 2), mix64(trial, 3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub seed_index: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
    pub method: Method,
    pub lambda: Option<f64>,
    pub l2_error: Option<f64>,
    pub support_exact: Option<bool>,
    pub overlap: Option<usize>,
    pub stable: Option<bool>,
    /// Sweeps for LASSO, accepted moves for local search.
    pub iterations: Option<usize>,
    pub runtime_ms: Option<f64>,
    pub error: Option<String>,
}

impl TrialRecord {
    fn blank(seed: u64, seed_index: usize, n: usize, grid: &GridSpec, method: Method) -> Self {
        Self {
            seed,
            seed_index,
            n,
            p: grid.p,
            k: grid.k,
            sigma2: grid.sigma2,
            method,
            lambda: None,
            l2_error: None,
            support_exact: None,
            overlap: None,
            stable: None,
            iterations: None,
            runtime_ms: None,
            error: None,
        }
    }

    pub fn csv_line(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let err = self.error.as_deref().unwrap_or("").replace([',', '\n', '\r'], " ");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.p,
            self.k,
            self.sigma2,
            self.method.name(),
            opt(&self.lambda),
            opt(&self.l2_error),
            opt(&self.support_exact),
            opt(&self.overlap),
            opt(&self.stable),
            opt(&self.iterations),
            opt(&self.runtime_ms),
            err
        )
    }
}

/// Generates the instance of one trial.
pub fn trial_instance(grid: &GridSpec, n: usize, trial: u64) -> Result<Instance> {
    let dims = Dimensions::new(n, grid.p, grid.k, grid.sigma2)?;
    let (beta_seed, inst_seed, _) = derived_seeds(trial);
    let beta = sample_beta_star(grid.p, grid.k, grid.beta_kind, 1.0, beta_seed)?;
    Instance::generate(dims, beta, inst_seed)
}

fn run_method(grid: &GridSpec, inst: &Instance, method: Method, init_seed: u64, rec: &mut TrialRecord) -> Result<()> {
    let dims = inst.dims;
    let start = Instant::now();
    let (beta_hat, iterations) = match method {
        Method::Lasso | Method::LassoBox => {
            let lambda = grid.lambda_rule.value(&dims)?;
            rec.lambda = Some(lambda);
            let cfg = LassoConfig::new(lambda).boxed(method == Method::LassoBox);
            let res = solve_lasso(&inst.x, &inst.y, &cfg)?;
            if !res.converged {
                rec.error = Some(format!("not converged after {} sweeps", res.sweeps));
            }
            (res.beta_hat, res.sweeps)
        }
        Method::Lsa => {
            let b0 = default_init(&inst.x, &inst.y, dims.k, grid.lsa_init, init_seed)?;
            let opts = LsaOptions { sigma2: Some(dims.sigma2), sparsity: Some(dims.k), ..LsaOptions::default() };
            let res = run_lsa(&inst.x, &inst.y, &b0, &opts)?;
            rec.error = res.warning.clone();
            (res.beta_hat.to_dense(), res.iterations)
        }
    };
    if grid.record_runtime {
        rec.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let report = recovery_report(&beta_hat, &inst.beta_star, dims.sigma(), grid.stability_c)?;
    rec.l2_error = Some(report.l2_error);
    rec.support_exact = Some(report.support_exact);
    rec.overlap = Some(report.overlap);
    rec.stable = Some(report.stable);
    rec.iterations = Some(iterations);
    Ok(())
}

fn run_trial(grid: &GridSpec, n_index: usize, seed_index: usize) -> Vec<TrialRecord> {
    let n = grid.n_values[n_index];
    let trial = trial_seed(grid.master_seed, n_index, seed_index);
    let (_, _, init_seed) = derived_seeds(trial);
    let inst = trial_instance(grid, n, trial);
    grid.methods
        .iter()
        .map(|&method| {
            let mut rec = TrialRecord::blank(trial, seed_index, n, grid, method);
            let outcome = inst.as_ref().map_err(|e| e.to_string()).and_then(|inst| {
                run_method(grid, inst, method, init_seed, &mut rec).map_err(|e| e.to_string())
            });
            if let Err(e) = outcome {
                rec.error = Some(e);
            }
            rec
        })
        .collect()
}

/// One record per `(n, seed, method)`, sorted by `n` index, seed index, then method.
pub fn run_phase_grid(grid: &GridSpec) -> Result<Vec<TrialRecord>> {
    grid.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..grid.n_values.len()).flat_map(|i| (0..grid.seeds).map(move |s| (i, s))).collect();
    let mut rows: Vec<(usize, TrialRecord)> = cells
        .par_iter()
        .flat_map_iter(|&(i, s)| run_trial(grid, i, s).into_iter().map(move |r| (i, r)))
        .collect();
    rows.sort_by(|a, b| (a.0, a.1.seed_index, a.1.method).cmp(&(b.0, b.1.seed_index, b.1.method)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_csv(records: &[TrialRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub method: Method,
    pub trials: usize,
    pub failed: usize,
    pub exact_rate: f64,
    pub stable_rate: f64,
    pub median_l2_error: f64,
    /// `exp(k log p / (5n)) σ`.
    pub lower_bound: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// Per `(n, method)` rates and medians over the rows that produced an estimate;
/// `stable` is recomputed as `l2_error ≤ stability_c · σ`.
pub fn summarize(records: &[TrialRecord], stability_c: f64) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return param_err("no records to summarize");
    }
    let mut keys: Vec<(usize, Method)> = records.iter().map(|r| (r.n, r.method)).collect();
    keys.sort();
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|(n, method)| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n && r.method == method).collect();
            let ok: Vec<&&TrialRecord> = group.iter().filter(|r| r.l2_error.is_some()).collect();
            let first = group[0];
            let sigma = first.sigma2.sqrt();
            let rate = |f: &dyn Fn(&TrialRecord) -> bool| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().filter(|r| f(r)).count() as f64 / ok.len() as f64
                }
            };
            let mut errs: Vec<f64> = ok.iter().filter_map(|r| r.l2_error).collect();
            SummaryRow {
                n,
                method,
                trials: group.len(),
                failed: group.len() - ok.len(),
                exact_rate: rate(&|r| r.support_exact == Some(true)),
                stable_rate: rate(&|r| r.l2_error.is_some_and(|e| e <= stability_c * sigma)),
                median_l2_error: median(&mut errs),
                lower_bound: crate::lasso::failure_lower_bound(sigma, first.k, first.p, n),
            }
        })
        .collect())
}

pub fn write_summary_csv(rows: &[SummaryRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "n,method,trials,failed,exact_rate,stable_rate,median_l2_error,lower_bound")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.method.name(),
            r.trials,
            r.failed,
            r.exact_rate,
            r.stable_rate,
            r.median_l2_error,
            r.lower_bound
        )?;
    }
    Ok(())
}

/// Scatter of `l2_error` against `n`, one colour per method.
pub fn write_svg(records: &[TrialRecord], mut out: impl Write) -> Result<()> {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let pts: Vec<(f64, f64, Method)> =
        records.iter().filter_map(|r| r.l2_error.map(|e| (r.n as f64, e, r.method))).collect();
    let (xmin, xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let ymax = pts.iter().fold(0.0f64, |a, p| a.max(p.1)).max(1e-12);
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let sx = |x: f64| m + (x - xmin) / span * (w - 2.0 * m);
    let sy = |y: f64| h - m - y / ymax * (h - 2.0 * m);
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#)?;
    writeln!(out, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m)?;
    writeln!(out, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m)?;
    writeln!(out, r#"<text x="{}" y="{}" font-size="12">n</text>"#, w / 2.0, h - 15.0)?;
    writeln!(out, r#"<text x="5" y="{}" font-size="12">l2 error (max {ymax:.3})</text>"#, m - 20.0)?;
    for (x, y, method) in pts {
        let colour = match method {
            Method::Lasso => "#1f77b4",
            Method::LassoBox => "#2ca02c",
            Method::Lsa => "#d62728",
        };
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}" fill-opacity="0.6"/>"#, sx(x), sy(y))?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
