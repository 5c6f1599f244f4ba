//! `sparsereg` command-line driver.
//!
//! Machine-readable output (JSON or CSV) goes to `--out` when given and to
//! standard output otherwise; the human-readable summary goes to standard
//! output when `--out` is given and to standard error otherwise. Auxiliary
//! files are written next to `--out` with a suffix (`<out>.json`,
//! `<out>.trace.jsonl`, ...), never elsewhere.
//!
//! Exit codes: 0 success, 2 usage or precondition error, 1 runtime failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use sparsereg::experiments::{self, derived_seeds, GridSpec, LambdaRule, Method, TrialRecord};
use sparsereg::landscape::{self, NoiseFitOptions, SearchMode};
use sparsereg::lasso::{self, LassoConfig};
use sparsereg::lsa::{self, InitMode, LsaOptions};
use sparsereg::model::{n_for_ratio, recovery_report, sample_beta_star, BetaKind, Thresholds};
use sparsereg::rng::{self, streams, Normal};
use sparsereg::{io, rip, Dimensions, Instance, Matrix, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "sparsereg", version, about = "Sparse linear regression: LASSO, local search and landscape diagnostics")]
struct Cli {
    /// Seed from which all randomness is derived.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides SPARSEREG_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Destination of the machine-readable output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and store it as a binary file with a JSON sidecar.
    Gen(InstanceArgs),
    /// Solve the (optionally box-constrained) LASSO.
    Lasso(LassoArgs),
    /// Run the best-single-swap local search.
    Lsa(LsaArgs),
    /// Overlap profile and overlap gap verdicts over a grid of radii.
    Ogp(OgpArgs),
    /// Enumerate non-trivial local minima of the support landscape.
    Localmin(LocalminArgs),
    /// Restricted isometry constant, or a quadratic-form concentration probe.
    Rip(RipArgs),
    /// Build the convex-mix certificate of LASSO failure.
    Certify(CertifyArgs),
    /// Best binary fit of a pure-noise target.
    NoiseFit(NoiseFitArgs),
    /// Sweep sample sizes, seeds and methods into a CSV table.
    Phase(PhaseArgs),
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Samples; defaults to ceil(2 k log p).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Noise variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value = "binary")]
    beta_kind: String,
    /// Smallest nonzero magnitude for `unit_min` signals.
    #[arg(long, default_value_t = 1.0)]
    min_magnitude: f64,
    /// Load the instance from a file written by `gen` instead of generating one.
    #[arg(long, conflicts_with_all = ["n", "p", "k"])]
    instance: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LassoArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// Fixed tuning parameter (overrides --lambda-rule).
    #[arg(long)]
    lambda: Option<f64>,
    /// fixed:<x> | lambda_star:<A> | lambda_threshold
    #[arg(long, default_value = "lambda_star:3")]
    lambda_rule: String,
    /// Restrict to [0,1]^p.
    #[arg(long = "box")]
    box_constrained: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
}

#[derive(Args, Debug)]
struct LsaArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// random_support | top_correlation | zero_padded_random
    #[arg(long, default_value = "random_support")]
    init: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: usize,
    /// Write the accepted moves to <out>.trace.jsonl.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct OgpArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// Enumerate every support (otherwise sample).
    #[arg(long)]
    exact: bool,
    /// Largest number of supports enumerated in exact mode.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
    /// Sampled supports per overlap level.
    #[arg(long, default_value_t = 1000)]
    samples: u128,
    /// Number of log-spaced radii in [0.5|W|, 4|W|].
    #[arg(long, default_value_t = 40)]
    r_grid: usize,
    /// Also write the overlap profile to <out>.profile.csv.
    #[arg(long)]
    profile: bool,
}

#[derive(Args, Debug)]
struct LocalminArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
}

#[derive(Args, Debug)]
struct RipArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Sparsity order of the constant.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    exact: bool,
    /// Enumeration limit (exact) or number of sampled supports.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
    /// Run the quadratic-form concentration probe instead.
    #[arg(long)]
    probe: bool,
    /// Block size of the probe matrix [[I, gI], [gI, 0]].
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    /// Comma-separated deviations t.
    #[arg(long, default_value = "1,2,5,10,20")]
    t_grid: String,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    /// Greedy search instead of exhaustive enumeration.
    #[arg(long)]
    greedy: bool,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
}

#[derive(Args, Debug)]
struct NoiseFitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k_prime: usize,
    /// Variance of the Gaussian target entries.
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Constant c of the reference bound.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    greedy: bool,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    /// Grid file with key = value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective grid as a config file and exit.
    #[arg(long)]
    dump_config: bool,
    /// Also write per-(n, method) summary to <out>.summary.csv.
    #[arg(long)]
    summary: bool,
    /// Also write an SVG scatter to <out>.svg.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long)]
    n_values: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    lambda_rule: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    master_seed: Option<String>,
    #[arg(long)]
    stability_c: Option<String>,
    #[arg(long)]
    beta_kind: Option<String>,
    #[arg(long)]
    lsa_init: Option<String>,
    #[arg(long)]
    record_runtime: Option<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<sparsereg::Error> for Failure {
    fn from(e: sparsereg::Error) -> Self {
        use sparsereg::Error::*;
        match e {
            Dimension(_) | Parameter(_) | BudgetExceeded { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

struct Sink {
    out: Option<PathBuf>,
    summary: String,
}

impl Sink {
    fn machine(&self, bytes: &[u8]) -> CliResult<()> {
        match &self.out {
            Some(path) => std::fs::write(path, bytes)?,
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    fn aux(&self, suffix: &str, flag: &str) -> CliResult<PathBuf> {
        match &self.out {
            Some(path) => {
                let mut s = path.as_os_str().to_owned();
                s.push(suffix);
                Ok(PathBuf::from(s))
            }
            None => usage(format!("{flag} needs --out")),
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }

    fn flush_summary(&self) {
        if self.out.is_some() {
            print!("{}", self.summary);
        } else {
            eprint!("{}", self.summary);
        }
    }
}

fn json_report(command: &str, seed: Option<u64>, body: impl Serialize) -> CliResult<Vec<u8>> {
    let mut map = Map::new();
    map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    map.insert("command".into(), Value::from(command));
    if let Some(s) = seed {
        map.insert("seed".into(), Value::from(s));
    }
    match serde_json::to_value(body)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("report".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(map))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn parse_flag<T: std::str::FromStr>(flag: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
}

fn resolve_instance(args: &InstanceArgs, seed: u64) -> CliResult<Instance> {
    if let Some(path) = &args.instance {
        return Ok(io::read_instance(path)?);
    }
    let p = args.p.ok_or_else(|| Failure::Usage("--p is required (or --instance)".into()))?;
    let k = args.k.ok_or_else(|| Failure::Usage("--k is required (or --instance)".into()))?;
    if k == 0 || k > p {
        return usage(format!("--k = {k} must lie in [1, --p = {p}]"));
    }
    let n = args.n.unwrap_or_else(|| n_for_ratio(2.0, k, p).max(k + 1));
    let dims = Dimensions::new(n, p, k, args.sigma2).map_err(|e| Failure::Usage(format!("--n/--p/--k/--sigma2: {e}")))?;
    let kind: BetaKind = parse_flag("beta-kind", &args.beta_kind)?;
    let (beta_seed, inst_seed, _) = derived_seeds(seed);
    let beta = sample_beta_star(p, k, kind, args.min_magnitude, beta_seed)
        .map_err(|e| Failure::Usage(format!("--beta-kind/--min-magnitude: {e}")))?;
    Ok(Instance::generate(dims, beta, inst_seed)?)
}

fn describe(sink: &mut Sink, inst: &Instance) {
    let d = inst.dims;
    let t = Thresholds::of(&d);
    let n_star = t.n_star.map(|v| format!("{v:.2}")).unwrap_or_else(|| "inf".into());
    sink.line(format!(
        "instance: n = {}, p = {}, k = {}, sigma2 = {}, seed = {}; n* = {n_star}, n_alg = {:.2}",
        d.n, d.p, d.k, d.sigma2, inst.seed, t.n_alg
    ));
}

fn one_row_csv(rec: &TrialRecord) -> Vec<u8> {
    format!("{}\n{}\n", experiments::CSV_HEADER, rec.csv_line()).into_bytes()
}

fn cmd_gen(args: &InstanceArgs, seed: u64, sink: &mut Sink, format: Option<Format>) -> CliResult<()> {
    if format.is_some() {
        return usage("--format does not apply to gen (binary file plus JSON sidecar)");
    }
    let path = sink.out.clone().ok_or_else(|| Failure::Usage("gen needs --out".into()))?;
    let inst = resolve_instance(args, seed)?;
    let sum = io::write_instance(&path, &inst)?;
    describe(sink, &inst);
    sink.line(format!("wrote {} (fnv1a64 {sum:016x}) and its .json sidecar", path.display()));
    Ok(())
}

#[derive(Serialize)]
struct LassoReport {
    dims: Dimensions,
    instance_seed: u64,
    lambda: f64,
    box_constrained: bool,
    sweeps: usize,
    converged: bool,
    kkt_residual: f64,
    objective: f64,
    beta_hat: sparsereg::SparseVector,
    l2_error: f64,
    support_exact: bool,
    overlap: usize,
    stable: bool,
}

fn cmd_lasso(a: &LassoArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    let inst = resolve_instance(&a.inst, seed)?;
    let lambda = match a.lambda {
        Some(l) => l,
        None => parse_flag::<LambdaRule>("lambda-rule", &a.lambda_rule)?
            .value(&inst.dims)
            .map_err(|e| Failure::Usage(format!("--lambda-rule: {e}")))?,
    };
    let cfg = LassoConfig { lambda, box_constrained: a.box_constrained, tol: a.tol, max_sweeps: a.max_sweeps };
    let res = lasso::solve_lasso(&inst.x, &inst.y, &cfg).map_err(|e| match e {
        sparsereg::Error::Parameter(m) => Failure::Usage(format!("--lambda/--tol/--max-sweeps: {m}")),
        other => other.into(),
    })?;
    let rep = recovery_report(&res.beta_hat, &inst.beta_star, inst.dims.sigma(), 1.0)?;
    describe(sink, &inst);
    sink.line(format!(
        "lasso{}: lambda = {lambda:.6}, sweeps = {}, converged = {}, kkt = {:.3e}, l2 error = {:.6}, support exact = {}",
        if a.box_constrained { " (box)" } else { "" },
        res.sweeps,
        res.converged,
        res.kkt_residual,
        rep.l2_error,
        rep.support_exact
    ));
    let method = if a.box_constrained { Method::LassoBox } else { Method::Lasso };
    match format {
        Format::Json => sink.machine(&json_report(
            "lasso",
            Some(seed),
            LassoReport {
                dims: inst.dims,
                instance_seed: inst.seed,
                lambda,
                box_constrained: a.box_constrained,
                sweeps: res.sweeps,
                converged: res.converged,
                kkt_residual: res.kkt_residual,
                objective: res.objective(),
                beta_hat: res.to_sparse(),
                l2_error: rep.l2_error,
                support_exact: rep.support_exact,
                overlap: rep.overlap,
                stable: rep.stable,
            },
        )?),
        Format::Csv => {
            let rec = TrialRecord {
                seed,
                seed_index: 0,
                n: inst.dims.n,
                p: inst.dims.p,
                k: inst.dims.k,
                sigma2: inst.dims.sigma2,
                method,
                lambda: Some(lambda),
                l2_error: Some(rep.l2_error),
                support_exact: Some(rep.support_exact),
                overlap: Some(rep.overlap),
                stable: Some(rep.stable),
                iterations: Some(res.sweeps),
                runtime_ms: None,
                error: (!res.converged).then(|| "not converged".to_string()),
            };
            sink.machine(&one_row_csv(&rec))
        }
    }
}

#[derive(Serialize)]
struct LsaReport {
    dims: Dimensions,
    instance_seed: u64,
    init: String,
    iterations: usize,
    bound: Option<f64>,
    hit_cap: bool,
    initial_residual_sq: f64,
    final_residual_sq: f64,
    beta_hat: sparsereg::SparseVector,
    l2_error: f64,
    support_exact: bool,
    overlap: usize,
    stable: bool,
    warning: Option<String>,
}

fn cmd_lsa(a: &LsaArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    let inst = resolve_instance(&a.inst, seed)?;
    let mode: InitMode = parse_flag("init", &a.init)?;
    if a.max_iterations == 0 {
        return usage("--max-iterations must be at least 1");
    }
    let trace_path = if a.trace { Some(sink.aux(".trace.jsonl", "--trace")?) } else { None };
    let (_, _, init_seed) = derived_seeds(seed);
    let k = inst.dims.k;
    let b0 = lsa::default_init(&inst.x, &inst.y, k, mode, init_seed)?;
    let opts = LsaOptions {
        max_iterations: a.max_iterations,
        sigma2: Some(inst.dims.sigma2),
        sparsity: Some(k),
        ..LsaOptions::default()
    };
    let res = lsa::run_lsa(&inst.x, &inst.y, &b0, &opts)?;
    let rep = recovery_report(&res.beta_hat.to_dense(), &inst.beta_star, inst.dims.sigma(), 1.0)?;
    if let Some(path) = trace_path {
        let mut buf = Vec::new();
        res.write_trace_jsonl(&mut buf)?;
        std::fs::write(path, buf)?;
    }
    describe(sink, &inst);
    sink.line(format!(
        "lsa ({mode}): iterations = {}, bound = {:.1}, l2 error = {:.6}, support exact = {}",
        res.iterations, res.bound, rep.l2_error, rep.support_exact
    ));
    if let Some(w) = &res.warning {
        sink.line(format!("warning: {w}"));
    }
    match format {
        Format::Json => sink.machine(&json_report(
            "lsa",
            Some(seed),
            LsaReport {
                dims: inst.dims,
                instance_seed: inst.seed,
                init: mode.to_string(),
                iterations: res.iterations,
                bound: res.bound.is_finite().then_some(res.bound),
                hit_cap: res.hit_cap,
                initial_residual_sq: res.initial_residual_sq,
                final_residual_sq: res.final_residual_sq,
                beta_hat: res.beta_hat.clone(),
                l2_error: rep.l2_error,
                support_exact: rep.support_exact,
                overlap: rep.overlap,
                stable: rep.stable,
                warning: res.warning.clone(),
            },
        )?),
        Format::Csv => {
            let rec = TrialRecord {
                seed,
                seed_index: 0,
                n: inst.dims.n,
                p: inst.dims.p,
                k: inst.dims.k,
                sigma2: inst.dims.sigma2,
                method: Method::Lsa,
                lambda: None,
                l2_error: Some(rep.l2_error),
                support_exact: Some(rep.support_exact),
                overlap: Some(rep.overlap),
                stable: Some(rep.stable),
                iterations: Some(res.iterations),
                runtime_ms: None,
                error: res.warning.clone(),
            };
            sink.machine(&one_row_csv(&rec))
        }
    }
}

fn cmd_ogp(a: &OgpArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    let inst = resolve_instance(&a.inst, seed)?;
    inst.dims.require_landscape().map_err(|e| Failure::Usage(format!("--k: {e}")))?;
    if a.r_grid == 0 {
        return usage("--r-grid must be at least 1");
    }
    let (mode, budget) = if a.exact { (SearchMode::Exact, a.budget) } else { (SearchMode::Sampled, a.samples) };
    let profile = landscape::overlap_profile(&inst, mode, budget, rng::mix64(seed, 4)).map_err(|e| match e {
        sparsereg::Error::BudgetExceeded { needed, budget } => {
            Failure::Usage(format!("--budget: exact enumeration needs {needed} supports, budget is {budget}"))
        }
        other => other.into(),
    })?;
    let w = inst.noise_norm();
    let at_truth = inst.residual_norm(&inst.beta_star);
    if !(w > 0.0) {
        return usage("--sigma2 must be positive: the radius grid is built from the noise norm");
    }
    let reports = landscape::ogp_scan(&profile, at_truth, &landscape::r_grid(w, a.r_grid))?;
    if a.profile {
        let mut buf = Vec::new();
        profile.write_csv(&mut buf)?;
        std::fs::write(sink.aux(".profile.csv", "--profile")?, buf)?;
    }
    describe(sink, &inst);
    sink.line(format!("overlap profile ({}):", if profile.exact { "exact" } else { "sampled" }));
    for level in profile.levels.iter().flatten() {
        sink.line(format!("  overlap {}: min residual {:.6} at {:?}", level.overlap, level.min_residual, level.argmin_support));
    }
    let holds = reports.iter().filter(|r| r.holds).count();
    sink.line(format!("|W| = {w:.6}; gap holds at {holds} of {} radii", reports.len()));
    match format {
        Format::Json => {
            let mut items = Vec::with_capacity(reports.len());
            for r in &reports {
                let mut map = Map::new();
                map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
                if let Value::Object(fields) = serde_json::to_value(r)? {
                    map.extend(fields);
                }
                items.push(Value::Object(map));
            }
            let mut text = serde_json::to_string_pretty(&Value::Array(items))?;
            text.push('\n');
            sink.machine(text.as_bytes())
        }
        Format::Csv => {
            let mut s = String::from("r,verdict,holds,zeta1,zeta2,gap_start,gap_end\n");
            for r in &reports {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let (g1, g2) = r.gap_levels.map(|(a, b)| (a.to_string(), b.to_string())).unwrap_or_default();
                let verdict = serde_json::to_value(r.verdict)?;
                let _ = writeln!(s, "{},{},{},{},{},{g1},{g2}", r.r, verdict.as_str().unwrap_or(""), r.holds, opt(r.zeta1), opt(r.zeta2));
            }
            sink.machine(s.as_bytes())
        }
    }
}

fn cmd_localmin(a: &LocalminArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    let inst = resolve_instance(&a.inst, seed)?;
    let minima = landscape::find_nontrivial_local_minima(&inst, a.budget).map_err(|e| match e {
        sparsereg::Error::BudgetExceeded { needed, budget } => {
            Failure::Usage(format!("--budget: enumeration needs {needed} supports, budget is {budget}"))
        }
        other => other.into(),
    })?;
    describe(sink, &inst);
    sink.line(format!("non-trivial local minima: {}", minima.len()));
    for m in minima.iter().take(20) {
        sink.line(format!("  {:?}: residual {:.6}", m.support, m.residual));
    }
    match format {
        Format::Json => sink.machine(&json_report("localmin", Some(seed), serde_json::json!({ "minima": minima }))?),
        Format::Csv => {
            let mut s = String::from("support,residual\n");
            for m in &minima {
                let sup: Vec<String> = m.support.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(s, "{},{}", sup.join(";"), m.residual);
            }
            sink.machine(s.as_bytes())
        }
    }
}

fn gaussian_design(n: usize, p: usize, seed: u64) -> CliResult<Matrix> {
    let mut data = vec![0.0; n * p];
    Normal::new(rng::stream(seed, streams::DESIGN)).fill(&mut data);
    Ok(Matrix::from_row_major(n, p, data)?)
}

fn cmd_rip(a: &RipArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    if a.probe {
        if a.m == 0 {
            return usage("--m must be at least 1");
        }
        let grid: Vec<f64> = a
            .t_grid
            .split(',')
            .map(|t| parse_flag::<f64>("t-grid", t.trim()))
            .collect::<CliResult<_>>()?;
        let mat = rip::kronecker_block_matrix(a.m, a.gamma);
        let probe = rip::quadratic_form_probe(&mat, a.trials, &grid, seed)
            .map_err(|e| Failure::Usage(format!("--trials/--gamma: {e}")))?;
        sink.line(format!(
            "quadratic-form probe: 2m = {}, gamma = {}, trials = {}, |A|_F = {:.6}, |A| = {:.6}, mean = {:.4} (trace {})",
            2 * a.m,
            a.gamma,
            a.trials,
            probe.frobenius,
            probe.opnorm,
            probe.mean,
            probe.trace
        ));
        return match format {
            Format::Csv => {
                let mut buf = Vec::new();
                probe.write_csv(&mut buf)?;
                sink.machine(&buf)
            }
            Format::Json => sink.machine(&json_report("rip", Some(seed), &probe)?),
        };
    }
    let p = a.p.ok_or_else(|| Failure::Usage("--p is required".into()))?;
    let k = a.k.ok_or_else(|| Failure::Usage("--k is required".into()))?;
    let n = a.n.ok_or_else(|| Failure::Usage("--n is required".into()))?;
    if k == 0 || k > p || n == 0 {
        return usage(format!("need --n >= 1 and 1 <= --k <= --p (got n = {n}, p = {p}, k = {k})"));
    }
    let x = gaussian_design(n, p, seed)?;
    let mode = if a.exact { SearchMode::Exact } else { SearchMode::Sampled };
    let est = rip::rip_constant(&x, k, mode, a.budget, rng::mix64(seed, 4)).map_err(|e| match e {
        sparsereg::Error::BudgetExceeded { needed, budget } => {
            Failure::Usage(format!("--budget: exact enumeration needs {needed} supports, budget is {budget}"))
        }
        other => other.into(),
    })?;
    sink.line(format!(
        "delta_{k} = {:.6} ({}, {} supports) on a {n}x{p} Gaussian design",
        est.delta,
        if est.exact { "exact" } else { "sampled lower bound" },
        est.supports_checked
    ));
    match format {
        Format::Json => sink.machine(&json_report("rip", Some(seed), &est)?),
        Format::Csv => usage("--format csv is only available with --probe for rip"),
    }
}

fn cmd_certify(a: &CertifyArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    if format == Format::Csv {
        return usage("--format csv is not available for certify");
    }
    let inst = resolve_instance(&a.inst, seed)?;
    let mode = if a.greedy { SearchMode::Sampled } else { SearchMode::Exact };
    let rep = landscape::build_certificate(&inst, mode, a.budget).map_err(|e| match e {
        sparsereg::Error::BudgetExceeded { needed, budget } => {
            Failure::Usage(format!("--budget: exhaustive search needs {needed} subsets, budget is {budget}"))
        }
        sparsereg::Error::Parameter(m) => Failure::Usage(format!("--k/--beta-kind: {m}")),
        other => other.into(),
    })?;
    describe(sink, &inst);
    sink.line(format!(
        "certificate: C1 = {:.6}, lambda_mix = {:.6}, |alpha|_1 = {:.6} (target {:.6}), scaled residual = {:.6} vs sigma = {:.6}, valid = {}",
        rep.c1, rep.lambda_mix, rep.l1_norm, rep.l1_target, rep.scaled_residual, rep.sigma, rep.valid
    ));
    if let Some(r) = &rep.reason {
        sink.line(format!("reason: {r}"));
    }
    sink.machine(&json_report("certify", Some(seed), &rep)?)
}

fn cmd_noise_fit(a: &NoiseFitArgs, seed: u64, sink: &mut Sink, format: Format) -> CliResult<()> {
    if format == Format::Csv {
        return usage("--format csv is not available for noise-fit");
    }
    if !(a.variance >= 0.0 && a.variance.is_finite()) {
        return usage("--variance must be finite and nonnegative");
    }
    if a.n == 0 || a.p == 0 {
        return usage("--n and --p must be positive");
    }
    let x = gaussian_design(a.n, a.p, seed)?;
    let mut g = Normal::new(rng::stream(seed, streams::NOISE));
    let sd = a.variance.sqrt();
    let target: Vec<f64> = (0..a.n).map(|_| sd * g.sample()).collect();
    let opts = NoiseFitOptions {
        mode: if a.greedy { SearchMode::Sampled } else { SearchMode::Exact },
        budget: a.budget,
        c: a.c,
        variance: Some(a.variance),
        candidates: None,
    };
    let fit = landscape::pure_noise_best_fit(&target, &x, a.k_prime, &opts).map_err(|e| match e {
        sparsereg::Error::BudgetExceeded { needed, budget } => {
            Failure::Usage(format!("--budget: exhaustive search needs {needed} subsets, budget is {budget}"))
        }
        sparsereg::Error::Parameter(m) => Failure::Usage(format!("--k-prime/--c: {m}")),
        other => other.into(),
    })?;
    sink.line(format!(
        "pure-noise fit ({}): support {:?}, scaled residual {:.6}, reference bound {:.6}",
        if fit.exact { "exact" } else { "greedy" },
        fit.beta_binary.support(),
        fit.scaled_residual,
        fit.reference_bound
    ));
    sink.machine(&json_report("noise-fit", Some(seed), &fit)?)
}

fn build_grid(a: &PhaseArgs, seed: Option<u64>) -> CliResult<GridSpec> {
    let mut grid = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
            // overrides may supply required keys, so parse leniently first
            let mut g = GridSpec::new(0, 0, f64::NAN, Vec::new());
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("--config line {}: expected key = value", lineno + 1)))?;
                g.set(key.trim(), value).map_err(|e| Failure::Usage(format!("--config line {}: {e}", lineno + 1)))?;
            }
            g
        }
        None => GridSpec::new(0, 0, f64::NAN, Vec::new()),
    };
    let overrides = [
        ("p", &a.p),
        ("k", &a.k),
        ("sigma2", &a.sigma2),
        ("n_values", &a.n_values),
        ("methods", &a.methods),
        ("lambda_rule", &a.lambda_rule),
        ("seeds", &a.seeds),
        ("master_seed", &a.master_seed),
        ("stability_c", &a.stability_c),
        ("beta_kind", &a.beta_kind),
        ("lsa_init", &a.lsa_init),
        ("record_runtime", &a.record_runtime),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            grid.set(key, v).map_err(|e| Failure::Usage(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    if let Some(s) = seed {
        if a.master_seed.as_deref().is_some_and(|m| m.trim() != s.to_string()) {
            return usage("--seed and --master-seed disagree");
        }
        grid.master_seed = s;
    }
    if grid.p == 0 || grid.k == 0 || grid.sigma2.is_nan() || grid.n_values.is_empty() {
        return usage("phase needs p, k, sigma2 and n_values (from --config or flags)");
    }
    grid.validate().map_err(|e| Failure::Usage(format!("grid: {e}")))?;
    Ok(grid)
}

fn cmd_phase(a: &PhaseArgs, seed: Option<u64>, sink: &mut Sink, format: Format) -> CliResult<()> {
    let grid = build_grid(a, seed)?;
    if a.dump_config {
        return sink.machine(grid.to_config().as_bytes());
    }
    let summary_path = if a.summary { Some(sink.aux(".summary.csv", "--summary")?) } else { None };
    let svg_path = if a.svg { Some(sink.aux(".svg", "--svg")?) } else { None };
    let records = experiments::run_phase_grid(&grid)?;
    let rows = experiments::summarize(&records, grid.stability_c)?;
    sink.line(format!(
        "phase grid: p = {}, k = {}, sigma2 = {}, {} sample sizes x {} seeds x {} methods = {} rows",
        grid.p,
        grid.k,
        grid.sigma2,
        grid.n_values.len(),
        grid.seeds,
        grid.methods.len(),
        records.len()
    ));
    sink.line(format!("{:>7} {:>10} {:>7} {:>7} {:>12} {:>12}", "n", "method", "exact", "stable", "median_l2", "lower_bound"));
    for r in &rows {
        sink.line(format!(
            "{:>7} {:>10} {:>7.3} {:>7.3} {:>12.6} {:>12.6}",
            r.n,
            r.method.name(),
            r.exact_rate,
            r.stable_rate,
            r.median_l2_error,
            r.lower_bound
        ));
    }
    let failed = records.iter().filter(|r| r.l2_error.is_none()).count();
    if failed > 0 {
        sink.line(format!("{failed} rows failed; see the error column"));
    }
    if let Some(path) = summary_path {
        let mut buf = Vec::new();
        experiments::write_summary_csv(&rows, &mut buf)?;
        std::fs::write(path, buf)?;
    }
    if let Some(path) = svg_path {
        let mut buf = Vec::new();
        experiments::write_svg(&records, &mut buf)?;
        std::fs::write(path, buf)?;
    }
    let mut buf = Vec::new();
    match format {
        Format::Csv => experiments::write_csv(&records, &mut buf)?,
        Format::Json => {
            buf = json_report("phase", Some(grid.master_seed), serde_json::json!({ "grid": grid, "records": records }))?;
        }
    }
    sink.machine(&buf)
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(0) => return usage("--threads must be at least 1"),
        Some(t) => Some(t),
        None => match std::env::var("SPARSEREG_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&t| t > 0)
                    .ok_or_else(|| Failure::Usage(format!("SPARSEREG_THREADS = '{v}' is not a positive integer")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<String> {
    configure_threads(cli.threads)?;
    if let Some(out) = &cli.out {
        if out.as_os_str().is_empty() || out.is_dir() {
            return usage(format!("--out {} must name a file", out.display()));
        }
        ensure_parent(out)?;
    }
    let seed = cli.seed.unwrap_or(0);
    let mut sink = Sink { out: cli.out.clone(), summary: String::new() };
    let json = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, seed, &mut sink, cli.format)?,
        Command::Lasso(a) => cmd_lasso(a, seed, &mut sink, json)?,
        Command::Lsa(a) => cmd_lsa(a, seed, &mut sink, json)?,
        Command::Ogp(a) => cmd_ogp(a, seed, &mut sink, json)?,
        Command::Localmin(a) => cmd_localmin(a, seed, &mut sink, json)?,
        Command::Rip(a) => cmd_rip(a, seed, &mut sink, json)?,
        Command::Certify(a) => cmd_certify(a, seed, &mut sink, json)?,
        Command::NoiseFit(a) => cmd_noise_fit(a, seed, &mut sink, json)?,
        Command::Phase(a) => cmd_phase(a, cli.seed, &mut sink, cli.format.unwrap_or(Format::Csv))?,
    }
    Ok(sink.summary.clone()).inspect(|_| sink.flush_summary())
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.exists() => {
            usage(format!("--out {}: directory {} does not exist", path.display(), dir.display()))
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
