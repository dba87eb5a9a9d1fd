//! Command-line front end. Exit codes: 0 success, 1 input error, 2 numerical
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use numsolve_core::oracle::{self, OracleError, OracleResult};
use numsolve_core::solvers::{CBound, StepSize};
use numsolve_core::{
    InitPoint, ProblemError, ProblemInstance, SolverError, SolverKind, TopologyError, TraceStride,
    UtilityParams,
};
use sha2::{Digest, Sha256};

use crate::bench::{
    self, BenchError, ExperimentSpec, FlowSource, ReferencePolicy, TimingOptions,
};
use crate::formats::{self, fmt_f64, KeyValues};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "numsolve", version, about = "Smooth penalized network utility maximization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver and print its trace as CSV.
    Solve(SolveArgs),
    /// Compute an exact optimum of a small instance.
    Oracle(OracleArgs),
    /// Run several solvers on one instance and write traces plus a sidecar.
    Compare(ExperimentArgs),
    /// Like compare, followed by a per-iteration timing sweep
    /// (default flow counts 100, 1000, 10000).
    Bench(ExperimentArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InstanceArgs {
    /// Edge list: `<src> <dst> <capacity>` per line.
    #[arg(long, value_name = "PATH")]
    pub topology: Option<PathBuf>,
    /// Fairness parameter [default: 1].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_nonneg)]
    pub alpha: Option<f64>,
    /// Utility offset [default: 0.5].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_nonneg)]
    pub xi: Option<f64>,
    /// Penalty weight [default: 2].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_positive)]
    pub mu: Option<f64>,
    /// `all_pairs` or a sampled flow count [default: all_pairs].
    #[arg(long, value_parser = parse_flows)]
    pub flows: Option<FlowsArg>,
    /// Flow list `<src> <dst>` per line; overrides --flows.
    #[arg(long, value_name = "PATH")]
    pub flows_file: Option<PathBuf>,
    /// Routing matrix (`E d` header, then `<e> <s> <value>`); overrides --flows.
    #[arg(long, value_name = "PATH")]
    pub routing: Option<PathBuf>,
    /// Seed for sampled flows [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale capacities so the largest equals this, or `none` [default: 100].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_cap_max)]
    pub cap_max: Option<CapMax>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Iteration budget T.
    #[arg(long)]
    pub iters: Option<usize>,
    /// `auto` or a fixed step size [default: auto].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_step)]
    pub step: Option<StepSize>,
    /// Exp-NUM rate bound: `auto` (sum of capacities) or a number [default: auto].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_c_bound)]
    pub c_bound: Option<CBound>,
    /// `auto`, `zeros`, `barycenter` or comma-separated rates [default: auto].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_init)]
    pub init: Option<InitPoint>,
    /// Record every k-th iterate (the last is always recorded) [default: 1].
    #[arg(long, value_parser = parse_stride)]
    pub trace_stride: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// pgd, pgd-lipschitz, expnum, agm, agm-fr or agm-gr.
    #[arg(long, value_parser = parse_solver)]
    pub solver: Option<SolverKind>,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// Write the trace here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChoice {
    Auto,
    Analytic,
    Vertex,
    Grid,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// auto, analytic, vertex or grid [default: auto].
    #[arg(long, value_parser = parse_method)]
    pub method: Option<OracleChoice>,
    /// Grid cell diameter at which refinement stops [default: 1e-6].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_positive)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// `key = value` file mirroring these flags; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Comma-separated solver names [default: pgd,expnum,agm,agm-fr].
    #[arg(long, alias = "solver", value_parser = parse_solver_list)]
    pub solvers: Option<SolverList>,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    /// `best_of_runs` or `oracle` [default: best_of_runs].
    #[arg(long, value_parser = parse_reference)]
    pub reference: Option<ReferencePolicy>,
    /// Budget multiplier of the extra AGM-fr reference run; 0 disables it [default: 10].
    #[arg(long)]
    pub reference_budget: Option<usize>,
    /// Grid tolerance for the oracle reference [default: 1e-6].
    #[arg(long, allow_hyphen_values = true, value_parser = parse_positive)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated sampled flow counts for the timing sweep.
    #[arg(long, value_parser = parse_counts)]
    pub flow_counts: Option<Counts>,
    /// Measured iterations per timing run [default: 1000].
    #[arg(long)]
    pub timing_iters: Option<usize>,
    /// Warmup iterations before timing [default: 100].
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Timed repetitions; the fastest counts [default: 3].
    #[arg(long)]
    pub repeats: Option<usize>,
}

/// A comma-separated list given as one flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverList(pub Vec<SolverKind>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowsArg {
    AllPairs,
    Sampled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapMax {
    Scale(f64),
    Keep,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_nonneg(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be nonnegative"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_stride(s: &str) -> Result<usize, String> {
    match parse_count(s)? {
        0 => Err("stride must be at least 1".into()),
        k => Ok(k),
    }
}

fn parse_flows(s: &str) -> Result<FlowsArg, String> {
    match s.trim() {
        "all_pairs" | "all-pairs" => Ok(FlowsArg::AllPairs),
        other => match parse_count(other) {
            Ok(0) | Err(_) => Err(format!("`{s}` is neither all_pairs nor a positive count")),
            Ok(n) => Ok(FlowsArg::Sampled(n)),
        },
    }
}

fn parse_cap_max(s: &str) -> Result<CapMax, String> {
    match s.trim() {
        "none" => Ok(CapMax::Keep),
        other => parse_positive(other).map(CapMax::Scale),
    }
}

fn parse_step(s: &str) -> Result<StepSize, String> {
    match s.trim() {
        "auto" => Ok(StepSize::Auto),
        other => parse_nonneg(other).map(StepSize::Fixed),
    }
}

fn parse_c_bound(s: &str) -> Result<CBound, String> {
    match s.trim() {
        "auto" => Ok(CBound::Auto),
        other => parse_positive(other).map(CBound::Fixed),
    }
}

fn parse_init(s: &str) -> Result<InitPoint, String> {
    match s.trim() {
        "auto" => Ok(InitPoint::Auto),
        "zeros" => Ok(InitPoint::Zeros),
        "barycenter" => Ok(InitPoint::ExpNumBarycenter),
        list => list.split(',').map(parse_nonneg).collect::<Result<_, _>>().map(InitPoint::Explicit),
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    let name = s.trim().replace('_', "-");
    let name = match name.as_str() {
        "agm-function-restart" => "agm-fr",
        "agm-gradient-restart" => "agm-gr",
        other => other,
    };
    name.parse().map_err(|e| format!("`{s}`: {e}"))
}

fn parse_solver_list(s: &str) -> Result<SolverList, String> {
    s.split(',').map(parse_solver).collect::<Result<_, _>>().map(SolverList)
}

fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|t| match parse_count(t)? {
            0 => Err("flow counts must be positive".to_string()),
            n => Ok(n),
        })
        .collect::<Result<_, _>>()
        .map(Counts)
}

fn parse_reference(s: &str) -> Result<ReferencePolicy, String> {
    s.trim().parse()
}

fn parse_method(s: &str) -> Result<OracleChoice, String> {
    match s.trim() {
        "auto" => Ok(OracleChoice::Auto),
        "analytic" => Ok(OracleChoice::Analytic),
        "vertex" | "vertex_lp" | "lp" => Ok(OracleChoice::Vertex),
        "grid" => Ok(OracleChoice::Grid),
        _ => Err(format!("unknown method `{s}`; expected auto, analytic, vertex or grid")),
    }
}

/// A failed command: the process exit code and a one-line diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    fn flag(flag: &str, err: impl std::fmt::Display) -> Self {
        Self::input(format!("{flag}: {err}"))
    }
}

fn missing(flag: &str) -> CliError {
    CliError::input(format!("missing required flag {flag}"))
}

fn solver_flag(err: &SolverError) -> Option<&'static str> {
    Some(match err {
        SolverError::ZeroIterations => "--iters",
        SolverError::ZeroStride => "--trace-stride",
        SolverError::InvalidStep(_) | SolverError::UndefinedStep => "--step",
        SolverError::InvalidCBound(_) => "--c-bound",
        SolverError::InitDimension { .. }
        | SolverError::InvalidInit { .. }
        | SolverError::ZeroComponent { .. }
        | SolverError::InitExceedsBound { .. } => "--init",
        SolverError::EmptyProblem => "--flows",
        _ => return None,
    })
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        let flag = match &err {
            BenchError::Solver { source: SolverError::NonFinite { .. }, .. } => {
                return CliError { code: EXIT_NUMERIC, message: err.to_string() };
            }
            BenchError::Solver { source, .. } => solver_flag(source),
            BenchError::Topology(TopologyError::InvalidCapBound(_) | TopologyError::ZeroCapacities) => {
                Some("--cap-max")
            }
            BenchError::Topology(
                TopologyError::NoConnectedPairs
                | TopologyError::InvalidFlowCount
                | TopologyError::InvalidFlow { .. }
                | TopologyError::Unreachable { .. },
            ) => Some("--flows"),
            BenchError::Topology(_) | BenchError::RoutingShape { .. } => Some("--routing"),
            BenchError::Problem(ProblemError::InvalidUtility { .. }) => Some("--alpha/--xi"),
            BenchError::Problem(ProblemError::InvalidMu(_)) => Some("--mu"),
            BenchError::Problem(_) => None,
            BenchError::Oracle(_) | BenchError::NoOracle => Some("--reference"),
            BenchError::NoSolvers => Some("--solvers"),
            BenchError::Io(_) => Some("--out"),
        };
        match flag {
            Some(flag) => CliError::flag(flag, err),
            None => CliError::input(err.to_string()),
        }
    }
}

/// Values from a `--spec` file, resolved against the file's directory.
struct SpecFile {
    values: KeyValues,
    dir: PathBuf,
}

const SPEC_KEYS: &[&str] = &[
    "topology", "alpha", "xi", "mu", "flows", "flows-file", "routing", "seed", "cap-max", "solvers",
    "iters", "step", "c-bound", "init", "trace-stride", "reference", "reference-budget", "tol",
    "out", "flow-counts", "timing-iters", "warmup", "repeats",
];

impl SpecFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::flag("--spec", format!("cannot read {}: {e}", path.display())))?;
        let values = KeyValues::parse(&text)
            .map_err(|e| CliError::flag("--spec", format!("{}: {e}", path.display())))?;
        // underscores and dashes are interchangeable in keys
        let mut normalized = KeyValues::default();
        for key in values.keys() {
            let canonical = key.replace('_', "-");
            if !SPEC_KEYS.contains(&canonical.as_str()) {
                return Err(CliError::flag("--spec", format!("unknown key `{key}`")));
            }
            normalized.push(canonical, values.get(key).unwrap_or_default());
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { values: normalized, dir })
    }

    fn value<T>(&self, key: &str, parse: fn(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| parse(v).map_err(|e| CliError::flag("--spec", format!("key `{key}`: {e}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| self.dir.join(v))
    }
}

fn pick<T>(
    cli: Option<T>,
    spec: Option<&SpecFile>,
    key: &str,
    parse: fn(&str) -> Result<T, String>,
) -> Result<Option<T>, CliError> {
    match (cli, spec) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => s.value(key, parse),
        (None, None) => Ok(None),
    }
}

fn pick_path(cli: Option<PathBuf>, spec: Option<&SpecFile>, key: &str) -> Option<PathBuf> {
    cli.or_else(|| spec.and_then(|s| s.path(key)))
}

fn read(flag: &str, path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::flag(flag, format!("cannot read {}: {e}", path.display())))
}

fn read_text(flag: &str, path: &Path) -> Result<(String, Vec<u8>), CliError> {
    let bytes = read(flag, path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::flag(flag, format!("{} is not UTF-8", path.display())))?;
    Ok((text, bytes))
}

/// Builds the instance part of an experiment spec; solvers are left empty.
fn instance_spec(args: &InstanceArgs, spec: Option<&SpecFile>) -> Result<ExperimentSpec, CliError> {
    let topo_path = pick_path(args.topology.clone(), spec, "topology").ok_or_else(|| missing("--topology"))?;
    let (text, bytes) = read_text("--topology", &topo_path)?;
    let topology = formats::parse_topology(&text)
        .map_err(|e| CliError::flag("--topology", format!("{}: {e}", topo_path.display())))?;
    let alpha = pick(args.alpha, spec, "alpha", parse_nonneg)?.unwrap_or(1.0);
    let xi = pick(args.xi, spec, "xi", parse_nonneg)?.unwrap_or(0.5);
    let mu = pick(args.mu, spec, "mu", parse_positive)?.unwrap_or(2.0);
    let utility = UtilityParams::new(alpha, xi).map_err(|e| CliError::flag("--alpha/--xi", e))?;
    let seed = pick(args.seed, spec, "seed", |s| s.trim().parse::<u64>().map_err(|e| e.to_string()))?
        .unwrap_or(0);
    let cap_max = match pick(args.cap_max, spec, "cap-max", parse_cap_max)?.unwrap_or(CapMax::Scale(100.0)) {
        CapMax::Scale(c) => Some(c),
        CapMax::Keep => None,
    };

    let mut echo = KeyValues::default();
    let flows = if let Some(path) = pick_path(args.routing.clone(), spec, "routing") {
        let (text, bytes) = read_text("--routing", &path)?;
        echo.push("routing_sha256", hex::encode(Sha256::digest(&bytes)));
        FlowSource::Matrix(
            formats::parse_routing_matrix(&text)
                .map_err(|e| CliError::flag("--routing", format!("{}: {e}", path.display())))?,
        )
    } else if let Some(path) = pick_path(args.flows_file.clone(), spec, "flows-file") {
        let (text, bytes) = read_text("--flows-file", &path)?;
        echo.push("flows_sha256", hex::encode(Sha256::digest(&bytes)));
        FlowSource::Listed(
            formats::parse_flows(&text, &topology)
                .map_err(|e| CliError::flag("--flows-file", format!("{}: {e}", path.display())))?,
        )
    } else {
        match pick(args.flows, spec, "flows", parse_flows)?.unwrap_or(FlowsArg::AllPairs) {
            FlowsArg::AllPairs => FlowSource::AllPairs,
            FlowsArg::Sampled(n) => FlowSource::Sampled(n),
        }
    };

    let mut out = ExperimentSpec::new(topology, utility, mu, Vec::new());
    out.topology_source = topo_path.display().to_string();
    out.topology_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
    out.cap_max = cap_max;
    out.flows = flows;
    out.seed = seed;
    out.extra_echo = echo;
    Ok(out)
}

struct ResolvedSolverArgs {
    iters: usize,
    step: StepSize,
    c_bound: CBound,
    init: InitPoint,
    stride: usize,
}

fn solver_args(args: &SolverArgs, spec: Option<&SpecFile>) -> Result<ResolvedSolverArgs, CliError> {
    let iters = pick(args.iters, spec, "iters", parse_count)?.ok_or_else(|| missing("--iters"))?;
    Ok(ResolvedSolverArgs {
        iters,
        step: pick(args.step, spec, "step", parse_step)?.unwrap_or(StepSize::Auto),
        c_bound: pick(args.c_bound, spec, "c-bound", parse_c_bound)?.unwrap_or(CBound::Auto),
        init: pick(args.init.clone(), spec, "init", parse_init)?.unwrap_or(InitPoint::Auto),
        stride: pick(args.trace_stride, spec, "trace-stride", parse_stride)?.unwrap_or(1),
    })
}

impl ResolvedSolverArgs {
    fn echo(&self, kv: &mut KeyValues) {
        kv.push("iters", self.iters.to_string());
        kv.push("step", match self.step {
            StepSize::Auto => "auto".into(),
            StepSize::Fixed(g) => fmt_f64(g),
        });
        kv.push("c_bound", match self.c_bound {
            CBound::Auto => "auto".into(),
            CBound::Fixed(c) => fmt_f64(c),
        });
        kv.push("init", match &self.init {
            InitPoint::Auto => "auto".into(),
            InitPoint::Zeros => "zeros".into(),
            InitPoint::ExpNumBarycenter => "barycenter".into(),
            InitPoint::Explicit(x) => x.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","),
        });
        kv.push("trace_stride", self.stride.to_string());
    }

    fn configs(&self, kinds: &[SolverKind]) -> Vec<numsolve_core::SolverConfig> {
        bench::uniform_configs(kinds, self.iters, self.step, self.c_bound, &self.init, TraceStride::Every(self.stride))
    }
}

fn write_out(flag: &str, path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::flag(flag, format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = instance_spec(&args.instance, None)?;
    let kind = args.solver.ok_or_else(|| missing("--solver"))?;
    let sa = solver_args(&args.solver_args, None)?;
    sa.echo(&mut spec.extra_echo);
    spec.solvers = sa.configs(&[kind]);
    spec.reference = ReferencePolicy::BestOfRuns;
    spec.reference_budget_factor = 0;
    let report = bench::run_experiment(&spec)?;
    let run = &report.runs[0];
    let csv = report.trace_csv(run);
    let row = &report.utility.rows[0];
    let final_objective = run.solution.trace.records.last().map_or(f64::NAN, |r| r.objective);
    let summary = format!(
        "final objective={} utility={} exact_penalty={} beta_v={} gamma={}",
        fmt_f64(final_objective),
        fmt_f64(row.utility),
        fmt_f64(row.exact_penalty),
        fmt_f64(report.cert.beta_v),
        fmt_f64(run.solution.step.gamma),
    );
    let io_err = |e: std::io::Error| CliError::input(format!("cannot write output: {e}"));
    match &args.out {
        Some(path) => {
            write_out("--out", path, &csv)?;
            writeln!(stdout, "{summary}").map_err(io_err)?;
        }
        None => {
            stdout.write_all(csv.as_bytes()).map_err(io_err)?;
            writeln!(stderr, "{summary}").map_err(io_err)?;
        }
    }
    Ok(())
}

fn oracle_with(inst: &ProblemInstance, choice: OracleChoice, tol: f64) -> Result<OracleResult, CliError> {
    let method_err = |e: OracleError| CliError::flag("--method", e);
    match choice {
        OracleChoice::Analytic => bench::analytic_oracle(inst).map_err(method_err)?.ok_or_else(|| {
            CliError::flag("--method", "the closed form needs alpha = 0 and one link carrying every flow")
        }),
        OracleChoice::Vertex => oracle::vertex_lp_optimum(inst).map_err(method_err),
        OracleChoice::Grid => oracle::grid_refine_optimum(inst, None, tol).map_err(method_err),
        OracleChoice::Auto => match bench::objective_oracle(inst, tol) {
            Ok(r) => Ok(r),
            Err(BenchError::NoOracle) if inst.utility().alpha() == 0.0 => {
                oracle::vertex_lp_optimum(inst).map_err(method_err)
            }
            Err(BenchError::Oracle(e)) => Err(method_err(e)),
            Err(e) => Err(CliError::flag("--method", e)),
        },
    }
}

pub fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = instance_spec(&args.instance, None)?;
    let inst = spec.build_instance()?;
    let tol = args.tol.unwrap_or(1e-6);
    let r = oracle_with(&inst, args.method.unwrap_or(OracleChoice::Auto), tol)?;
    let mut kv = KeyValues::default();
    kv.push("method", r.method.label());
    kv.push("point", r.point.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
    let kind = match r.method {
        oracle::OracleMethod::VertexLp => "lp_utility",
        _ => "penalized_objective",
    };
    kv.push("value_kind", kind);
    kv.push_f64("value", r.value);
    kv.push_f64("tolerance", r.tolerance);
    stdout
        .write_all(kv.render().as_bytes())
        .map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

pub fn cmd_compare(args: &ExperimentArgs, default_counts: &[usize], stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = args.spec.as_deref().map(SpecFile::load).transpose()?;
    let file = file.as_ref();
    let mut spec = instance_spec(&args.instance, file)?;
    let kinds = match pick(args.solvers.clone(), file, "solvers", parse_solver_list)? {
        Some(list) => list.0,
        None => vec![SolverKind::PgdSmooth, SolverKind::ExpNum, SolverKind::Agm, SolverKind::AgmFunctionRestart],
    };
    let sa = solver_args(&args.solver_args, file)?;
    sa.echo(&mut spec.extra_echo);
    spec.solvers = sa.configs(&kinds);
    spec.reference = pick(args.reference, file, "reference", parse_reference)?
        .unwrap_or(ReferencePolicy::BestOfRuns);
    if let Some(f) = pick(args.reference_budget, file, "reference-budget", parse_count)? {
        spec.reference_budget_factor = f;
    }
    if let Some(tol) = pick(args.tol, file, "tol", parse_positive)? {
        spec.oracle_tol = tol;
    }
    let out = pick_path(args.out.clone(), file, "out").ok_or_else(|| missing("--out"))?;
    let counts = match pick(args.flow_counts.clone(), file, "flow-counts", parse_counts)? {
        Some(c) => c.0,
        None => default_counts.to_vec(),
    };
    let defaults = TimingOptions::default();
    let timing = TimingOptions {
        iterations: pick(args.timing_iters, file, "timing-iters", parse_count)?.unwrap_or(defaults.iterations),
        warmup: pick(args.warmup, file, "warmup", parse_count)?.unwrap_or(defaults.warmup),
        repeats: pick(args.repeats, file, "repeats", parse_count)?.unwrap_or(defaults.repeats),
    };
    if !counts.is_empty() {
        let joined = counts.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        spec.extra_echo.push("flow_counts", joined);
        spec.extra_echo.push("timing_iters", timing.iterations.to_string());
        spec.extra_echo.push("warmup", timing.warmup.to_string());
        spec.extra_echo.push("repeats", timing.repeats.to_string());
    }

    let mut report = bench::run_experiment(&spec)?;
    if !counts.is_empty() {
        report.timing = bench::timing_sweep(&spec, &counts, timing)?;
    }
    let written = report.write(&spec, &out).map_err(|e| CliError::flag("--out", e))?;
    for path in written {
        writeln!(stdout, "{}", path.display())
            .map_err(|e| CliError::input(format!("cannot write output: {e}")))?;
    }
    Ok(())
}

/// Default flow counts for `bench` without `--flow-counts`.
pub const BENCH_FLOW_COUNTS: [usize; 3] = [100, 1000, 10000];

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout, stderr),
        Command::Oracle(a) => cmd_oracle(a, stdout),
        Command::Compare(a) => cmd_compare(a, &[], stdout),
        Command::Bench(a) => cmd_compare(a, &BENCH_FLOW_COUNTS, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
