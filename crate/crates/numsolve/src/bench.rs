//! Experiment harness: convergence traces against a reference value, final
//! utility tables and per-iteration timing.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use numsolve_core::oracle::{self, OracleError, OracleResult};
use numsolve_core::solvers::{self, CBound, StepRule, StepSize};
use numsolve_core::topology::{build_routing_matrix, generate_flows};
use numsolve_core::{
    Flow, FlowMode, InitPoint, ProblemError, ProblemInstance, RoutingMatrix, SmoothnessCert,
    Solution, SolverConfig, SolverError, SolverKind, Topology, TopologyError, TraceStride,
    UtilityParams,
};

use crate::clock::StdClock;
use crate::formats::{fmt_f64, trace_csv, KeyValues};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{label}: {source}")]
    Solver { label: String, source: SolverError },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("the solver list is empty")]
    NoSolvers,
    #[error("routing matrix has {rows} rows but the topology has {links} links")]
    RoutingShape { rows: usize, links: usize },
    #[error("no oracle covers this instance (closed form needs one link and alpha = 0; grid search needs d ≤ {})", oracle::GRID_GUARD)]
    NoOracle,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How `V*_ref` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// An exact small-instance oracle: closed form or grid search.
    Oracle,
    /// The smallest objective seen in any trace, optionally including an
    /// extra longer AGM-fr run.
    BestOfRuns,
}

impl ReferencePolicy {
    pub fn label(self) -> &'static str {
        match self {
            ReferencePolicy::Oracle => "oracle",
            ReferencePolicy::BestOfRuns => "best_of_runs",
        }
    }
}

impl std::str::FromStr for ReferencePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ReferencePolicy::Oracle),
            "best_of_runs" | "best" => Ok(ReferencePolicy::BestOfRuns),
            _ => Err(format!("unknown reference policy `{s}`; expected oracle or best_of_runs")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowSource {
    AllPairs,
    /// `count` pairs drawn with the spec's seed.
    Sampled(usize),
    Listed(Vec<Flow>),
    /// A routing matrix loaded directly; rows must match the topology's links.
    Matrix(RoutingMatrix),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub topology: Topology,
    /// Where the topology came from (a path or a label).
    pub topology_source: String,
    pub topology_sha256: Option<String>,
    /// `None` keeps the capacities as given.
    pub cap_max: Option<f64>,
    pub flows: FlowSource,
    pub utility: UtilityParams,
    pub mu: f64,
    pub solvers: Vec<SolverConfig>,
    pub reference: ReferencePolicy,
    /// Budget multiplier of the extra AGM-fr run under `BestOfRuns`; 0 skips it.
    pub reference_budget_factor: usize,
    /// Grid-search tolerance under `Oracle`.
    pub oracle_tol: f64,
    pub seed: u64,
    /// Extra settings echoed verbatim into the sidecar.
    pub extra_echo: KeyValues,
}

impl ExperimentSpec {
    pub fn new(topology: Topology, utility: UtilityParams, mu: f64, solvers: Vec<SolverConfig>) -> Self {
        Self {
            topology,
            topology_source: String::from("inline"),
            topology_sha256: None,
            cap_max: Some(100.0),
            flows: FlowSource::AllPairs,
            utility,
            mu,
            solvers,
            reference: ReferencePolicy::BestOfRuns,
            reference_budget_factor: 10,
            oracle_tol: 1e-6,
            seed: 0,
            extra_echo: KeyValues::default(),
        }
    }

    pub fn build_instance(&self) -> Result<ProblemInstance, BenchError> {
        let topology = match self.cap_max {
            Some(cap) => self.topology.scale_capacities(cap)?,
            None => self.topology.clone(),
        };
        let routing = match &self.flows {
            FlowSource::AllPairs => {
                build_routing_matrix(&topology, &generate_flows(&topology, FlowMode::AllPairs)?)?
            }
            FlowSource::Sampled(count) => {
                let mode = FlowMode::Sampled { count: *count, seed: self.seed };
                build_routing_matrix(&topology, &generate_flows(&topology, mode)?)?
            }
            FlowSource::Listed(flows) => build_routing_matrix(&topology, flows)?,
            FlowSource::Matrix(a) => {
                if a.rows() != topology.link_count() {
                    return Err(BenchError::RoutingShape { rows: a.rows(), links: topology.link_count() });
                }
                a.clone()
            }
        };
        Ok(ProblemInstance::new(routing, topology.capacities(), self.utility, self.mu)?)
    }

    /// The resolved settings, numbers at full precision.
    pub fn echo(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("topology", &self.topology_source);
        if let Some(hash) = &self.topology_sha256 {
            kv.push("topology_sha256", hash);
        }
        kv.push("cap_max", self.cap_max.map_or_else(|| "none".into(), fmt_f64));
        let flows = match &self.flows {
            FlowSource::AllPairs => "all_pairs".to_string(),
            FlowSource::Sampled(n) => n.to_string(),
            FlowSource::Listed(f) => format!("listed:{}", f.len()),
            FlowSource::Matrix(a) => format!("matrix:{}x{}", a.rows(), a.cols()),
        };
        kv.push("flows", flows);
        kv.push_f64("alpha", self.utility.alpha());
        kv.push_f64("xi", self.utility.xi());
        kv.push_f64("mu", self.mu);
        kv.push("seed", self.seed.to_string());
        let labels: Vec<_> = self.solvers.iter().map(|c| c.kind.label()).collect();
        kv.push("solvers", labels.join(","));
        kv.push("reference", self.reference.label());
        kv.push("reference_budget_factor", self.reference_budget_factor.to_string());
        kv.push_f64("oracle_tol", self.oracle_tol);
        kv.extend(&self.extra_echo);
        kv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub policy: ReferencePolicy,
    pub value: f64,
    /// How far below `value` the true optimum may lie.
    pub slack: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    /// File-safe name, unique within the report.
    pub name: String,
    pub config: SolverConfig,
    pub solution: Solution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityRow {
    pub name: String,
    pub utility: f64,
    pub exact_penalty: f64,
    /// `U* - U`; negative when the answer overshoots the LP optimum.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    /// The LP optimum `U*`, when the instance is within the vertex guard.
    pub lp_optimum: Option<f64>,
    pub rows: Vec<UtilityRow>,
}

impl UtilityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver,utility,lp_optimum,utility_error,exact_penalty\n");
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name,
                fmt_f64(r.utility),
                opt(self.lp_optimum),
                opt(r.error),
                fmt_f64(r.exact_penalty)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub name: String,
    pub flows: usize,
    pub iterations: usize,
    /// Seconds; `None` for a zero-iteration run.
    pub mean_iter_s: Option<f64>,
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("solver,flows,iterations,mean_iter_s\n");
    for r in rows {
        let mean = r.mean_iter_s.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.name, r.flows, r.iterations, mean);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub flows: usize,
    pub links: usize,
    pub cert: SmoothnessCert,
    pub runs: Vec<SolverRun>,
    pub reference: Reference,
    pub utility: UtilityTable,
    pub timing: Vec<TimingRow>,
}

impl BenchReport {
    pub fn trace_csv(&self, run: &SolverRun) -> String {
        trace_csv(&run.solution.trace.records, self.reference.value)
    }

    pub fn metadata(&self, spec: &ExperimentSpec) -> KeyValues {
        let mut kv = spec.echo();
        kv.push("flow_count", self.flows.to_string());
        kv.push("link_count", self.links.to_string());
        kv.push_f64("beta_v", self.cert.beta_v);
        kv.push_f64("m_bound", self.cert.m_bound);
        kv.push_f64("reference_value", self.reference.value);
        kv.push_f64("reference_slack", self.reference.slack);
        kv.push("reference_provenance", &self.reference.provenance);
        for run in &self.runs {
            let s = &run.solution;
            let key = |k: &str| format!("{}.{k}", run.name);
            kv.push(key("iterations"), run.config.iterations.to_string());
            kv.push_f64(key("gamma"), s.step.gamma);
            kv.push(key("step_rule"), step_rule(s.step.rule));
            if let Some(c) = s.c_bound {
                kv.push_f64(key("c_bound"), c);
            }
            kv.push(key("restarts"), s.trace.restarts.len().to_string());
            if run.config.kind == SolverKind::ExpNum {
                kv.push(key("clamp_events"), s.trace.clamp_events.to_string());
                kv.push(key("floor_events"), s.trace.floor_events.to_string());
            }
        }
        kv
    }

    /// Writes `<solver>.csv` per run, `utility.csv`, `timing.csv` when a
    /// sweep ran, and the `meta.txt` sidecar. Returns the paths written.
    pub fn write(&self, spec: &ExperimentSpec, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: String| -> io::Result<()> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        for run in &self.runs {
            put(&format!("{}.csv", run.name), self.trace_csv(run))?;
        }
        put("utility.csv", self.utility.to_csv())?;
        if !self.timing.is_empty() {
            put("timing.csv", timing_csv(&self.timing))?;
        }
        put("meta.txt", self.metadata(spec).render())?;
        Ok(written)
    }
}

fn step_rule(rule: StepRule) -> String {
    match rule {
        StepRule::Explicit => "explicit".into(),
        StepRule::InverseSmoothness => "inverse_beta".into(),
        StepRule::LipschitzRadius { radius } => format!("lipschitz_radius:{}", fmt_f64(radius)),
        StepRule::BregmanBound { divergence } => format!("bregman_bound:{}", fmt_f64(divergence)),
    }
}

/// `Some((c, n))` when the instance is `n` throughput flows on one link of
/// capacity `c`, which the closed form covers.
fn single_link_shape(inst: &ProblemInstance) -> Option<(f64, usize)> {
    let u = inst.utility();
    if u.alpha() != 0.0 || inst.link_count() != 1 || inst.flow_count() == 0 {
        return None;
    }
    let a = inst.routing();
    let full = a.nnz() == inst.flow_count() && a.row(0).all(|(_, v)| v == 1.0);
    full.then(|| (inst.capacities()[0], inst.flow_count()))
}

/// Closed-form optimum of a single-link throughput instance. The constant
/// `n ξ` from `U = x + ξ` is folded into the value.
pub fn analytic_oracle(inst: &ProblemInstance) -> Result<Option<OracleResult>, OracleError> {
    let Some((c, n)) = single_link_shape(inst) else {
        return Ok(None);
    };
    let mut r = oracle::analytic_single_link(c, inst.mu(), n)?;
    r.value -= n as f64 * inst.utility().xi();
    Ok(Some(r))
}

/// The best available optimum of `V_S`: closed form when it applies,
/// otherwise grid search.
pub fn objective_oracle(inst: &ProblemInstance, tol: f64) -> Result<OracleResult, BenchError> {
    if inst.mu() > 1.0 {
        if let Some(r) = analytic_oracle(inst)? {
            return Ok(r);
        }
    }
    if inst.flow_count() <= oracle::GRID_GUARD {
        return Ok(oracle::grid_refine_optimum(inst, None, tol)?);
    }
    Err(BenchError::NoOracle)
}

fn unique_names(configs: &[SolverConfig]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(configs.len());
    for cfg in configs {
        let base = cfg.kind.label();
        let mut name = base.to_string();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}-{k}");
            k += 1;
        }
        names.push(name);
    }
    names
}

fn run_all(inst: &ProblemInstance, configs: &[SolverConfig]) -> Result<Vec<SolverRun>, BenchError> {
    if configs.is_empty() {
        return Err(BenchError::NoSolvers);
    }
    unique_names(configs)
        .into_iter()
        .zip(configs)
        .map(|(name, cfg)| {
            let solution = solvers::solve(inst, cfg, &mut StdClock::new())
                .map_err(|source| BenchError::Solver { label: name.clone(), source })?;
            Ok(SolverRun { name, config: cfg.clone(), solution })
        })
        .collect()
}

fn reference(spec: &ExperimentSpec, inst: &ProblemInstance, runs: &[SolverRun]) -> Result<Reference, BenchError> {
    match spec.reference {
        ReferencePolicy::Oracle => {
            let r = objective_oracle(inst, spec.oracle_tol)?;
            Ok(Reference {
                policy: ReferencePolicy::Oracle,
                value: r.value,
                slack: r.tolerance,
                provenance: r.method.label().to_string(),
            })
        }
        ReferencePolicy::BestOfRuns => {
            let mut value = f64::INFINITY;
            for run in runs {
                for rec in &run.solution.trace.records {
                    value = value.min(rec.objective);
                }
            }
            let mut provenance = format!("min over {} solver traces", runs.len());
            let budget = runs.iter().map(|r| r.config.iterations).max().unwrap_or(0)
                * spec.reference_budget_factor;
            if budget > 0 {
                let cfg = SolverConfig::new(SolverKind::AgmFunctionRestart, budget);
                let long = solvers::solve(inst, &cfg, &mut numsolve_core::NoClock)
                    .map_err(|source| BenchError::Solver { label: "reference".into(), source })?;
                for rec in &long.trace.records {
                    value = value.min(rec.objective);
                }
                let _ = write!(provenance, " and a {budget}-iteration agm-fr run");
            }
            Ok(Reference { policy: ReferencePolicy::BestOfRuns, value, slack: 0.0, provenance })
        }
    }
}

fn utility_table(inst: &ProblemInstance, runs: &[SolverRun], lp_optimum: Option<f64>) -> Result<UtilityTable, BenchError> {
    let rows = runs
        .iter()
        .map(|run| {
            let d = inst.diagnostics(run.solution.answer())?;
            Ok(UtilityRow {
                name: run.name.clone(),
                utility: d.utility,
                exact_penalty: d.exact_penalty,
                error: lp_optimum.map(|u| u - d.utility),
            })
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(UtilityTable { lp_optimum, rows })
}

/// The LP optimum when the instance is linear and small enough to enumerate.
fn lp_optimum_if_small(inst: &ProblemInstance) -> Option<f64> {
    let small = inst.flow_count() <= oracle::VERTEX_GUARD && inst.link_count() <= oracle::VERTEX_GUARD;
    if inst.utility().alpha() == 0.0 && small {
        oracle::vertex_lp_optimum(inst).ok().map(|r| r.value)
    } else {
        None
    }
}

/// Runs every configured solver on one shared instance and measures each
/// trace against the reference value.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchReport, BenchError> {
    let inst = spec.build_instance()?;
    let runs = run_all(&inst, &spec.solvers)?;
    let reference = reference(spec, &inst, &runs)?;
    let utility = utility_table(&inst, &runs, lp_optimum_if_small(&inst))?;
    Ok(BenchReport {
        flows: inst.flow_count(),
        links: inst.link_count(),
        cert: inst.certify(),
        runs,
        reference,
        utility,
        timing: Vec::new(),
    })
}

/// Final utilities against the LP optimum, for `α = 0` instances within the
/// vertex-enumeration guard.
pub fn utility_comparison(spec: &ExperimentSpec) -> Result<UtilityTable, BenchError> {
    let inst = spec.build_instance()?;
    let lp = oracle::vertex_lp_optimum(&inst)?;
    let configs: Vec<_> =
        spec.solvers.iter().map(|c| c.clone().with_trace(TraceStride::Off)).collect();
    let runs = run_all(&inst, &configs)?;
    utility_table(&inst, &runs, Some(lp.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingOptions {
    pub iterations: usize,
    pub warmup: usize,
    /// The reported mean is the fastest of this many measured runs.
    pub repeats: usize,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self { iterations: 1000, warmup: 100, repeats: 3 }
    }
}

/// Mean wall time per iteration for each solver at each sampled flow count.
/// Traces are off, so only the methods' own work is timed.
pub fn timing_sweep(
    spec: &ExperimentSpec,
    flow_counts: &[usize],
    opts: TimingOptions,
) -> Result<Vec<TimingRow>, BenchError> {
    if spec.solvers.is_empty() {
        return Err(BenchError::NoSolvers);
    }
    let names = unique_names(&spec.solvers);
    let mut rows = Vec::new();
    for &d in flow_counts {
        let sized = ExperimentSpec { flows: FlowSource::Sampled(d), ..spec.clone() };
        let inst = sized.build_instance()?;
        for (name, cfg) in names.iter().zip(&spec.solvers) {
            let mut row = TimingRow { name: name.clone(), flows: d, iterations: opts.iterations, mean_iter_s: None };
            if opts.iterations > 0 {
                row.mean_iter_s = Some(time_solver(&inst, cfg, opts).map_err(|source| {
                    BenchError::Solver { label: name.clone(), source }
                })?);
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn time_solver(inst: &ProblemInstance, cfg: &SolverConfig, opts: TimingOptions) -> Result<f64, SolverError> {
    let run = |iterations: usize| -> Result<f64, SolverError> {
        let mut c = cfg.clone().with_trace(TraceStride::Off);
        c.iterations = iterations;
        let start = Instant::now();
        let solution = solvers::solve(inst, &c, &mut numsolve_core::NoClock)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(solution);
        Ok(elapsed)
    };
    if opts.warmup > 0 {
        run(opts.warmup)?;
    }
    let mut best = f64::INFINITY;
    for _ in 0..opts.repeats.max(1) {
        best = best.min(run(opts.iterations)?);
    }
    Ok(best / opts.iterations as f64)
}

/// Solver configurations sharing one budget and step policy.
pub fn uniform_configs(
    kinds: &[SolverKind],
    iterations: usize,
    step: StepSize,
    c_bound: CBound,
    init: &InitPoint,
    trace: TraceStride,
) -> Vec<SolverConfig> {
    kinds
        .iter()
        .map(|&kind| {
            let mut cfg = SolverConfig::new(kind, iterations).with_init(init.clone()).with_trace(trace);
            cfg.step_size = step;
            cfg.c_bound = c_bound;
            cfg
        })
        .collect()
}
