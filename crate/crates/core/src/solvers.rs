//! Projected gradient descent, exponentiated gradient descent (Exp-NUM),
//! Nesterov's accelerated gradient method and its restart variants.
//!
//! Every solver runs a fixed number of iterations `T` and returns the last
//! iterate, the running average of `x^(1..T)` where the method's guarantee is
//! stated for it, and a trace of objective, utility and capacity violation.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::problem::{Diagnostics, ProblemInstance};

/// Largest exponent Exp-NUM feeds to `exp` before clamping.
pub const EXP_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("the instance has no flows")]
    EmptyProblem,
    #[error("iteration budget must be at least 1")]
    ZeroIterations,
    #[error("trace stride must be at least 1")]
    ZeroStride,
    #[error("{routine} cannot run solver kind {kind}")]
    WrongKind { routine: &'static str, kind: SolverKind },
    #[error("step size {0} must be finite and nonnegative")]
    InvalidStep(f64),
    #[error("smoothness constant is 0 (linear objective); the 1/beta step is undefined")]
    UndefinedStep,
    #[error("radius estimate {0} must be finite and nonnegative")]
    InvalidRadius(f64),
    #[error("flow-rate bound C = {0} must be positive and finite")]
    InvalidCBound(f64),
    #[error("initial point has length {got}, the instance has {expected} flows")]
    InitDimension { expected: usize, got: usize },
    #[error("initial rate x[{index}] = {value} is negative or not finite")]
    InvalidInit { index: usize, value: f64 },
    #[error("Exp-NUM needs a strictly positive start; x[{index}] = 0")]
    ZeroComponent { index: usize },
    #[error("Exp-NUM start sums to {sum}, above the bound C = {bound}")]
    InitExceedsBound { sum: f64, bound: f64 },
    #[error("non-finite value at iteration {iter}; the step size is too large")]
    NonFinite { iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// PGD with the Lipschitz step `R / (M sqrt(dT))`; answers with the average.
    PgdLipschitz,
    /// PGD with step `1/β_V`; answers with the last iterate.
    PgdSmooth,
    ExpNum,
    Agm,
    AgmFunctionRestart,
    AgmGradientRestart,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::PgdSmooth,
        SolverKind::PgdLipschitz,
        SolverKind::ExpNum,
        SolverKind::Agm,
        SolverKind::AgmFunctionRestart,
        SolverKind::AgmGradientRestart,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SolverKind::PgdLipschitz => "pgd-lipschitz",
            SolverKind::PgdSmooth => "pgd",
            SolverKind::ExpNum => "expnum",
            SolverKind::Agm => "agm",
            SolverKind::AgmFunctionRestart => "agm-fr",
            SolverKind::AgmGradientRestart => "agm-gr",
        }
    }

    /// Whether the method's guarantee (and so its answer) is the averaged point.
    pub fn answers_with_average(self) -> bool {
        matches!(self, SolverKind::PgdLipschitz | SolverKind::ExpNum)
    }

    fn restart(self) -> Option<RestartKind> {
        match self {
            SolverKind::AgmFunctionRestart => Some(RestartKind::Function),
            SolverKind::AgmGradientRestart => Some(RestartKind::Gradient),
            _ => None,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = UnknownSolver;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pgd-smooth" => Ok(SolverKind::PgdSmooth),
            _ => SolverKind::ALL.into_iter().find(|k| k.label() == s).ok_or(UnknownSolver),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("unknown solver; expected one of pgd, pgd-lipschitz, expnum, agm, agm-fr, agm-gr")]
pub struct UnknownSolver;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CBound {
    /// `Σ_e c_e`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitPoint {
    /// Zeros for PGD/AGM, the barycenter for Exp-NUM.
    Auto,
    Zeros,
    /// `x_s = C / (d + 1)`.
    ExpNumBarycenter,
    Explicit(Vec<f64>),
}

/// Momentum value after a restart fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartReset {
    /// `a ← 1`: the next step is a plain projected gradient step.
    One,
    /// `a ← 0`: the literal pseudocode variant; the following momentum weight
    /// is -1.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStride {
    /// Record iterations `t ≡ 0 (mod k)` and always the last one.
    Every(usize),
    /// Record nothing (timing runs).
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub iterations: usize,
    pub step_size: StepSize,
    /// Exp-NUM only.
    pub c_bound: CBound,
    pub init: InitPoint,
    pub trace: TraceStride,
    /// Estimate of `‖x* - x⁰‖` for the Lipschitz PGD step.
    pub radius: Option<f64>,
    pub restart_reset: RestartReset,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, iterations: usize) -> Self {
        Self {
            kind,
            iterations,
            step_size: StepSize::Auto,
            c_bound: CBound::Auto,
            init: InitPoint::Auto,
            trace: TraceStride::Every(1),
            radius: None,
            restart_reset: RestartReset::One,
        }
    }

    pub fn with_step(mut self, gamma: f64) -> Self {
        self.step_size = StepSize::Fixed(gamma);
        self
    }

    pub fn with_init(mut self, init: InitPoint) -> Self {
        self.init = init;
        self
    }

    pub fn with_trace(mut self, trace: TraceStride) -> Self {
        self.trace = trace;
        self
    }

    pub fn with_c_bound(mut self, c: f64) -> Self {
        self.c_bound = CBound::Fixed(c);
        self
    }
}

/// Where a step size came from. Rules that need the unknown optimum record
/// the estimate they substituted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Explicit,
    /// `1/β_V`.
    InverseSmoothness,
    /// `R / (M sqrt(dT))` with the radius estimate `R`.
    LipschitzRadius { radius: f64 },
    /// `M^{-1} sqrt(2D/T)` with the divergence bound `D = C ln(d+1)`.
    BregmanBound { divergence: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub gamma: f64,
    pub rule: StepRule,
}

/// Wall-clock source for traces. The core crate has no clock of its own.
pub trait Clock {
    /// Milliseconds since an arbitrary fixed origin.
    fn now_ms(&mut self) -> f64;
}

/// A clock that never advances; traces report 0 ms.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub utility: f64,
    pub exact_penalty: f64,
    /// A restart fired while producing this iterate.
    pub restart: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub records: Vec<TraceRecord>,
    /// Iterations whose iterate was produced by a restart.
    pub restarts: Vec<usize>,
    /// Exp-NUM exponents clamped to ±700.
    pub clamp_events: usize,
    /// Exp-NUM components that underflowed and were lifted to the smallest
    /// positive normal number.
    pub floor_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub kind: SolverKind,
    /// `x^(T)`.
    pub point: Vec<f64>,
    /// `(1/T) Σ_{t=1..T} x^(t)` for PGD and Exp-NUM.
    pub averaged: Option<Vec<f64>>,
    pub initial: Vec<f64>,
    pub step: StepChoice,
    pub c_bound: Option<f64>,
    pub trace: IterateTrace,
}

impl Solution {
    /// The point the method's convergence guarantee refers to.
    pub fn answer(&self) -> &[f64] {
        match &self.averaged {
            Some(avg) if self.kind.answers_with_average() => avg,
            _ => &self.point,
        }
    }
}

/// Componentwise `max(x_s, 0)`.
pub fn project_nonneg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

/// `a_{t+1} = (1 + sqrt(4 a_t² + 1)) / 2`.
#[inline]
pub fn momentum_coeff(a: f64) -> f64 {
    (1.0 + math::sqrt(4.0 * a * a + 1.0)) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartKind {
    /// `V(x^(k+1)) > V(x^(k))`.
    Function,
    /// `∇V(y^(k))ᵀ (x^(k+1) - x^(k)) > 0`.
    Gradient,
}

pub fn restart_check(
    kind: RestartKind,
    v_prev: f64,
    v_next: f64,
    grad_y: &[f64],
    dx: &[f64],
) -> bool {
    match kind {
        RestartKind::Function => v_next > v_prev,
        RestartKind::Gradient => math::dot(grad_y, dx) > 0.0,
    }
}

/// Error bound `2 β R² / (T+1)²` for the accelerated method's last iterate.
pub fn agm_error_bound(beta_v: f64, radius_sq: f64, t: usize) -> f64 {
    let t1 = t as f64 + 1.0;
    2.0 * beta_v * radius_sq / (t1 * t1)
}

/// Error bound `2 β R² / T` for projected gradient with step `1/β`.
pub fn pgd_smooth_error_bound(beta_v: f64, radius_sq: f64, t: usize) -> f64 {
    2.0 * beta_v * radius_sq / t as f64
}

/// Iteration count after which the accelerated bound beats the Exp-NUM bound,
/// `ceil((2 β² R⁴ / (M² C D))^{1/3} - 1)` with a given divergence bound `D`.
pub fn expnum_crossover_with_divergence(
    beta_v: f64,
    radius_sq: f64,
    m_bound: f64,
    c: f64,
    divergence: f64,
) -> u64 {
    let ratio = 2.0 * beta_v * beta_v * radius_sq * radius_sq / (m_bound * m_bound * c * divergence);
    let t = math::ceil(math::cbrt(ratio) - 1.0);
    if t > 0.0 {
        t as u64
    } else {
        0
    }
}

/// [`expnum_crossover_with_divergence`] with the barycenter bound
/// `D = C ln(d + 1)`.
pub fn expnum_crossover(beta_v: f64, radius_sq: f64, m_bound: f64, c: f64, d: usize) -> u64 {
    let divergence = c * math::ln(d as f64 + 1.0);
    expnum_crossover_with_divergence(beta_v, radius_sq, m_bound, c, divergence)
}

/// Resolves `C` for Exp-NUM.
pub fn resolve_c_bound(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<f64, SolverError> {
    let c = match cfg.c_bound {
        CBound::Auto => inst.capacities().iter().sum(),
        CBound::Fixed(c) => c,
    };
    if c.is_finite() && c > 0.0 {
        Ok(c)
    } else {
        Err(SolverError::InvalidCBound(c))
    }
}

/// Resolves the configured starting point.
pub fn initial_point(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Vec<f64>, SolverError> {
    let d = inst.flow_count();
    let barycenter = |c: f64| vec![c / (d as f64 + 1.0); d];
    let x0 = match &cfg.init {
        InitPoint::Auto if cfg.kind == SolverKind::ExpNum => barycenter(resolve_c_bound(inst, cfg)?),
        InitPoint::Auto | InitPoint::Zeros => vec![0.0; d],
        InitPoint::ExpNumBarycenter => barycenter(resolve_c_bound(inst, cfg)?),
        InitPoint::Explicit(x) => {
            if x.len() != d {
                return Err(SolverError::InitDimension { expected: d, got: x.len() });
            }
            x.clone()
        }
    };
    if let Some(index) = x0.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(SolverError::InvalidInit { index, value: x0[index] });
    }
    Ok(x0)
}

/// Per-flow rate each flow could push alone: `min_e c_e / A_{e,s}` over its
/// links (`max_e c_e` for a flow that crosses none).
pub fn capacity_point(inst: &ProblemInstance) -> Vec<f64> {
    let a = inst.routing();
    let caps = inst.capacities();
    let largest = caps.iter().copied().fold(0.0, f64::max);
    let mut point = vec![f64::INFINITY; inst.flow_count()];
    for (e, &c) in caps.iter().enumerate() {
        for (s, v) in a.row(e) {
            point[s] = point[s].min(c / v);
        }
    }
    for p in &mut point {
        if p.is_infinite() {
            *p = largest;
        }
    }
    point
}

/// The step size prescribed for `cfg.kind` on this instance, unless the
/// configuration fixes one.
pub fn default_step(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<StepChoice, SolverError> {
    if let StepSize::Fixed(gamma) = cfg.step_size {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(SolverError::InvalidStep(gamma));
        }
        return Ok(StepChoice { gamma, rule: StepRule::Explicit });
    }
    let d = inst.flow_count();
    if d == 0 {
        return Err(SolverError::EmptyProblem);
    }
    if cfg.iterations == 0 {
        return Err(SolverError::ZeroIterations);
    }
    let cert = inst.certify();
    let t = cfg.iterations as f64;
    match cfg.kind {
        SolverKind::PgdSmooth
        | SolverKind::Agm
        | SolverKind::AgmFunctionRestart
        | SolverKind::AgmGradientRestart => {
            if cert.beta_v > 0.0 {
                Ok(StepChoice { gamma: 1.0 / cert.beta_v, rule: StepRule::InverseSmoothness })
            } else {
                Err(SolverError::UndefinedStep)
            }
        }
        SolverKind::PgdLipschitz => {
            let radius = match cfg.radius {
                Some(r) if r.is_finite() && r >= 0.0 => r,
                Some(r) => return Err(SolverError::InvalidRadius(r)),
                None => {
                    let x0 = initial_point(inst, cfg)?;
                    math::sqrt(math::dist_sq(&capacity_point(inst), &x0))
                }
            };
            let gamma = radius / (cert.m_bound * math::sqrt(d as f64 * t));
            Ok(StepChoice { gamma, rule: StepRule::LipschitzRadius { radius } })
        }
        SolverKind::ExpNum => {
            let c = resolve_c_bound(inst, cfg)?;
            let divergence = c * math::ln(d as f64 + 1.0);
            let gamma = math::sqrt(2.0 * divergence / t) / cert.m_bound;
            Ok(StepChoice { gamma, rule: StepRule::BregmanBound { divergence } })
        }
    }
}

/// Outcome of one multiplicative Exp-NUM update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpNumUpdate {
    pub clamped: usize,
    pub floored: usize,
}

/// One Exp-NUM step in place:
/// `x ← x ⊙ w / (1 + Σ_s x_s (w_s - 1) / C)` with `w = exp(-γv)`, which is
/// the usual `C x ⊙ w / (C + Σ_s x_s (w_s - 1))` divided through by `C`.
///
/// `scaled_grad` holds `γv`. The denominator is kept at least `Σ x w / C`,
/// which is what it equals algebraically whenever `Σ x ≤ C`; this stops
/// rounding from pushing the sum above `C`.
pub fn expnum_update(x: &mut [f64], scaled_grad: &[f64], c: f64) -> ExpNumUpdate {
    let mut stats = ExpNumUpdate::default();
    let mut shift = 0.0;
    let mut weighted = 0.0;
    // first pass: x_s (w_s - 1) and x_s w_s; stash w_s in place
    let mut weights = Vec::with_capacity(x.len());
    for (&xs, &gv) in x.iter().zip(scaled_grad) {
        let mut arg = -gv;
        if arg.abs() > EXP_CLAMP {
            arg = arg.clamp(-EXP_CLAMP, EXP_CLAMP);
            stats.clamped += 1;
        }
        let wm1 = math::expm1(arg);
        shift += xs * wm1;
        let w = wm1 + 1.0;
        weighted += xs * w;
        weights.push(w);
    }
    let denom = (1.0 + shift / c).max(weighted / c);
    for (xs, w) in x.iter_mut().zip(weights) {
        let next = *xs * w / denom;
        *xs = if next >= f64::MIN_POSITIVE {
            next
        } else {
            stats.floored += 1;
            f64::MIN_POSITIVE
        };
    }
    stats
}

struct Recorder<'c> {
    clock: &'c mut dyn Clock,
    start: f64,
    last_ms: f64,
    stride: Option<usize>,
    total: usize,
    trace: IterateTrace,
}

impl<'c> Recorder<'c> {
    fn new(clock: &'c mut dyn Clock, trace: TraceStride, total: usize) -> Self {
        let start = clock.now_ms();
        let stride = match trace {
            TraceStride::Every(k) => Some(k),
            TraceStride::Off => None,
        };
        Self { clock, start, last_ms: 0.0, stride, total, trace: IterateTrace::default() }
    }

    fn due(&self, t: usize) -> bool {
        match self.stride {
            Some(k) => t.is_multiple_of(k) || t == self.total,
            None => false,
        }
    }

    fn record(&mut self, t: usize, diag: Diagnostics, restart: bool) -> Result<(), SolverError> {
        if !diag.objective.is_finite() {
            return Err(SolverError::NonFinite { iter: t });
        }
        let now = (self.clock.now_ms() - self.start).max(self.last_ms);
        self.last_ms = now;
        self.trace.records.push(TraceRecord {
            iter: t,
            objective: diag.objective,
            utility: diag.utility,
            exact_penalty: diag.exact_penalty,
            restart,
            elapsed_ms: now,
        });
        Ok(())
    }
}

fn check_common(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<(), SolverError> {
    if inst.flow_count() == 0 {
        return Err(SolverError::EmptyProblem);
    }
    if cfg.iterations == 0 {
        return Err(SolverError::ZeroIterations);
    }
    if cfg.trace == TraceStride::Every(0) {
        return Err(SolverError::ZeroStride);
    }
    Ok(())
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Runs whichever method `cfg.kind` names.
pub fn solve(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    clock: &mut dyn Clock,
) -> Result<Solution, SolverError> {
    match cfg.kind {
        SolverKind::PgdLipschitz | SolverKind::PgdSmooth => pgd(inst, cfg, clock),
        SolverKind::ExpNum => expnum(inst, cfg, clock),
        SolverKind::Agm | SolverKind::AgmFunctionRestart | SolverKind::AgmGradientRestart => {
            accelerated(inst, cfg, clock)
        }
    }
}

/// Projected gradient descent: `x ← [x - γ∇V(x)]_+`.
pub fn run_pgd(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    match cfg.kind {
        SolverKind::PgdLipschitz | SolverKind::PgdSmooth => pgd(inst, cfg, &mut NoClock),
        kind => Err(SolverError::WrongKind { routine: "run_pgd", kind }),
    }
}

/// Exponentiated gradient descent over `{x ≥ 0, Σx ≤ C}`.
pub fn run_expnum(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    match cfg.kind {
        SolverKind::ExpNum => expnum(inst, cfg, &mut NoClock),
        kind => Err(SolverError::WrongKind { routine: "run_expnum", kind }),
    }
}

/// Nesterov's accelerated gradient method without restarts.
pub fn run_agm(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    match cfg.kind {
        SolverKind::Agm => accelerated(inst, cfg, &mut NoClock),
        kind => Err(SolverError::WrongKind { routine: "run_agm", kind }),
    }
}

/// Accelerated gradient with function or gradient restart.
pub fn run_agm_restart(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    match cfg.kind {
        SolverKind::AgmFunctionRestart | SolverKind::AgmGradientRestart => {
            accelerated(inst, cfg, &mut NoClock)
        }
        kind => Err(SolverError::WrongKind { routine: "run_agm_restart", kind }),
    }
}

fn pgd(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    clock: &mut dyn Clock,
) -> Result<Solution, SolverError> {
    check_common(inst, cfg)?;
    let step = default_step(inst, cfg)?;
    let initial = initial_point(inst, cfg)?;
    let gamma = step.gamma;
    let d = initial.len();

    let mut eval = inst.evaluator();
    let mut rec = Recorder::new(clock, cfg.trace, cfg.iterations);
    let mut x = initial.clone();
    let mut grad = vec![0.0; d];
    let mut sum = vec![0.0; d];
    for t in 1..=cfg.iterations {
        eval.gradient(&x, &mut grad);
        for ((xs, g), acc) in x.iter_mut().zip(&grad).zip(&mut sum) {
            *xs = (*xs - gamma * g).max(0.0);
            *acc += *xs;
        }
        if !all_finite(&x) {
            return Err(SolverError::NonFinite { iter: t });
        }
        if rec.due(t) {
            let diag = eval.diagnostics(&x);
            rec.record(t, diag, false)?;
        }
    }
    let scale = 1.0 / cfg.iterations as f64;
    let averaged = sum.into_iter().map(|v| v * scale).collect();
    Ok(Solution {
        kind: cfg.kind,
        point: x,
        averaged: Some(averaged),
        initial,
        step,
        c_bound: None,
        trace: rec.trace,
    })
}

fn expnum(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    clock: &mut dyn Clock,
) -> Result<Solution, SolverError> {
    check_common(inst, cfg)?;
    let c = resolve_c_bound(inst, cfg)?;
    let initial = initial_point(inst, cfg)?;
    if let Some(index) = initial.iter().position(|&v| v == 0.0) {
        return Err(SolverError::ZeroComponent { index });
    }
    let total: f64 = initial.iter().sum();
    if total > c {
        return Err(SolverError::InitExceedsBound { sum: total, bound: c });
    }
    let step = default_step(inst, cfg)?;
    let gamma = step.gamma;
    let d = initial.len();

    let mut eval = inst.evaluator();
    let mut rec = Recorder::new(clock, cfg.trace, cfg.iterations);
    let mut x = initial.clone();
    let mut grad = vec![0.0; d];
    let mut sum = vec![0.0; d];
    for t in 1..=cfg.iterations {
        eval.gradient(&x, &mut grad);
        for g in &mut grad {
            *g *= gamma;
        }
        let stats = expnum_update(&mut x, &grad, c);
        rec.trace.clamp_events += stats.clamped;
        rec.trace.floor_events += stats.floored;
        if !all_finite(&x) {
            return Err(SolverError::NonFinite { iter: t });
        }
        for (acc, xs) in sum.iter_mut().zip(&x) {
            *acc += xs;
        }
        if rec.due(t) {
            let diag = eval.diagnostics(&x);
            rec.record(t, diag, false)?;
        }
    }
    let scale = 1.0 / cfg.iterations as f64;
    let averaged = sum.into_iter().map(|v| v * scale).collect();
    Ok(Solution {
        kind: cfg.kind,
        point: x,
        averaged: Some(averaged),
        initial,
        step,
        c_bound: Some(c),
        trace: rec.trace,
    })
}

fn accelerated(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    clock: &mut dyn Clock,
) -> Result<Solution, SolverError> {
    check_common(inst, cfg)?;
    let step = default_step(inst, cfg)?;
    let initial = initial_point(inst, cfg)?;
    let gamma = step.gamma;
    let restart = cfg.kind.restart();
    let reset = match cfg.restart_reset {
        RestartReset::One => 1.0,
        RestartReset::Zero => 0.0,
    };
    let d = initial.len();

    let mut eval = inst.evaluator();
    let mut rec = Recorder::new(clock, cfg.trace, cfg.iterations);
    let mut x = initial.clone();
    let mut y = initial.clone();
    let mut x_next = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut a = 1.0;
    let mut v_x = match restart {
        Some(RestartKind::Function) => eval.value(&x),
        _ => f64::NAN,
    };
    for t in 1..=cfg.iterations {
        eval.gradient(&y, &mut grad);
        for ((xn, &ys), g) in x_next.iter_mut().zip(&y).zip(&grad) {
            *xn = (ys - gamma * g).max(0.0);
        }
        if !all_finite(&x_next) {
            return Err(SolverError::NonFinite { iter: t });
        }
        let mut a_next = momentum_coeff(a);
        let fired = match restart {
            None => false,
            Some(RestartKind::Function) => {
                let v_next = eval.value(&x_next);
                if !v_next.is_finite() {
                    return Err(SolverError::NonFinite { iter: t });
                }
                let fired = v_next > v_x;
                v_x = v_next;
                fired
            }
            Some(RestartKind::Gradient) => {
                let inner: f64 =
                    grad.iter().zip(x_next.iter().zip(&x)).map(|(g, (xn, xo))| g * (xn - xo)).sum();
                inner > 0.0
            }
        };
        if fired {
            a_next = reset;
            y.copy_from_slice(&x_next);
            rec.trace.restarts.push(t);
        } else {
            let weight = (a - 1.0) / a_next;
            for ((ys, &xn), &xo) in y.iter_mut().zip(&x_next).zip(&x) {
                *ys = xn + weight * (xn - xo);
            }
        }
        a = a_next;
        core::mem::swap(&mut x, &mut x_next);
        if rec.due(t) {
            let diag = eval.diagnostics(&x);
            rec.record(t, diag, fired)?;
        }
    }
    Ok(Solution {
        kind: cfg.kind,
        point: x,
        averaged: None,
        initial,
        step,
        c_bound: None,
        trace: rec.trace,
    })
}
