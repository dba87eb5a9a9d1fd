//! Ground truth that does not share code paths with the solvers.
//!
//! None of these routines evaluate the analytic gradient: they only call the
//! objective value (or, for the LP, the raw routing matrix and capacities).

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, softplus};
use crate::problem::ProblemInstance;

/// Largest flow count and link count the LP vertex enumeration accepts.
pub const VERTEX_GUARD: usize = 8;
/// Largest flow count the grid search accepts.
pub const GRID_GUARD: usize = 3;
/// Grid points per axis in each refinement round.
pub const GRID_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("closed form needs mu > 1, got {0}")]
    MuTooSmall(f64),
    #[error("closed form needs at least one flow")]
    NoFlows,
    #[error("vertex enumeration guard d ≤ {VERTEX_GUARD} and |E| ≤ {VERTEX_GUARD} exceeded (got d = {flows}, |E| = {links})")]
    VertexGuard { flows: usize, links: usize },
    #[error("grid search guard d ≤ {GRID_GUARD} exceeded (got d = {0})")]
    GridGuard(usize),
    #[error("the LP oracle needs alpha = 0, got {0}")]
    NotLinear(f64),
    #[error("flow {0} crosses no link, so the LP is unbounded")]
    Unbounded(usize),
    #[error("grid tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("box bounds: expected {expected} nonnegative finite values, got {got:?}")]
    InvalidBox { expected: usize, got: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Analytic,
    VertexLp,
    Grid,
}

impl OracleMethod {
    pub fn label(self) -> &'static str {
        match self {
            OracleMethod::Analytic => "analytic",
            OracleMethod::VertexLp => "vertex_lp",
            OracleMethod::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub point: Vec<f64>,
    /// The penalized objective minimum for `Analytic`/`Grid`; the LP utility
    /// optimum `U*` for `VertexLp`.
    pub value: f64,
    /// Bound on `|value - true optimum|`.
    pub tolerance: f64,
    pub method: OracleMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdMode {
    Central,
    /// Second-order forward difference, used when `x_s < h_s`.
    Forward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub grad: Vec<f64>,
    pub modes: Vec<FdMode>,
}

/// `h_s = 1e-5 (1 + |x_s|)`.
pub fn default_fd_steps(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 1e-5 * (1.0 + v.abs())).collect()
}

/// Numerical gradient of the objective. Coordinates closer than `h_s` to the
/// orthant boundary use `(-3f(x) + 4f(x+h) - f(x+2h)) / 2h` so that every
/// evaluation stays feasible and the error stays `O(h²)`.
///
/// # Panics
/// If `x` or `h` do not have one entry per flow, or `x` is not a valid rate
/// vector.
pub fn finite_diff_grad(inst: &ProblemInstance, x: &[f64], h: &[f64]) -> FdGradient {
    assert_eq!(h.len(), x.len(), "one step per coordinate");
    let f = |p: &[f64]| inst.objective_value(p).expect("valid rate vector");
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    let mut modes = Vec::with_capacity(x.len());
    for s in 0..x.len() {
        let hs = h[s];
        if x[s] >= hs {
            probe[s] = x[s] + hs;
            let up = f(&probe);
            probe[s] = x[s] - hs;
            let down = f(&probe);
            grad.push((up - down) / (2.0 * hs));
            modes.push(FdMode::Central);
        } else {
            let here = f(&probe);
            probe[s] = x[s] + hs;
            let one = f(&probe);
            probe[s] = x[s] + 2.0 * hs;
            let two = f(&probe);
            grad.push((-3.0 * here + 4.0 * one - two) / (2.0 * hs));
            modes.push(FdMode::Forward);
        }
        probe[s] = x[s];
    }
    FdGradient { grad, modes }
}

/// Closed-form optimum for `n` throughput flows sharing one link of capacity
/// `c`: stationarity `-1 + μ logistic(Σx - c) = 0` gives the total rate
/// `c - ln(μ - 1)` (clipped at zero), split evenly.
pub fn analytic_single_link(c: f64, mu: f64, n_flows: usize) -> Result<OracleResult, OracleError> {
    if !(mu > 1.0) {
        return Err(OracleError::MuTooSmall(mu));
    }
    if n_flows == 0 {
        return Err(OracleError::NoFlows);
    }
    let total = (c - math::ln(mu - 1.0)).max(0.0);
    let value = -total + mu * softplus(total - c);
    Ok(OracleResult {
        point: vec![total / n_flows as f64; n_flows],
        value,
        tolerance: 0.0,
        method: OracleMethod::Analytic,
    })
}

/// Solves `A x = b` for a square system with partial pivoting; `None` when
/// singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact optimum of `max Σx s.t. Ax ≤ c, x ≥ 0` by enumerating every basic
/// solution. Ties on the objective go to the lexicographically smallest point.
pub fn vertex_lp_optimum(inst: &ProblemInstance) -> Result<OracleResult, OracleError> {
    let alpha = inst.utility().alpha();
    if alpha != 0.0 {
        return Err(OracleError::NotLinear(alpha));
    }
    let d = inst.flow_count();
    let links = inst.link_count();
    if d > VERTEX_GUARD || links > VERTEX_GUARD {
        return Err(OracleError::VertexGuard { flows: d, links });
    }
    let a = inst.routing();
    if let Some(s) = a.column_sums().iter().position(|&v| v == 0.0) {
        return Err(OracleError::Unbounded(s));
    }
    if d == 0 {
        return Ok(OracleResult {
            point: Vec::new(),
            value: 0.0,
            tolerance: 0.0,
            method: OracleMethod::VertexLp,
        });
    }

    // constraint rows: links first, then -x_s <= 0
    let mut rows: Vec<(Vec<f64>, f64)> = (0..links)
        .map(|e| {
            let mut row = vec![0.0; d];
            for (s, v) in a.row(e) {
                row[s] = v;
            }
            (row, inst.capacities()[e])
        })
        .collect();
    for s in 0..d {
        let mut row = vec![0.0; d];
        row[s] = -1.0;
        rows.push((row, 0.0));
    }
    let feasible = |x: &[f64]| {
        rows.iter().all(|(row, rhs)| math::dot(row, x) <= rhs + 1e-9 * (1.0 + rhs.abs()))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut active: Vec<usize> = (0..d).collect();
    loop {
        let m = active.iter().map(|&i| rows[i].0.clone()).collect();
        let b = active.iter().map(|&i| rows[i].1).collect();
        if let Some(mut x) = solve_square(m, b) {
            if feasible(&x) {
                for v in &mut x {
                    // snap -0.0 and rounding noise at the bound
                    if v.abs() < 1e-12 {
                        *v = 0.0;
                    }
                }
                let value: f64 = x.iter().sum();
                let better = match &best {
                    None => true,
                    Some((bv, bx)) => {
                        let scale = 1e-12 * (1.0 + bv.abs());
                        value > bv + scale
                            || (value >= bv - scale
                                && x.iter().zip(bx).find(|(p, q)| p != q).is_some_and(|(p, q)| p < q))
                    }
                };
                if better {
                    best = Some((value, x));
                }
            }
        }
        if !next_combination(&mut active, rows.len()) {
            break;
        }
    }
    // x = 0 is always a feasible vertex, so `best` is set
    let (value, point) = best.expect("origin is a basic feasible solution");
    Ok(OracleResult { point, value, tolerance: 0.0, method: OracleMethod::VertexLp })
}

/// Default search box: `max_e c_e + 10` per flow.
pub fn default_box(inst: &ProblemInstance) -> Vec<f64> {
    let largest = inst.capacities().iter().copied().fold(0.0, f64::max);
    vec![largest + 10.0; inst.flow_count()]
}

/// Nested grid search for `d ≤ 3`: evaluate a 21-point-per-axis grid on the
/// box, shrink the box to the cells around the best point, and repeat until
/// the grid cell diameter drops below `tol`.
///
/// The returned tolerance on the value is `β tol²/2 + M sqrt(d) tol`: the
/// quadratic term covers interior optima, the linear one boundary optima
/// where the gradient does not vanish.
pub fn grid_refine_optimum(
    inst: &ProblemInstance,
    upper: Option<&[f64]>,
    tol: f64,
) -> Result<OracleResult, OracleError> {
    let d = inst.flow_count();
    if d > GRID_GUARD {
        return Err(OracleError::GridGuard(d));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    let bounds = match upper {
        Some(u) => {
            if u.len() != d || u.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(OracleError::InvalidBox { expected: d, got: u.to_vec() });
            }
            u.to_vec()
        }
        None => default_box(inst),
    };
    let mut eval = inst.evaluator();
    let mut lo = vec![0.0; d];
    let mut hi = bounds.clone();
    let intervals = (GRID_POINTS - 1) as f64;
    let mut best = lo.clone();
    let mut best_value = eval.value(&best);
    loop {
        let spacing: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / intervals).collect();
        let total = GRID_POINTS.pow(d as u32);
        let mut point = vec![0.0; d];
        for index in 0..total {
            let mut rest = index;
            for k in 0..d {
                let i = rest % GRID_POINTS;
                rest /= GRID_POINTS;
                point[k] = if i == GRID_POINTS - 1 { hi[k] } else { lo[k] + i as f64 * spacing[k] };
            }
            let value = eval.value(&point);
            if value < best_value {
                best_value = value;
                best.copy_from_slice(&point);
            }
        }
        let diameter = math::sqrt(math::norm_sq(&spacing));
        if diameter < tol {
            break;
        }
        for k in 0..d {
            lo[k] = (best[k] - spacing[k]).max(0.0);
            hi[k] = (best[k] + spacing[k]).min(bounds[k]);
        }
    }
    let cert = inst.certify();
    let tolerance = cert.beta_v * tol * tol / 2.0 + cert.m_bound * math::sqrt(d as f64) * tol;
    Ok(OracleResult { point: best, value: best_value, tolerance, method: OracleMethod::Grid })
}
