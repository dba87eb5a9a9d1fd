//! The smooth penalized objective
//!
//! ```text
//! V(x) = -Σ_s U_{α,ξ}(x_s) + μ Σ_e softplus(A_e x - c_e)
//! ```
//!
//! over the nonnegative orthant, together with its gradient and the
//! certified smoothness constant and per-coordinate gradient bound.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, logistic, softplus};
use crate::topology::RoutingMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("alpha = {alpha}, xi = {xi}: need alpha >= 0, and xi > 0 whenever alpha > 0")]
    InvalidUtility { alpha: f64, xi: f64 },
    #[error("penalty weight mu = {0} must be positive and finite")]
    InvalidMu(f64),
    #[error("{capacities} capacities given for a routing matrix with {links} links")]
    CapacityCount { capacities: usize, links: usize },
    #[error("capacity of link {link} is {capacity}; must be finite and nonnegative")]
    InvalidCapacity { link: usize, capacity: f64 },
    #[error("rate vector has length {got}, the instance has {expected} flows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rate x[{index}] = {value} is negative or not finite")]
    InvalidRate { index: usize, value: f64 },
}

/// Parameters of the (α, ξ)-fair flow utility
/// `U(x) = (x + ξ)^{1-α} / (1-α)`, or `ln(x + ξ)` when α = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    alpha: f64,
    xi: f64,
}

impl UtilityParams {
    pub fn new(alpha: f64, xi: f64) -> Result<Self, ProblemError> {
        let ok = alpha.is_finite()
            && xi.is_finite()
            && alpha >= 0.0
            && (alpha == 0.0 && xi >= 0.0 || xi > 0.0);
        if ok {
            Ok(Self { alpha, xi })
        } else {
            Err(ProblemError::InvalidUtility { alpha, xi })
        }
    }

    /// Throughput maximization, `U(x) = x`.
    pub fn throughput() -> Self {
        Self { alpha: 0.0, xi: 0.0 }
    }

    /// Shifted proportional fairness, `U(x) = ln(x + 0.5)`.
    pub fn proportional() -> Self {
        Self { alpha: 1.0, xi: 0.5 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let z = x + self.xi;
        if self.alpha == 0.0 {
            z
        } else if self.alpha == 1.0 {
            math::ln(z)
        } else {
            math::powf(z, 1.0 - self.alpha) / (1.0 - self.alpha)
        }
    }

    /// `U'(x) = (x + ξ)^{-α}`.
    #[inline]
    pub fn marginal(&self, x: f64) -> f64 {
        let z = x + self.xi;
        if self.alpha == 0.0 {
            1.0
        } else if self.alpha == 1.0 {
            1.0 / z
        } else if self.alpha == 2.0 {
            1.0 / (z * z)
        } else {
            math::powf(z, -self.alpha)
        }
    }

    /// `α / ξ^{α+1}`, the smoothness constant of the summed utility.
    pub fn smoothness(&self) -> f64 {
        if self.alpha == 0.0 {
            0.0
        } else {
            self.alpha / math::powf(self.xi, self.alpha + 1.0)
        }
    }

    /// `ξ^{-α}`, the largest marginal utility on the orthant.
    pub fn max_marginal(&self) -> f64 {
        if self.alpha == 0.0 {
            1.0
        } else {
            math::powf(self.xi, -self.alpha)
        }
    }
}

fn check_rates(x: &[f64], d: usize) -> Result<(), ProblemError> {
    if x.len() != d {
        return Err(ProblemError::DimensionMismatch { expected: d, got: x.len() });
    }
    match x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(index) => Err(ProblemError::InvalidRate { index, value: x[index] }),
        None => Ok(()),
    }
}

/// `Σ_s U_{α,ξ}(x_s)`.
pub fn utility_value(params: &UtilityParams, x: &[f64]) -> Result<f64, ProblemError> {
    check_rates(x, x.len())?;
    Ok(x.iter().map(|&v| params.value(v)).sum())
}

/// `((x_s + ξ)^{-α})_s`.
pub fn utility_grad(params: &UtilityParams, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
    check_rates(x, x.len())?;
    Ok(x.iter().map(|&v| params.marginal(v)).collect())
}

/// Smoothness constant `β_V` and gradient bound `M` of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessCert {
    pub beta_v: f64,
    pub m_bound: f64,
}

/// Objective value, network utility and exact-penalty residual at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub objective: f64,
    pub utility: f64,
    pub exact_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    routing: RoutingMatrix,
    capacities: Vec<f64>,
    utility: UtilityParams,
    mu: f64,
}

impl ProblemInstance {
    pub fn new(
        routing: RoutingMatrix,
        capacities: Vec<f64>,
        utility: UtilityParams,
        mu: f64,
    ) -> Result<Self, ProblemError> {
        if capacities.len() != routing.rows() {
            return Err(ProblemError::CapacityCount {
                capacities: capacities.len(),
                links: routing.rows(),
            });
        }
        if let Some(link) = capacities.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(ProblemError::InvalidCapacity { link, capacity: capacities[link] });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(ProblemError::InvalidMu(mu));
        }
        Ok(Self { routing, capacities, utility, mu })
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn utility(&self) -> &UtilityParams {
        &self.utility
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn flow_count(&self) -> usize {
        self.routing.cols()
    }

    pub fn link_count(&self) -> usize {
        self.routing.rows()
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator { inst: self, loads: vec![0.0; self.link_count()] }
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        check_rates(x, self.flow_count())?;
        Ok(self.evaluator().value(x))
    }

    pub fn objective_grad(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        check_rates(x, self.flow_count())?;
        let mut grad = vec![0.0; x.len()];
        self.evaluator().gradient(x, &mut grad);
        Ok(grad)
    }

    /// `Σ_s U_{α,ξ}(x_s)` for this instance's utility.
    pub fn utility_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        check_rates(x, self.flow_count())?;
        Ok(x.iter().map(|&v| self.utility.value(v)).sum())
    }

    /// `Σ_e max(A_e x - c_e, 0)`: how far `x` violates the capacities.
    pub fn exact_penalty_residual(&self, x: &[f64]) -> Result<f64, ProblemError> {
        check_rates(x, self.flow_count())?;
        Ok(self.evaluator().diagnostics(x).exact_penalty)
    }

    pub fn diagnostics(&self, x: &[f64]) -> Result<Diagnostics, ProblemError> {
        check_rates(x, self.flow_count())?;
        Ok(self.evaluator().diagnostics(x))
    }

    /// `β_V = α/ξ^{α+1} + (μ/4) Σ_e ‖A_e‖²` and
    /// `M = max(ξ^{-α}, μ max_s Σ_e A_{e,s})`.
    pub fn certify(&self) -> SmoothnessCert {
        let row_sum: f64 = self.routing.row_norms_sq().iter().sum();
        let beta_v = self.utility.smoothness() + self.mu / 4.0 * row_sum;
        let heaviest = self.routing.column_sums().into_iter().fold(0.0, f64::max);
        let m_bound = self.utility.max_marginal().max(self.mu * heaviest);
        SmoothnessCert { beta_v, m_bound }
    }
}

/// Allocation-free objective and gradient evaluation. Inputs are assumed
/// validated: correct length, finite and nonnegative.
#[derive(Debug)]
pub struct Evaluator<'a> {
    inst: &'a ProblemInstance,
    loads: Vec<f64>,
}

impl Evaluator<'_> {
    pub fn instance(&self) -> &ProblemInstance {
        self.inst
    }

    fn penalty(&mut self, x: &[f64]) -> f64 {
        self.inst.routing.mul_vec_into(x, &mut self.loads);
        self.loads.iter().zip(&self.inst.capacities).map(|(l, c)| softplus(l - c)).sum()
    }

    pub fn value(&mut self, x: &[f64]) -> f64 {
        let u = &self.inst.utility;
        let utility: f64 = x.iter().map(|&v| u.value(v)).sum();
        -utility + self.inst.mu * self.penalty(x)
    }

    /// Writes `∇V(x)` into `grad`.
    pub fn gradient(&mut self, x: &[f64], grad: &mut [f64]) {
        let inst = self.inst;
        inst.routing.mul_vec_into(x, &mut self.loads);
        for (load, &c) in self.loads.iter_mut().zip(&inst.capacities) {
            *load = inst.mu * logistic(*load - c);
        }
        for (g, &v) in grad.iter_mut().zip(x) {
            *g = -inst.utility.marginal(v);
        }
        inst.routing.transpose_mul_add(&self.loads, grad);
    }

    pub fn diagnostics(&mut self, x: &[f64]) -> Diagnostics {
        let inst = self.inst;
        let utility: f64 = x.iter().map(|&v| inst.utility.value(v)).sum();
        inst.routing.mul_vec_into(x, &mut self.loads);
        let mut soft = 0.0;
        let mut exact = 0.0;
        for (l, c) in self.loads.iter().zip(&inst.capacities) {
            soft += softplus(l - c);
            exact += (l - c).max(0.0);
        }
        Diagnostics { objective: -utility + inst.mu * soft, utility, exact_penalty: exact }
    }
}
