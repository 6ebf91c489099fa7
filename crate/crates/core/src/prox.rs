//! Scalar weighted proximal maps and the exact block subproblem solver.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance used by [`block_prox_step`] when no closed form is available.
pub const DEFAULT_PROX_TOL: f64 = 1e-10;
const MAX_BRACKET_DOUBLINGS: usize = 64;

/// A closed convex nonnegative scalar function with a computable subdifferential.
pub trait ConvexScalar: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    /// Endpoints `(lo, hi)` of the subdifferential interval at `x`.
    fn subgradient(&self, x: f64) -> (f64, f64);

    /// True when the map is `|·|`, enabling the soft-threshold closed form.
    fn is_abs(&self) -> bool {
        false
    }
}

/// `g(x) = |x|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Abs;

impl ConvexScalar for Abs {
    fn value(&self, x: f64) -> f64 {
        x.abs()
    }

    fn subgradient(&self, x: f64) -> (f64, f64) {
        if x > 0.0 {
            (1.0, 1.0)
        } else if x < 0.0 {
            (-1.0, -1.0)
        } else {
            (-1.0, 1.0)
        }
    }

    fn is_abs(&self) -> bool {
        true
    }
}

/// `g(x) = x²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Square;

impl ConvexScalar for Square {
    fn value(&self, x: f64) -> f64 {
        x * x
    }

    fn subgradient(&self, x: f64) -> (f64, f64) {
        (2.0 * x, 2.0 * x)
    }
}

/// `argmin_x τ|x| + ½(x − v)²`, the soft threshold `sign(v)·max(|v| − τ, 0)`.
pub fn prox_weighted_abs(v: f64, tau: f64) -> Result<f64> {
    if !v.is_finite() || !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid(format!("soft threshold needs finite v and tau >= 0, got v={v}, tau={tau}")));
    }
    Ok(soft_threshold(v, tau))
}

#[inline]
pub(crate) fn soft_threshold(v: f64, tau: f64) -> f64 {
    let mag = v.abs() - tau;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// `argmin_x τ·g(x) + ½(x − v)²`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarProxProblem<'a> {
    pub v: f64,
    pub tau: f64,
    pub g: &'a dyn ConvexScalar,
}

/// Sign of the optimality map `x − v + τ∂g(x)` at `x`: `-1` when the whole
/// interval is negative, `1` when it is positive, `0` when it contains zero.
fn optimality_sign(p: &ScalarProxProblem<'_>, x: f64) -> i8 {
    let (lo, hi) = p.g.subgradient(x);
    if x - p.v + p.tau * hi < 0.0 {
        -1
    } else if x - p.v + p.tau * lo > 0.0 {
        1
    } else {
        0
    }
}

/// Proximal map of a generic convex `g` by bisection on the subgradient
/// inclusion `0 ∈ x − v + τ∂g(x)`. The result is within `tol` of the minimizer.
pub fn prox_scalar_convex(problem: &ScalarProxProblem<'_>, tol: f64) -> Result<f64> {
    let ScalarProxProblem { v, tau, g } = *problem;
    if !v.is_finite() || !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid(format!("prox needs finite v and tau >= 0, got v={v}, tau={tau}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("prox tolerance must be positive, got {tol}")));
    }
    if tau == 0.0 {
        return Ok(v);
    }
    let (slo, shi) = g.subgradient(v);
    let bound = slo.abs().max(shi.abs()).max(1.0);
    if !bound.is_finite() {
        return Err(Error::numerical(0, format!("subgradient of g at {v} is not finite")));
    }
    let mut lo = v.min(0.0) - tau * bound;
    let mut hi = v.max(0.0) + tau * bound;

    let mut width = (hi - lo).max(1.0);
    let mut doublings = 0;
    loop {
        match optimality_sign(problem, lo) {
            0 => return Ok(lo),
            -1 => break,
            _ => {
                lo -= width;
                width *= 2.0;
                doublings += 1;
            }
        }
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::numerical(0, "prox bracket expansion exceeded 64 doublings"));
        }
    }
    let mut width = (hi - lo).max(1.0);
    let mut doublings = 0;
    loop {
        match optimality_sign(problem, hi) {
            0 => return Ok(hi),
            1 => break,
            _ => {
                hi += width;
                width *= 2.0;
                doublings += 1;
            }
        }
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::numerical(0, "prox bracket expansion exceeded 64 doublings"));
        }
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match optimality_sign(problem, mid) {
            0 => return Ok(mid),
            -1 => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve the block subproblem
/// `argmin ⟨grad, x⟩ + ‖x − x̂‖²/(2α) + Σ w_j g(x_j)` coordinate-wise:
/// each coordinate is the prox of `α·w_j·g` centred at `x̂_j − α·grad_j`.
pub fn block_prox_step(
    x_hat: &[f64],
    grad: &[f64],
    alpha: f64,
    weights: &[f64],
    g: &dyn ConvexScalar,
) -> Result<Vec<f64>> {
    if x_hat.len() != grad.len() || x_hat.len() != weights.len() {
        return Err(Error::invalid(format!(
            "block prox: lengths differ (x_hat {}, grad {}, weights {})",
            x_hat.len(),
            grad.len(),
            weights.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {alpha}")));
    }
    x_hat
        .iter()
        .zip(grad)
        .zip(weights)
        .map(|((&xh, &gr), &w)| {
            if w < 0.0 {
                return Err(Error::invalid(format!("negative weight {w}")));
            }
            let v = xh - alpha * gr;
            let tau = alpha * w;
            if g.is_abs() {
                prox_weighted_abs(v, tau)
            } else {
                prox_scalar_convex(&ScalarProxProblem { v, tau, g }, DEFAULT_PROX_TOL)
            }
        })
        .collect()
}
