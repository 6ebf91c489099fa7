//! Smoothed ℓp regularisation: per-coordinate smoothing factors and their
//! decay rule, plus sign-pattern monitoring.
//!
//! The model is `f(x) + λ Σ_j (|x_j| + ε_j²)^p`. After each block update the
//! smoothing factor of every coordinate that came out nonzero is multiplied
//! by `√μ`; coordinates that came out exactly zero keep theirs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PenaltyKind, Problem};
use crate::solver::{self, IterateView, SolveOutput, SolverConfig, SolverState, StepHook, StepReport};
use crate::trace::{LpTraceFields, TraceRecord};

/// Smoothing factors never drop below this, which keeps `ε²` a normal float
/// and every weight finite.
pub const EPS_FLOOR: f64 = 1e-150;

/// `λ p (|x_j| + ε_j²)^{p−1}` for each coordinate of a block.
pub fn lp_weights(x_block: &[f64], eps_block: &[f64], lambda: f64, p: f64) -> Result<Vec<f64>> {
    if x_block.len() != eps_block.len() {
        return Err(Error::invalid("lp weights: x and eps lengths differ"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    x_block
        .iter()
        .zip(eps_block)
        .map(|(&x, &e)| {
            if !(e > 0.0) {
                return Err(Error::invalid(format!("smoothing factor must be positive, got {e}")));
            }
            Ok(lambda * p * (x.abs() + e * e).powf(p - 1.0))
        })
        .collect()
}

/// Keep `ε_j` where the new coordinate is exactly zero, otherwise shrink it to `√μ·ε_j`.
pub fn update_epsilon(x_new_block: &[f64], eps_block: &[f64], mu: f64) -> Vec<f64> {
    let shrink = mu.sqrt();
    x_new_block.iter().zip(eps_block).map(|(&x, &e)| if x == 0.0 { e } else { (shrink * e).max(EPS_FLOOR) }).collect()
}

/// Sign pattern `sign(x) ∈ {−1, 0, 1}ⁿ`.
pub fn sign_pattern(x: &[f64]) -> Vec<i8> {
    x.iter()
        .map(|&v| {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Verdict of the support monitor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportReport {
    /// The last `window` recorded sign vectors are identical.
    pub fixed: bool,
    /// First iteration (1-based) of the terminal run of identical signs.
    pub k_observed: Option<usize>,
    pub sign: Vec<i8>,
    pub window: usize,
}

impl SupportReport {
    pub fn support_size(&self) -> usize {
        self.sign.iter().filter(|&&s| s != 0).count()
    }
}

/// Inspect a sequence of sign vectors, the `i`-th recorded at iteration `i + 1`.
pub fn support_monitor(signs: &[Vec<i8>], window: usize) -> SupportReport {
    let mut tracker = SupportTracker::new(window);
    for (i, s) in signs.iter().enumerate() {
        tracker.push(i + 1, s.clone());
    }
    tracker.report()
}

/// Incremental form of [`support_monitor`] holding only the last `window` signs.
#[derive(Debug, Clone)]
pub struct SupportTracker {
    window: usize,
    history: VecDeque<Vec<i8>>,
    run_start: Option<usize>,
}

impl SupportTracker {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), history: VecDeque::new(), run_start: None }
    }

    pub fn push(&mut self, k: usize, sign: Vec<i8>) {
        if self.history.back() != Some(&sign) {
            self.run_start = Some(k);
        }
        self.history.push_back(sign);
        if self.history.len() > self.window {
            self.history.pop_front();
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.history.len() == self.window && self.history.iter().all(|s| s == &self.history[0])
    }

    pub fn report(&self) -> SupportReport {
        SupportReport {
            fixed: self.is_fixed(),
            k_observed: self.run_start,
            sign: self.history.back().cloned().unwrap_or_default(),
            window: self.window,
        }
    }
}

struct LpHook {
    tracker: SupportTracker,
}

impl StepHook for LpHook {
    fn after_step(&mut self, state: &SolverState, report: &StepReport, record: Option<&mut TraceRecord>) {
        let sign = sign_pattern(&state.x);
        let support_size = sign.iter().filter(|&&s| s != 0).count();
        self.tracker.push(report.k, sign);
        if let Some(r) = record {
            let eps = state.eps.as_deref().unwrap_or(&[]);
            r.lp = Some(LpTraceFields {
                eps_min: eps.iter().copied().fold(f64::INFINITY, f64::min),
                eps_max: eps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                support_size,
                sign_fixed: self.tracker.is_fixed(),
            });
        }
    }

    fn finish(&mut self, output: &mut SolveOutput) {
        output.support = Some(self.tracker.report());
    }

    // A run whose sign pattern is still changing has not settled, however
    // small its steps.
    fn ready_to_stop(&self) -> bool {
        self.tracker.is_fixed()
    }
}

/// Run the block solver on a smoothed ℓp problem, decaying smoothing factors
/// after each block update and tracking the sign pattern. Convergence also
/// requires the sign pattern to have been constant over the support window.
pub fn solve_lp(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    solve_lp_observed(problem, config, x0, &mut |_| {})
}

pub fn solve_lp_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    if !matches!(problem.penalty().kind(), PenaltyKind::SmoothedLp { .. }) || !problem.penalty().inner_is_abs() {
        return Err(Error::invalid("solve_lp needs a smoothed lp penalty with g = |x|"));
    }
    let mut hook = LpHook { tracker: SupportTracker::new(config.support_window) };
    solver::drive(problem, config, x0, observer, &mut hook)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert!((lp_weights(&[0.0], &[1.0], 1.0, 0.5).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((lp_weights(&[0.0], &[1.0], 0.015, 0.1).unwrap()[0] - 0.0015).abs() < 1e-15);
        let w = lp_weights(&[1e6, 2e6], &[1.0, 1.0], 1.0, 0.3).unwrap();
        assert!(w[1] < w[0]);
        assert!((w[0] - 0.3 * (1e6f64 + 1.0).powf(-0.7)).abs() / w[0] < 1e-9);
        assert!(lp_weights(&[0.0], &[0.0], 1.0, 0.5).is_err());
        assert!(lp_weights(&[0.0], &[-1.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(update_epsilon(&[0.0], &[0.5], 0.1), vec![0.5]);
        assert!((update_epsilon(&[1.0], &[1.0], 0.1)[0] - 0.316_227_766_016_837_94).abs() < 1e-15);
        let mut e = vec![2.0];
        for _ in 0..6 {
            e = update_epsilon(&[-3.0], &e, 0.25);
        }
        assert!((e[0] - 2.0 * 0.25f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn monitor_examples() {
        let s = vec![1i8, 0, -1];
        let r = support_monitor(&vec![s.clone(); 120], 100);
        assert!(r.fixed);
        assert_eq!(r.k_observed, Some(1));
        assert_eq!(r.sign, s);

        let mut seq = vec![vec![1i8, 0]; 50];
        seq.extend(vec![vec![1i8, 1]; 150]);
        let r = support_monitor(&seq, 100);
        assert!(r.fixed);
        assert_eq!(r.k_observed, Some(51));

        let r = support_monitor(&seq[..120], 100);
        assert!(!r.fixed);
        let r = support_monitor(&vec![s; 10], 100);
        assert!(!r.fixed);
    }
}
