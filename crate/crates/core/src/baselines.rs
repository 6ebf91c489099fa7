//! Comparison methods: PIRE, its parallel-splitting (PS) and alternating
//! update (AU) block variants, IRL1, and IRL1 with FISTA extrapolation.
//!
//! None of these use the monotone safeguard. All of them take the step
//! `1/L` with `L` the (block or global) Lipschitz estimate.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dist2, norm2};
use crate::lp::{self, SupportTracker};
use crate::model::{BlockPartition, Problem};
use crate::prox::block_prox_step;
use crate::solver::{
    final_residual, monotone_ok, weights_at, CertificateSummary, IterateView, SolveOutput, SolverConfig, Status,
    STOP_NORM_FLOOR,
};
use crate::trace::{LpTraceFields, TraceRecord};

/// FISTA extrapolation sequence with a fixed restart period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumClock {
    pub t_prev: f64,
    pub t_curr: f64,
    pub steps_since_restart: usize,
    pub restart: usize,
}

impl MomentumClock {
    pub fn new(restart: usize) -> Self {
        Self { t_prev: 1.0, t_curr: 1.0, steps_since_restart: 0, restart: restart.max(1) }
    }

    /// `β = (t_k − 1)/t_{k+1}` with `t_{k+1} = (1 + √(1 + 4t_k²))/2`; both
    /// `t` values return to 1 after `restart` calls.
    pub fn next_beta(&mut self) -> f64 {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * self.t_curr * self.t_curr).sqrt());
        let beta = (self.t_curr - 1.0) / t_next;
        self.t_prev = self.t_curr;
        self.t_curr = t_next;
        self.steps_since_restart += 1;
        if self.steps_since_restart >= self.restart {
            self.t_prev = 1.0;
            self.t_curr = 1.0;
            self.steps_since_restart = 0;
        }
        beta
    }
}

/// Functional form of [`MomentumClock::next_beta`].
pub fn fista_momentum(clock: MomentumClock) -> (f64, MomentumClock) {
    let mut next = clock;
    let beta = next.next_beta();
    (beta, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sweep {
    /// Every block from the same base point with weights frozen at sweep start.
    Jacobi,
    /// Blocks in order, each from the freshest iterate with fresh weights.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy)]
struct Variant {
    sweep: Sweep,
    momentum: bool,
}

/// PIRE: full-vector reweighted proximal gradient with step `1/L`.
pub fn pire_solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    pire_solve_observed(problem, config, x0, &mut |_| {})
}

pub fn pire_solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    let whole = problem.with_partition(BlockPartition::single(problem.dim())?)?;
    run_sweeps(&whole, config, x0, Variant { sweep: Sweep::GaussSeidel, momentum: false }, observer)
}

/// PIRE-PS: block Jacobi sweeps.
pub fn pire_ps_solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    pire_ps_solve_observed(problem, config, x0, &mut |_| {})
}

pub fn pire_ps_solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    run_sweeps(problem, config, x0, Variant { sweep: Sweep::Jacobi, momentum: false }, observer)
}

/// PIRE-AU: block Gauss–Seidel sweeps.
pub fn pire_au_solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    pire_au_solve_observed(problem, config, x0, &mut |_| {})
}

pub fn pire_au_solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    run_sweeps(problem, config, x0, Variant { sweep: Sweep::GaussSeidel, momentum: false }, observer)
}

fn require_abs(problem: &Problem, name: &str) -> Result<()> {
    if problem.penalty().inner_is_abs() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} needs g = |x|")))
    }
}

/// IRL1: PIRE restricted to `g = |·|`.
pub fn irl1_solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    irl1_solve_observed(problem, config, x0, &mut |_| {})
}

pub fn irl1_solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    require_abs(problem, "irl1")?;
    pire_solve_observed(problem, config, x0, observer)
}

/// IRL1 with full-vector FISTA extrapolation (fixed restart), no safeguard.
pub fn irl1e1_solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    irl1e1_solve_observed(problem, config, x0, &mut |_| {})
}

pub fn irl1e1_solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    require_abs(problem, "irl1e1")?;
    let whole = problem.with_partition(BlockPartition::single(problem.dim())?)?;
    run_sweeps(&whole, config, x0, Variant { sweep: Sweep::GaussSeidel, momentum: true }, observer)
}

fn run_sweeps(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    variant: Variant,
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    let part = problem.partition();
    let m = part.num_blocks();
    config.validate(m)?;
    if x0.len() != problem.dim() {
        return Err(Error::invalid(format!(
            "x0 has length {} but the problem has dimension {}",
            x0.len(),
            problem.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x0 must be finite"));
    }
    let lipschitz = (0..m).map(|b| problem.block_lipschitz(b)).collect::<Result<Vec<_>>>()?;
    let g = problem.penalty().inner();
    let is_lp = problem.penalty().is_smoothed_lp();

    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut eps = is_lp.then(|| vec![config.eps0; x.len()]);
    let mut f = problem.objective(&x, eps.as_deref())?;
    let mut clock = MomentumClock::new(config.fista_restart);
    let mut tracker = is_lp.then(|| SupportTracker::new(config.support_window));

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut monotone_violations = 0;
    let mut status = Status::MaxIter;
    let mut failure = None;
    let mut rel_step = f64::INFINITY;
    let mut sweeps = 0;

    while sweeps < config.max_iter {
        let k = sweeps + 1;
        let beta = if variant.momentum { clock.next_beta() } else { 0.0 };
        let base: Vec<f64> =
            if beta > 0.0 { x.iter().zip(&x_prev).map(|(&c, &p)| c + beta * (c - p)).collect() } else { x.clone() };
        let mut next = x.clone();
        let mut next_eps = eps.clone();

        match variant.sweep {
            Sweep::Jacobi => {
                let weights = weights_at(problem, &x, eps.as_deref());
                let grad = problem.loss().gradient(&base);
                for (b, idx) in part.blocks().iter().enumerate() {
                    let xb: Vec<f64> = idx.iter().map(|&i| base[i]).collect();
                    let gb: Vec<f64> = idx.iter().map(|&i| grad[i]).collect();
                    let wb: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
                    let nb = block_prox_step(&xb, &gb, 1.0 / lipschitz[b], &wb, g)?;
                    for (&i, &v) in idx.iter().zip(&nb) {
                        next[i] = v;
                    }
                }
                if let Some(e) = next_eps.as_mut() {
                    *e = lp::update_epsilon(&next, e, config.mu);
                }
            }
            Sweep::GaussSeidel => {
                let mut point = base;
                for (b, idx) in part.blocks().iter().enumerate() {
                    let xb_curr: Vec<f64> = idx.iter().map(|&i| next[i]).collect();
                    let wb = match next_eps.as_deref() {
                        Some(e) => {
                            let eb: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
                            xb_curr
                                .iter()
                                .zip(&eb)
                                .map(|(&xj, &ej)| problem.penalty().weight(xj, ej))
                                .collect::<Vec<f64>>()
                        }
                        None => xb_curr.iter().map(|&xj| problem.penalty().weight(xj, 0.0)).collect(),
                    };
                    let xb: Vec<f64> = idx.iter().map(|&i| point[i]).collect();
                    let gb = problem.loss().block_gradient(&point, idx);
                    let nb = block_prox_step(&xb, &gb, 1.0 / lipschitz[b], &wb, g)?;
                    for (&i, &v) in idx.iter().zip(&nb) {
                        next[i] = v;
                        point[i] = v;
                    }
                    if let Some(e) = next_eps.as_mut() {
                        let eb: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
                        for (&i, v) in idx.iter().zip(lp::update_epsilon(&nb, &eb, config.mu)) {
                            e[i] = v;
                        }
                    }
                }
            }
        }

        let f_next = problem.objective(&next, next_eps.as_deref())?;
        if !f_next.is_finite() || next.iter().any(|v| !v.is_finite()) {
            status = Status::NumericalFailure;
            failure = Some(format!("non-finite iterate at sweep {k}"));
            log::warn!("numerical failure at sweep {k}");
            break;
        }
        if !monotone_ok(f, f_next) {
            monotone_violations += 1;
        }
        let step = dist2(&next, &x);
        let step_rel = step / norm2(&x).max(STOP_NORM_FLOOR);
        x_prev = std::mem::replace(&mut x, next);
        eps = next_eps;
        f = f_next;
        sweeps = k;

        let sign_fixed = tracker.as_mut().map(|t| {
            t.push(k, lp::sign_pattern(&x));
            t.is_fixed()
        });
        if config.record_trace {
            trace.push(TraceRecord {
                k,
                f,
                step_rel,
                residual: final_residual(problem, &x, eps.as_deref()),
                beta,
                block: if m == 1 { 0 } else { -1 },
                retried: false,
                wall_ns: start.elapsed().as_nanos() as u64,
                lp: eps.as_deref().map(|e| LpTraceFields {
                    eps_min: e.iter().copied().fold(f64::INFINITY, f64::min),
                    eps_max: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    support_size: x.iter().filter(|v| **v != 0.0).count(),
                    sign_fixed: sign_fixed.unwrap_or(false),
                }),
            });
        }
        observer(IterateView { k, x: &x, eps: eps.as_deref(), f });
        if k % 1000 == 0 {
            log::info!("sweep {k} F={f:.6e} step_rel={step_rel:.3e}");
        }

        rel_step = step_rel;
        if step == 0.0 || step_rel < config.tol {
            status = Status::Converged;
            break;
        }
    }

    Ok(SolveOutput {
        residual: final_residual(problem, &x, eps.as_deref()),
        objective: f,
        status,
        iterations: sweeps,
        block_updates: sweeps * m,
        num_blocks: m,
        rel_step,
        retries: 0,
        monotone_violations,
        certificate: CertificateSummary::default(),
        trace,
        failure,
        support: tracker.map(|t| t.report()),
        x,
        eps,
    })
}
