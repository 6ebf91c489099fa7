//! The block proximal iteratively reweighted loop with extrapolation.
//!
//! Each iteration picks a block `b_k`, extrapolates that block from its two
//! most recent values, linearises the concave penalty at the current iterate
//! to get weights `w_j = λ h′(g(x_j))`, and solves the weighted proximal
//! subproblem exactly. Every other block is copied unchanged.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::MomentumClock;
use crate::error::{Error, Result};
use crate::linalg::{dist2, norm2};
use crate::lp;
use crate::model::Problem;
use crate::prox::block_prox_step;
use crate::trace::TraceRecord;

/// Floor applied to `‖x^k‖` in the relative-step stopping test.
pub const STOP_NORM_FLOOR: f64 = 1e-12;
/// Blocks get zero extrapolation on their first this-many updates.
pub const MOMENTUM_WARMUP: usize = 2;

/// Order in which blocks are visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    Cyclic,
    /// Concatenated independent uniform permutations of the blocks.
    ShuffledCycles {
        seed: u64,
    },
}

impl Schedule {
    /// Window length within which every block is guaranteed to appear.
    pub fn guaranteed_window(&self, m: usize) -> usize {
        match self {
            Schedule::Cyclic => m,
            Schedule::ShuffledCycles { .. } => 2 * m - 1,
        }
    }
}

/// Block picked at iteration `k ≥ 1` (zero-based block index).
///
/// Shuffled cycles draw the permutation of cycle `c` from stream `c` of a
/// ChaCha8 generator keyed by the seed, so any pick is computable directly.
pub fn choose_block(schedule: &Schedule, k: usize, m: usize) -> usize {
    assert!(k >= 1 && m >= 1, "choose_block needs k >= 1 and m >= 1");
    let pos = (k - 1) % m;
    match schedule {
        Schedule::Cyclic => pos,
        Schedule::ShuffledCycles { seed } => cycle_permutation(*seed, (k - 1) / m, m)[pos],
    }
}

fn cycle_permutation(seed: u64, cycle: usize, m: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cycle as u64);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Iterator over block picks that caches the current cycle's permutation.
#[derive(Debug, Clone)]
pub struct BlockSelector {
    schedule: Schedule,
    m: usize,
    cycle: Option<(usize, Vec<usize>)>,
}

impl BlockSelector {
    pub fn new(schedule: Schedule, m: usize) -> Self {
        Self { schedule, m, cycle: None }
    }

    pub fn pick(&mut self, k: usize) -> usize {
        match self.schedule {
            Schedule::Cyclic => choose_block(&self.schedule, k, self.m),
            Schedule::ShuffledCycles { seed } => {
                let c = (k - 1) / self.m;
                if self.cycle.as_ref().map(|(cc, _)| *cc) != Some(c) {
                    self.cycle = Some((c, cycle_permutation(seed, c, self.m)));
                }
                self.cycle.as_ref().unwrap().1[(k - 1) % self.m]
            }
        }
    }
}

/// Where the candidate extrapolation parameter comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumSchedule {
    /// Always zero: a plain block proximal reweighted step.
    Zero,
    /// The largest admissible value from [`extrapolation_bound`].
    Bound,
    /// FISTA sequence with fixed restart, one clock per block.
    Fista,
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stepsize divisor: `α_k = 1/(γ L_k)`.
    pub gamma: f64,
    /// Momentum safety factor in `(0, 1)`.
    pub delta: f64,
    pub schedule: Schedule,
    /// Essentially-cyclic window; defaults to the schedule's guaranteed window.
    pub cycle_bound: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub safeguard: bool,
    pub momentum: MomentumSchedule,
    /// Clip the momentum schedule to the admissible bound.
    pub cap_extrapolation: bool,
    /// FISTA restart period of the full-vector baselines.
    pub fista_restart: usize,
    /// Smoothing decay factor (ℓp only).
    pub mu: f64,
    /// Initial smoothing factor (ℓp only).
    pub eps0: f64,
    /// Sign-history window of the support monitor (ℓp only).
    pub support_window: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            delta: 0.9,
            schedule: Schedule::Cyclic,
            cycle_bound: None,
            max_iter: 100_000,
            tol: 1e-4,
            safeguard: true,
            momentum: MomentumSchedule::Fista,
            cap_extrapolation: true,
            fista_restart: 200,
            mu: 0.1,
            eps0: 1.0,
            support_window: 100,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::invalid(format!("solver.{field}: {why}")));
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("gamma", format!("must exceed 1, got {}", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("mu", format!("must lie in (0, 1), got {}", self.mu));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("must be positive, got {}", self.tol));
        }
        if self.fista_restart == 0 {
            return bad("fista_restart", "must be positive".into());
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad("eps0", format!("must be positive, got {}", self.eps0));
        }
        if self.support_window == 0 {
            return bad("support_window", "must be positive".into());
        }
        if let Some(t) = self.cycle_bound {
            if t < m {
                return bad("cycle_bound", format!("must be at least the block count {m}, got {t}"));
            }
            if t < self.schedule.guaranteed_window(m) {
                return bad(
                    "cycle_bound",
                    format!(
                        "{t} is shorter than the schedule's guaranteed window {}",
                        self.schedule.guaranteed_window(m)
                    ),
                );
            }
        }
        Ok(())
    }

    pub fn window(&self, m: usize) -> usize {
        self.cycle_bound.unwrap_or_else(|| self.schedule.guaranteed_window(m))
    }
}

/// Largest admissible momentum `δ(γ−1)/(2(γ+1))·√(L_prev/L_curr)`.
pub fn extrapolation_bound(l_prev: f64, l_curr: f64, gamma: f64, delta: f64) -> f64 {
    delta * (gamma - 1.0) / (2.0 * (gamma + 1.0)) * (l_prev / l_curr).sqrt()
}

/// `x_curr + β(x_curr − x_prev)`.
pub fn extrapolate(x_curr: &[f64], x_prev: &[f64], beta: f64) -> Vec<f64> {
    x_curr.iter().zip(x_prev).map(|(&c, &p)| c + beta * (c - p)).collect()
}

/// Outcome of the per-iteration sufficient-decrease check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub holds: bool,
    pub slack: f64,
}

/// Inputs of [`descent_certificate`] for one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentInputs {
    pub f_prev: f64,
    pub f_next: f64,
    pub l_curr: f64,
    pub l_prev: f64,
    pub beta: f64,
    pub step_norm: f64,
    pub prev_step_norm: f64,
    pub gamma: f64,
}

/// Check `F_prev − F_next ≥ c₁ L ‖Δ‖² − c₂ L β² ‖Δ_prev‖²` with
/// `c₁ = (γ−1)/4`, `c₂ = (γ+1)²/(γ−1)`, up to `1e-9·(1+|F_prev|)`.
pub fn descent_certificate(d: &DescentInputs) -> Certificate {
    let c1 = (d.gamma - 1.0) / 4.0;
    let c2 = (d.gamma + 1.0).powi(2) / (d.gamma - 1.0);
    let rhs = c1 * d.l_curr * d.step_norm.powi(2) - c2 * d.l_curr * d.beta.powi(2) * d.prev_step_norm.powi(2);
    let slack = (d.f_prev - d.f_next) - rhs;
    Certificate { holds: slack >= -1e-9 * (1.0 + d.f_prev.abs()), slack }
}

/// Reweighting coefficients `λ h′(g(x_j))` at `x` for every coordinate.
pub fn weights_at(problem: &Problem, x: &[f64], eps: Option<&[f64]>) -> Vec<f64> {
    let pen = problem.penalty();
    match eps {
        Some(e) => x.iter().zip(e).map(|(&xj, &ej)| pen.weight(xj, ej)).collect(),
        None => x.iter().map(|&xj| pen.weight(xj, 0.0)).collect(),
    }
}

/// `dist(0, ∂F(x))` for a separable `|·|` penalty, given the weights
/// `λ h′(|x_j|)` at `x`.
pub fn stationarity_residual(problem: &Problem, x: &[f64], weights: &[f64]) -> Result<f64> {
    if !problem.penalty().inner_is_abs() {
        return Err(Error::Unsupported("stationarity residual needs g = |x|".into()));
    }
    if x.len() != problem.dim() || weights.len() != x.len() {
        return Err(Error::invalid("stationarity residual: dimension mismatch"));
    }
    let grad = problem.loss().gradient(x);
    Ok(residual_from_gradient(&grad, x, weights))
}

pub(crate) fn residual_from_gradient(grad: &[f64], x: &[f64], weights: &[f64]) -> f64 {
    grad.iter()
        .zip(x)
        .zip(weights)
        .map(|((&g, &xj), &w)| {
            let r = if xj != 0.0 { g + w * xj.signum() } else { (g.abs() - w).max(0.0) };
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Mutable state of one solver run.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Current iterate `x^k`.
    pub x: Vec<f64>,
    /// Per block, its value before its most recent update.
    pub prev_block_values: Vec<Vec<f64>>,
    /// Per block, the number of times it has been updated.
    pub update_counts: Vec<usize>,
    /// Per block, the Lipschitz constant used at its most recent update.
    pub last_block_l: Vec<Option<f64>>,
    /// Weights most recently used for each coordinate.
    pub weights: Vec<f64>,
    /// Smoothing factors (ℓp penalty only).
    pub eps: Option<Vec<f64>>,
    pub f_current: f64,
    pub k: usize,
    clocks: Vec<MomentumClock>,
}

impl SolverState {
    pub fn new(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<Self> {
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
        let eps = problem.penalty().is_smoothed_lp().then(|| vec![config.eps0; x0.len()]);
        let f_current = problem.objective(x0, eps.as_deref())?;
        let part = problem.partition();
        Ok(Self {
            x: x0.to_vec(),
            prev_block_values: part.blocks().iter().map(|b| b.iter().map(|&i| x0[i]).collect()).collect(),
            update_counts: vec![0; part.num_blocks()],
            last_block_l: vec![None; part.num_blocks()],
            weights: weights_at(problem, x0, eps.as_deref()),
            eps,
            f_current,
            k: 0,
            // The restart period belongs to the full-vector baselines; block clocks run on.
            clocks: vec![MomentumClock::new(usize::MAX); part.num_blocks()],
        })
    }
}

/// What happened during one accepted iteration.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub k: usize,
    pub block: usize,
    pub beta_used: f64,
    pub retried: bool,
    pub f_prev: f64,
    pub f_next: f64,
    pub l_curr: f64,
    pub l_prev: f64,
    /// `‖x^k − x^{k−1}‖`.
    pub step_norm: f64,
    /// `‖x̃^{j−1} − x̃^{j−2}‖` for the chosen block.
    pub prev_step_norm: f64,
    /// `‖x^{k−1}‖`.
    pub prev_norm: f64,
    pub certificate: Certificate,
}

struct Candidate {
    block_values: Vec<f64>,
    x: Vec<f64>,
    eps: Option<Vec<f64>>,
    f: f64,
}

/// A solver run: the problem, its cached block constants and the evolving state.
#[derive(Debug, Clone)]
pub struct Bpiree<'p> {
    problem: &'p Problem,
    config: SolverConfig,
    lipschitz: Vec<f64>,
    selector: BlockSelector,
    state: SolverState,
}

impl<'p> Bpiree<'p> {
    pub fn new(problem: &'p Problem, config: SolverConfig, x0: &[f64]) -> Result<Self> {
        let m = problem.partition().num_blocks();
        config.validate(m)?;
        let lipschitz = (0..m).map(|b| problem.block_lipschitz(b)).collect::<Result<Vec<_>>>()?;
        let state = SolverState::new(problem, &config, x0)?;
        Ok(Self { problem, selector: BlockSelector::new(config.schedule, m), config, lipschitz, state })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn block_lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn candidate(&self, block: usize, x_hat: &[f64], alpha: f64, weights: &[f64]) -> Result<Candidate> {
        let idx = &self.problem.partition().blocks()[block];
        let st = &self.state;
        let mut point = st.x.clone();
        for (&i, &v) in idx.iter().zip(x_hat) {
            point[i] = v;
        }
        let grad = self.problem.loss().block_gradient(&point, idx);
        let block_values = block_prox_step(x_hat, &grad, alpha, weights, self.problem.penalty().inner())?;
        let mut x = st.x.clone();
        for (&i, &v) in idx.iter().zip(&block_values) {
            x[i] = v;
        }
        let eps = st.eps.as_ref().map(|e| {
            let old: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
            let new = lp::update_epsilon(&block_values, &old, self.config.mu);
            let mut full = e.clone();
            for (&i, &v) in idx.iter().zip(&new) {
                full[i] = v;
            }
            full
        });
        let f = self.problem.objective(&x, eps.as_deref())?;
        Ok(Candidate { block_values, x, eps, f })
    }

    /// Perform one iteration and commit it to the state.
    pub fn step(&mut self) -> Result<StepReport> {
        let k = self.state.k + 1;
        let block = self.selector.pick(k);
        let idx = self.problem.partition().blocks()[block].clone();

        let l_curr = self.lipschitz[block];
        let l_prev = self.state.last_block_l[block].unwrap_or(l_curr);
        let alpha = 1.0 / (self.config.gamma * l_curr);

        let schedule_beta = self.state.clocks[block].next_beta();
        let bound = extrapolation_bound(l_prev, l_curr, self.config.gamma, self.config.delta);
        let beta = if self.state.update_counts[block] < MOMENTUM_WARMUP {
            0.0
        } else {
            match self.config.momentum {
                MomentumSchedule::Zero => 0.0,
                MomentumSchedule::Bound => bound,
                MomentumSchedule::Fista if self.config.cap_extrapolation => schedule_beta.min(bound),
                MomentumSchedule::Fista => schedule_beta,
            }
        };

        let x_curr: Vec<f64> = idx.iter().map(|&i| self.state.x[i]).collect();
        let x_prev = &self.state.prev_block_values[block];
        let prev_step_norm = dist2(&x_curr, x_prev);

        let eps_block: Option<Vec<f64>> = self.state.eps.as_ref().map(|e| idx.iter().map(|&i| e[i]).collect());
        let pen = self.problem.penalty();
        let weights: Vec<f64> = match &eps_block {
            Some(e) => x_curr.iter().zip(e).map(|(&xj, &ej)| pen.weight(xj, ej)).collect(),
            None => x_curr.iter().map(|&xj| pen.weight(xj, 0.0)).collect(),
        };

        let f_prev = self.state.f_current;
        let x_hat = extrapolate(&x_curr, x_prev, beta);
        let mut cand = self.candidate(block, &x_hat, alpha, &weights)?;
        let mut beta_used = beta;
        let mut retried = false;
        if self.config.safeguard && beta > 0.0 && cand.f > f_prev {
            cand = self.candidate(block, &x_curr, alpha, &weights)?;
            beta_used = 0.0;
            retried = true;
        }

        if !cand.f.is_finite() || cand.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                k,
                format!("non-finite objective {} after updating block {block} (beta {beta_used}, L {l_curr})", cand.f),
            ));
        }

        let step_norm = dist2(&cand.block_values, &x_curr);
        let prev_norm = norm2(&self.state.x);
        let certificate = descent_certificate(&DescentInputs {
            f_prev,
            f_next: cand.f,
            l_curr,
            l_prev,
            beta: beta_used,
            step_norm,
            prev_step_norm,
            gamma: self.config.gamma,
        });

        let st = &mut self.state;
        st.prev_block_values[block] = x_curr;
        st.update_counts[block] += 1;
        st.last_block_l[block] = Some(l_curr);
        for (&i, &w) in idx.iter().zip(&weights) {
            st.weights[i] = w;
        }
        st.x = cand.x;
        st.eps = cand.eps;
        st.f_current = cand.f;
        st.k = k;

        Ok(StepReport {
            k,
            block,
            beta_used,
            retried,
            f_prev,
            f_next: cand.f,
            l_curr,
            l_prev,
            step_norm,
            prev_step_norm,
            prev_norm,
            certificate,
        })
    }
}

/// Termination status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIter,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "Converged",
            Status::MaxIter => "MaxIter",
            Status::NumericalFailure => "NumericalFailure",
        }
    }
}

/// Tally of the descent certificate over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub checked: usize,
    pub violations: usize,
    pub min_slack: f64,
}

impl Default for CertificateSummary {
    fn default() -> Self {
        Self { checked: 0, violations: 0, min_slack: f64::INFINITY }
    }
}

impl CertificateSummary {
    pub(crate) fn record(&mut self, c: &Certificate) {
        self.checked += 1;
        if !c.holds {
            self.violations += 1;
        }
        self.min_slack = self.min_slack.min(c.slack);
    }
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: Vec<f64>,
    pub eps: Option<Vec<f64>>,
    pub status: Status,
    /// Iterations in the algorithm's own unit (block updates for the block
    /// solver, sweeps for the sweep-based baselines).
    pub iterations: usize,
    /// Total number of block subproblems solved.
    pub block_updates: usize,
    pub num_blocks: usize,
    pub objective: f64,
    /// Last relative step `‖x^k − x^{k−1}‖ / max(‖x^{k−1}‖, 1e-12)`.
    pub rel_step: f64,
    pub residual: f64,
    pub retries: usize,
    pub monotone_violations: usize,
    pub certificate: CertificateSummary,
    pub trace: Vec<TraceRecord>,
    pub failure: Option<String>,
    pub support: Option<lp::SupportReport>,
}

impl SolveOutput {
    /// Work measured in full passes over the variables.
    pub fn passes(&self) -> f64 {
        self.block_updates as f64 / self.num_blocks as f64
    }
}

/// View of an accepted iterate handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a [f64],
    pub eps: Option<&'a [f64]>,
    pub f: f64,
}

/// Tolerance of the monotonicity audit: `F_k ≤ F_{k−1} + 1e-12·(1+|F_{k−1}|)`.
pub(crate) fn monotone_ok(f_prev: f64, f_next: f64) -> bool {
    f_next <= f_prev + 1e-12 * (1.0 + f_prev.abs())
}

/// Hook run after every accepted block iteration.
pub(crate) trait StepHook {
    fn after_step(&mut self, state: &SolverState, report: &StepReport, record: Option<&mut TraceRecord>);
    fn finish(&mut self, output: &mut SolveOutput);
    /// Extra condition that must hold before the run may report convergence.
    fn ready_to_stop(&self) -> bool {
        true
    }
}

struct NoHook;

impl StepHook for NoHook {
    fn after_step(&mut self, _: &SolverState, _: &StepReport, _: Option<&mut TraceRecord>) {}
    fn finish(&mut self, _: &mut SolveOutput) {}
}

pub(crate) fn final_residual(problem: &Problem, x: &[f64], eps: Option<&[f64]>) -> f64 {
    if !problem.penalty().inner_is_abs() {
        return f64::NAN;
    }
    let w = weights_at(problem, x, eps);
    stationarity_residual(problem, x, &w).unwrap_or(f64::NAN)
}

/// Run the block solver from `x0` until the relative step drops below `tol`
/// or `max_iter` is reached.
pub fn solve(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolveOutput> {
    solve_observed(problem, config, x0, &mut |_| {})
}

/// [`solve`] with a callback invoked on every accepted iterate.
pub fn solve_observed(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<SolveOutput> {
    drive(problem, config, x0, observer, &mut NoHook)
}

pub(crate) fn drive(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(IterateView<'_>),
    hook: &mut dyn StepHook,
) -> Result<SolveOutput> {
    let mut run = Bpiree::new(problem, config.clone(), x0)?;
    let m = problem.partition().num_blocks();
    let window = config.window(m);
    let start = Instant::now();

    let mut trace = Vec::new();
    let mut certificate = CertificateSummary::default();
    let mut retries = 0;
    let mut monotone_violations = 0;
    let mut quiet_streak = 0;
    let mut rel_step = f64::INFINITY;
    let mut status = Status::MaxIter;
    let mut failure = None;

    while run.state().k < config.max_iter {
        let report = match run.step() {
            Ok(r) => r,
            Err(Error::NumericalFailure { iteration, message }) => {
                log::warn!("numerical failure at iteration {iteration}: {message}");
                status = Status::NumericalFailure;
                failure = Some(message);
                break;
            }
            Err(e) => return Err(e),
        };
        certificate.record(&report.certificate);
        retries += usize::from(report.retried);
        if !monotone_ok(report.f_prev, report.f_next) {
            monotone_violations += 1;
        }
        let state = run.state();
        let step_rel = report.step_norm / report.prev_norm.max(STOP_NORM_FLOOR);

        let mut record = config.record_trace.then(|| TraceRecord {
            k: report.k,
            f: report.f_next,
            step_rel,
            residual: final_residual(problem, &state.x, state.eps.as_deref()),
            beta: report.beta_used,
            block: report.block as i64,
            retried: report.retried,
            wall_ns: start.elapsed().as_nanos() as u64,
            lp: None,
        });
        hook.after_step(state, &report, record.as_mut());
        if let Some(r) = record {
            trace.push(r);
        }
        observer(IterateView { k: report.k, x: &state.x, eps: state.eps.as_deref(), f: state.f_current });
        if report.k % 1000 == 0 {
            log::info!("iter {} F={:.6e} step_rel={:.3e}", report.k, report.f_next, step_rel);
        }

        // Converge once every iteration of a full window was quiet: either the
        // block did not move or its relative step fell below `tol`. With one
        // block this is the plain relative-step test.
        if report.step_norm > 0.0 {
            rel_step = step_rel;
        }
        if report.step_norm == 0.0 || step_rel < config.tol {
            quiet_streak += 1;
        } else {
            quiet_streak = 0;
        }
        if quiet_streak >= window && hook.ready_to_stop() {
            if rel_step.is_infinite() {
                rel_step = 0.0;
            }
            status = Status::Converged;
            break;
        }
    }

    let state = run.state();
    let mut out = SolveOutput {
        residual: final_residual(problem, &state.x, state.eps.as_deref()),
        x: state.x.clone(),
        eps: state.eps.clone(),
        status,
        iterations: state.k,
        block_updates: state.k,
        num_blocks: m,
        objective: state.f_current,
        rel_step,
        retries,
        monotone_violations,
        certificate,
        trace,
        failure,
        support: None,
    };
    hook.finish(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockPartition, LeastSquares, Penalty};
    use ndarray::{array, Array2};
    use std::sync::Arc;

    fn quad(a: Array2<f64>, b: Vec<f64>, lambda: f64, m: usize) -> Problem {
        let n = a.ncols();
        Problem::new(
            Arc::new(LeastSquares::new(a, b).unwrap()),
            Penalty::log(lambda, 0.1).unwrap(),
            BlockPartition::contiguous(n, m).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn cyclic_and_single_block_picks() {
        let picks: Vec<usize> = (1..=6).map(|k| choose_block(&Schedule::Cyclic, k, 3)).collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2]);
        for k in 1..20 {
            assert_eq!(choose_block(&Schedule::ShuffledCycles { seed: 3 }, k, 1), 0);
        }
    }

    #[test]
    fn shuffled_window_of_five_covers_three_blocks() {
        let s = Schedule::ShuffledCycles { seed: 7 };
        let seq: Vec<usize> = (1..=3000).map(|k| choose_block(&s, k, 3)).collect();
        for w in seq.windows(5) {
            let mut seen = [false; 3];
            w.iter().for_each(|&b| seen[b] = true);
            assert!(seen.iter().all(|&s| s));
        }
        let mut sel = BlockSelector::new(s, 3);
        let cached: Vec<usize> = (1..=3000).map(|k| sel.pick(k)).collect();
        assert_eq!(seq, cached);
    }

    #[test]
    fn bound_examples() {
        assert!((extrapolation_bound(1.0, 1.0, 2.0, 0.9) - 0.15).abs() < 1e-15);
        assert!((extrapolation_bound(4.0, 1.0, 2.0, 0.6) - 0.2).abs() < 1e-15);
        assert!((extrapolation_bound(1.0, 1.0, 3.0, 0.4) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn extrapolate_examples() {
        assert_eq!(extrapolate(&[1.0, 2.0], &[0.0, 5.0], 0.0), vec![1.0, 2.0]);
        assert_eq!(extrapolate(&[1.0, 2.0], &[1.0, 2.0], 0.7), vec![1.0, 2.0]);
        assert_eq!(extrapolate(&[2.0], &[1.0], 0.5), vec![2.5]);
    }

    #[test]
    fn first_step_on_scalar_quadratic() {
        let p = quad(array![[1.0]], vec![1.0], 0.0, 1);
        let mut run = Bpiree::new(&p, SolverConfig::default(), &[0.0]).unwrap();
        let r = run.step().unwrap();
        assert_eq!(r.beta_used, 0.0);
        // L = 1.01, α = 1/2.02, x¹ = 0 − α(0 − 1)
        assert!((run.state().x[0] - 1.0 / 2.02).abs() < 1e-12);
        assert!((run.state().x[0] - 0.49505).abs() < 1e-5);
    }

    #[test]
    fn zero_momentum_zero_weight_is_prox_gradient() {
        let a = array![[1.0, 0.5], [0.0, 2.0], [1.0, -1.0]];
        let p = quad(a.clone(), vec![1.0, -1.0, 0.5], 0.0, 1);
        let cfg = SolverConfig { momentum: MomentumSchedule::Zero, ..Default::default() };
        let mut run = Bpiree::new(&p, cfg, &[0.3, -0.2]).unwrap();
        let l = run.block_lipschitz()[0];
        let g = p.loss().gradient(&[0.3, -0.2]);
        run.step().unwrap();
        let expect = [0.3 - g[0] / (2.0 * l), -0.2 - g[1] / (2.0 * l)];
        for (x, e) in run.state().x.iter().zip(expect) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn bookkeeping_identity_and_single_block_change() {
        let a = array![[1.0, 0.2, 0.0, 0.4], [0.0, 1.0, 0.3, 0.0], [0.5, 0.0, 1.0, 0.1]];
        let p = quad(a, vec![1.0, 2.0, -1.0], 1e-2, 3);
        let cfg = SolverConfig { schedule: Schedule::ShuffledCycles { seed: 11 }, ..Default::default() };
        let mut run = Bpiree::new(&p, cfg, &[0.0; 4]).unwrap();
        for _ in 0..50 {
            let before = run.state().x.clone();
            let r = run.step().unwrap();
            let st = run.state();
            assert_eq!(st.update_counts.iter().sum::<usize>(), st.k);
            let blk = &p.partition().blocks()[r.block];
            for (i, (b, x)) in before.iter().zip(&st.x).enumerate() {
                if !blk.contains(&i) {
                    assert_eq!(b, x);
                }
            }
        }
    }

    #[test]
    fn solve_unregularised_quadratic() {
        let p = quad(Array2::eye(2), vec![1.0, 1.0], 0.0, 1);
        let out = solve(&p, &SolverConfig::default(), &[0.0, 0.0]).unwrap();
        assert_eq!(out.status, Status::Converged);
        let err = crate::linalg::dist2(&out.x, &[1.0, 1.0]) / crate::linalg::norm2(&out.x);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let p = quad(Array2::eye(2), vec![1.0, 1.0], 0.0, 1);
        let out = solve(&p, &SolverConfig::default(), &[1.0, 1.0]).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn max_iter_status() {
        let p = quad(Array2::eye(2), vec![1.0, 1.0], 0.0, 1);
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        assert_eq!(solve(&p, &cfg, &[0.0, 0.0]).unwrap().status, Status::MaxIter);
    }

    #[test]
    fn residual_examples() {
        let p = quad(Array2::eye(1), vec![0.0], 0.0, 1);
        // ∇f(x) = x − b; pick b so that ∇f(0) = 0.3 → b = −0.3
        let p03 = quad(Array2::eye(1), vec![-0.3], 0.0, 1);
        assert_eq!(stationarity_residual(&p03, &[0.0], &[0.5]).unwrap(), 0.0);
        // ∇f(1) = 0.2 → b = 0.8
        let p02 = quad(Array2::eye(1), vec![0.8], 0.0, 1);
        assert!((stationarity_residual(&p02, &[1.0], &[0.1]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(stationarity_residual(&p, &[0.0], &[0.0]).unwrap(), 0.0);
        let sq = p.with_penalty(
            Penalty::new(1.0, crate::model::PenaltyKind::Log { eps_bar: 1.0 }, Arc::new(crate::prox::Square)).unwrap(),
        );
        assert!(matches!(stationarity_residual(&sq, &[0.0], &[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn certificate_examples() {
        let c = descent_certificate(&DescentInputs {
            f_prev: 1.0,
            f_next: 0.8,
            l_curr: 2.0,
            l_prev: 2.0,
            beta: 0.0,
            step_norm: 0.0,
            prev_step_norm: 3.0,
            gamma: 2.0,
        });
        assert!(c.holds);
        assert!((c.slack - 0.2).abs() < 1e-15);
        let c = descent_certificate(&DescentInputs {
            f_prev: 1.0,
            f_next: 1.0,
            l_curr: 1.0,
            l_prev: 1.0,
            beta: 0.0,
            step_norm: 1.0,
            prev_step_norm: 0.0,
            gamma: 2.0,
        });
        assert!(!c.holds);
        assert!((c.slack + 0.25).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate(3).is_ok());
        assert!(SolverConfig { gamma: 1.0, ..Default::default() }.validate(1).is_err());
        assert!(SolverConfig { delta: 1.0, ..Default::default() }.validate(1).is_err());
        assert!(SolverConfig { mu: 0.0, ..Default::default() }.validate(1).is_err());
        assert!(SolverConfig { cycle_bound: Some(2), ..Default::default() }.validate(3).is_err());
        let shuffled =
            SolverConfig { schedule: Schedule::ShuffledCycles { seed: 1 }, cycle_bound: Some(3), ..Default::default() };
        assert!(shuffled.validate(3).is_err());
    }
}
