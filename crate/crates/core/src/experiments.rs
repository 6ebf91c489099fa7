//! Seeded synthetic instances and the solver comparison harness.
//!
//! Two families are generated:
//! - `log_ls`: `½‖Ax − b‖² + λ Σ log(1 + |x_j|/ε̄)` with a planted sparse `x`,
//!   and `A` either Gaussian with unit-norm columns or `UΣVᵀ` with
//!   `σ_i = 1e-4 + (i−1)/10`.
//! - `matrix_lp`: `½‖AX − B‖²_F + λ Σ (|X_ij| + ε_ij²)^p` with a column-sparse
//!   planted `X` and contiguous blocks over the column-major flattening.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with the experiment seed, so
//! `(spec, seed)` reproduces every array bit for bit.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algo::Algorithm;
use crate::error::{Error, Result};
use crate::instance::{InstanceData, PenaltySpec, Rhs};
use crate::linalg::{self, dist2, norm2};
use crate::model::{BlockPartition, Problem};
use crate::solver::{SolveOutput, SolverConfig};
use crate::trace::TraceRecord;

/// Which synthetic family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    LogLs,
    MatrixLp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    #[default]
    Well,
    Ill,
}

/// Problem size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

/// Experiment description. Unset fields take the preset for `example` and
/// the chosen [`Scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub example: ExampleKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    /// Nonzeros of `x_true` (log_ls) or per column of `X_true` (matrix_lp).
    /// A value in `(0, 1)` is read as a fraction of `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(default)]
    pub conditioning: Conditioning,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(example: ExampleKind, seed: u64) -> Self {
        Self {
            example,
            seed,
            n: None,
            q: None,
            t: None,
            m: None,
            sparsity: None,
            noise_scale: None,
            conditioning: Conditioning::Well,
            lambda: None,
            eps_bar: None,
            p: None,
        }
    }

    /// Fill unset fields from the preset and check every value.
    pub fn resolve(&self, scale: Scale) -> Result<ResolvedSpec> {
        let (n, q, t, m, sparsity) = match (self.example, scale) {
            (ExampleKind::LogLs, Scale::Desk) => (100, 300, 1, 1, 5),
            (ExampleKind::LogLs, Scale::Paper) => (1000, 3000, 1, 1, 50),
            (ExampleKind::MatrixLp, Scale::Desk) => (50, 100, 10, 5, 2),
            (ExampleKind::MatrixLp, Scale::Paper) => (100, 500, 50, 10, 10),
        };
        let pos = |field: &str, v: Option<i64>, default: usize| -> Result<usize> {
            match v {
                None => Ok(default),
                Some(x) if x > 0 => Ok(x as usize),
                Some(x) => Err(Error::invalid(format!("experiment.{field} must be positive, got {x}"))),
            }
        };
        let q = pos("q", self.q, q)?;
        // Per-column sparsity defaults to round(0.02·q) for the matrix family.
        let sparsity_default = match self.example {
            ExampleKind::LogLs => sparsity,
            ExampleKind::MatrixLp => ((0.02 * q as f64).round() as usize).max(1),
        };
        let spec = ResolvedSpec {
            example: self.example,
            seed: self.seed,
            n: pos("n", self.n, n)?,
            q,
            t: match self.example {
                ExampleKind::LogLs => 1,
                ExampleKind::MatrixLp => pos("t", self.t, t)?,
            },
            m: pos("m", self.m, m)?,
            sparsity: match self.sparsity {
                None => sparsity_default,
                Some(f) if f > 0.0 && f < 1.0 => ((f * q as f64).round() as usize).max(1),
                Some(f) if f >= 1.0 && f.fract() == 0.0 && f.is_finite() => f as usize,
                Some(f) => {
                    return Err(Error::invalid(format!(
                        "experiment.sparsity must be a positive integer or a fraction in (0, 1), got {f}"
                    )))
                }
            },
            noise_scale: self.noise_scale.unwrap_or(1e-3),
            conditioning: self.conditioning,
            lambda: self.lambda.unwrap_or(match self.example {
                ExampleKind::LogLs => 5e-4,
                ExampleKind::MatrixLp => 0.015,
            }),
            eps_bar: self.eps_bar.unwrap_or(0.1),
            p: self.p.unwrap_or(0.1),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// An experiment with every size and parameter fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSpec {
    pub example: ExampleKind,
    pub seed: u64,
    pub n: usize,
    pub q: usize,
    pub t: usize,
    pub m: usize,
    pub sparsity: usize,
    pub noise_scale: f64,
    pub conditioning: Conditioning,
    pub lambda: f64,
    pub eps_bar: f64,
    pub p: f64,
}

impl ResolvedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sparsity >= self.q {
            return Err(Error::invalid(format!(
                "experiment.sparsity must be below q = {}, got {}",
                self.q, self.sparsity
            )));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("experiment.noise_scale must be finite and nonnegative"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("experiment.lambda must be finite and nonnegative"));
        }
        if !(self.eps_bar > 0.0) {
            return Err(Error::invalid("experiment.eps_bar must be positive"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid("experiment.p must lie in (0, 1)"));
        }
        let dim = self.q * self.t;
        if self.m > dim {
            return Err(Error::invalid(format!("experiment.m = {} exceeds the dimension {dim}", self.m)));
        }
        if self.conditioning == Conditioning::Ill && self.n > self.q {
            return Err(Error::invalid("ill-conditioned sensing needs n <= q"));
        }
        Ok(())
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `len`-vector with `nnz` standard normal entries at uniform random positions.
fn sparse_vector(len: usize, nnz: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut positions = index::sample(rng, len, nnz).into_vec();
    positions.sort_unstable();
    let mut x = vec![0.0; len];
    for i in positions {
        // Redraw the measure-zero exact zero so the support size is exact.
        let mut v: f64 = rng.sample(StandardNormal);
        while v == 0.0 {
            v = rng.sample(StandardNormal);
        }
        x[i] = v;
    }
    x
}

/// Gaussian `n×q` matrix with every column scaled to unit norm.
pub fn gen_unit_column_gaussian(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut a = gaussian_matrix(n, q, rng);
    for mut col in a.columns_mut() {
        let nrm = col.dot(&col).sqrt();
        if nrm > 0.0 {
            col.mapv_inplace(|v| v / nrm);
        }
    }
    a
}

/// Well-conditioned sensing data: unit-column Gaussian `A`, sparse `x_true`,
/// `b = A x_true + noise_scale·e`.
pub fn gen_gaussian_sensing(spec: &ResolvedSpec, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let a = gen_unit_column_gaussian(spec.n, spec.q, rng);
    let (b, x_true) = plant(&a, spec, rng);
    (a, b, x_true)
}

fn plant(a: &Array2<f64>, spec: &ResolvedSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let x_true = sparse_vector(spec.q, spec.sparsity, rng);
    let e = gaussian_vector(spec.n, rng);
    let mut b = linalg::mat_vec(a.view(), &x_true);
    for (bi, ei) in b.iter_mut().zip(&e) {
        *bi += spec.noise_scale * ei;
    }
    (b, x_true)
}

/// Singular values `σ_i = 1e-4 + (i−1)/10`, `i = 1..n`.
pub fn ill_conditioned_spectrum(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1e-4 + i as f64 / 10.0).collect()
}

/// `A = UΣVᵀ` with `U ∈ ℝ^{n×n}`, `V ∈ ℝ^{q×n}` orthonormalised Gaussian
/// matrices and `Σ = diag(ill_conditioned_spectrum(n))`.
pub fn gen_illconditioned(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    if n > q {
        return Err(Error::invalid(format!("ill-conditioned sensing needs n <= q, got n={n}, q={q}")));
    }
    let mut u = gaussian_matrix(n, n, rng);
    linalg::modified_gram_schmidt(&mut u);
    let mut v = gaussian_matrix(q, n, rng);
    linalg::modified_gram_schmidt(&mut v);
    let sigma = ill_conditioned_spectrum(n);
    for (mut col, s) in u.columns_mut().into_iter().zip(&sigma) {
        col.mapv_inplace(|x| x * s);
    }
    Ok(u.dot(&v.t()))
}

/// Matrix family: unit-column Gaussian `A ∈ ℝ^{n×q}`, `X_true ∈ ℝ^{q×t}` with
/// `sparsity` nonzeros per column, `B = A X_true + noise_scale·E`, and `m`
/// contiguous blocks over the column-major flattening of `X`.
pub fn gen_matrix_problem(spec: &ResolvedSpec, rng: &mut ChaCha8Rng) -> Result<MatrixProblemData> {
    let a = gen_unit_column_gaussian(spec.n, spec.q, rng);
    let mut x_true = Vec::with_capacity(spec.q * spec.t);
    for _ in 0..spec.t {
        x_true.extend(sparse_vector(spec.q, spec.sparsity, rng));
    }
    let mut b = Array2::zeros((spec.n, spec.t));
    for j in 0..spec.t {
        let col = linalg::mat_vec(a.view(), &x_true[j * spec.q..(j + 1) * spec.q]);
        for (i, v) in col.into_iter().enumerate() {
            b[[i, j]] = v;
        }
    }
    let noise = gaussian_matrix(spec.n, spec.t, rng);
    b.scaled_add(spec.noise_scale, &noise);
    let partition = BlockPartition::contiguous(spec.q * spec.t, spec.m)?;
    Ok(MatrixProblemData { a, b, x_true, partition })
}

/// Output of [`gen_matrix_problem`]; `x_true` is `X_true` flattened column-major.
#[derive(Debug, Clone)]
pub struct MatrixProblemData {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub x_true: Vec<f64>,
    pub partition: BlockPartition,
}

/// Generated data together with the planted solution.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub problem: Problem,
    pub x_true: Vec<f64>,
}

/// Generate the instance data described by `spec`.
pub fn build_data(spec: &ResolvedSpec) -> Result<InstanceData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.example {
        ExampleKind::LogLs => {
            let a = match spec.conditioning {
                Conditioning::Well => gen_unit_column_gaussian(spec.n, spec.q, &mut rng),
                Conditioning::Ill => gen_illconditioned(spec.n, spec.q, &mut rng)?,
            };
            let (b, x_true) = plant(&a, spec, &mut rng);
            Ok(InstanceData {
                a,
                rhs: Rhs::Vector(b),
                blocks: BlockPartition::contiguous(spec.q, spec.m)?.blocks().to_vec(),
                penalty: PenaltySpec::Log { lambda: spec.lambda, eps_bar: spec.eps_bar },
                x_true: Some(x_true),
            })
        }
        ExampleKind::MatrixLp => {
            let MatrixProblemData { a, b, x_true, partition } = gen_matrix_problem(spec, &mut rng)?;
            Ok(InstanceData {
                a,
                rhs: Rhs::Matrix(b),
                blocks: partition.blocks().to_vec(),
                penalty: PenaltySpec::SmoothedLp { lambda: spec.lambda, p: spec.p },
                x_true: Some(x_true),
            })
        }
    }
}

/// Build the problem described by `spec`.
pub fn build_instance(spec: &ResolvedSpec) -> Result<SyntheticInstance> {
    let data = build_data(spec)?;
    Ok(SyntheticInstance { problem: data.to_problem()?, x_true: data.x_true.unwrap_or_default() })
}

/// `‖x − ref‖ / ‖x‖` (Frobenius for flattened matrices); `+∞` when `x = 0`.
pub fn rel_err(x: &[f64], reference: &[f64]) -> f64 {
    let nx = norm2(x);
    if nx == 0.0 {
        f64::INFINITY
    } else {
        dist2(x, reference) / nx
    }
}

/// One solver to run in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub algo: Algorithm,
    pub config: SolverConfig,
}

/// Default solver line-up for each family.
pub fn default_solvers(example: ExampleKind) -> Vec<Algorithm> {
    match example {
        ExampleKind::LogLs => vec![Algorithm::Bpiree, Algorithm::Irl1e1, Algorithm::Irl1],
        ExampleKind::MatrixLp => vec![Algorithm::BpireeLp, Algorithm::PireAu, Algorithm::PirePs],
    }
}

/// Settings used for `algo` in the default line-up. The block solvers follow
/// the FISTA sequence without clipping it to the admissible bound and rely on
/// the safeguard retry for monotonicity; the baselines take `base` unchanged.
pub fn lineup_config(algo: Algorithm, base: &SolverConfig) -> SolverConfig {
    let mut config = base.clone();
    if matches!(algo, Algorithm::Bpiree | Algorithm::BpireeLp) {
        config.momentum = crate::solver::MomentumSchedule::Fista;
        config.cap_extrapolation = false;
        config.safeguard = true;
    }
    config
}

/// [`default_solvers`] paired with [`lineup_config`].
pub fn default_lineup(example: ExampleKind, base: &SolverConfig) -> Vec<SolverRun> {
    default_solvers(example).into_iter().map(|algo| SolverRun { algo, config: lineup_config(algo, base) }).collect()
}

/// A sample of the convergence curves: `|F(x^k) − F(x̄)|` and `‖x^k − x̄‖/‖x̄‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub objective_gap: f64,
    pub distance: f64,
}

/// Per-solver outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverRow {
    pub algo: String,
    pub status: String,
    pub iterations: usize,
    pub block_updates: usize,
    pub passes: f64,
    pub objective: f64,
    pub rel_err_true: f64,
    pub rel_err_ref: f64,
    pub residual: f64,
    pub retries: usize,
    pub monotone_violations: usize,
    pub certificate_violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_fixed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

/// Result of [`run_comparison`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub spec: ResolvedSpec,
    pub reference_algo: String,
    pub reference_objective: f64,
    pub rows: Vec<SolverRow>,
}

impl ComparisonReport {
    pub fn row(&self, algo: Algorithm) -> Option<&SolverRow> {
        self.rows.iter().find(|r| r.algo == algo.name())
    }

    /// Pretty JSON; wall times are included only when `with_timing` is set so
    /// that reports of identical runs are byte-identical by default.
    pub fn to_json(&self, with_timing: bool) -> Result<String> {
        let mut report = self.clone();
        for r in &mut report.rows {
            r.wall_time_s = with_timing.then_some(r.wall_time);
        }
        serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let s = &self.spec;
        let _ = writeln!(
            out,
            "example={:?} n={} q={} t={} m={} seed={} conditioning={:?}",
            s.example, s.n, s.q, s.t, s.m, s.seed, s.conditioning
        );
        let _ = writeln!(
            out,
            "{:<10} {:<17} {:>8} {:>9} {:>14} {:>11} {:>11} {:>10} {:>9}",
            "algo", "status", "iters", "passes", "F", "rel_true", "rel_ref", "residual", "time_s"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:<17} {:>8} {:>9.1} {:>14.6e} {:>11.3e} {:>11.3e} {:>10.3e} {:>9.3}",
                r.algo,
                r.status,
                r.iterations,
                r.passes,
                r.objective,
                r.rel_err_true,
                r.rel_err_ref,
                r.residual,
                r.wall_time
            );
        }
        out
    }
}

fn failed_row(algo: Algorithm, err: &Error) -> SolverRow {
    SolverRow {
        algo: algo.name().to_owned(),
        status: "Error".to_owned(),
        iterations: 0,
        block_updates: 0,
        passes: 0.0,
        objective: f64::NAN,
        rel_err_true: f64::NAN,
        rel_err_ref: f64::NAN,
        residual: f64::NAN,
        retries: 0,
        monotone_violations: 0,
        certificate_violations: 0,
        support_fixed: None,
        wall_time_s: None,
        error: Some(err.to_string()),
        curve: Vec::new(),
        wall_time: 0.0,
        trace: Vec::new(),
    }
}

fn run_row(instance: &SyntheticInstance, run: &SolverRun, x0: &[f64], reference: &[f64], f_ref: f64) -> SolverRow {
    let ref_norm = norm2(reference);
    let mut curve = Vec::new();
    let start = Instant::now();
    let result = run.algo.run_observed(&instance.problem, &run.config, x0, &mut |it| {
        curve.push(CurvePoint {
            k: it.k,
            objective_gap: (it.f - f_ref).abs(),
            distance: if ref_norm > 0.0 { dist2(it.x, reference) / ref_norm } else { f64::INFINITY },
        });
    });
    let wall_time = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => row_from_output(run.algo, &out, instance, reference, curve, wall_time),
        Err(e) => failed_row(run.algo, &e),
    }
}

fn row_from_output(
    algo: Algorithm,
    out: &SolveOutput,
    instance: &SyntheticInstance,
    reference: &[f64],
    curve: Vec<CurvePoint>,
    wall_time: f64,
) -> SolverRow {
    SolverRow {
        algo: algo.name().to_owned(),
        status: out.status.as_str().to_owned(),
        iterations: out.iterations,
        block_updates: out.block_updates,
        passes: out.passes(),
        objective: out.objective,
        rel_err_true: rel_err(&out.x, &instance.x_true),
        rel_err_ref: rel_err(&out.x, reference),
        residual: out.residual,
        retries: out.retries,
        monotone_violations: out.monotone_violations,
        certificate_violations: out.certificate.violations,
        support_fixed: out.support.as_ref().map(|s| s.fixed),
        wall_time_s: None,
        error: out.failure.clone(),
        curve,
        wall_time,
        trace: out.trace.clone(),
    }
}

/// Run every solver from the origin on one generated instance. Curves are
/// measured against the output `x̄` of the block solver.
pub fn run_comparison(spec: &ResolvedSpec, solvers: &[SolverRun]) -> Result<ComparisonReport> {
    let instance = build_instance(spec)?;
    run_comparison_on(spec, &instance, solvers)
}

pub fn run_comparison_on(
    spec: &ResolvedSpec,
    instance: &SyntheticInstance,
    solvers: &[SolverRun],
) -> Result<ComparisonReport> {
    let x0 = vec![0.0; instance.problem.dim()];
    let reference_algo = match spec.example {
        ExampleKind::LogLs => Algorithm::Bpiree,
        ExampleKind::MatrixLp => Algorithm::BpireeLp,
    };
    let reference_config = solvers
        .iter()
        .find(|s| s.algo == reference_algo)
        .map(|s| s.config.clone())
        .unwrap_or_else(|| lineup_config(reference_algo, &SolverConfig::default()));
    let reference = reference_algo.run(&instance.problem, &reference_config, &x0)?;
    let f_ref = reference.objective;

    let rows: Vec<SolverRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = solvers
            .iter()
            .map(|run| {
                let (x0, xr) = (&x0, &reference.x);
                scope.spawn(move || run_row(instance, run, x0, xr, f_ref))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    Ok(ComparisonReport {
        spec: spec.clone(),
        reference_algo: reference_algo.name().to_owned(),
        reference_objective: f_ref,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(example: ExampleKind) -> ResolvedSpec {
        ExperimentSpec::new(example, 3).resolve(Scale::Desk).unwrap()
    }

    #[test]
    fn presets() {
        let s = spec(ExampleKind::LogLs);
        assert_eq!((s.n, s.q, s.m, s.sparsity), (100, 300, 1, 5));
        assert_eq!(s.lambda, 5e-4);
        let s = spec(ExampleKind::MatrixLp);
        assert_eq!((s.n, s.q, s.t, s.m, s.sparsity), (50, 100, 10, 5, 2));
        let s = ExperimentSpec { q: Some(500), t: Some(50), ..ExperimentSpec::new(ExampleKind::MatrixLp, 0) }
            .resolve(Scale::Desk)
            .unwrap();
        assert_eq!(s.sparsity, 10);
        let s = ExperimentSpec { sparsity: Some(0.05), ..ExperimentSpec::new(ExampleKind::LogLs, 0) }
            .resolve(Scale::Desk)
            .unwrap();
        assert_eq!(s.sparsity, 15);
    }

    #[test]
    fn resolve_rejects_bad_fields() {
        let bad = ExperimentSpec { n: Some(0), ..ExperimentSpec::new(ExampleKind::LogLs, 0) };
        let msg = bad.resolve(Scale::Desk).unwrap_err().to_string();
        assert!(msg.contains("experiment.n"), "{msg}");
        let bad = ExperimentSpec { sparsity: Some(300.0), ..ExperimentSpec::new(ExampleKind::LogLs, 0) };
        assert!(bad.resolve(Scale::Desk).is_err());
    }

    #[test]
    fn gaussian_sensing_properties() {
        let mut s = spec(ExampleKind::LogLs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b, x) = gen_gaussian_sensing(&s, &mut rng);
        for col in a.columns() {
            assert!((col.dot(&col).sqrt() - 1.0).abs() < 1e-12);
        }
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), s.sparsity);
        assert_eq!(b.len(), s.n);

        s.noise_scale = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b, x) = gen_gaussian_sensing(&s, &mut rng);
        assert_eq!(b, linalg::mat_vec(a.view(), &x));
    }

    #[test]
    fn illconditioned_rejects_wide_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_illconditioned(5, 3, &mut rng).is_err());
        for (s, want) in ill_conditioned_spectrum(3).iter().zip([1e-4, 0.1001, 0.2001]) {
            assert!((s - want).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_problem_shape() {
        let s = ExperimentSpec {
            q: Some(500),
            t: Some(50),
            m: Some(10),
            n: Some(20),
            ..ExperimentSpec::new(ExampleKind::MatrixLp, 0)
        }
        .resolve(Scale::Desk)
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let MatrixProblemData { b, x_true: x, partition: part, .. } = gen_matrix_problem(&s, &mut rng).unwrap();
        assert_eq!(b.dim(), (20, 50));
        for j in 0..50 {
            assert_eq!(x[j * 500..(j + 1) * 500].iter().filter(|v| **v != 0.0).count(), 10);
        }
        assert_eq!(part.num_blocks(), 10);
        assert!(part.blocks().iter().all(|b| b.len() == 2500));
    }

    #[test]
    fn rel_err_examples() {
        assert_eq!(rel_err(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rel_err(&[2.0, 0.0], &[1.0, 0.0]), 0.5);
        assert_eq!(rel_err(&[0.0, 0.0], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn regeneration_is_bit_exact() {
        let s = spec(ExampleKind::MatrixLp);
        let a = build_instance(&s).unwrap();
        let b = build_instance(&s).unwrap();
        assert_eq!(a.x_true, b.x_true);
        let x = vec![0.25; a.problem.dim()];
        assert_eq!(a.problem.loss().gradient(&x), b.problem.loss().gradient(&x));
    }
}
