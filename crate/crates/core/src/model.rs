//! Problem definition: block structure, smooth loss, separable penalty.
//!
//! Indices are zero-based everywhere in the library and in every file format.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::prox::{Abs, ConvexScalar};

/// Multiplier applied to power-iteration estimates of block Lipschitz constants.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;
/// Smallest block Lipschitz constant handed to a solver.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;

/// Why a block partition failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    NoBlocks,
    EmptyBlock { block: usize },
    OutOfRange { index: usize },
    Duplicate { index: usize },
    Uncovered { index: usize },
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionViolation::NoBlocks => write!(f, "partition has no blocks"),
            PartitionViolation::EmptyBlock { block } => write!(f, "block {block} is empty"),
            PartitionViolation::OutOfRange { index } => write!(f, "index {index} out of range"),
            PartitionViolation::Duplicate { index } => write!(f, "index {index} duplicated"),
            PartitionViolation::Uncovered { index } => write!(f, "index {index} uncovered"),
        }
    }
}

/// Check that `blocks` are nonempty, pairwise disjoint and cover `0..n`.
/// The report names the first offending index.
pub fn validate_partition(blocks: &[Vec<usize>], n: usize) -> std::result::Result<(), PartitionViolation> {
    if blocks.is_empty() {
        return Err(PartitionViolation::NoBlocks);
    }
    let mut seen = vec![false; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(PartitionViolation::EmptyBlock { block: b });
        }
        for &i in block {
            if i >= n {
                return Err(PartitionViolation::OutOfRange { index: i });
            }
            if seen[i] {
                return Err(PartitionViolation::Duplicate { index: i });
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(index) => Err(PartitionViolation::Uncovered { index }),
        None => Ok(()),
    }
}

/// Disjoint index blocks covering `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    n: usize,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        validate_partition(&blocks, n).map_err(|v| Error::invalid(format!("block partition: {v}")))?;
        Ok(Self { blocks, n })
    }

    /// One block holding every index.
    pub fn single(n: usize) -> Result<Self> {
        Self::contiguous(n, 1)
    }

    /// `m` contiguous ranges whose sizes differ by at most one.
    pub fn contiguous(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::invalid(format!("cannot split {n} indices into {m} nonempty blocks")));
        }
        let base = n / m;
        let extra = n % m;
        let mut blocks = Vec::with_capacity(m);
        let mut start = 0;
        for b in 0..m {
            let len = base + usize::from(b < extra);
            blocks.push((start..start + len).collect());
            start += len;
        }
        Self::new(blocks, n)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, id: usize) -> Result<&[usize]> {
        self.blocks
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("unknown block {id} (partition has {})", self.blocks.len())))
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// A smooth loss with block Lipschitz gradient.
pub trait SmoothLoss: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient at `x` restricted to `block`, in block order.
    fn block_gradient(&self, x: &[f64], block: &[usize]) -> Vec<f64> {
        let g = self.gradient(x);
        block.iter().map(|&i| g[i]).collect()
    }

    /// An upper bound on the Lipschitz constant of the block gradient with
    /// respect to changes confined to `block`.
    fn block_lipschitz(&self, block: &[usize]) -> f64;
}

fn safe_lipschitz(raw: f64) -> f64 {
    (raw * LIPSCHITZ_SAFETY).max(LIPSCHITZ_FLOOR)
}

/// `f(x) = ½‖Ax − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(a: Array2<f64>, b: Vec<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::invalid(format!("A has {} rows but b has length {}", a.nrows(), b.len())));
        }
        if a.ncols() == 0 {
            return Err(Error::invalid("A has no columns"));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = linalg::mat_vec(self.a.view(), x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothLoss for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_t_vec(self.a.view(), &self.residual(x))
    }

    fn block_gradient(&self, x: &[f64], block: &[usize]) -> Vec<f64> {
        let r = self.residual(x);
        block.iter().map(|&j| self.a.column(j).iter().zip(&r).map(|(a, r)| a * r).sum()).collect()
    }

    fn block_lipschitz(&self, block: &[usize]) -> f64 {
        safe_lipschitz(linalg::squared_spectral_norm(self.a.view(), block))
    }
}

/// `f(X) = ½‖AX − B‖²_F` over `X ∈ ℝ^{q×t}` flattened column-major, so
/// flattened index `i + q·j` addresses `X[i, j]`.
#[derive(Debug, Clone)]
pub struct MatrixLeastSquares {
    a: Array2<f64>,
    b: Array2<f64>,
}

impl MatrixLeastSquares {
    pub fn new(a: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        if a.nrows() != b.nrows() {
            return Err(Error::invalid(format!("A has {} rows but B has {}", a.nrows(), b.nrows())));
        }
        if a.ncols() == 0 || b.ncols() == 0 {
            return Err(Error::invalid("A and B must have at least one column"));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn rhs(&self) -> ArrayView2<'_, f64> {
        self.b.view()
    }

    /// Rows `q` and columns `t` of the unknown.
    pub fn shape(&self) -> (usize, usize) {
        (self.a.ncols(), self.b.ncols())
    }

    fn column_residual(&self, x: &[f64], col: usize) -> Vec<f64> {
        let q = self.a.ncols();
        let mut r = linalg::mat_vec(self.a.view(), &x[col * q..(col + 1) * q]);
        for (ri, bi) in r.iter_mut().zip(self.b.column(col)) {
            *ri -= bi;
        }
        r
    }

    /// Group flattened indices by the column of `X` they live in.
    fn by_column(&self, block: &[usize]) -> BTreeMap<usize, Vec<usize>> {
        let q = self.a.ncols();
        let mut cols: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &idx in block {
            cols.entry(idx / q).or_default().push(idx % q);
        }
        cols
    }
}

impl SmoothLoss for MatrixLeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols() * self.b.ncols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.b.ncols())
            .map(|j| {
                let r = self.column_residual(x, j);
                0.5 * dot(&r, &r)
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.b.ncols()).flat_map(|j| linalg::mat_t_vec(self.a.view(), &self.column_residual(x, j))).collect()
    }

    fn block_gradient(&self, x: &[f64], block: &[usize]) -> Vec<f64> {
        let q = self.a.ncols();
        let mut residuals: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        block
            .iter()
            .map(|&idx| {
                let (row, col) = (idx % q, idx / q);
                let r = residuals.entry(col).or_insert_with(|| self.column_residual(x, col));
                self.a.column(row).iter().zip(r.iter()).map(|(a, r)| a * r).sum()
            })
            .collect()
    }

    fn block_lipschitz(&self, block: &[usize]) -> f64 {
        // The Hessian is block diagonal over columns of X, so the block constant
        // is the worst column segment.
        let mut cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut worst: f64 = 0.0;
        for (_, mut rows) in self.by_column(block) {
            rows.sort_unstable();
            let a = self.a.view();
            let val = *cache.entry(rows).or_insert_with_key(|rows| linalg::squared_spectral_norm(a, rows));
            worst = worst.max(val);
        }
        safe_lipschitz(worst)
    }
}

/// A concave increasing scalar map `h` with derivative `h′ > 0`.
pub trait ConcaveScalar: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// The outer concave function of the penalty.
#[derive(Debug, Clone)]
pub enum PenaltyKind {
    /// `h(t) = log(t + ε̄) − log(ε̄)`.
    Log {
        eps_bar: f64,
    },
    /// `h(t; ε_j) = (t + ε_j²)^p`, with `ε` carried by the solver state.
    SmoothedLp {
        p: f64,
    },
    Custom(Arc<dyn ConcaveScalar>),
}

/// `λ Σ_j h(g(x_j))`.
#[derive(Debug, Clone)]
pub struct Penalty {
    lambda: f64,
    kind: PenaltyKind,
    g: Arc<dyn ConvexScalar>,
}

impl Penalty {
    pub fn log(lambda: f64, eps_bar: f64) -> Result<Self> {
        Self::new(lambda, PenaltyKind::Log { eps_bar }, Arc::new(Abs))
    }

    pub fn smoothed_lp(lambda: f64, p: f64) -> Result<Self> {
        Self::new(lambda, PenaltyKind::SmoothedLp { p }, Arc::new(Abs))
    }

    pub fn new(lambda: f64, kind: PenaltyKind, g: Arc<dyn ConvexScalar>) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        match &kind {
            PenaltyKind::Log { eps_bar } if !(eps_bar.is_finite() && *eps_bar > 0.0) => {
                return Err(Error::invalid(format!("eps_bar must be positive, got {eps_bar}")));
            }
            PenaltyKind::SmoothedLp { p } if !(*p > 0.0 && *p < 1.0) => {
                return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
            }
            _ => {}
        }
        Ok(Self { lambda, kind, g })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> &PenaltyKind {
        &self.kind
    }

    pub fn inner(&self) -> &dyn ConvexScalar {
        self.g.as_ref()
    }

    pub fn is_smoothed_lp(&self) -> bool {
        matches!(self.kind, PenaltyKind::SmoothedLp { .. })
    }

    pub fn inner_is_abs(&self) -> bool {
        self.g.is_abs()
    }

    /// `h(t)`; `eps` is the smoothing factor of the coordinate (ℓp only).
    pub fn outer(&self, t: f64, eps: f64) -> f64 {
        match &self.kind {
            PenaltyKind::Log { eps_bar } => (t + eps_bar).ln() - eps_bar.ln(),
            PenaltyKind::SmoothedLp { p } => (t + eps * eps).powf(*p),
            PenaltyKind::Custom(h) => h.value(t),
        }
    }

    /// `h′(t)`.
    pub fn outer_derivative(&self, t: f64, eps: f64) -> f64 {
        match &self.kind {
            PenaltyKind::Log { eps_bar } => 1.0 / (t + eps_bar),
            PenaltyKind::SmoothedLp { p } => p * (t + eps * eps).powf(p - 1.0),
            PenaltyKind::Custom(h) => h.derivative(t),
        }
    }

    /// Reweighting coefficient `λ h′(g(x_j))`.
    pub fn weight(&self, xj: f64, eps: f64) -> f64 {
        self.lambda * self.outer_derivative(self.g.value(xj), eps)
    }

    /// `λ Σ_j h(g(x_j))`.
    pub fn value(&self, x: &[f64], eps: Option<&[f64]>) -> f64 {
        let sum: f64 = match eps {
            Some(eps) => x.iter().zip(eps).map(|(&xj, &e)| self.outer(self.g.value(xj), e)).sum(),
            None => x.iter().map(|&xj| self.outer(self.g.value(xj), 0.0)).sum(),
        };
        self.lambda * sum
    }
}

/// `F(x) = f(x) + λ Σ h(g(x_j))`, or `F(x, ε)` for the smoothed ℓp penalty.
pub fn eval_objective(loss: &dyn SmoothLoss, penalty: &Penalty, x: &[f64], eps: Option<&[f64]>) -> Result<f64> {
    if x.len() != loss.dim() {
        return Err(Error::invalid(format!("x has length {} but the loss expects {}", x.len(), loss.dim())));
    }
    match (penalty.is_smoothed_lp(), eps) {
        (true, None) => return Err(Error::invalid("smoothed lp objective needs smoothing factors")),
        (false, Some(_)) => return Err(Error::invalid("smoothing factors given for a penalty that does not use them")),
        (true, Some(e)) if e.len() != x.len() => {
            return Err(Error::invalid(format!("eps has length {} but x has length {}", e.len(), x.len())))
        }
        _ => {}
    }
    Ok(loss.value(x) + penalty.value(x, eps))
}

/// A complete problem instance. Immutable after construction and cheap to clone.
#[derive(Debug, Clone)]
pub struct Problem {
    loss: Arc<dyn SmoothLoss>,
    penalty: Penalty,
    partition: BlockPartition,
}

impl Problem {
    pub fn new(loss: Arc<dyn SmoothLoss>, penalty: Penalty, partition: BlockPartition) -> Result<Self> {
        if loss.dim() != partition.dim() {
            return Err(Error::invalid(format!(
                "loss dimension {} does not match partition dimension {}",
                loss.dim(),
                partition.dim()
            )));
        }
        Ok(Self { loss, penalty, partition })
    }

    pub fn loss(&self) -> &dyn SmoothLoss {
        self.loss.as_ref()
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// Same data with a different block structure.
    pub fn with_partition(&self, partition: BlockPartition) -> Result<Self> {
        Self::new(self.loss.clone(), self.penalty.clone(), partition)
    }

    /// Same loss and blocks with a different penalty.
    pub fn with_penalty(&self, penalty: Penalty) -> Self {
        Self { penalty, ..self.clone() }
    }

    pub fn objective(&self, x: &[f64], eps: Option<&[f64]>) -> Result<f64> {
        eval_objective(self.loss.as_ref(), &self.penalty, x, eps)
    }

    pub fn block_gradient(&self, x: &[f64], block: usize) -> Result<Vec<f64>> {
        let idx = self.partition.block(block)?;
        if x.len() != self.dim() {
            return Err(Error::invalid("x has the wrong length"));
        }
        Ok(self.loss.block_gradient(x, idx))
    }

    pub fn block_lipschitz(&self, block: usize) -> Result<f64> {
        Ok(self.loss.block_lipschitz(self.partition.block(block)?))
    }
}
