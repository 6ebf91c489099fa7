#![allow(dead_code)]

use std::sync::Arc;

use bpiree::model::{BlockPartition, LeastSquares, MatrixLeastSquares, Penalty, Problem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(rand_distr::StandardNormal))
}

pub fn vector(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Small random least-squares problem with a log penalty and `m` blocks.
pub fn random_log_problem(seed: u64, n: usize, q: usize, m: usize, lambda: f64) -> Problem {
    let mut r = rng(seed);
    let a = gaussian(n, q, &mut r);
    let b = vector(n, 1.0, &mut r);
    Problem::new(
        Arc::new(LeastSquares::new(a, b).unwrap()),
        Penalty::log(lambda, 0.1).unwrap(),
        BlockPartition::contiguous(q, m).unwrap(),
    )
    .unwrap()
}

/// Small random matrix least-squares problem with a smoothed ℓp penalty.
pub fn random_lp_problem(seed: u64, n: usize, q: usize, t: usize, m: usize, lambda: f64) -> Problem {
    let mut r = rng(seed);
    let a = gaussian(n, q, &mut r);
    let b = gaussian(n, t, &mut r);
    Problem::new(
        Arc::new(MatrixLeastSquares::new(a, b).unwrap()),
        Penalty::smoothed_lp(lambda, 0.5).unwrap(),
        BlockPartition::contiguous(q * t, m).unwrap(),
    )
    .unwrap()
}

/// Central finite-difference gradient of the smooth part along `block`.
pub fn fd_block_gradient(problem: &Problem, x: &[f64], block: &[usize], h: f64) -> Vec<f64> {
    let loss = problem.loss();
    block
        .iter()
        .map(|&i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (loss.value(&xp) - loss.value(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Minimiser of `tau|x| + ½(x − v)²` over a uniform grid of `points` on
/// `[lo, hi]`.
pub fn grid_prox(v: f64, tau: f64, lo: f64, hi: f64, points: usize) -> f64 {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..points {
        let x = lo + step * i as f64;
        let f = tau * x.abs() + 0.5 * (x - v) * (x - v);
        if f < best.0 {
            best = (f, x);
        }
    }
    best.1
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
