//! Small dense helpers shared by the losses, solvers and generators.

use ndarray::{aview1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Relative tolerance and iteration cap of the spectral norm estimate.
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 500;

/// `rows × cols` matrix from row-major values.
pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Array2<f64>> {
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::invalid(format!("cannot shape {rows}x{cols} matrix: {e}")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖a − b‖₂`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a · x`.
pub fn mat_vec(a: ArrayView2<'_, f64>, x: &[f64]) -> Vec<f64> {
    a.dot(&aview1(x)).to_vec()
}

/// `aᵀ · y`.
pub fn mat_t_vec(a: ArrayView2<'_, f64>, y: &[f64]) -> Vec<f64> {
    a.t().dot(&aview1(y)).to_vec()
}

/// Deterministic, non-degenerate start vector for power iteration.
fn start_vector(len: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    let v: Vec<f64> = (0..len).map(|i| 1.0 + ((i as f64 + 1.0) * GOLDEN).fract()).collect();
    let nrm = norm2(&v);
    v.into_iter().map(|x| x / nrm).collect()
}

/// Largest eigenvalue of `A_Sᵀ A_S` (the squared spectral norm of the column
/// submatrix indexed by `cols`) by power iteration on the Rayleigh quotient.
pub fn squared_spectral_norm(a: ArrayView2<'_, f64>, cols: &[usize]) -> f64 {
    if cols.is_empty() || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = start_vector(cols.len());
    let mut estimate = 0.0;
    let mut w = vec![0.0; a.nrows()];
    for _ in 0..POWER_MAX_ITER {
        // w = A_S v
        for (wi, row) in w.iter_mut().zip(a.rows()) {
            *wi = cols.iter().zip(&v).map(|(&c, &vc)| row[c] * vc).sum();
        }
        let rayleigh = dot(&w, &w);
        // u = A_Sᵀ w
        let u: Vec<f64> = cols.iter().map(|&c| a.column(c).iter().zip(&w).map(|(x, y)| x * y).sum()).collect();
        let nu = norm2(&u);
        if nu == 0.0 {
            return rayleigh;
        }
        let converged = (rayleigh - estimate).abs() <= POWER_TOL * rayleigh.max(f64::MIN_POSITIVE);
        estimate = rayleigh;
        if converged {
            break;
        }
        v = u.into_iter().map(|x| x / nu).collect();
    }
    estimate
}

/// Orthonormalise the columns of `m` in place with modified Gram–Schmidt.
/// Columns that become numerically dependent are left as zero.
pub fn modified_gram_schmidt(m: &mut Array2<f64>) {
    let cols = m.ncols();
    for j in 0..cols {
        for i in 0..j {
            let proj: f64 = m.column(i).dot(&m.column(j));
            let qi = m.column(i).to_owned();
            let mut cj = m.column_mut(j);
            cj.scaled_add(-proj, &qi);
        }
        let nrm = m.column(j).dot(&m.column(j)).sqrt();
        let mut cj = m.column_mut(j);
        if nrm > 0.0 {
            cj.mapv_inplace(|x| x / nrm);
        }
    }
}
