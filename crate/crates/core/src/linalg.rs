//! Small dense linear-algebra helpers shared by the instance builders.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Minimum number of power-iteration sweeps used by [`spectral_norm`].
pub const POWER_ITERATIONS_MIN: usize = 200;
const POWER_ITERATIONS_MAX: usize = 20_000;

/// Largest singular value of `m`, by power iteration on `mᵀm`.
///
/// Runs at least [`POWER_ITERATIONS_MIN`] sweeps and stops once the Rayleigh
/// quotient settles to machine precision.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    // Deterministic start with no zero entries; avoids being orthogonal to
    // the top singular vector for all but contrived inputs.
    let mut v = Vector::from_fn(n, |i, _| {
        1.0 + 0.37 * ((i as f64 + 1.0) * 1.618_033_988_75).fract()
    });
    v /= v.norm();
    let mut lambda = 0.0;
    for it in 0..POWER_ITERATIONS_MAX {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        let settled = (next - lambda).abs() <= 1e-15 * next.abs().max(1.0);
        lambda = next;
        if it + 1 >= POWER_ITERATIONS_MIN && settled {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Maximum absolute column sum.
pub fn norm_one(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn check_dim(v: &Vector, expected: usize) -> crate::Result<()> {
    if v.len() != expected {
        return Err(crate::Error::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}
