//! Tridiagonal solve (Thomas algorithm).

use crate::error::{Result, WaveError};
use crate::scalar::Scalar;

/// Solves `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]`; `a[0]` and
/// `c[n-1]` are ignored. No pivoting: the systems assembled here are
/// diagonally dominant.
pub fn solve_tridiagonal<T: Scalar>(a: &[T], b: &[T], c: &[T], d: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || c.len() != n || d.len() != n {
        return Err(WaveError::Domain("tridiagonal bands of unequal length".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cp = vec![T::zero(); n];
    let mut dp = vec![T::zero(); n];
    if b[0] == T::zero() {
        return Err(WaveError::Singular("zero pivot in tridiagonal solve".into()));
    }
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        if m == T::zero() || !m.is_finite() {
            return Err(WaveError::Singular("zero pivot in tridiagonal solve".into()));
        }
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}
