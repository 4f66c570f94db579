//! Quadrature on sampled data.

use crate::scalar::{lit, Scalar};

/// Trapezoid rule on a non-uniform grid.
pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len(), "abscissae and ordinates differ in length");
    x.windows(2).zip(y.windows(2)).fold(T::zero(), |acc, (xw, yw)| {
        acc + (xw[1] - xw[0]) * (yw[0] + yw[1]) * lit(0.5)
    })
}

/// Trapezoid rule with the end corrections of the Hermite (Euler–Maclaurin)
/// form, using derivative samples `dy`; exact for cubics.
pub fn hermite_trapezoid<T: Scalar>(x: &[T], y: &[T], dy: &[T]) -> T {
    assert!(x.len() == y.len() && y.len() == dy.len());
    let mut acc = T::zero();
    for i in 1..x.len() {
        let h = x[i] - x[i - 1];
        acc = acc + h * (y[i - 1] + y[i]) * lit(0.5) + h * h * (dy[i - 1] - dy[i]) / lit(12.0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_linear_exact() {
        let x = [0.0, 0.5, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((trapezoid(&x, &y) - 12.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_trapezoid_cubic_exact() {
        let x = [0.0, 0.3, 1.1, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let dy: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((hermite_trapezoid(&x, &y, &dy) - 4.0).abs() < 1e-13);
    }
}
