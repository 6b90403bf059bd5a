//! Small dense solves for the surrogate regression.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, `n x n`)
/// by Cholesky factorisation.
pub(crate) fn cholesky_solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    // Pivots this small relative to the diagonal scale mean the system is
    // singular to working precision.
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let tol = scale * T::epsilon() * T::of_usize(n.max(1));
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d.is_nan() || d <= tol {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}
