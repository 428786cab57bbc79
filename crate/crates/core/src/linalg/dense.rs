//! Dense Gaussian elimination with partial pivoting.
//!
//! Serves as the reference solver for small systems and as the fallback when
//! the iterative solver stalls on a small network.

use super::SolveError;
use crate::scalar::Scalar;

/// Solve `A x = b` for a dense row-major `A`. `A` is consumed.
pub fn lu_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>, SolveError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(SolveError::Structural("dense system is not square".into()));
    }
    let scale = a.iter().flat_map(|r| r.iter()).fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = scale * T::epsilon() * T::of(n.max(1) as f64);

    for k in 0..n {
        let (piv, pmax) =
            (k..n)
                .map(|r| (r, a[r][k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= tiny {
            return Err(SolveError::Structural(format!("matrix is singular at column {k}")));
        }
        if piv != k {
            a.swap(piv, k);
            b.swap(piv, k);
        }
        let (upper, lower) = a.split_at_mut(k + 1);
        let pivot_row = &upper[k];
        let pivot = pivot_row[k];
        for (off, row) in lower.iter_mut().enumerate() {
            let f = row[k] / pivot;
            if f == T::zero() {
                continue;
            }
            row[k] = T::zero();
            for c in (k + 1)..n {
                row[c] -= f * pivot_row[c];
            }
            let r = k + 1 + off;
            let bk = b[k];
            b[r] -= f * bk;
        }
    }

    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in (r + 1)..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_with_pivoting() {
        let a: Vec<Vec<f64>> = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = lu_solve(a, vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_structural_error() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert!(matches!(lu_solve(a, vec![0.0, 0.0]), Err(SolveError::Structural(_))));
    }
}
