use super::{CsrMatrix, SolveError};
use crate::scalar::{dot, norm_inf, Scalar};

/// Result of a converged iterative solve.
#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `||b - A x||_inf` of the returned iterate, recomputed from scratch.
    pub residual_inf: T,
    /// Recursive residual `||r_k||_inf` per iteration.
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
/// `A`. Converged when the true residual satisfies
/// `||b - A x||_inf <= tol * ||b||_inf`.
pub fn pcg<T: Scalar>(a: &CsrMatrix<T>, b: &[T], tol: T, max_iter: usize) -> Result<CgOutcome<T>, SolveError> {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs length");
    let b_norm = norm_inf(b);
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual_inf: T::zero(),
            history: Vec::new(),
        });
    }
    let threshold = tol * b_norm;

    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();

    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            // Breakdown: A is not positive definite on the Krylov space.
            return Err(SolveError::NotConverged { iterations, history });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let r_inf = norm_inf(&r);
        history.push(r_inf.as_f64());

        if r_inf <= threshold {
            // Confirm against the true residual; recursive residuals drift.
            let true_r = a.residual(&x, b);
            let true_inf = norm_inf(&true_r);
            if true_inf <= threshold {
                return Ok(CgOutcome {
                    x,
                    iterations,
                    residual_inf: true_inf,
                    history,
                });
            }
            // Restart from the true residual.
            r = true_r;
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(SolveError::NotConverged { iterations, history })
}
