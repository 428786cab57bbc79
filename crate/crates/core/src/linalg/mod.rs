//! Sparse symmetric linear algebra for grounded conductance systems.

mod cg;
mod dense;
mod sparse;

pub use cg::{pcg, CgOutcome};
pub use dense::lu_solve;
pub use sparse::{CsrMatrix, TripletMatrix};

use crate::scalar::{norm_inf, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("iterative solver did not converge after {iterations} iterations (last residual {:?})", history.last())]
    NotConverged { iterations: usize, history: Vec<f64> },
    #[error("singular system: {0}")]
    Structural(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Conjugate gradient; dense elimination if it stalls below
    /// [`DENSE_FALLBACK_LIMIT`] unknowns.
    #[default]
    Auto,
    Iterative,
    Direct,
}

/// Largest system for which the dense fallback is attempted.
pub const DENSE_FALLBACK_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative residual target, `||G v - i||_inf <= tol * ||i||_inf`.
    pub tol: f64,
    pub max_iter: usize,
    pub kind: SolverKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 20_000,
            kind: SolverKind::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual_inf: T,
    pub direct: bool,
}

/// Every connected component of the matrix graph must contain at least one
/// row with strict diagonal dominance (a path to ground); otherwise the
/// grounded Laplacian is singular.
pub fn check_grounded<T: Scalar>(a: &CsrMatrix<T>) -> Result<(), SolveError> {
    let n = a.dim();
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for (r, mark) in seen.iter_mut().enumerate() {
        let mut diag = T::zero();
        let mut off = T::zero();
        for (c, v) in a.row(r) {
            if c == r {
                diag = v;
            } else {
                off += v.abs();
            }
        }
        if diag - off > T::epsilon() * T::of(16.0) * diag {
            *mark = true;
            stack.push(r);
        }
    }
    while let Some(r) = stack.pop() {
        for (c, v) in a.row(r) {
            if v != T::zero() && !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        None => Ok(()),
        Some(r) => Err(SolveError::Structural(format!("unknown {r} has no path to ground"))),
    }
}

/// Solve a grounded conductance system `A x = b`.
pub fn solve_spd<T: Scalar>(a: &CsrMatrix<T>, b: &[T], opts: &SolverOptions) -> Result<LinearSolution<T>, SolveError> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(SolveError::Structural(format!("tolerance {} outside (0, 1)", opts.tol)));
    }
    check_grounded(a)?;
    let direct = |a: &CsrMatrix<T>| -> Result<LinearSolution<T>, SolveError> {
        let x = lu_solve(a.to_dense(), b.to_vec())?;
        let residual_inf = norm_inf(&a.residual(&x, b));
        Ok(LinearSolution {
            x,
            iterations: 0,
            residual_inf,
            direct: true,
        })
    };
    match opts.kind {
        SolverKind::Direct => direct(a),
        SolverKind::Iterative | SolverKind::Auto => match pcg(a, b, T::of(opts.tol), opts.max_iter) {
            Ok(out) => Ok(LinearSolution {
                x: out.x,
                iterations: out.iterations,
                residual_inf: out.residual_inf,
                direct: false,
            }),
            Err(e) if opts.kind == SolverKind::Auto && a.dim() < DENSE_FALLBACK_LIMIT => direct(a).map_err(|_| e),
            Err(e) => Err(e),
        },
    }
}
