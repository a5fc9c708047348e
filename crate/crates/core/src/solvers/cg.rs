use super::{axpy, dot, norm, LinearOperator, SolveReport};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Diagonal scaling `y = x / diag(A)`.
#[derive(Debug, Clone)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Self {
        Self::from_diagonal(&a.diagonal())
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        JacobiPreconditioner {
            inv_diag: diag
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl LinearOperator for JacobiPreconditioner {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.inv_diag) {
            *yi = xi * d;
        }
    }
}

/// Conjugate gradients for a symmetric positive definite matrix, starting
/// from zero. Stops when `||b - A x|| <= tol * ||b||`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "cg: matrix is {}x{}, rhs has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut x = vec![0.0; b.len()];
    let report = pcg(a, b, &mut x, &super::Identity(b.len()), tol, maxit);
    Ok((x, report))
}

/// Preconditioned conjugate gradients from the initial guess in `x`.
/// The residual test is relative to `||b||`; a zero right-hand side returns
/// `x = 0` immediately.
pub fn pcg<A, M>(a: &A, b: &[f64], x: &mut [f64], m: &M, tol: f64, maxit: usize) -> SolveReport
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveReport {
            converged: true,
            ..Default::default()
        };
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    if x.iter().any(|&v| v != 0.0) {
        let mut ax = vec![0.0; n];
        a.apply(x, &mut ax);
        axpy(-1.0, &ax, &mut r);
    }
    let mut rnorm = norm(&r);
    if rnorm <= target {
        return SolveReport {
            final_residual: rnorm,
            converged: true,
            ..Default::default()
        };
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=maxit {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return SolveReport {
                iterations: it,
                final_residual: rnorm,
                converged: false,
                active_set_size: 0,
            };
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm(&r);
        if rnorm <= target {
            return SolveReport {
                iterations: it,
                final_residual: rnorm,
                converged: true,
                active_set_size: 0,
            };
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    SolveReport {
        iterations: maxit,
        final_residual: rnorm,
        converged: false,
        active_set_size: 0,
    }
}
