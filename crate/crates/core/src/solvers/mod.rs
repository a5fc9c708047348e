//! Iterative kernels: conjugate gradients, restarted GMRES and a projected
//! block Gauss-Seidel method for box-constrained coupled systems.

mod cg;
mod gmres;
mod obstacle;

pub use cg::{cg_solve, pcg, JacobiPreconditioner};
pub use gmres::{gmres_solve, gmres_solve_from, GmresOptions};
pub use obstacle::{projected_block_gs, ObstacleOptions, ObstacleSolution, ObstacleSystem};

use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Euclidean norm of the final residual (max-norm for the projected solver).
    pub final_residual: f64,
    pub converged: bool,
    /// Number of nodes at a bound (projected solves only).
    pub active_set_size: usize,
}

/// Anything that can compute `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

/// The identity map, usable as a trivial preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
