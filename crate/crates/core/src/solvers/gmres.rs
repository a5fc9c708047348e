use super::{axpy, dot, norm, LinearOperator, SolveReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `||b - A x|| <= tol * ||b||`.
    pub tol: f64,
    /// Krylov subspace dimension per cycle.
    pub restart: usize,
    /// Maximum number of restart cycles.
    pub max_restarts: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-9,
            restart: 50,
            max_restarts: 200,
        }
    }
}

/// Restarted, right-preconditioned GMRES starting from zero.
pub fn gmres_solve<A, M>(a: &A, b: &[f64], precond: &M, opts: GmresOptions) -> Result<(Vec<f64>, SolveReport)>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let mut x = vec![0.0; b.len()];
    let report = gmres_solve_from(a, b, &mut x, precond, opts)?;
    Ok((x, report))
}

/// Restarted GMRES from the initial guess in `x`.
///
/// Preconditioning is applied on the right and the preconditioned directions
/// are stored, so the preconditioner may change between applications (e.g. an
/// inner iterative solve). The minimised quantity is the true residual.
pub fn gmres_solve_from<A, M>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    precond: &M,
    opts: GmresOptions,
) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    let n = b.len();
    if a.dim() != n || precond.dim() != n || x.len() != n {
        return Err(Error::invalid(format!(
            "gmres: operator dim {}, preconditioner dim {}, rhs {}, guess {}",
            a.dim(),
            precond.dim(),
            n,
            x.len()
        )));
    }
    if opts.restart == 0 {
        return Err(Error::invalid("gmres restart length must be positive"));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            converged: true,
            ..Default::default()
        });
    }
    let target = opts.tol * bnorm;
    let m = opts.restart;
    let mut v: Vec<Vec<f64>> = (0..=m).map(|_| vec![0.0; n]).collect();
    let mut z: Vec<Vec<f64>> = (0..m).map(|_| vec![0.0; n]).collect();
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut total_its = 0;

    let residual = |x: &[f64], r: &mut [f64]| {
        a.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm(r)
    };

    let mut r = vec![0.0; n];
    let mut rnorm = residual(x, &mut r);
    for _cycle in 0..opts.max_restarts {
        if rnorm <= target {
            break;
        }
        let beta = rnorm;
        for (vi, ri) in v[0].iter_mut().zip(&r) {
            *vi = ri / beta;
        }
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        let mut k = 0;
        for j in 0..m {
            precond.apply(&v[j], &mut z[j]);
            a.apply(&z[j], &mut w);
            // modified Gram-Schmidt
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                axpy(-hij, &v[i], &mut w);
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(hnext);
            if denom == 0.0 {
                // stagnation: the new direction adds nothing
                k = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = hnext / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total_its += 1;
            k = j + 1;
            let estimate = g[j + 1].abs();
            if estimate <= target || hnext <= 1e-14 * denom {
                break;
            }
            for (vi, wi) in v[j + 1].iter_mut().zip(&w) {
                *vi = wi / hnext;
            }
        }
        // back substitution on the k x k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in (i + 1)..k {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &z[i], x);
        }
        rnorm = residual(x, &mut r);
        if k == 0 {
            break;
        }
    }
    Ok(SolveReport {
        iterations: total_its,
        final_residual: rnorm,
        converged: rnorm <= target,
        active_set_size: 0,
    })
}
