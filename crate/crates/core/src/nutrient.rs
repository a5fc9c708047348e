//! Quasi-static nutrient equation
//! `D (grad sigma, grad xi) + C/2 (sigma (phi + 1), xi)_h = D chi (grad phi, grad xi)`
//! with Dirichlet data on the whole boundary.

use crate::error::{Error, Result, Stage};
use crate::fem::{assemble_stiffness, lumped_mass_diagonal, FeFunction, Space};
use crate::mesh::{Mesh, Point};
use crate::params::Parameters;
use crate::solvers::{pcg, JacobiPreconditioner, SolveReport};
use crate::sparse::CsrMatrix;

/// Solves for the nutrient with `sigma = sigma_b` on the boundary.
pub fn solve_nutrient(mesh: &Mesh, phi: &FeFunction, params: &Parameters) -> Result<(FeFunction, SolveReport)> {
    let sigma_b = params.sigma_b;
    solve_nutrient_with_boundary(mesh, phi, params, &|_| sigma_b)
}

/// As [`solve_nutrient`] with general Dirichlet data `g`. Boundary rows are
/// eliminated, so the reduced system is symmetric positive definite.
pub fn solve_nutrient_with_boundary(
    mesh: &Mesh,
    phi: &FeFunction,
    params: &Parameters,
    g: &dyn Fn(Point) -> f64,
) -> Result<(FeFunction, SolveReport)> {
    phi.expect(Space::P1Scalar, mesh, "phi")?;
    let (d, c, chi) = (params.diffusivity, params.consumption, params.chi);
    if !(d > 0.0) || !(c >= 0.0) || !(chi >= 0.0) {
        return Err(Error::invalid("nutrient needs D > 0, C >= 0 and chi >= 0"));
    }
    let n = mesh.num_p1_dofs();
    let stiffness = assemble_stiffness(mesh, &vec![1.0; mesh.num_triangles()])?;
    let mass = lumped_mass_diagonal(mesh);
    let ph = phi.coeffs();

    // right-hand side D chi K phi, before elimination
    let mut rhs = stiffness.mul_vec(ph);
    rhs.iter_mut().for_each(|v| *v *= d * chi);

    let boundary = mesh.boundary_vertices(None);
    let mut sigma = vec![0.0; n];
    for (i, p) in mesh.vertices().iter().enumerate() {
        if boundary[i] {
            sigma[i] = g(*p);
        }
    }
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !boundary[i] {
            free_index[i] = free.len();
            free.push(i);
        }
    }

    let reaction: Vec<f64> = (0..n).map(|i| 0.5 * c * mass[i] * (ph[i] + 1.0)).collect();
    let mut triplets = Vec::with_capacity(stiffness.nnz());
    let mut b = vec![0.0; free.len()];
    for (k, &i) in free.iter().enumerate() {
        let (cols, vals) = stiffness.row(i);
        let mut r = rhs[i];
        for (&j, &v) in cols.iter().zip(vals) {
            let entry = d * v + if j == i { reaction[i] } else { 0.0 };
            if boundary[j] {
                r -= entry * sigma[j];
            } else if entry != 0.0 {
                triplets.push((k, free_index[j], entry));
            }
        }
        b[k] = r;
    }
    let reduced = CsrMatrix::from_triplets(free.len(), free.len(), &triplets)?;
    let mut x = vec![params.sigma_b; free.len()];
    let report = pcg(
        &reduced,
        &b,
        &mut x,
        &JacobiPreconditioner::new(&reduced),
        params.nutrient_tol,
        params.nutrient_maxit,
    );
    if !report.converged {
        return Err(Error::NotConverged {
            stage: Stage::Nutrient,
            report,
        });
    }
    for (k, &i) in free.iter().enumerate() {
        sigma[i] = x[k];
    }
    Ok((FeFunction::new(Space::P1Scalar, mesh, sigma)?, report))
}
