//! Brinkman flow: Taylor-Hood discretisation of
//! `-div(2 eta D v + lambda div v I - p I) + nu v = f`, `div v = g`,
//! solved as one saddle-point system by flexible GMRES with a block-diagonal
//! preconditioner.

use crate::error::{Error, Result, Stage};
use crate::fem::{
    assemble_stiffness, assemble_taylor_hood_with, eval_p2_vector, lumped_mass_diagonal, p2_gradients, p2_values,
    p2_vector_dofs, quadrature_degree5, taylor_hood_patterns, FeFunction, Space, TriangleGeometry,
};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::params::Parameters;
use crate::solvers::{gmres_solve_from, pcg, GmresOptions, JacobiPreconditioner, LinearOperator, SolveReport};
use crate::sparse::{CsrMatrix, ElementPattern};

/// Velocity and pressure of one flow solve.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub v: FeFunction,
    pub p: FeFunction,
    pub report: SolveReport,
    /// `sum_i ((div v, l_i) - g_i)`: the divergence equation tested with 1.
    pub divergence_defect: f64,
}

/// Elementwise viscosity `eta(phi_bar)`, linear between `eta_minus` at -1 and
/// `eta_plus` at +1, with `phi_bar` the vertex mean clamped to [-1, 1].
pub fn viscosity_field(mesh: &Mesh, phi: &FeFunction, eta_minus: f64, eta_plus: f64) -> Vec<f64> {
    let c = phi.coeffs();
    mesh.triangles()
        .iter()
        .map(|t| {
            let m = ((c[t[0]] + c[t[1]] + c[t[2]]) / 3.0).clamp(-1.0, 1.0);
            eta_minus * 0.5 * (1.0 - m) + eta_plus * 0.5 * (1.0 + m)
        })
        .collect()
}

/// Load `((mu_old + chi_phi sigma_old) grad phi_old, xi)` against the P2
/// vector basis.
pub fn flow_rhs(
    mesh: &Mesh,
    phi_old: &FeFunction,
    mu_old: &FeFunction,
    sigma_old: &FeFunction,
    chi_phi: f64,
) -> Result<Vec<f64>> {
    phi_old.expect(Space::P1Scalar, mesh, "phi_old")?;
    mu_old.expect(Space::P1Scalar, mesh, "mu_old")?;
    sigma_old.expect(Space::P1Scalar, mesh, "sigma_old")?;
    let (phi, mu, sigma) = (phi_old.coeffs(), mu_old.coeffs(), sigma_old.coeffs());
    let mut load = vec![0.0; Space::P2Vector.dofs(mesh)];
    let quad = quadrature_degree5();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geo = TriangleGeometry::of(mesh, t);
        let grad = geo.gradient([phi[tri[0]], phi[tri[1]], phi[tri[2]]]);
        if grad == [0.0, 0.0] {
            continue;
        }
        let coef = tri.map(|v| mu[v] + chi_phi * sigma[v]);
        let dofs = p2_vector_dofs(mesh, t);
        for (l, w) in quad {
            let c = l[0] * coef[0] + l[1] * coef[1] + l[2] * coef[2];
            let weight = w * geo.area * c;
            let n = p2_values(l);
            for k in 0..6 {
                load[dofs[2 * k]] += weight * grad[0] * n[k];
                load[dofs[2 * k + 1]] += weight * grad[1] * n[k];
            }
        }
    }
    Ok(load)
}

/// Lumped divergence source `(1/2 alpha (P sigma_old - A)(phi_old + 1), l_i)_h`.
pub fn divergence_source(
    mesh: &Mesh,
    phi_old: &FeFunction,
    sigma_old: &FeFunction,
    alpha: f64,
    proliferation: f64,
    apoptosis: f64,
) -> Result<Vec<f64>> {
    phi_old.expect(Space::P1Scalar, mesh, "phi_old")?;
    sigma_old.expect(Space::P1Scalar, mesh, "sigma_old")?;
    let mass = lumped_mass_diagonal(mesh);
    Ok(mass
        .iter()
        .zip(phi_old.coeffs())
        .zip(sigma_old.coeffs())
        .map(|((m, phi), sigma)| m * 0.5 * alpha * (proliferation * sigma - apoptosis) * (phi + 1.0))
        .collect())
}

/// Everything needed for one Brinkman solve apart from the mesh.
pub struct BrinkmanProblem<'a> {
    /// Viscosity per triangle.
    pub eta: &'a [f64],
    pub lambda_bulk: f64,
    pub nu: f64,
    /// Momentum load on the P2 vector basis.
    pub load: &'a [f64],
    /// Divergence data tested with the P1 basis.
    pub div_source: &'a [f64],
    /// Velocity prescribed at the nodes of no-slip edges.
    pub dirichlet: &'a dyn Fn(Point) -> [f64; 2],
}

/// Solver settings for [`solve_brinkman`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub gmres: GmresOptions,
    /// Relative tolerance of the inner CG approximating the velocity block.
    pub inner_tol: f64,
    pub inner_maxit: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            gmres: GmresOptions::default(),
            inner_tol: 1e-1,
            inner_maxit: 500,
        }
    }
}

/// Mesh-dependent data reused across flow solves on the same mesh.
pub struct FlowContext {
    velocity_pattern: ElementPattern,
    divergence_pattern: ElementPattern,
    pressure_mass: Vec<f64>,
    /// P1 Laplacian with unit rows at vertices of stress-free edges.
    pressure_laplacian: CsrMatrix,
    /// Velocity dofs with prescribed values.
    constrained: Vec<bool>,
    fully_constrained: bool,
}

impl FlowContext {
    pub fn new(mesh: &Mesh) -> Self {
        let (velocity_pattern, divergence_pattern) = taylor_hood_patterns(mesh);
        let nodes = mesh.no_slip_p2_nodes();
        let constrained = nodes.iter().flat_map(|&b| [b, b]).collect();
        let free = mesh.boundary_vertices(Some(BoundaryTag::StressFree));
        FlowContext {
            velocity_pattern,
            divergence_pattern,
            pressure_mass: lumped_mass_diagonal(mesh),
            pressure_laplacian: pressure_laplacian(mesh, &free),
            constrained,
            fully_constrained: mesh.is_fully_no_slip(),
        }
    }
}

fn pressure_laplacian(mesh: &Mesh, fixed: &[bool]) -> CsrMatrix {
    let ones = vec![1.0; mesh.num_triangles()];
    let k = assemble_stiffness(mesh, &ones).expect("unit coefficient is valid");
    let mut out = k.clone();
    let offsets = k.row_offsets().to_vec();
    let cols = k.col_indices().to_vec();
    let values = out.values_mut();
    for r in 0..fixed.len() {
        for j in offsets[r]..offsets[r + 1] {
            let c = cols[j];
            if fixed[r] || fixed[c] {
                values[j] = if r == c { 1.0 } else { 0.0 };
            }
        }
    }
    out
}

/// The saddle operator `[[A, -B^T], [-B, 0]]` with constrained velocity rows
/// and columns replaced by the identity.
struct SaddleOperator<'a> {
    a: &'a CsrMatrix,
    b: &'a CsrMatrix,
    nv: usize,
}

impl LinearOperator for SaddleOperator<'_> {
    fn dim(&self) -> usize {
        self.nv + self.b.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (xv, xp) = x.split_at(self.nv);
        let (yv, yp) = y.split_at_mut(self.nv);
        self.a.mul_vec_into(xv, yv);
        self.b.mul_transpose_add(-1.0, xp, yv);
        self.b.mul_vec_into(xv, yp);
        yp.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Block-diagonal preconditioner: a few Jacobi-CG iterations on the
/// componentwise part of the velocity block (the x-x and y-y couplings), and on the pressure block the Cahouet-Chabard combination
/// `nu K_p^{-1} + eta M_p^{-1}` of an approximate pressure Laplacian solve and
/// the lumped pressure mass.
struct BlockPreconditioner<'a> {
    a: &'a CsrMatrix,
    jacobi: JacobiPreconditioner,
    pressure_scale: Vec<f64>,
    laplacian: &'a CsrMatrix,
    laplacian_jacobi: JacobiPreconditioner,
    nu: f64,
    project_mean: Option<&'a [f64]>,
    nv: usize,
    inner_tol: f64,
    inner_maxit: usize,
}

impl LinearOperator for BlockPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.nv + self.pressure_scale.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (xv, xp) = x.split_at(self.nv);
        let (yv, yp) = y.split_at_mut(self.nv);
        yv.iter_mut().for_each(|v| *v = 0.0);
        pcg(self.a, xv, yv, &self.jacobi, self.inner_tol, self.inner_maxit);
        if self.nu > 0.0 {
            let mut rhs = xp.to_vec();
            if self.project_mean.is_some() {
                let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
                rhs.iter_mut().for_each(|v| *v -= mean);
            }
            let mut z = vec![0.0; rhs.len()];
            pcg(self.laplacian, &rhs, &mut z, &self.laplacian_jacobi, self.inner_tol, self.inner_maxit);
            for ((yi, zi), (xi, s)) in yp.iter_mut().zip(&z).zip(xp.iter().zip(&self.pressure_scale)) {
                *yi = self.nu * zi + xi * s;
            }
        } else {
            for ((yi, xi), s) in yp.iter_mut().zip(xp).zip(&self.pressure_scale) {
                *yi = xi * s;
            }
        }
        if let Some(mass) = self.project_mean {
            subtract_lumped_mean(mass, yp);
        }
    }
}

fn subtract_lumped_mean(mass: &[f64], p: &mut [f64]) {
    let total: f64 = mass.iter().sum();
    let mean = mass.iter().zip(p.iter()).map(|(m, v)| m * v).sum::<f64>() / total;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// Copy of `a` with constrained rows and columns removed from the coupling
/// and a unit diagonal on constrained rows.
fn constrain_velocity_block(a: &CsrMatrix, constrained: &[bool]) -> CsrMatrix {
    let mut out = a.clone();
    let offsets = a.row_offsets().to_vec();
    let cols = a.col_indices().to_vec();
    let values = out.values_mut();
    for r in 0..constrained.len() {
        for k in offsets[r]..offsets[r + 1] {
            let c = cols[k];
            if constrained[r] || constrained[c] {
                values[k] = if r == c { 1.0 } else { 0.0 };
            }
        }
    }
    out
}

fn constrain_divergence_block(b: &CsrMatrix, constrained: &[bool]) -> CsrMatrix {
    let mut out = b.clone();
    let cols = b.col_indices().to_vec();
    for (v, c) in out.values_mut().iter_mut().zip(cols) {
        if constrained[c] {
            *v = 0.0;
        }
    }
    out
}

/// Solves the Brinkman saddle-point problem. `guess` (velocity, pressure)
/// warm-starts GMRES.
///
/// When every boundary edge is no-slip the pressure is determined up to a
/// constant; it is returned with zero lumped mean, and the divergence data
/// must be compatible with the prescribed boundary flux.
pub fn solve_brinkman(
    mesh: &Mesh,
    ctx: &FlowContext,
    problem: &BrinkmanProblem<'_>,
    opts: FlowOptions,
    guess: Option<(&FeFunction, &FeFunction)>,
) -> Result<FlowSolution> {
    let nv = Space::P2Vector.dofs(mesh);
    let np = mesh.num_p1_dofs();
    if problem.load.len() != nv || problem.div_source.len() != np || ctx.constrained.len() != nv {
        return Err(Error::invalid("flow load, divergence data or context do not match the mesh"));
    }
    if !ctx.fully_constrained && !ctx.constrained.iter().any(|&c| c) && problem.nu == 0.0 {
        return Err(Error::SingularOperator(
            "zero permeability without a no-slip boundary leaves rigid motions undetermined".into(),
        ));
    }
    let (a, b) = assemble_taylor_hood_with(
        &ctx.velocity_pattern,
        &ctx.divergence_pattern,
        mesh,
        problem.eta,
        problem.lambda_bulk,
        problem.nu,
    )?;

    let mut lift = vec![0.0; nv];
    for k in 0..mesh.num_p2_nodes() {
        if ctx.constrained[2 * k] {
            let d = (problem.dirichlet)(mesh.p2_node(k));
            lift[2 * k] = d[0];
            lift[2 * k + 1] = d[1];
        }
    }
    let a_lift = a.mul_vec(&lift);
    let b_lift = b.mul_vec(&lift);
    if ctx.fully_constrained {
        let source: f64 = problem.div_source.iter().sum();
        let flux: f64 = b_lift.iter().sum();
        if (source - flux).abs() > 1e-10 {
            return Err(Error::config(format!(
                "no-slip boundary everywhere but the integrated divergence source {source:.6e} \
                 differs from the prescribed boundary flux {flux:.6e}"
            )));
        }
    }

    let mut rhs = vec![0.0; nv + np];
    for i in 0..nv {
        rhs[i] = if ctx.constrained[i] { lift[i] } else { problem.load[i] - a_lift[i] };
    }
    for i in 0..np {
        rhs[nv + i] = b_lift[i] - problem.div_source[i];
    }

    let a_bc = constrain_velocity_block(&a, &ctx.constrained);
    let b_bc = constrain_divergence_block(&b, &ctx.constrained);
    let op = SaddleOperator { a: &a_bc, b: &b_bc, nv };
    let eta_mean = problem.eta.iter().sum::<f64>() / problem.eta.len() as f64;
    let scale = 2.0 * eta_mean + problem.lambda_bulk;
    let a_split = a_bc.filtered(|r, c| r % 2 == c % 2);
    let precond = BlockPreconditioner {
        a: &a_split,
        jacobi: JacobiPreconditioner::new(&a_split),
        laplacian: &ctx.pressure_laplacian,
        laplacian_jacobi: JacobiPreconditioner::new(&ctx.pressure_laplacian),
        nu: problem.nu,
        pressure_scale: ctx.pressure_mass.iter().map(|m| scale / m).collect(),
        project_mean: ctx.fully_constrained.then_some(ctx.pressure_mass.as_slice()),
        nv,
        inner_tol: opts.inner_tol,
        inner_maxit: opts.inner_maxit,
    };

    let mut x = vec![0.0; nv + np];
    if let Some((v0, p0)) = guess {
        if v0.is_on(mesh) && p0.is_on(mesh) && v0.space() == Space::P2Vector && p0.space() == Space::P1Scalar {
            x[..nv].copy_from_slice(v0.coeffs());
            x[nv..].copy_from_slice(p0.coeffs());
        }
    }
    for i in 0..nv {
        if ctx.constrained[i] {
            x[i] = lift[i];
        }
    }
    let report = gmres_solve_from(&op, &rhs, &mut x, &precond, opts.gmres)?;
    let mut p = x.split_off(nv);
    let v = x;
    if ctx.fully_constrained {
        subtract_lumped_mean(&ctx.pressure_mass, &mut p);
    }
    let bv = b.mul_vec(&v);
    let divergence_defect = bv.iter().sum::<f64>() - problem.div_source.iter().sum::<f64>();
    let solution = FlowSolution {
        v: FeFunction::new(Space::P2Vector, mesh, v)?,
        p: FeFunction::new(Space::P1Scalar, mesh, p)?,
        report,
        divergence_defect,
    };
    if !report.converged {
        return Err(Error::NotConverged {
            stage: Stage::Flow,
            report,
        });
    }
    Ok(solution)
}

/// Flow step of the scheme: viscosity from `phi_old`, forcing from the old
/// chemical potential and nutrient, homogeneous no-slip data.
pub fn solve_flow(
    mesh: &Mesh,
    phi_old: &FeFunction,
    mu_old: &FeFunction,
    sigma_old: &FeFunction,
    params: &Parameters,
) -> Result<FlowSolution> {
    solve_flow_with(&FlowContext::new(mesh), mesh, phi_old, mu_old, sigma_old, params, None)
}

/// [`solve_flow`] with a cached context and an optional warm start.
pub fn solve_flow_with(
    ctx: &FlowContext,
    mesh: &Mesh,
    phi_old: &FeFunction,
    mu_old: &FeFunction,
    sigma_old: &FeFunction,
    params: &Parameters,
    guess: Option<(&FeFunction, &FeFunction)>,
) -> Result<FlowSolution> {
    let (eta_minus, eta_plus) = params.floored_viscosities();
    let eta = viscosity_field(mesh, phi_old, eta_minus, eta_plus);
    let load = flow_rhs(mesh, phi_old, mu_old, sigma_old, params.chi_phi)?;
    let div_source = divergence_source(
        mesh,
        phi_old,
        sigma_old,
        params.alpha,
        params.proliferation,
        params.apoptosis,
    )?;
    let problem = BrinkmanProblem {
        eta: &eta,
        lambda_bulk: params.lambda_bulk,
        nu: params.nu,
        load: &load,
        div_source: &div_source,
        dirichlet: &|_| [0.0, 0.0],
    };
    let opts = FlowOptions {
        gmres: params.flow,
        inner_tol: params.flow_inner_tol,
        ..FlowOptions::default()
    };
    solve_brinkman(mesh, ctx, &problem, opts, guess)
}

/// Largest nodal velocity magnitude.
pub fn max_speed(v: &FeFunction) -> f64 {
    v.coeffs()
        .chunks(2)
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max)
}

/// Outward flux `int_{boundary} v . n` of a P2 velocity, by Simpson's rule on
/// each boundary edge (exact for quadratics).
pub fn boundary_flux(mesh: &Mesh, v: &FeFunction) -> f64 {
    let c = v.coeffs();
    let nv = mesh.num_vertices();
    let (lo, hi) = mesh.bounds();
    let mut flux = 0.0;
    for be in mesh.boundary_edges() {
        let [a, b] = mesh.edges()[be.edge].vertices;
        let m = nv + be.edge;
        let len = mesh.edge_length(be.edge);
        let mid = mesh.edges()[be.edge].midpoint;
        let normal = if (mid[0] - lo[0]).abs() < 1e-12 {
            [-1.0, 0.0]
        } else if (mid[0] - hi[0]).abs() < 1e-12 {
            [1.0, 0.0]
        } else if (mid[1] - lo[1]).abs() < 1e-12 {
            [0.0, -1.0]
        } else {
            [0.0, 1.0]
        };
        let vn = |k: usize| c[2 * k] * normal[0] + c[2 * k + 1] * normal[1];
        flux += len * (vn(a) + 4.0 * vn(m) + vn(b)) / 6.0;
    }
    flux
}

/// Evaluates a P2 velocity at barycentric point `l` of triangle `t`.
pub fn velocity_at(mesh: &Mesh, v: &FeFunction, t: usize, l: [f64; 3]) -> [f64; 2] {
    eval_p2_vector(mesh, v.coeffs(), t, l)
}

/// `int div(v) dx` of a P2 velocity, by exact quadrature of its gradient.
pub fn total_divergence(mesh: &Mesh, v: &FeFunction) -> f64 {
    let c = v.coeffs();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let geo = TriangleGeometry::of(mesh, t);
        let nodes = mesh.p2_nodes_of(t);
        for (l, w) in quadrature_degree5() {
            let g = p2_gradients(l, &geo.grads);
            for k in 0..6 {
                total += w * geo.area * (c[2 * nodes[k]] * g[k][0] + c[2 * nodes[k] + 1] * g[k][1]);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate_nodal;
    use crate::mesh::{build_uniform_mesh, Side};

    fn mesh(n: usize) -> Mesh {
        build_uniform_mesh(n, [-3.0, -3.0], [3.0, 3.0]).unwrap()
    }

    #[test]
    fn viscosity_endpoints() {
        let m = mesh(2);
        let one = FeFunction::constant_p1(&m, 1.0);
        let minus = FeFunction::constant_p1(&m, -1.0);
        assert!(viscosity_field(&m, &one, 0.3, 7.0).iter().all(|&e| e == 7.0));
        assert!(viscosity_field(&m, &minus, 0.3, 7.0).iter().all(|&e| e == 0.3));
        let any = interpolate_nodal(&m, |p| (p[0] * 0.4).sin() * 1.3);
        assert!(viscosity_field(&m, &any, 0.1, 0.1).iter().all(|&e| (e - 0.1).abs() < 1e-16));
    }

    #[test]
    fn forcing_cases() {
        let m = mesh(4);
        let zero = FeFunction::constant_p1(&m, 0.0);
        let one = FeFunction::constant_p1(&m, 1.0);
        let x = interpolate_nodal(&m, |p| p[0]);
        assert!(flow_rhs(&m, &one, &one, &one, 5.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(flow_rhs(&m, &x, &zero, &zero, 5.0).unwrap().iter().all(|&v| v == 0.0));
        let load = flow_rhs(&m, &x, &one, &zero, 0.0).unwrap();
        // pairing with xi = (1, 0): the x components sum to int d_x phi = 36
        let total: f64 = load.iter().step_by(2).sum();
        assert!((total - 36.0).abs() < 1e-12);
        let total_y: f64 = load.iter().skip(1).step_by(2).sum();
        assert!(total_y.abs() < 1e-12);
    }

    #[test]
    fn divergence_source_values() {
        let m = mesh(4);
        let one = FeFunction::constant_p1(&m, 1.0);
        let minus = FeFunction::constant_p1(&m, -1.0);
        let g = divergence_source(&m, &one, &one, 0.5, 0.1, 0.0).unwrap();
        assert!((g.iter().sum::<f64>() - 1.8).abs() < 1e-12);
        assert!(divergence_source(&m, &minus, &one, 0.5, 0.1, 0.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(divergence_source(&m, &one, &one, 0.5, 0.1, 0.1).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = mesh(4);
        let p = Parameters {
            alpha: 0.0,
            ..Parameters::default()
        };
        let zero = FeFunction::constant_p1(&m, 0.0);
        let sol = solve_flow(&m, &zero, &zero, &zero, &p).unwrap();
        assert!(sol.v.coeffs().iter().all(|&v| v == 0.0));
        assert!(sol.p.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rigid_rotation_is_reproduced() {
        let m = mesh(4).with_no_slip(&Side::ALL);
        let ctx = FlowContext::new(&m);
        let nu = 3.0;
        let exact = |p: Point| [p[1], -p[0]];
        let mass = crate::fem::assemble_p2_vector_mass(&m);
        let vstar = crate::fem::interpolate_p2_vector(&m, exact);
        let load = mass.mul_vec(vstar.coeffs()).iter().map(|v| nu * v).collect::<Vec<_>>();
        let eta = vec![0.7; m.num_triangles()];
        let g = vec![0.0; m.num_vertices()];
        let problem = BrinkmanProblem {
            eta: &eta,
            lambda_bulk: 0.0,
            nu,
            load: &load,
            div_source: &g,
            dirichlet: &exact,
        };
        let opts = FlowOptions {
            gmres: GmresOptions {
                tol: 1e-12,
                ..GmresOptions::default()
            },
            ..FlowOptions::default()
        };
        let sol = solve_brinkman(&m, &ctx, &problem, opts, None).unwrap();
        let err = sol
            .v
            .coeffs()
            .iter()
            .zip(vstar.coeffs())
            .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn incompatible_pure_no_slip_is_a_config_error() {
        let m = mesh(4).with_no_slip(&Side::ALL);
        let one = FeFunction::constant_p1(&m, 1.0);
        let zero = FeFunction::constant_p1(&m, 0.0);
        let err = solve_flow(&m, &one, &zero, &one, &Parameters::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
