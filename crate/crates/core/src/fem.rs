//! Finite-element spaces and assembly on triangle meshes.
//!
//! Scalar fields live in continuous P1; velocities in continuous P2 with two
//! interleaved components per Lagrange node (`2 * node + component`).

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, ElementPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    P1Scalar,
    P2Vector,
}

impl Space {
    pub fn dofs(self, mesh: &Mesh) -> usize {
        match self {
            Space::P1Scalar => mesh.num_p1_dofs(),
            Space::P2Vector => 2 * mesh.num_p2_nodes(),
        }
    }
}

/// Coefficient vector of a discrete function.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    space: Space,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Space, mesh: &Mesh, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dofs(mesh) {
            return Err(Error::invalid(format!(
                "{space:?} on this mesh needs {} coefficients, got {}",
                space.dofs(mesh),
                coeffs.len()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn zeros(space: Space, mesh: &Mesh) -> Self {
        FeFunction {
            space,
            coeffs: vec![0.0; space.dofs(mesh)],
        }
    }

    pub fn constant_p1(mesh: &Mesh, value: f64) -> Self {
        FeFunction {
            space: Space::P1Scalar,
            coeffs: vec![value; mesh.num_p1_dofs()],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_on(&self, mesh: &Mesh) -> bool {
        self.coeffs.len() == self.space.dofs(mesh)
    }

    pub(crate) fn expect(&self, space: Space, mesh: &Mesh, what: &str) -> Result<()> {
        if self.space != space || !self.is_on(mesh) {
            return Err(Error::invalid(format!(
                "{what} must be a {space:?} function on the mesh"
            )));
        }
        Ok(())
    }
}

/// Nodal interpolation of `f` into P1.
pub fn interpolate_nodal(mesh: &Mesh, f: impl Fn(Point) -> f64) -> FeFunction {
    FeFunction {
        space: Space::P1Scalar,
        coeffs: mesh.vertices().iter().map(|&p| f(p)).collect(),
    }
}

/// Nodal interpolation of a vector field into P2.
pub fn interpolate_p2_vector(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> FeFunction {
    let mut coeffs = Vec::with_capacity(2 * mesh.num_p2_nodes());
    for k in 0..mesh.num_p2_nodes() {
        let v = f(mesh.p2_node(k));
        coeffs.extend_from_slice(&v);
    }
    FeFunction {
        space: Space::P2Vector,
        coeffs,
    }
}

/// Area and barycentric-coordinate gradients of a triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(p: &[Point; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let inv = 1.0 / det;
        let grads = [
            [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
            [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
            [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
        ];
        TriangleGeometry {
            area: 0.5 * det,
            grads,
        }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(&mesh.triangle_points(t))
    }

    /// Gradient of the P1 interpolant with vertex values `v`.
    #[inline]
    pub fn gradient(&self, v: [f64; 3]) -> [f64; 2] {
        [
            v[0] * self.grads[0][0] + v[1] * self.grads[1][0] + v[2] * self.grads[2][0],
            v[0] * self.grads[0][1] + v[1] * self.grads[1][1] + v[2] * self.grads[2][1],
        ]
    }
}

/// Seven-point symmetric quadrature on triangles, exact for polynomials of
/// degree five. Points are barycentric, weights sum to one.
pub fn quadrature_degree5() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

/// P2 basis values at barycentric point `l`, local order v0, v1, v2, m01, m12, m20.
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Cartesian gradients of the P2 basis at barycentric point `l`.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for d in 0..2 {
        out[0][d] = (4.0 * l[0] - 1.0) * g[0][d];
        out[1][d] = (4.0 * l[1] - 1.0) * g[1][d];
        out[2][d] = (4.0 * l[2] - 1.0) * g[2][d];
        out[3][d] = 4.0 * (l[1] * g[0][d] + l[0] * g[1][d]);
        out[4][d] = 4.0 * (l[2] * g[1][d] + l[1] * g[2][d]);
        out[5][d] = 4.0 * (l[0] * g[2][d] + l[2] * g[0][d]);
    }
    out
}

/// Evaluates a P2 vector field on triangle `t` at barycentric point `l`.
#[inline]
pub fn eval_p2_vector(mesh: &Mesh, v: &[f64], t: usize, l: [f64; 3]) -> [f64; 2] {
    let nodes = mesh.p2_nodes_of(t);
    let phi = p2_values(l);
    let mut out = [0.0; 2];
    for k in 0..6 {
        out[0] += phi[k] * v[2 * nodes[k]];
        out[1] += phi[k] * v[2 * nodes[k] + 1];
    }
    out
}

/// Diagonal of the lumped P1 mass matrix: one third of the area of the
/// triangles around each vertex.
pub fn lumped_mass_diagonal(mesh: &Mesh) -> Vec<f64> {
    let mut diag = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.signed_area(t) / 3.0;
        for &v in tri {
            diag[v] += third;
        }
    }
    diag
}

pub fn assemble_lumped_mass(mesh: &Mesh) -> CsrMatrix {
    CsrMatrix::from_diagonal(&lumped_mass_diagonal(mesh))
}

/// Lumped inner product `(u, w)_h`.
pub fn lumped_dot(mass: &[f64], u: &[f64], w: &[f64]) -> f64 {
    mass.iter().zip(u).zip(w).map(|((m, a), b)| m * a * b).sum()
}

/// P1 sparsity pattern with per-triangle scatter positions.
pub fn p1_pattern(mesh: &Mesh) -> ElementPattern {
    let dofs: Vec<usize> = mesh.triangles().iter().flatten().copied().collect();
    let n = mesh.num_vertices();
    ElementPattern::new(n, n, 3, 3, &dofs, &dofs)
}

/// Local P1 stiffness `area * grad(l_i) . grad(l_j)`.
#[inline]
pub fn p1_local_stiffness(geo: &TriangleGeometry) -> [f64; 9] {
    let mut k = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            k[3 * i + j] = geo.area
                * (geo.grads[i][0] * geo.grads[j][0] + geo.grads[i][1] * geo.grads[j][1]);
        }
    }
    k
}

/// Stiffness matrix `(c grad u, grad w)` with an elementwise constant,
/// non-negative coefficient.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
    assemble_stiffness_with(&p1_pattern(mesh), mesh, coeff)
}

pub fn assemble_stiffness_with(
    pattern: &ElementPattern,
    mesh: &Mesh,
    coeff: &[f64],
) -> Result<CsrMatrix> {
    if coeff.len() != mesh.num_triangles() {
        return Err(Error::invalid("stiffness coefficient needs one value per triangle"));
    }
    if let Some((t, c)) = coeff.iter().enumerate().find(|(_, c)| !(**c >= 0.0)) {
        return Err(Error::invalid(format!(
            "stiffness coefficient on triangle {t} is {c}, must be non-negative"
        )));
    }
    let mut m = pattern.zeros();
    for (t, &c) in coeff.iter().enumerate() {
        let mut k = p1_local_stiffness(&TriangleGeometry::of(mesh, t));
        k.iter_mut().for_each(|v| *v *= c);
        pattern.add_element(&mut m, t, &k);
    }
    Ok(m)
}

/// Global dofs of the 12 local velocity unknowns of triangle `t`, ordered
/// `(node 0, x), (node 0, y), (node 1, x), ...`.
#[inline]
pub fn p2_vector_dofs(mesh: &Mesh, t: usize) -> [usize; 12] {
    let nodes = mesh.p2_nodes_of(t);
    let mut d = [0usize; 12];
    for k in 0..6 {
        d[2 * k] = 2 * nodes[k];
        d[2 * k + 1] = 2 * nodes[k] + 1;
    }
    d
}

/// Patterns of the velocity block (P2 x P2) and divergence block (P1 x P2).
pub fn taylor_hood_patterns(mesh: &Mesh) -> (ElementPattern, ElementPattern) {
    let nt = mesh.num_triangles();
    let mut vdofs = Vec::with_capacity(12 * nt);
    let mut pdofs = Vec::with_capacity(3 * nt);
    for t in 0..nt {
        vdofs.extend_from_slice(&p2_vector_dofs(mesh, t));
        pdofs.extend_from_slice(&mesh.triangles()[t]);
    }
    let nv = 2 * mesh.num_p2_nodes();
    let np = mesh.num_vertices();
    (
        ElementPattern::new(nv, nv, 12, 12, &vdofs, &vdofs),
        ElementPattern::new(np, nv, 3, 12, &pdofs, &vdofs),
    )
}

/// Element integrals of P2 products on one triangle.
struct P2ElementIntegrals {
    /// `dd[a][b][k][l] = int d_a N_k d_b N_l`
    dd: [[[[f64; 6]; 6]; 2]; 2],
    /// `mass[k][l] = int N_k N_l`
    mass: [[f64; 6]; 6],
    /// `div[i][a][k] = int l_i d_a N_k` (P1 test function times P2 derivative)
    div: [[[f64; 6]; 2]; 3],
}

fn p2_element_integrals(geo: &TriangleGeometry) -> P2ElementIntegrals {
    let mut out = P2ElementIntegrals {
        dd: [[[[0.0; 6]; 6]; 2]; 2],
        mass: [[0.0; 6]; 6],
        div: [[[0.0; 6]; 2]; 3],
    };
    for (l, w) in quadrature_degree5() {
        let w = w * geo.area;
        let n = p2_values(l);
        let g = p2_gradients(l, &geo.grads);
        for k in 0..6 {
            for m in 0..6 {
                out.mass[k][m] += w * n[k] * n[m];
                for a in 0..2 {
                    for b in 0..2 {
                        out.dd[a][b][k][m] += w * g[k][a] * g[m][b];
                    }
                }
            }
            for i in 0..3 {
                for a in 0..2 {
                    out.div[i][a][k] += w * l[i] * g[k][a];
                }
            }
        }
    }
    out
}

/// Local 12x12 Brinkman block
/// `2 eta (D u, D w) + lambda (div u, div w) + nu (u, w)`.
fn brinkman_local(ints: &P2ElementIntegrals, eta: f64, lambda: f64, nu: f64) -> [f64; 144] {
    let mut a = [0.0; 144];
    for k in 0..6 {
        for c in 0..2 {
            let row = 2 * k + c;
            for m in 0..6 {
                for d in 0..2 {
                    let col = 2 * m + d;
                    let mut v = eta * ints.dd[d][c][k][m] + lambda * ints.dd[c][d][k][m];
                    if c == d {
                        v += eta * (ints.dd[0][0][k][m] + ints.dd[1][1][k][m]) + nu * ints.mass[k][m];
                    }
                    a[12 * row + col] = v;
                }
            }
        }
    }
    a
}

/// Velocity block and divergence coupling of the lowest-order Taylor-Hood
/// discretisation of the Brinkman operator.
///
/// Returns `(A_vv, B_div)` with `A_vv` the bilinear form
/// `2 (eta D(v), D(xi)) + (lambda div v, div xi) + nu (v, xi)` and
/// `B_div[i, j] = (div phi_j, l_i)` for P1 test functions `l_i`.
/// No boundary conditions are applied.
pub fn assemble_taylor_hood(
    mesh: &Mesh,
    eta_elem: &[f64],
    lambda_bulk: f64,
    nu: f64,
) -> Result<(CsrMatrix, CsrMatrix)> {
    let (vp, bp) = taylor_hood_patterns(mesh);
    assemble_taylor_hood_with(&vp, &bp, mesh, eta_elem, lambda_bulk, nu)
}

pub fn assemble_taylor_hood_with(
    velocity_pattern: &ElementPattern,
    divergence_pattern: &ElementPattern,
    mesh: &Mesh,
    eta_elem: &[f64],
    lambda_bulk: f64,
    nu: f64,
) -> Result<(CsrMatrix, CsrMatrix)> {
    if eta_elem.len() != mesh.num_triangles() {
        return Err(Error::invalid("viscosity needs one value per triangle"));
    }
    if eta_elem.iter().any(|e| !(*e >= 0.0)) || !(lambda_bulk >= 0.0) || !(nu >= 0.0) {
        return Err(Error::invalid(
            "viscosity, bulk viscosity and permeability must be non-negative",
        ));
    }
    if nu == 0.0 && eta_elem.iter().all(|&e| e == 0.0) {
        return Err(Error::SingularOperator(
            "zero viscosity everywhere with zero permeability".into(),
        ));
    }
    let mut a = velocity_pattern.zeros();
    let mut b = divergence_pattern.zeros();
    for (t, &eta) in eta_elem.iter().enumerate() {
        let ints = p2_element_integrals(&TriangleGeometry::of(mesh, t));
        velocity_pattern.add_element(&mut a, t, &brinkman_local(&ints, eta, lambda_bulk, nu));
        let mut local = [0.0; 36];
        for i in 0..3 {
            for k in 0..6 {
                local[12 * i + 2 * k] = ints.div[i][0][k];
                local[12 * i + 2 * k + 1] = ints.div[i][1][k];
            }
        }
        divergence_pattern.add_element(&mut b, t, &local);
    }
    Ok((a, b))
}

/// Consistent P2 vector mass matrix `(v, xi)`.
pub fn assemble_p2_vector_mass(mesh: &Mesh) -> CsrMatrix {
    let (vp, _) = taylor_hood_patterns(mesh);
    let mut m = vp.zeros();
    for t in 0..mesh.num_triangles() {
        let ints = p2_element_integrals(&TriangleGeometry::of(mesh, t));
        vp.add_element(&mut m, t, &brinkman_local(&ints, 0.0, 0.0, 1.0));
    }
    m
}

/// Load vector `(v . grad phi_old, l_i)` against P1 test functions.
pub fn assemble_convection_load(mesh: &Mesh, v: &FeFunction, phi_old: &FeFunction) -> Result<Vec<f64>> {
    v.expect(Space::P2Vector, mesh, "velocity")?;
    phi_old.expect(Space::P1Scalar, mesh, "phi_old")?;
    let phi = phi_old.coeffs();
    let vel = v.coeffs();
    let mut load = vec![0.0; mesh.num_vertices()];
    let quad = quadrature_degree5();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geo = TriangleGeometry::of(mesh, t);
        let grad = geo.gradient([phi[tri[0]], phi[tri[1]], phi[tri[2]]]);
        if grad == [0.0, 0.0] {
            continue;
        }
        let mut local = [0.0; 3];
        for (l, w) in quad {
            let vv = eval_p2_vector(mesh, vel, t, l);
            let integrand = w * geo.area * (vv[0] * grad[0] + vv[1] * grad[1]);
            for i in 0..3 {
                local[i] += integrand * l[i];
            }
        }
        for i in 0..3 {
            load[tri[i]] += local[i];
        }
    }
    Ok(load)
}

/// Elementwise arithmetic mean of vertex values.
pub fn element_means(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0)
        .collect()
}
