//! Conforming triangulations of a rectangle with P1 vertex and P2 edge-midpoint
//! degrees of freedom.
//!
//! Triangles are stored counter-clockwise as `[t0, t1, t2]` where `t0-t1` is
//! the refinement edge and `t2` the newest vertex, the labelling used by
//! newest-vertex bisection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];
}

/// Boundary condition class of a boundary edge for the flow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Zero normal stress.
    StressFree,
    /// Zero velocity.
    NoSlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub midpoint: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub side: Side,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `tri_edges[t][k]` is the edge joining local vertices `k` and `(k+1) % 3`.
    tri_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    lo: Point,
    hi: Point,
    no_slip: Vec<Side>,
}

/// Uniform `n x n` grid of squares on `[lo, hi]`, each square split along its
/// lower-left to upper-right diagonal. All boundary edges are stress-free.
pub fn build_uniform_mesh(n: usize, lo: Point, hi: Point) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("mesh needs at least one cell per side"));
    }
    if !(lo[0] < hi[0] && lo[1] < hi[1]) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "degenerate mesh bounds {lo:?} - {hi:?}"
        )));
    }
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // hypotenuse v00-v11 is the refinement edge of both halves
            triangles.push([v11, v00, v10]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(vertices, triangles, lo, hi, &[])
}

impl Mesh {
    /// Assembles the edge structure and boundary tags for the given triangles.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        lo: Point,
        hi: Point,
        no_slip: &[Side],
    ) -> Result<Mesh> {
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut incidence: Vec<u8> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid("triangle references a missing vertex"));
            }
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_ids.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[key.0], vertices[key.1]);
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                    });
                    incidence.push(0);
                    edges.len() - 1
                });
                incidence[e] = incidence[e].saturating_add(1);
                te[k] = e;
            }
            tri_edges.push(te);
        }
        let mut mesh = Mesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary_edges: Vec::new(),
            lo,
            hi,
            no_slip: Vec::new(),
        };
        let tol = 1e-10 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        for (e, &count) in incidence.iter().enumerate() {
            if count == 1 {
                let side = mesh.side_of(mesh.edges[e].midpoint, tol).ok_or_else(|| {
                    Error::invalid(format!(
                        "boundary edge {e} does not lie on the domain boundary"
                    ))
                })?;
                mesh.boundary_edges.push(BoundaryEdge {
                    edge: e,
                    side,
                    tag: BoundaryTag::StressFree,
                });
            }
        }
        mesh.set_no_slip(no_slip);
        Ok(mesh)
    }

    fn side_of(&self, p: Point, tol: f64) -> Option<Side> {
        if (p[0] - self.lo[0]).abs() <= tol {
            Some(Side::Left)
        } else if (p[0] - self.hi[0]).abs() <= tol {
            Some(Side::Right)
        } else if (p[1] - self.lo[1]).abs() <= tol {
            Some(Side::Bottom)
        } else if (p[1] - self.hi[1]).abs() <= tol {
            Some(Side::Top)
        } else {
            None
        }
    }

    /// Retags the boundary: edges on the listed sides become no-slip, all
    /// others stress-free.
    pub fn set_no_slip(&mut self, sides: &[Side]) {
        let mut uniq: Vec<Side> = Vec::new();
        for s in Side::ALL {
            if sides.contains(&s) {
                uniq.push(s);
            }
        }
        for be in &mut self.boundary_edges {
            be.tag = if uniq.contains(&be.side) {
                BoundaryTag::NoSlip
            } else {
                BoundaryTag::StressFree
            };
        }
        self.no_slip = uniq;
    }

    pub fn with_no_slip(mut self, sides: &[Side]) -> Self {
        self.set_no_slip(sides);
        self
    }

    pub fn no_slip_sides(&self) -> &[Side] {
        &self.no_slip
    }

    pub fn is_fully_no_slip(&self) -> bool {
        self.boundary_edges.iter().all(|b| b.tag == BoundaryTag::NoSlip)
    }

    pub fn has_no_slip(&self) -> bool {
        self.boundary_edges.iter().any(|b| b.tag == BoundaryTag::NoSlip)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.tri_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn bounds(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn domain_area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of scalar P1 degrees of freedom.
    pub fn num_p1_dofs(&self) -> usize {
        self.vertices.len()
    }

    /// Number of P2 Lagrange nodes (vertices followed by edge midpoints).
    pub fn num_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    /// Coordinates of P2 node `k`.
    pub fn p2_node(&self, k: usize) -> Point {
        let nv = self.vertices.len();
        if k < nv {
            self.vertices[k]
        } else {
            self.edges[k - nv].midpoint
        }
    }

    /// Local P2 nodes of triangle `t`: three vertices then the midpoints of
    /// edges (0,1), (1,2), (2,0).
    #[inline]
    pub fn p2_nodes_of(&self, t: usize) -> [usize; 6] {
        let nv = self.vertices.len();
        let [a, b, c] = self.triangles[t];
        let [e0, e1, e2] = self.tri_edges[t];
        [a, b, c, nv + e0, nv + e1, nv + e2]
    }

    #[inline]
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.edges.len())
            .map(|e| self.edge_length(e))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.edges.len())
            .map(|e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    /// Vertices lying on the closure of a boundary edge with the given tag.
    pub fn boundary_vertices(&self, tag: Option<BoundaryTag>) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for be in &self.boundary_edges {
            if tag.map_or(true, |t| t == be.tag) {
                for &v in &self.edges[be.edge].vertices {
                    flags[v] = true;
                }
            }
        }
        flags
    }

    /// P2 nodes lying on the closure of a no-slip boundary edge.
    pub fn no_slip_p2_nodes(&self) -> Vec<bool> {
        let nv = self.vertices.len();
        let mut flags = vec![false; self.num_p2_nodes()];
        for be in &self.boundary_edges {
            if be.tag == BoundaryTag::NoSlip {
                let [a, b] = self.edges[be.edge].vertices;
                flags[a] = true;
                flags[b] = true;
                flags[nv + be.edge] = true;
            }
        }
        flags
    }

    /// Checks the structural invariants: positive areas, edge incidence,
    /// boundary coverage and area partition.
    pub fn check_invariants(&self) -> Result<()> {
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let a = self.signed_area(t);
            if a <= 0.0 {
                return Err(Error::invalid(format!("triangle {t} has signed area {a}")));
            }
            total += a;
        }
        let mut incidence = vec![0usize; self.edges.len()];
        for te in &self.tri_edges {
            for &e in te {
                incidence[e] += 1;
            }
        }
        let boundary: HashSet<usize> = self.boundary_edges.iter().map(|b| b.edge).collect();
        for (e, &count) in incidence.iter().enumerate() {
            let expected = if boundary.contains(&e) { 1 } else { 2 };
            if count != expected {
                return Err(Error::invalid(format!(
                    "edge {e} has {count} incident triangles, expected {expected}"
                )));
            }
        }
        let perimeter: f64 = self.boundary_edges.iter().map(|b| self.edge_length(b.edge)).sum();
        let expected_perimeter = 2.0 * (self.hi[0] - self.lo[0] + self.hi[1] - self.lo[1]);
        if (perimeter - expected_perimeter).abs() > 1e-10 * expected_perimeter {
            return Err(Error::invalid(format!(
                "boundary length {perimeter} differs from perimeter {expected_perimeter}"
            )));
        }
        let area = self.domain_area();
        if (total - area).abs() > 1e-12 * area {
            return Err(Error::invalid(format!(
                "triangle areas sum to {total}, domain area is {area}"
            )));
        }
        Ok(())
    }
}

/// Newest-vertex bisection of every triangle touching the diffuse interface
/// (`|phi| < 1` at some vertex), repeated `levels` times. Returns the refined
/// mesh and `phi` prolongated by linear interpolation.
pub fn refine_interface_band_with_field(
    mesh: &Mesh,
    phi: &[f64],
    levels: usize,
) -> Result<(Mesh, Vec<f64>)> {
    if phi.len() != mesh.num_vertices() {
        return Err(Error::invalid("phi must be a P1 field on the mesh"));
    }
    let mut current = mesh.clone();
    let mut values = phi.to_vec();
    for _ in 0..levels {
        let marked: Vec<usize> = (0..current.num_triangles())
            .filter(|&t| current.triangles[t].iter().any(|&v| values[v].abs() < 1.0))
            .collect();
        if marked.is_empty() {
            break;
        }
        let (next, next_values) = bisect_marked(&current, &values, &marked)?;
        current = next;
        values = next_values;
    }
    Ok((current, values))
}

/// See [`refine_interface_band_with_field`].
pub fn refine_interface_band(mesh: &Mesh, phi: &[f64], levels: usize) -> Result<Mesh> {
    refine_interface_band_with_field(mesh, phi, levels).map(|(m, _)| m)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn bisect_marked(mesh: &Mesh, values: &[f64], marked: &[usize]) -> Result<(Mesh, Vec<f64>)> {
    let tris = &mesh.triangles;
    let mut split: HashSet<(usize, usize)> = marked
        .iter()
        .map(|&t| edge_key(tris[t][0], tris[t][1]))
        .collect();
    // closure: a triangle with any split edge must also split its refinement edge
    loop {
        let mut changed = false;
        for tri in tris {
            let refinement = edge_key(tri[0], tri[1]);
            if split.contains(&refinement) {
                continue;
            }
            if split.contains(&edge_key(tri[1], tri[2])) || split.contains(&edge_key(tri[2], tri[0]))
            {
                split.insert(refinement);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut new_values = values.to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::with_capacity(tris.len() * 2);
    let mut stack = Vec::new();
    for tri in tris {
        stack.push(*tri);
        while let Some(t) = stack.pop() {
            let [a, b, c] = t;
            let key = edge_key(a, b);
            if !split.contains(&key) {
                out.push(t);
                continue;
            }
            let m = *midpoints.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                let value = 0.5 * (new_values[a] + new_values[b]);
                new_values.push(value);
                vertices.len() - 1
            });
            // second child pushed first so the first child is emitted first
            stack.push([b, c, m]);
            stack.push([c, a, m]);
        }
    }
    let mesh = Mesh::from_parts(vertices, out, mesh.lo, mesh.hi, &mesh.no_slip)?;
    Ok((mesh, new_values))
}

/// Bucket grid over triangle bounding boxes for point location.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounds();
        let n = ((mesh.num_triangles() as f64).sqrt().ceil() as usize).max(1);
        let dims = [n, n];
        let cell = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        let mut buckets = vec![Vec::new(); n * n];
        let clampi = |v: f64, d: usize| -> usize { (v.max(0.0) as usize).min(d - 1) };
        for t in 0..mesh.num_triangles() {
            let pts = mesh.triangle_points(t);
            let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for p in &pts {
                xmin = xmin.min(p[0]);
                xmax = xmax.max(p[0]);
                ymin = ymin.min(p[1]);
                ymax = ymax.max(p[1]);
            }
            let i0 = clampi((xmin - lo[0]) / cell[0] - 1e-9, dims[0]);
            let i1 = clampi((xmax - lo[0]) / cell[0] + 1e-9, dims[0]);
            let j0 = clampi((ymin - lo[1]) / cell[1] - 1e-9, dims[1]);
            let j1 = clampi((ymax - lo[1]) / cell[1] + 1e-9, dims[1]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * dims[0] + i].push(t);
                }
            }
        }
        PointLocator {
            lo,
            cell,
            dims,
            buckets,
        }
    }

    /// Containing triangle and barycentric coordinates of `p`, if inside.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        let fi = (p[0] - self.lo[0]) / self.cell[0];
        let fj = (p[1] - self.lo[1]) / self.cell[1];
        if !(fi > -1e-9 && fj > -1e-9) {
            return None;
        }
        let i = (fi as usize).min(self.dims[0] - 1);
        let j = (fj as usize).min(self.dims[1] - 1);
        if fi > self.dims[0] as f64 + 1e-9 || fj > self.dims[1] as f64 + 1e-9 {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let bary = barycentric(&mesh.triangle_points(t), p);
            let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((t, bary));
            }
            if best.as_ref().map_or(true, |b| worst > b.2) {
                best = Some((t, bary, worst));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }

    /// Value of the P1 interpolant of `values` at `p`.
    pub fn eval_p1(&self, mesh: &Mesh, values: &[f64], p: Point) -> Option<f64> {
        self.locate(mesh, p).map(|(t, l)| {
            let tri = mesh.triangles()[t];
            l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]]
        })
    }
}

pub fn barycentric(pts: &[Point; 3], p: Point) -> [f64; 3] {
    let [p0, p1, p2] = pts;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}
