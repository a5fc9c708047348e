// Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use chb_core::sparse::CsrMatrix;

/// Dense Gaussian elimination with partial pivoting. Returns `None` when a
/// pivot falls below `1e-13` times the largest entry of the matrix.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn to_dense(m: &CsrMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; m.ncols()]; m.nrows()];
    for (i, row) in d.iter_mut().enumerate() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            row[j] += v;
        }
    }
    d
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Status of one node in an active-set assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Free,
    Lower,
    Upper,
}

/// Dense data of the box-constrained coupled system
///
/// ```text
///   d1_i u_i + (A w)_i = f_i                  every node
///   r_i = (B u)_i - d2_i w_i - g_i            r = 0 free, r >= 0 at lower, r <= 0 at upper
/// ```
pub struct DenseObstacle {
    pub d1: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub d2: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl DenseObstacle {
    /// Solves the linear system of one assignment; `None` if it is singular.
    pub fn solve_assignment(&self, states: &[NodeState]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.f.len();
        let mut u = vec![0.0; n];
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == NodeState::Free).collect();
        for i in 0..n {
            match states[i] {
                NodeState::Lower => u[i] = self.lower,
                NodeState::Upper => u[i] = self.upper,
                NodeState::Free => {}
            }
        }
        // unknowns: u at free nodes, then w at every node
        let m = free.len() + n;
        let mut mat = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for i in 0..n {
            rhs[i] = self.f[i];
            match free.iter().position(|&k| k == i) {
                Some(c) => mat[i][c] = self.d1[i],
                None => rhs[i] -= self.d1[i] * u[i],
            }
            for j in 0..n {
                mat[i][free.len() + j] = self.a[i][j];
            }
        }
        for (row, &i) in free.iter().enumerate() {
            let r = n + row;
            rhs[r] = self.g[i];
            for j in 0..n {
                match free.iter().position(|&k| k == j) {
                    Some(c) => mat[r][c] += self.b[i][j],
                    None => rhs[r] -= self.b[i][j] * u[j],
                }
            }
            mat[r][free.len() + i] -= self.d2[i];
        }
        let x = dense_solve(mat, rhs)?;
        for (c, &i) in free.iter().enumerate() {
            u[i] = x[c];
        }
        Some((u, x[free.len()..].to_vec()))
    }

    /// Whether `(u, w)` satisfies the box and sign conditions to `tol`.
    pub fn is_kkt(&self, states: &[NodeState], u: &[f64], w: &[f64], tol: f64) -> bool {
        let n = self.f.len();
        (0..n).all(|i| {
            let r: f64 = (0..n).map(|j| self.b[i][j] * u[j]).sum::<f64>() - self.d2[i] * w[i] - self.g[i];
            match states[i] {
                NodeState::Free => u[i] > self.lower + tol && u[i] < self.upper - tol,
                NodeState::Lower => r >= -tol,
                NodeState::Upper => r <= tol,
            }
        })
    }

    /// Enumerates every assignment with node states drawn from `choices` and
    /// returns all KKT points found.
    pub fn enumerate(&self, choices: &[NodeState]) -> Vec<(Vec<NodeState>, Vec<f64>, Vec<f64>)> {
        let n = self.f.len();
        let k = choices.len();
        let total = k.pow(n as u32);
        let mut found = Vec::new();
        let mut states = vec![choices[0]; n];
        for code in 0..total {
            let mut c = code;
            for s in states.iter_mut() {
                *s = choices[c % k];
                c /= k;
            }
            if let Some((u, w)) = self.solve_assignment(&states) {
                if self.is_kkt(&states, &u, &w, 1e-12) {
                    found.push((states.clone(), u, w));
                }
            }
        }
        found
    }
}
