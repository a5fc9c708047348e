mod common;

use chb_core::solvers::{cg_solve, gmres_solve, projected_block_gs, GmresOptions, Identity, ObstacleOptions, ObstacleSystem};
use chb_core::sparse::CsrMatrix;
use common::{dense_solve, max_abs_diff, to_dense, DenseObstacle, NodeState};

fn from_dense(d: &[Vec<f64>]) -> CsrMatrix {
    let mut t = Vec::new();
    for (i, row) in d.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(d.len(), d[0].len(), &t).unwrap()
}

#[test]
fn cg_matches_dense_elimination() {
    // symmetric, strictly diagonally dominant
    let a = vec![
        vec![10.0, 1.2, -0.7, 0.0, 2.1],
        vec![1.2, 8.5, 0.3, -1.9, 0.0],
        vec![-0.7, 0.3, 6.0, 0.8, -1.1],
        vec![0.0, -1.9, 0.8, 7.25, 0.4],
        vec![2.1, 0.0, -1.1, 0.4, 9.0],
    ];
    let b = vec![1.0, -2.0, 0.5, 3.25, -0.75];
    let exact = dense_solve(a.clone(), b.clone()).unwrap();
    let (x, rep) = cg_solve(&from_dense(&a), &b, 1e-14, 100).unwrap();
    assert!(rep.converged);
    assert!(max_abs_diff(&x, &exact) < 1e-10);
}

#[test]
fn gmres_matches_dense_elimination_on_a_saddle_system() {
    let a = vec![
        vec![4.0, -1.0, 0.0, 0.5, 0.0, 0.0],
        vec![-1.0, 4.0, -1.0, 0.0, 0.5, 0.0],
        vec![0.0, -1.0, 4.0, 0.0, 0.0, 0.5],
        vec![0.5, 0.0, 0.0, 3.0, -1.0, 0.0],
        vec![0.0, 0.5, 0.0, -1.0, 3.0, -1.0],
        vec![0.0, 0.0, 0.5, 0.0, -1.0, 3.0],
    ];
    let b = [[1.0, -1.0, 0.0, 0.5, 0.0, 0.25], [0.0, 1.0, -1.0, 0.0, 2.0, -0.5]];
    let mut k = vec![vec![0.0; 8]; 8];
    for i in 0..6 {
        k[i][..6].copy_from_slice(&a[i]);
    }
    for (r, row) in b.iter().enumerate() {
        for j in 0..6 {
            k[6 + r][j] = row[j];
            k[j][6 + r] = row[j];
        }
    }
    let rhs = vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.0, 0.3, -0.2];
    let exact = dense_solve(k.clone(), rhs.clone()).unwrap();
    let opts = GmresOptions {
        tol: 1e-13,
        ..GmresOptions::default()
    };
    let (x, rep) = gmres_solve(&from_dense(&k), &rhs, &Identity(8), opts).unwrap();
    assert!(rep.converged);
    assert!(max_abs_diff(&x, &exact) < 1e-9);
}

/// Six nodes on [0, 1] with h = 0.2: lumped mass weights, a Neumann
/// Laplacian as mobility and a scaled one in the inequality rows.
fn one_dimensional_fixture() -> DenseObstacle {
    let n = 6;
    let h = 0.2;
    let mut lap = vec![vec![0.0; n]; n];
    for e in 0..n - 1 {
        for (i, j, v) in [(e, e, 1.0), (e + 1, e + 1, 1.0), (e, e + 1, -1.0), (e + 1, e, -1.0)] {
            lap[i][j] += v / h;
        }
    }
    let mass: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
    let dt = 0.05;
    let kappa = 0.02;
    let phi_old = [0.9, 1.0, 0.6, -0.2, -1.0, -0.95];
    let source = [2.0, 1.5, 0.5, 0.0, -1.0, -2.0];
    DenseObstacle {
        d1: mass.clone(),
        a: lap.iter().map(|r| r.iter().map(|v| dt * v).collect()).collect(),
        d2: mass.clone(),
        b: lap.iter().map(|r| r.iter().map(|v| kappa * v).collect()).collect(),
        f: (0..n).map(|i| mass[i] * (phi_old[i] + dt * source[i])).collect(),
        g: (0..n).map(|i| mass[i] * 0.5 * phi_old[i]).collect(),
        lower: -1.0,
        upper: 1.0,
    }
}

#[test]
fn projected_gauss_seidel_matches_full_enumeration_in_1d() {
    let fx = one_dimensional_fixture();
    let all = [NodeState::Free, NodeState::Lower, NodeState::Upper];
    let found = fx.enumerate(&all);
    assert_eq!(found.len(), 1, "the obstacle problem has a unique solution");
    let (states, u_ref, w_ref) = &found[0];
    assert!(states.contains(&NodeState::Upper) && states.contains(&NodeState::Lower));

    let a = from_dense(&fx.a);
    let b = from_dense(&fx.b);
    let sys = ObstacleSystem {
        u_diag: &fx.d1,
        mobility: &a,
        w_diag: &fx.d2,
        laplace: &b,
        rhs_u: &fx.f,
        rhs_w: &fx.g,
        lower: -1.0,
        upper: 1.0,
    };
    let opts = ObstacleOptions {
        tol: 1e-12,
        ..ObstacleOptions::default()
    };
    let sol = projected_block_gs(&sys, &[0.0; 6], &[0.0; 6], opts).unwrap();
    assert!(sol.report.converged);
    assert!(max_abs_diff(&sol.u, u_ref) < 1e-8);
    assert!(max_abs_diff(&sol.w, w_ref) < 1e-8);
    assert!(sol.u.iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(sys.complementarity_residual(&sol.u, &sol.w) < 1e-10);
}

#[test]
fn inactive_constraints_reduce_to_the_linear_solve() {
    let mut fx = one_dimensional_fixture();
    for (f, d) in fx.f.iter_mut().zip(&fx.d1) {
        *f = 0.1 * d;
    }
    let states = [NodeState::Free; 6];
    let (u_lin, w_lin) = fx.solve_assignment(&states).unwrap();
    let a = from_dense(&fx.a);
    let b = from_dense(&fx.b);
    let sys = ObstacleSystem {
        u_diag: &fx.d1,
        mobility: &a,
        w_diag: &fx.d2,
        laplace: &b,
        rhs_u: &fx.f,
        rhs_w: &fx.g,
        lower: -1.0,
        upper: 1.0,
    };
    let sol = projected_block_gs(&sys, &[0.0; 6], &[0.0; 6], ObstacleOptions::default()).unwrap();
    assert!(sol.report.converged);
    assert_eq!(sol.report.active_set_size, 0);
    assert!(max_abs_diff(&sol.u, &u_lin) < 1e-8);
    assert!(max_abs_diff(&sol.w, &w_lin) < 1e-8);
}

#[test]
fn dense_helpers_agree_with_sparse_products() {
    let fx = one_dimensional_fixture();
    let a = from_dense(&fx.a);
    assert_eq!(to_dense(&a), fx.a);
}
