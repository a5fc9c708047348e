//! One time step of the Cahn-Hilliard variational inequality with the double
//! obstacle potential.
//!
//! With lumped mass `M`, mobility stiffness `K_m` and unit stiffness `K`, the
//! step solves for `phi` in `[-1, 1]` and `mu`:
//!
//! ```text
//!   M phi + dt K_m mu = M phi_old - dt (v . grad phi_old, l) + dt S
//!   beta eps K phi - M mu - M ((beta/eps) phi_old + chi_phi sigma_old)  = 0 / <= 0 / >= 0
//! ```
//!
//! where the second relation holds with equality at free nodes, `<= 0` where
//! `phi = 1` and `>= 0` where `phi = -1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::fem::{assemble_convection_load, assemble_stiffness_with, lumped_mass_diagonal, p1_pattern, FeFunction, Space};
use crate::mesh::Mesh;
use crate::params::Parameters;
use crate::solvers::{projected_block_gs, ObstacleOptions, ObstacleSystem, SolveReport};
use crate::sparse::{CsrMatrix, ElementPattern};

/// Lower bound applied to elementwise mobilities.
pub const MOBILITY_FLOOR: f64 = 1e-9;

/// Mobility law `m(phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityKind {
    /// `m0`
    Constant { m0: f64 },
    /// `eps * m0`
    ScaledConstant { m0: f64 },
    /// `m0 (1 + phi)^2 / 2`, zero in the healthy phase.
    OneSidedDegenerate { m0: f64 },
}

impl MobilityKind {
    pub fn m0(&self) -> f64 {
        match *self {
            MobilityKind::Constant { m0 } | MobilityKind::ScaledConstant { m0 } | MobilityKind::OneSidedDegenerate { m0 } => m0,
        }
    }
}

/// Evaluates the mobility law at `phi`. Values below -1 are treated as -1 by
/// the degenerate law; nothing is clamped from above.
pub fn mobility_eval(phi: f64, kind: MobilityKind, epsilon: f64) -> f64 {
    match kind {
        MobilityKind::Constant { m0 } => m0,
        MobilityKind::ScaledConstant { m0 } => epsilon * m0,
        MobilityKind::OneSidedDegenerate { m0 } => {
            let s = 1.0 + phi.max(-1.0);
            0.5 * m0 * s * s
        }
    }
}

/// Elementwise mobility: mean of the three vertex values, floored.
pub fn mobility_field(mesh: &Mesh, phi: &[f64], kind: MobilityKind, epsilon: f64) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| {
            let m = t.iter().map(|&v| mobility_eval(phi[v], kind, epsilon)).sum::<f64>() / 3.0;
            m.max(MOBILITY_FLOOR)
        })
        .collect()
}

/// Lumped phase source `(1/2 (rho_s - alpha phi)(P sigma - A)(phi + 1), l_i)_h`.
pub fn ch_source(
    mesh: &Mesh,
    phi_old: &FeFunction,
    sigma_old: &FeFunction,
    rho_s: f64,
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
        .map(|((m, &phi), &sigma)| m * source_density(phi, sigma, rho_s, alpha, proliferation, apoptosis))
        .collect())
}

#[inline]
fn source_density(phi: f64, sigma: f64, rho_s: f64, alpha: f64, proliferation: f64, apoptosis: f64) -> f64 {
    0.5 * (rho_s - alpha * phi) * (proliferation * sigma - apoptosis) * (phi + 1.0)
}

#[derive(Debug, Clone)]
pub struct ChStepResult {
    pub phi: FeFunction,
    pub mu: FeFunction,
    pub report: SolveReport,
    /// Uniform shift applied to the free nodes to close the discrete mass
    /// balance exactly; of the order of the solver tolerance.
    pub mass_correction: f64,
    /// Max-norm residual of the equality rows at the returned pair.
    pub equality_residual: f64,
    /// Complementarity residual of the inequality rows at the returned pair.
    pub complementarity: f64,
}

/// Mesh-dependent operators reused across steps.
pub struct ChContext {
    pattern: ElementPattern,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
}

impl ChContext {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let pattern = p1_pattern(mesh);
        let stiffness = assemble_stiffness_with(&pattern, mesh, &vec![1.0; mesh.num_triangles()])?;
        Ok(ChContext {
            pattern,
            mass: lumped_mass_diagonal(mesh),
            stiffness,
        })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Unit-coefficient stiffness matrix.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }
}

/// One step of the phase-field equations, starting the iteration from
/// `mu = 0`.
pub fn step_cahn_hilliard(
    mesh: &Mesh,
    phi_old: &FeFunction,
    sigma_old: &FeFunction,
    v_new: &FeFunction,
    params: &Parameters,
    dt: f64,
) -> Result<ChStepResult> {
    let ctx = ChContext::new(mesh)?;
    step_cahn_hilliard_with(&ctx, mesh, phi_old, None, sigma_old, v_new, params, dt)
}

/// [`step_cahn_hilliard`] with cached operators and an optional initial
/// chemical potential (typically the previous step's).
#[allow(clippy::too_many_arguments)]
pub fn step_cahn_hilliard_with(
    ctx: &ChContext,
    mesh: &Mesh,
    phi_old: &FeFunction,
    mu_guess: Option<&FeFunction>,
    sigma_old: &FeFunction,
    v_new: &FeFunction,
    params: &Parameters,
    dt: f64,
) -> Result<ChStepResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    phi_old.expect(Space::P1Scalar, mesh, "phi_old")?;
    sigma_old.expect(Space::P1Scalar, mesh, "sigma_old")?;
    v_new.expect(Space::P2Vector, mesh, "velocity")?;
    let n = mesh.num_p1_dofs();
    let phi0 = phi_old.coeffs();
    let sigma = sigma_old.coeffs();
    let mass = &ctx.mass;

    let mobility = mobility_field(mesh, phi0, params.mobility, params.epsilon);
    let mut a = assemble_stiffness_with(&ctx.pattern, mesh, &mobility)?;
    a.scale(dt);
    let mut b = ctx.stiffness.clone();
    b.scale(params.beta * params.epsilon);

    let convection = assemble_convection_load(mesh, v_new, phi_old)?;
    let mut rhs_phi = vec![0.0; n];
    let mut rhs_mu = vec![0.0; n];
    for i in 0..n {
        let s = source_density(
            phi0[i],
            sigma[i],
            params.rho_s,
            params.alpha,
            params.proliferation,
            params.apoptosis,
        );
        rhs_phi[i] = mass[i] * phi0[i] - dt * convection[i] + dt * mass[i] * s;
        rhs_mu[i] = mass[i] * (params.beta / params.epsilon * phi0[i] + params.chi_phi * sigma[i]);
    }

    let sys = ObstacleSystem {
        u_diag: mass,
        mobility: &a,
        w_diag: mass,
        laplace: &b,
        rhs_u: &rhs_phi,
        rhs_w: &rhs_mu,
        lower: -1.0,
        upper: 1.0,
    };
    let mu0 = match mu_guess {
        Some(m) if m.is_on(mesh) && m.space() == Space::P1Scalar => m.coeffs().to_vec(),
        _ => vec![0.0; n],
    };
    let sol = projected_block_gs(&sys, phi0, &mu0, params.vi)?;
    if !sol.report.converged {
        return Err(Error::NotConverged {
            stage: Stage::CahnHilliard,
            report: sol.report,
        });
    }
    let mut phi = sol.u;
    let mass_correction = close_mass_balance(mass, &rhs_phi, &mut phi);
    let equality_residual = sys
        .equality_residual(&phi, &sol.w)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let complementarity = sys.complementarity_residual(&phi, &sol.w);
    Ok(ChStepResult {
        equality_residual,
        complementarity,
        phi: FeFunction::new(Space::P1Scalar, mesh, phi)?,
        mu: FeFunction::new(Space::P1Scalar, mesh, sol.w)?,
        report: sol.report,
        mass_correction,
    })
}

/// Summing the equality rows gives `sum M phi = sum rhs` exactly, because the
/// mobility stiffness annihilates constants. The iterative solve leaves a
/// defect of the order of its tolerance; it is removed by a uniform shift of
/// the free nodes, which keeps them inside the box unless they sit within the
/// shift of a bound (then they are clamped and the shift re-evaluated).
fn close_mass_balance(mass: &[f64], rhs: &[f64], phi: &mut [f64]) -> f64 {
    let target: f64 = rhs.iter().sum();
    let mut applied = 0.0;
    for _ in 0..4 {
        let current: f64 = mass.iter().zip(phi.iter()).map(|(m, p)| m * p).sum();
        let defect = target - current;
        let free_mass: f64 = mass
            .iter()
            .zip(phi.iter())
            .filter(|(_, p)| p.abs() < 1.0)
            .map(|(m, _)| m)
            .sum();
        if defect == 0.0 || free_mass == 0.0 {
            break;
        }
        let shift = defect / free_mass;
        for p in phi.iter_mut().filter(|p| p.abs() < 1.0) {
            *p = (*p + shift).clamp(-1.0, 1.0);
        }
        applied += shift;
        if shift.abs() < 1e-300 {
            break;
        }
    }
    applied
}

/// Tests the equality rows and the inequality rows of a step result against
/// the data that produced it: returns `(max |equality residual|,
/// complementarity residual)`.
#[allow(clippy::too_many_arguments)]
pub fn ch_step_residuals(
    ctx: &ChContext,
    mesh: &Mesh,
    phi_old: &FeFunction,
    sigma_old: &FeFunction,
    v_new: &FeFunction,
    params: &Parameters,
    dt: f64,
    result: &ChStepResult,
) -> Result<(f64, f64)> {
    let n = mesh.num_p1_dofs();
    let phi0 = phi_old.coeffs();
    let sigma = sigma_old.coeffs();
    let mobility = mobility_field(mesh, phi0, params.mobility, params.epsilon);
    let mut a = assemble_stiffness_with(&ctx.pattern, mesh, &mobility)?;
    a.scale(dt);
    let mut b = ctx.stiffness.clone();
    b.scale(params.beta * params.epsilon);
    let convection = assemble_convection_load(mesh, v_new, phi_old)?;
    let mut rhs_phi = vec![0.0; n];
    let mut rhs_mu = vec![0.0; n];
    for i in 0..n {
        let s = source_density(phi0[i], sigma[i], params.rho_s, params.alpha, params.proliferation, params.apoptosis);
        rhs_phi[i] = ctx.mass[i] * phi0[i] - dt * convection[i] + dt * ctx.mass[i] * s;
        rhs_mu[i] = ctx.mass[i] * (params.beta / params.epsilon * phi0[i] + params.chi_phi * sigma[i]);
    }
    let sys = ObstacleSystem {
        u_diag: &ctx.mass,
        mobility: &a,
        w_diag: &ctx.mass,
        laplace: &b,
        rhs_u: &rhs_phi,
        rhs_w: &rhs_mu,
        lower: -1.0,
        upper: 1.0,
    };
    let (phi, mu) = (result.phi.coeffs(), result.mu.coeffs());
    let eq = sys
        .equality_residual(phi, mu)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((eq, sys.complementarity_residual(phi, mu)))
}

/// Default solver options used by the step.
pub fn default_vi_options() -> ObstacleOptions {
    ObstacleOptions::default()
}
