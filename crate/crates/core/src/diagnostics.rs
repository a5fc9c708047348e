//! Scalar diagnostics of a state: mass, energy, extrema, interface radius and
//! its angular Fourier modes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::flow::max_speed;
use crate::mesh::{Mesh, PointLocator};
use crate::sparse::CsrMatrix;

/// Highest angular wavenumber reported.
pub const MAX_MODE: usize = 12;
/// Number of rays used to sample the interface.
pub const NUM_RAYS: usize = 256;

/// Ginzburg-Landau energy with the smooth part `(1 - phi^2)/2` of the
/// obstacle potential:
/// `(beta/eps) sum_i M_i (1 - phi_i^2)/2 + (beta eps / 2) phi^T K phi`.
///
/// Values outside [-1, 1] (beyond 1e-12) make the obstacle part infinite and
/// are rejected.
pub fn energy(mass: &[f64], stiffness: &CsrMatrix, phi: &[f64], beta: f64, epsilon: f64) -> Result<f64> {
    if let Some(v) = phi.iter().find(|v| v.abs() > 1.0 + 1e-12) {
        return Err(Error::invalid(format!("phase field value {v} lies outside [-1, 1]")));
    }
    let bulk: f64 = mass.iter().zip(phi).map(|(m, p)| m * 0.5 * (1.0 - p * p)).sum();
    let kphi = stiffness.mul_vec(phi);
    let grad: f64 = phi.iter().zip(&kphi).map(|(a, b)| a * b).sum();
    Ok(beta / epsilon * bulk + 0.5 * beta * epsilon * grad)
}

/// Radius of the first sign change of `phi` along each ray from the origin,
/// sampled every `step` and located by linear interpolation between samples.
/// `None` marks rays without a sign change inside the domain.
pub fn zero_level_radius(mesh: &Mesh, locator: &PointLocator, phi: &[f64], angles: &[f64], step: f64) -> Vec<Option<f64>> {
    angles
        .iter()
        .map(|&theta| {
            let dir = [theta.cos(), theta.sin()];
            let at = |s: f64| locator.eval_p1(mesh, phi, [s * dir[0], s * dir[1]]);
            let mut s_prev = 0.0;
            let mut f_prev = at(0.0)?;
            let mut k = 1;
            loop {
                let s = k as f64 * step;
                let f = at(s)?;
                if (f_prev > 0.0) != (f > 0.0) {
                    let r = if f_prev == f { s } else { s_prev + (s - s_prev) * f_prev / (f_prev - f) };
                    return Some(r);
                }
                s_prev = s;
                f_prev = f;
                k += 1;
            }
        })
        .collect()
}

/// `n` equispaced angles starting at `offset`.
pub fn uniform_angles(n: usize, offset: f64) -> Vec<f64> {
    (0..n).map(|j| offset + 2.0 * PI * j as f64 / n as f64).collect()
}

/// Fourier amplitudes of uniformly sampled `r(theta)` for wavenumbers
/// `0..=kmax`: `a_0 = |mean|`, `a_k = 2 |c_k|` with
/// `c_k = (1/N) sum_j r_j exp(-i k theta_j)`.
pub fn mode_amplitudes(samples: &[f64], kmax: usize) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 64 {
        return Err(Error::invalid(format!("mode amplitudes need at least 64 samples, got {n}")));
    }
    if 2 * kmax >= n {
        return Err(Error::invalid("wavenumber too high for the number of samples"));
    }
    Ok((0..=kmax)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, r) in samples.iter().enumerate() {
                let arg = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                re += r * arg.cos();
                im -= r * arg.sin();
            }
            let c = re.hypot(im) / n as f64;
            if k == 0 {
                c
            } else {
                2.0 * c
            }
        })
        .collect())
}

/// One row of the diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `(phi, 1)_h`
    pub mass: f64,
    /// `((phi + 1)/2, 1)_h`
    pub tumour_area: f64,
    pub energy: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub v_max: f64,
    /// Mean of the valid interface radius samples (NaN if there are none).
    pub mean_radius: f64,
    /// Amplitudes `a_0..a_12` (NaN when some ray has no interface).
    pub modes: [f64; MAX_MODE + 1],
    pub flow_iters: usize,
    pub vi_iters: usize,
    pub nutrient_iters: usize,
}

impl DiagnosticsRecord {
    pub const HEADER: [&'static str; 26] = [
        "t", "mass", "tumour_area", "energy", "phi_min", "phi_max", "sigma_min", "sigma_max", "v_max",
        "mean_radius", "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9", "a10", "a11", "a12",
        "flow_iters", "vi_iters", "nutrient_iters",
    ];
}

/// Iteration counts of the three stages of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageIterations {
    pub flow: usize,
    pub vi: usize,
    pub nutrient: usize,
}

/// Evaluates all diagnostics. `mass` and `stiffness` are the lumped mass and
/// unit stiffness of `mesh`.
#[allow(clippy::too_many_arguments)]
pub fn compute_diagnostics(
    mesh: &Mesh,
    locator: &PointLocator,
    mass: &[f64],
    stiffness: &CsrMatrix,
    t: f64,
    phi: &FeFunction,
    sigma: &FeFunction,
    v: &FeFunction,
    beta: f64,
    epsilon: f64,
    iters: StageIterations,
) -> Result<DiagnosticsRecord> {
    let ph = phi.coeffs();
    let s = sigma.coeffs();
    let total_mass: f64 = mass.iter().zip(ph).map(|(m, p)| m * p).sum();
    let area: f64 = mass.iter().zip(ph).map(|(m, p)| m * 0.5 * (p + 1.0)).sum();
    let min = |x: &[f64]| x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |x: &[f64]| x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let angles = uniform_angles(NUM_RAYS, 0.0);
    let radii = zero_level_radius(mesh, locator, ph, &angles, 0.5 * mesh.min_edge_length());
    let valid: Vec<f64> = radii.iter().flatten().copied().collect();
    let mean_radius = if valid.is_empty() {
        f64::NAN
    } else {
        valid.iter().sum::<f64>() / valid.len() as f64
    };
    let mut modes = [f64::NAN; MAX_MODE + 1];
    if valid.len() == radii.len() {
        modes.copy_from_slice(&mode_amplitudes(&valid, MAX_MODE)?);
    }
    Ok(DiagnosticsRecord {
        t,
        mass: total_mass,
        tumour_area: area,
        energy: energy(mass, stiffness, ph, beta, epsilon)?,
        phi_min: min(ph),
        phi_max: max(ph),
        sigma_min: min(s),
        sigma_max: max(s),
        v_max: max_speed(v),
        mean_radius,
        modes,
        flow_iters: iters.flow,
        vi_iters: iters.vi,
        nutrient_iters: iters.nutrient,
    })
}
