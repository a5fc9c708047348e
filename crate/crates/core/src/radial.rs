//! Radially symmetric sharp-interface reference model.
//!
//! A disk tumour of radius `R` in a disk domain of radius `R_dom`: the
//! nutrient solves `sigma'' + sigma'/r = (C/D) sigma` inside the tumour and is
//! harmonic outside, with `sigma'(0) = 0` and `sigma(R_dom) = sigma_b`. The
//! interface moves with the normal velocity obtained from the divergence law,
//! `V = (1/R) int_0^R alpha (P sigma - A) r dr`.

use crate::error::{Error, Result};
use crate::params::Parameters;

/// Nutrient profile on a radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Max-norm residual of the discrete equations after the solve.
    pub residual: f64,
}

impl RadialProfile {
    /// Piecewise linear interpolation; constant beyond the last node.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= 0.0 {
            return self.sigma[0];
        }
        if r >= self.r[n - 1] {
            return self.sigma[n - 1];
        }
        let k = self.r.partition_point(|&x| x <= r).clamp(1, n - 1);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let s = (r - r0) / (r1 - r0);
        self.sigma[k - 1] * (1.0 - s) + self.sigma[k] * s
    }

    pub fn center(&self) -> f64 {
        self.sigma[0]
    }
}

/// Grid on `[0, r_dom]` with `n` intervals, uniform on `[0, r_mid]` and on
/// `[r_mid, r_dom]`, with `r_mid` a node.
fn split_grid(r_mid: f64, r_dom: f64, n: usize) -> Vec<f64> {
    let inner = ((n as f64 * r_mid / r_dom).round() as usize).clamp(2, n - 2);
    let outer = n - inner;
    let mut r: Vec<f64> = (0..=inner).map(|i| r_mid * i as f64 / inner as f64).collect();
    r.extend((1..=outer).map(|i| r_mid + (r_dom - r_mid) * i as f64 / outer as f64));
    r
}

/// Sharp-interface nutrient for a tumour of radius `radius` (reaction
/// coefficient `C/D` inside, zero outside).
pub fn radial_nutrient(radius: f64, params: &Parameters, r_dom: f64, n_grid: usize) -> Result<RadialProfile> {
    if !(radius > 0.0 && radius < r_dom) {
        return Err(Error::invalid(format!("radius {radius} must lie in (0, {r_dom})")));
    }
    if n_grid < 64 {
        return Err(Error::invalid("radial grid needs at least 64 intervals"));
    }
    if radius < 1e-6 * r_dom {
        // below grid resolution: the tumour does not consume anything visible
        let r: Vec<f64> = (0..=n_grid).map(|i| r_dom * i as f64 / n_grid as f64).collect();
        let sigma = vec![params.sigma_b; r.len()];
        return Ok(RadialProfile { r, sigma, residual: 0.0 });
    }
    let k = params.consumption / params.diffusivity;
    let r = split_grid(radius, r_dom, n_grid);
    // int kappa(s) s ds over [a, b], kappa = k on [0, radius]
    let moment = |a: f64, b: f64| {
        let hi = b.min(radius);
        if hi <= a {
            0.0
        } else {
            0.5 * k * (hi * hi - a * a)
        }
    };
    solve_radial(&r, &moment, params.sigma_b)
}

/// Nutrient with a general radial reaction coefficient `kappa(r)` (already
/// divided by D), e.g. `C (phi(r) + 1) / (2 D)` for a diffuse interface.
/// `kappa` is integrated with 8-point Gauss-Legendre per half cell on a
/// uniform grid of `n_grid` intervals.
pub fn radial_nutrient_with(
    kappa: &dyn Fn(f64) -> f64,
    sigma_b: f64,
    r_dom: f64,
    n_grid: usize,
) -> Result<RadialProfile> {
    if !(r_dom > 0.0) || n_grid < 64 {
        return Err(Error::invalid("radial grid needs r_dom > 0 and at least 64 intervals"));
    }
    let r: Vec<f64> = (0..=n_grid).map(|i| r_dom * i as f64 / n_grid as f64).collect();
    let moment = |a: f64, b: f64| gauss_legendre(&|s| kappa(s) * s, a, b);
    solve_radial(&r, &moment, sigma_b)
}

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (x, w) in X.iter().zip(W) {
        s += w * (f(c - h * x) + f(c + h * x));
    }
    s * h
}

/// Vertex-centred finite volumes for `-(r sigma')' + kappa r sigma = 0` with
/// `sigma'(0) = 0`, `sigma(r_N) = sigma_b`. `moment(a, b)` is
/// `int_a^b kappa(s) s ds`.
fn solve_radial(r: &[f64], moment: &dyn Fn(f64, f64) -> f64, sigma_b: f64) -> Result<RadialProfile> {
    let n = r.len() - 1;
    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { 0.5 * (r[i - 1] + r[i]) };
        let right = 0.5 * (r[i] + r[i + 1]);
        let cr = right / (r[i + 1] - r[i]);
        let cl = if i == 0 { 0.0 } else { left / (r[i] - r[i - 1]) };
        lower[i] = -cl;
        upper[i] = -cr;
        diag[i] = cl + cr + moment(left, r[i]) + moment(r[i], right);
    }
    diag[n] = 1.0;
    rhs[n] = sigma_b;
    let sigma = thomas(&lower, &diag, &upper, &rhs)?;
    let mut residual = 0.0f64;
    for i in 0..=n {
        let mut v = diag[i] * sigma[i] - rhs[i];
        if i > 0 {
            v += lower[i] * sigma[i - 1];
        }
        if i < n {
            v += upper[i] * sigma[i + 1];
        }
        residual = residual.max(v.abs());
    }
    Ok(RadialProfile {
        r: r.to_vec(),
        sigma,
        residual,
    })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::SingularOperator("radial system".into()));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 {
            return Err(Error::SingularOperator("radial system".into()));
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Interface velocity `(1/R) int_0^R alpha (P sigma - A) r dr` by the
/// trapezoidal rule on the profile's nodes in `[0, R]`.
pub fn radial_velocity(radius: f64, profile: &RadialProfile, params: &Parameters) -> f64 {
    let g = |s: f64| params.alpha * (params.proliferation * s - params.apoptosis);
    let mut integral = 0.0;
    for w in profile.r.windows(2).zip(profile.sigma.windows(2)) {
        let ([r0, r1], [s0, s1]) = (w.0, w.1) else { unreachable!() };
        if *r0 >= radius {
            break;
        }
        let r1c = r1.min(radius);
        let s1c = if *r1 <= radius { *s1 } else { s0 + (s1 - s0) * (r1c - r0) / (r1 - r0) };
        integral += 0.5 * (r1c - r0) * (g(*s0) * r0 + g(s1c) * r1c);
    }
    integral / radius
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSample {
    pub t: f64,
    pub radius: f64,
    pub velocity: f64,
    pub sigma_center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialStatus {
    Completed,
    /// The radius left `(0, R_dom)`; the series ends at the last valid step.
    LeftDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSeries {
    pub samples: Vec<RadialSample>,
    pub status: RadialStatus,
}

/// Integrates `R' = V(R)` with classical RK4, re-solving the nutrient at
/// every stage. Uses `params.radial_domain` and `params.radial_grid`.
pub fn evolve_radius(r0: f64, params: &Parameters, dt: f64, t_end: f64) -> Result<RadialSeries> {
    let r_dom = params.radial_domain;
    let n = params.radial_grid;
    if !(r0 > 0.0 && r0 < r_dom) {
        return Err(Error::invalid(format!("initial radius {r0} must lie in (0, {r_dom})")));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::invalid("radial time step must be positive and t_end non-negative"));
    }
    let state = |radius: f64| -> Result<(f64, f64)> {
        let prof = radial_nutrient(radius, params, r_dom, n)?;
        Ok((radial_velocity(radius, &prof, params), prof.center()))
    };
    let inside = |x: f64| x > 0.0 && x < r_dom;
    let mut samples = Vec::new();
    let (v0, s0) = state(r0)?;
    samples.push(RadialSample {
        t: 0.0,
        radius: r0,
        velocity: v0,
        sigma_center: s0,
    });
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut radius = r0;
    let mut k1 = v0;
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        let h = (t_end - t_prev).min(dt);
        let mid = radius + 0.5 * h * k1;
        if !inside(mid) {
            return Ok(RadialSeries { samples, status: RadialStatus::LeftDomain });
        }
        let k2 = state(mid)?.0;
        let mid2 = radius + 0.5 * h * k2;
        if !inside(mid2) {
            return Ok(RadialSeries { samples, status: RadialStatus::LeftDomain });
        }
        let k3 = state(mid2)?.0;
        let end = radius + h * k3;
        if !inside(end) {
            return Ok(RadialSeries { samples, status: RadialStatus::LeftDomain });
        }
        let k4 = state(end)?.0;
        let next = radius + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !inside(next) {
            return Ok(RadialSeries { samples, status: RadialStatus::LeftDomain });
        }
        radius = next;
        let (v, s) = state(radius)?;
        k1 = v;
        samples.push(RadialSample {
            t: t_prev + h,
            radius,
            velocity: v,
            sigma_center: s,
        });
    }
    Ok(RadialSeries {
        samples,
        status: RadialStatus::Completed,
    })
}
