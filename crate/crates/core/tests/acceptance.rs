//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The long simulations run at the desk-scale defaults (64 x 64 grid,
//! eps = 0.08, dt = 1e-3) unless a criterion says otherwise; the whole suite
//! takes tens of minutes on one core. Progress goes to stderr.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use chb_core::cahn_hilliard::{step_cahn_hilliard, MobilityKind};
use chb_core::diagnostics::{mode_amplitudes, uniform_angles, zero_level_radius};
use chb_core::fem::{assemble_p2_vector_mass, interpolate_nodal, interpolate_p2_vector, quadrature_degree5, FeFunction, Space};
use chb_core::flow::{solve_brinkman, BrinkmanProblem, FlowContext, FlowOptions};
use chb_core::mesh::{build_uniform_mesh, Mesh, Point, PointLocator, Side};
use chb_core::nutrient::solve_nutrient_with_boundary;
use chb_core::radial::{evolve_radius, radial_nutrient_with, RadialStatus};
use chb_core::sim::{phase_profile, FlowMode, Profile};
use chb_core::solvers::GmresOptions;
use chb_core::{Parameters, Simulation};
use common::{max_abs_diff, DenseObstacle, NodeState};

/// Residual checks collected from every simulated step of the suite.
#[derive(Default)]
struct Watch {
    steps: usize,
    /// Largest `|phi| - 1` seen (must stay <= 0).
    bound_excess: f64,
    complementarity: f64,
    divergence: f64,
}

impl Watch {
    fn observe(&mut self, sim: &Simulation) {
        let r = sim.last_report();
        self.steps += 1;
        for &v in sim.state().phi.coeffs() {
            self.bound_excess = self.bound_excess.max(v.abs() - 1.0);
        }
        self.complementarity = self.complementarity.max(r.vi_complementarity);
        self.divergence = self.divergence.max(r.divergence_defect.abs());
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn desk(overrides: impl FnOnce(&mut Parameters)) -> Parameters {
    let mut p = Parameters::default();
    overrides(&mut p);
    p
}

/// Advances `steps` times, feeding every step to `watch` and `each`.
fn drive(sim: &mut Simulation, steps: usize, watch: &mut Watch, mut each: impl FnMut(&Simulation)) {
    for _ in 0..steps {
        sim.advance().expect("time step failed");
        watch.observe(sim);
        each(sim);
    }
}

fn radii(sim: &Simulation, angles: &[f64]) -> Vec<f64> {
    let locator = PointLocator::new(sim.mesh());
    zero_level_radius(sim.mesh(), &locator, sim.state().phi.coeffs(), angles, 0.5 * sim.mesh().min_edge_length())
        .into_iter()
        .map(|r| r.expect("every ray crosses the interface"))
        .collect()
}

const MOBILITIES: [MobilityKind; 3] = [
    MobilityKind::Constant { m0: 1.0 },
    MobilityKind::ScaledConstant { m0: 1.0 },
    MobilityKind::OneSidedDegenerate { m0: 1.0 },
];

/// Phase field only (frozen flow), no proliferation or apoptosis.
fn isolated_phase_field(mobility: MobilityKind, chi_phi: f64) -> Simulation {
    let p = desk(|p| {
        p.mobility = mobility;
        p.chi_phi = chi_phi;
        p.proliferation = 0.0;
        p.apoptosis = 0.0;
    });
    let mut sim = Simulation::new(p).unwrap();
    sim.set_flow_mode(FlowMode::Frozen);
    sim
}

fn mass_conservation(watch: &mut Watch) -> Verdict {
    let area = 36.0;
    let mut worst = 0.0f64;
    for m in MOBILITIES {
        let mut sim = isolated_phase_field(m, 5.0);
        let m0 = sim.diagnostics().unwrap().mass;
        drive(&mut sim, 200, watch, |s| {
            worst = worst.max((s.diagnostics().unwrap().mass - m0).abs());
        });
    }
    verdict(
        worst <= 1e-11 * area,
        format!("max |mass drift| = {worst:.2e} over 3 mobilities x 200 steps (limit {:.1e})", 1e-11 * area),
    )
}

fn energy_stability(watch: &mut Watch) -> Verdict {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut drop = Vec::new();
    for m in MOBILITIES {
        let mut sim = isolated_phase_field(m, 0.0);
        let e0 = sim.diagnostics().unwrap().energy;
        let mut prev = e0;
        drive(&mut sim, 200, watch, |s| {
            let e = s.diagnostics().unwrap().energy;
            worst_rise = worst_rise.max(e - prev);
            prev = e;
        });
        drop.push(e0 - prev);
    }
    verdict(
        worst_rise <= 1e-13,
        format!(
            "largest one-step change {worst_rise:.2e} (limit 1e-13); total decrease {:.3e} / {:.3e} / {:.3e}",
            drop[0], drop[1], drop[2]
        ),
    )
}

/// P1 stiffness and lumped mass assembled from scratch.
fn reference_operators(mesh: &Mesh, coeff: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = mesh.num_vertices();
    let mut k = vec![vec![0.0; n]; n];
    let mut m = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        // gradient of the hat function of vertex i: rotated opposite edge / (2 area)
        let grad = |i: usize| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
        };
        for i in 0..3 {
            m[tri[i]] += area / 3.0;
            for j in 0..3 {
                let (gi, gj) = (grad(i), grad(j));
                k[tri[i]][tri[j]] += coeff[t] * area * (gi[0] * gj[0] + gi[1] * gj[1]);
            }
        }
    }
    (k, m)
}

/// 4 x 4 vertices on (-3, 3)^2. A strong source pushes part of the tumour
/// against the upper obstacle while the healthy bound stays inactive.
fn vi_oracle() -> Verdict {
    let mesh = build_uniform_mesh(3, [-3.0, -3.0], [3.0, 3.0]).unwrap();
    let n = mesh.num_vertices();
    let dt = 0.1;
    let mut p = Parameters {
        epsilon: 1.0,
        beta: 0.5,
        chi_phi: 0.3,
        proliferation: 1.0,
        apoptosis: 0.0,
        rho_s: 2.0,
        alpha: 0.5,
        mobility: MobilityKind::Constant { m0: 1.0 },
        ..Parameters::default()
    };
    p.vi.tol = 1e-13;
    let phi_old: Vec<f64> = (0..n).map(|i| 0.3 + 0.65 * ((7 * i) % 16) as f64 / 15.0).collect();
    let sigma: Vec<f64> = (0..n).map(|i| 0.6 + 0.4 * ((3 * i) % 16) as f64 / 15.0).collect();

    let (k, m) = reference_operators(&mesh, &vec![1.0; mesh.num_triangles()]);
    let source = |i: usize| {
        let (ph, s) = (phi_old[i], sigma[i]);
        0.5 * (p.rho_s - p.alpha * ph) * (p.proliferation * s - p.apoptosis) * (ph + 1.0)
    };
    let scaled = |c: f64| k.iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
    let qp = DenseObstacle {
        d1: m.clone(),
        a: scaled(dt * 1.0),
        d2: m.clone(),
        b: scaled(p.beta * p.epsilon),
        f: (0..n).map(|i| m[i] * (phi_old[i] + dt * source(i))).collect(),
        g: (0..n).map(|i| m[i] * (p.beta / p.epsilon * phi_old[i] + p.chi_phi * sigma[i])).collect(),
        lower: -1.0,
        upper: 1.0,
    };
    let found = qp.enumerate(&[NodeState::Free, NodeState::Upper]);
    if found.len() != 1 {
        return verdict(false, format!("enumeration found {} KKT points, expected exactly one", found.len()));
    }
    let (states, u_ref, w_ref) = &found[0];
    let active = states.iter().filter(|s| **s == NodeState::Upper).count();

    let phi0 = FeFunction::new(Space::P1Scalar, &mesh, phi_old.clone()).unwrap();
    let sig = FeFunction::new(Space::P1Scalar, &mesh, sigma.clone()).unwrap();
    let v = FeFunction::zeros(Space::P2Vector, &mesh);
    let res = step_cahn_hilliard(&mesh, &phi0, &sig, &v, &p, dt).unwrap();
    let err = max_abs_diff(res.phi.coeffs(), u_ref).max(max_abs_diff(res.mu.coeffs(), w_ref));
    verdict(
        err <= 1e-8 && (1..n).contains(&active),
        format!("max-norm difference {err:.2e} vs 2^16-assignment enumeration ({active} of {n} nodes at the upper obstacle)"),
    )
}

fn rigid_rotation() -> (f64, f64) {
    let m = build_uniform_mesh(8, [-3.0, -3.0], [3.0, 3.0]).unwrap().with_no_slip(&Side::ALL);
    let ctx = FlowContext::new(&m);
    let nu = 2.0;
    let exact = |p: Point| [p[1], -p[0]];
    let vstar = interpolate_p2_vector(&m, exact);
    let load: Vec<f64> = assemble_p2_vector_mass(&m).mul_vec(vstar.coeffs()).iter().map(|v| nu * v).collect();
    let eta = vec![0.4; m.num_triangles()];
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
    (max_abs_diff(sol.v.coeffs(), vstar.coeffs()), sol.divergence_defect.abs())
}

/// L2 norm of `uh - exact` by degree-5 quadrature.
fn l2_error(mesh: &Mesh, uh: &[f64], exact: &dyn Fn(Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.signed_area(t).abs();
        for (l, w) in quadrature_degree5() {
            let x = [0, 1].map(|d| l[0] * p[0][d] + l[1] * p[1][d] + l[2] * p[2][d]);
            let vh = l[0] * uh[tri[0]] + l[1] * uh[tri[1]] + l[2] * uh[tri[2]];
            total += w * area * (vh - exact(x)).powi(2);
        }
    }
    total.sqrt()
}

fn nutrient_convergence() -> Verdict {
    let p = desk(|p| p.chi = 0.0);
    let eps = p.epsilon;
    let radius = 0.5;
    let kappa = move |r: f64| p.consumption * (phase_profile(r - radius, eps) + 1.0) / (2.0 * p.diffusivity);
    let oracle = radial_nutrient_with(&kappa, p.sigma_b, 3.0 * 2f64.sqrt(), 40_000).unwrap();
    let exact = |x: Point| oracle.eval(x[0].hypot(x[1]));
    let mut errors = Vec::new();
    let mut bounds_ok = true;
    for n in [32, 64, 128] {
        let mesh = build_uniform_mesh(n, [-3.0, -3.0], [3.0, 3.0]).unwrap();
        let phi = interpolate_nodal(&mesh, |x| phase_profile(x[0].hypot(x[1]) - radius, eps));
        let (sigma, _) = solve_nutrient_with_boundary(&mesh, &phi, &p, &exact).unwrap();
        bounds_ok &= sigma.coeffs().iter().all(|s| (0.0..=1.0).contains(s));
        errors.push(l2_error(&mesh, sigma.coeffs(), &exact));
    }
    let pairwise: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    // observed order over the three levels: least-squares slope of log e
    // against log h, which for halved widths is log2(e_32 / e_128) / 2
    let fitted = (errors[0] / errors[2]).log2() / 2.0;
    let decreasing = errors.windows(2).all(|e| e[1] < e[0]);
    verdict(
        fitted >= 1.8 && decreasing && bounds_ok,
        format!(
            "L2 errors {:.3e} / {:.3e} / {:.3e}, fitted order {fitted:.2} (pairwise {:.2} / {:.2}), 0 <= sigma <= 1: {bounds_ok}",
            errors[0], errors[1], errors[2], pairwise[0], pairwise[1]
        ),
    )
}

/// Worst relative deviation of the simulated mean radius from the radial
/// model over `t in [0, 0.5]`.
fn radial_deviation(eps: f64, watch: &mut Watch) -> f64 {
    let p = desk(|p| {
        p.epsilon = eps;
        p.chi = 0.0;
        p.mobility = MobilityKind::ScaledConstant { m0: 1.0 };
        p.rho_s = p.alpha;
        p.profile = Profile::Circle;
    });
    let steps = 500;
    let series = evolve_radius(0.5, &p, p.dt, steps as f64 * p.dt).unwrap();
    assert_eq!(series.status, RadialStatus::Completed);
    let mut sim = Simulation::new(p).unwrap();
    let rel = |mr: f64, k: usize| (mr - series.samples[k].radius).abs() / series.samples[k].radius;
    let mut worst = rel(sim.diagnostics().unwrap().mean_radius, 0);
    let mut k = 0;
    drive(&mut sim, steps, watch, |s| {
        k += 1;
        worst = worst.max(rel(s.diagnostics().unwrap().mean_radius, k));
    });
    eprintln!("  eps = {eps}: worst relative radius deviation {worst:.3e}");
    worst
}

fn radial_cross_validation(watch: &mut Watch) -> Verdict {
    let devs: Vec<f64> = [0.1, 0.08, 0.05].iter().map(|&e| radial_deviation(e, watch)).collect();
    let within = devs.iter().all(|&d| d <= 0.1);
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    verdict(
        within && monotone,
        format!(
            "worst relative deviation for eps 0.1 / 0.08 / 0.05: {:.2e} / {:.2e} / {:.2e}",
            devs[0], devs[1], devs[2]
        ),
    )
}

fn darcy_brinkman(watch: &mut Watch) -> Verdict {
    let angles = uniform_angles(256, 0.0);
    let shape = |eta: f64, watch: &mut Watch| {
        let mut sim = Simulation::new(desk(|p| {
            p.eta_minus = eta;
            p.eta_plus = eta;
        }))
        .unwrap();
        drive(&mut sim, 500, watch, |_| {});
        radii(&sim, &angles)
    };
    let a = shape(1e-5, watch);
    let b = shape(1e-4, watch);
    let scale = a.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let diff = max_abs_diff(&a, &b) / scale;
    verdict(diff <= 0.05, format!("max |r_1e-5 - r_1e-4| / max r = {diff:.3e} at t = 0.5"))
}

/// Calibrated chemotaxis-dominant setting for the mode-trend runs; see the
/// README for the sweep that selected it. A mode-k perturbation only grows when
/// the chemotactic pull beats the surface tension, which scales like
/// `beta k^2 / R^2`, while the tumour core only stays filled when the nutrient
/// drop across it stays below `beta / eps`. Both hold only for eps below about
/// 0.035, so these runs use a thinner interface resolved by band refinement.
fn mode_trend_params(profile: Profile) -> Parameters {
    desk(|p| {
        p.profile = profile;
        p.epsilon = 0.025;
        p.refine_levels = 2;
        p.beta = 0.01;
        p.chi_phi = 5.0;
        p.lambda_bulk = 0.02;
        p.eta_minus = 0.1;
        p.eta_plus = 0.1;
    })
}

const MODE_TREND_STEPS: usize = 200;

fn mode_trend(watch: &mut Watch) -> Verdict {
    let angles = uniform_angles(256, 0.0);
    // amplitudes at t = 0, t1 / 2 and t1
    let amplitude = |profile: Profile, k: usize, watch: &mut Watch| {
        let mut sim = Simulation::new(mode_trend_params(profile)).unwrap();
        let mut a = [0.0; 3];
        a[0] = mode_amplitudes(&radii(&sim, &angles), 12).unwrap()[k];
        drive(&mut sim, MODE_TREND_STEPS / 2, watch, |_| {});
        a[1] = mode_amplitudes(&radii(&sim, &angles), 12).unwrap()[k];
        drive(&mut sim, MODE_TREND_STEPS - MODE_TREND_STEPS / 2, watch, |_| {});
        a[2] = mode_amplitudes(&radii(&sim, &angles), 12).unwrap()[k];
        (a, sim.state().t)
    };
    let (a6, t1) = amplitude(Profile::R1, 6, watch);
    let (a12, _) = amplitude(Profile::R2, 12, watch);
    // the second half guards against reading the initial profile relaxation as growth
    verdict(
        a6[2] > a6[0] && a6[2] > a6[1] && a12[2] < a12[0],
        format!(
            "t1 = {t1:.3}: a6 {:.4e} -> {:.4e} -> {:.4e}, a12 {:.4e} -> {:.4e} -> {:.4e}",
            a6[0], a6[1], a6[2], a12[0], a12[1], a12[2]
        ),
    )
}

fn run_cli(config: &Path, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_chb"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .expect("chb runs");
    assert!(status.success(), "chb run failed: {status}");
    std::fs::read(out.join("diagnostics.csv")).unwrap()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[physics]\nepsilon = 0.1\n\n[numerics]\ndt = 1e-3\nt_end = 0.02\n\n[mesh]\nn = 32\n\n[output]\nevery = 10\n",
    )
    .unwrap();
    let a = run_cli(&config, &dir.path().join("a"));
    let b = run_cli(&config, &dir.path().join("b"));
    let rows = a.iter().filter(|&&c| c == b'\n').count();
    verdict(a == b && rows > 1, format!("{} bytes, {rows} lines, identical: {}", a.len(), a == b))
}

/// Criteria in report order. The structural ones (bounds, complementarity,
/// divergence) also fold in the residuals watched during every other run.
const CRITERIA: [&str; 10] = [
    "bound preservation",
    "mass conservation",
    "energy stability",
    "vi oracle equivalence",
    "stokes exactness",
    "nutrient convergence",
    "radial cross-validation",
    "darcy-brinkman proximity",
    "mode trend",
    "determinism",
];

fn main() -> ExitCode {
    // optional name filters, e.g. `cargo test --test acceptance -- radial`
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let clock = Instant::now();
    let mut watch = Watch::default();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut run = |name: &'static str, watch: &mut Watch, f: &dyn Fn(&mut Watch) -> Verdict| {
        if selected(name) {
            results.push((name, f(watch)));
            eprintln!("[{:>6.0}s] {name} done", clock.elapsed().as_secs_f64());
        }
    };

    run("mass conservation", &mut watch, &mass_conservation);
    run("energy stability", &mut watch, &energy_stability);
    run("nutrient convergence", &mut watch, &|_| nutrient_convergence());
    run("radial cross-validation", &mut watch, &radial_cross_validation);
    run("darcy-brinkman proximity", &mut watch, &darcy_brinkman);
    run("mode trend", &mut watch, &mode_trend);
    run("determinism", &mut watch, &|_| determinism());
    let production_steps = watch.steps;
    run("bound preservation", &mut watch, &|w| {
        verdict(
            w.bound_excess <= 0.0,
            format!("max |phi| - 1 = {:.1e} over {} simulated steps", w.bound_excess, w.steps),
        )
    });
    run("vi oracle equivalence", &mut watch, &|w| {
        let vi = vi_oracle();
        verdict(
            vi.pass && w.complementarity <= 1e-8,
            format!(
                "{}; max complementarity residual {:.2e} over {} production steps",
                vi.detail, w.complementarity, w.steps
            ),
        )
    });
    run("stokes exactness", &mut watch, &|w| {
        let (err, div) = rigid_rotation();
        let div = div.max(w.divergence);
        verdict(
            err <= 1e-9 && div <= 1e-8,
            format!("rigid rotation error {err:.2e}; max divergence identity defect {div:.2e}"),
        )
    });
    if production_steps == 0 {
        eprintln!("note: no simulation criteria selected, production-step residual checks are vacuous");
    }

    results.sort_by_key(|(name, _)| CRITERIA.iter().position(|c| c == name));
    let mut failures = 0;
    for (name, v) in &results {
        println!("{} {name} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.pass);
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.len() - failures,
        results.len(),
        clock.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
