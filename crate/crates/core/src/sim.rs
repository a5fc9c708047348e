//! Simulation state, initial data and the time-stepping loop.
//!
//! Each step solves, in order: the flow with the previous phase field,
//! chemical potential and nutrient; the Cahn-Hilliard inequality with the
//! previous nutrient and the velocity just computed; the nutrient with the new
//! phase field.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::{step_cahn_hilliard_with, ChContext};
use crate::diagnostics::{compute_diagnostics, DiagnosticsRecord, StageIterations};
use crate::error::{Error, Result};
use crate::fem::{interpolate_nodal, FeFunction, Space};
use crate::flow::{solve_flow_with, FlowContext};
use crate::mesh::{build_uniform_mesh, refine_interface_band, Mesh, Point, PointLocator};
use crate::nutrient::solve_nutrient;
use crate::output::{write_diag_csv, write_vtk};
use crate::params::{ensure_valid, OutputOptions, Parameters};

/// Initial interface shape `|x| = rho(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `1/2 + cos(2 theta)/40`
    R,
    /// `1/2 + cos(6 theta)/40`
    R1,
    /// `1/2 + cos(12 theta - pi/9)/40`
    R2,
    /// `1/2 + 1e-3 (cos 2theta + 5/4 cos(6 theta - pi/12) + 3/4 cos(8 theta - pi/7))`
    R3,
    /// `1/2 + 1e-3 (cos 12theta + 5/4 cos(7 theta - pi/12) + 3/4 cos(8 theta - pi/7))`
    R4,
    /// Unperturbed disk of radius 1/2.
    Circle,
}

impl Profile {
    pub fn radius(self, theta: f64) -> f64 {
        let mixed = |a: f64, b: f64, c: f64| 0.5 + 1e-3 * (a + 1.25 * b + 0.75 * c);
        match self {
            Profile::R => 0.5 + (2.0 * theta).cos() / 40.0,
            Profile::R1 => 0.5 + (6.0 * theta).cos() / 40.0,
            Profile::R2 => 0.5 + (12.0 * theta - PI / 9.0).cos() / 40.0,
            Profile::R3 => mixed(
                (2.0 * theta).cos(),
                (6.0 * theta - PI / 12.0).cos(),
                (8.0 * theta - PI / 7.0).cos(),
            ),
            Profile::R4 => mixed(
                (12.0 * theta).cos(),
                (7.0 * theta - PI / 12.0).cos(),
                (8.0 * theta - PI / 7.0).cos(),
            ),
            Profile::Circle => 0.5,
        }
    }

    /// `|x| - rho(theta(x))`.
    pub fn signed_distance(self, p: Point) -> f64 {
        p[0].hypot(p[1]) - self.radius(p[1].atan2(p[0]))
    }
}

/// Transition profile: +1 inside, -1 outside, `-sin(r/eps)` across the layer
/// `|r| < pi eps / 2`.
pub fn phase_profile(r: f64, epsilon: f64) -> f64 {
    let half = 0.5 * PI * epsilon;
    if r <= -half {
        1.0
    } else if r >= half {
        -1.0
    } else {
        -(r / epsilon).sin()
    }
}

/// Interpolates the initial phase field of `profile` into P1.
pub fn initial_phase_field(mesh: &Mesh, profile: Profile, epsilon: f64) -> FeFunction {
    interpolate_nodal(mesh, |p| phase_profile(profile.signed_distance(p), epsilon))
}

/// Fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub phi: FeFunction,
    pub mu: FeFunction,
    pub sigma: FeFunction,
    pub v: FeFunction,
    pub p: FeFunction,
}

/// Initial state: interpolated profile, `mu = 0`, `sigma = sigma_b`, no flow.
pub fn init_state(params: &Parameters, mesh: &Mesh) -> State {
    State {
        t: 0.0,
        phi: initial_phase_field(mesh, params.profile, params.epsilon),
        mu: FeFunction::constant_p1(mesh, 0.0),
        sigma: FeFunction::constant_p1(mesh, params.sigma_b),
        v: FeFunction::zeros(Space::P2Vector, mesh),
        p: FeFunction::constant_p1(mesh, 0.0),
    }
}

/// The mesh described by the parameters: a uniform grid of `(-3, 3)^2`,
/// optionally refined around the initial interface.
pub fn build_mesh(params: &Parameters) -> Result<Mesh> {
    let mut mesh = build_uniform_mesh(params.mesh_n, [-3.0, -3.0], [3.0, 3.0])?;
    for _ in 0..params.refine_levels {
        let phi = initial_phase_field(&mesh, params.profile, params.epsilon);
        mesh = refine_interface_band(&mesh, phi.coeffs(), 1)?;
    }
    mesh.set_no_slip(&params.no_slip);
    Ok(mesh)
}

/// How the velocity is obtained in each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    /// Solve the Brinkman problem.
    #[default]
    Brinkman,
    /// Skip the flow stage and keep `v = 0`, `p = 0` (isolated phase-field runs).
    Frozen,
}

/// A running simulation owning its mesh, cached operators and current state.
pub struct Simulation {
    params: Parameters,
    mesh: Mesh,
    flow_ctx: FlowContext,
    ch_ctx: ChContext,
    locator: PointLocator,
    state: State,
    steps: usize,
    last_report: StepReport,
    flow_mode: FlowMode,
}

impl Simulation {
    /// Validates the parameters, builds the mesh and the initial state.
    pub fn new(params: Parameters) -> Result<Self> {
        ensure_valid(&params)?;
        let mesh = build_mesh(&params)?;
        Self::with_mesh(params, mesh)
    }

    /// Uses the given mesh instead of building one. Only range checks are
    /// applied to the parameters.
    pub fn with_mesh(params: Parameters, mesh: Mesh) -> Result<Self> {
        params.check()?;
        let state = init_state(&params, &mesh);
        Ok(Simulation {
            flow_ctx: FlowContext::new(&mesh),
            ch_ctx: ChContext::new(&mesh)?,
            locator: PointLocator::new(&mesh),
            params,
            mesh,
            state,
            steps: 0,
            last_report: StepReport::default(),
            flow_mode: FlowMode::Brinkman,
        })
    }

    pub fn set_flow_mode(&mut self, mode: FlowMode) {
        self.flow_mode = mode;
    }

    /// Replaces the current state (fields must live on this mesh).
    pub fn set_state(&mut self, state: State) -> Result<()> {
        let m = &self.mesh;
        let ok = state.phi.is_on(m)
            && state.mu.is_on(m)
            && state.sigma.is_on(m)
            && state.v.is_on(m)
            && state.p.is_on(m)
            && state.v.space() == Space::P2Vector;
        if !ok {
            return Err(Error::invalid("state fields do not match the mesh"));
        }
        self.state = state;
        Ok(())
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Lumped mass diagonal of the mesh.
    pub fn mass(&self) -> &[f64] {
        self.ch_ctx.mass()
    }

    pub fn last_iterations(&self) -> StageIterations {
        self.last_report.iterations
    }

    /// Solver residuals of the most recent step.
    pub fn last_report(&self) -> StepReport {
        self.last_report
    }

    /// Advances by one time step. On error the state is left unchanged.
    pub fn advance(&mut self) -> Result<StageIterations> {
        let p = &self.params;
        let m = &self.mesh;
        let old = &self.state;
        let clock = std::time::Instant::now();
        let (v, pressure, flow_iters, divergence_defect) = match self.flow_mode {
            FlowMode::Brinkman => {
                let f = solve_flow_with(
                    &self.flow_ctx,
                    m,
                    &old.phi,
                    &old.mu,
                    &old.sigma,
                    p,
                    Some((&old.v, &old.p)),
                )?;
                (f.v, f.p, f.report.iterations, f.divergence_defect)
            }
            FlowMode::Frozen => (
                FeFunction::zeros(Space::P2Vector, m),
                FeFunction::constant_p1(m, 0.0),
                0,
                0.0,
            ),
        };
        let t_flow = clock.elapsed();
        let ch = step_cahn_hilliard_with(&self.ch_ctx, m, &old.phi, Some(&old.mu), &old.sigma, &v, p, p.dt)?;
        let t_ch = clock.elapsed();
        let (sigma, nutrient_report) = solve_nutrient(m, &ch.phi, p)?;
        log::debug!(
            "step {}: flow {:.3}s, phase field {:.3}s, nutrient {:.3}s",
            self.steps + 1,
            t_flow.as_secs_f64(),
            (t_ch - t_flow).as_secs_f64(),
            (clock.elapsed() - t_ch).as_secs_f64()
        );
        let iters = StageIterations {
            flow: flow_iters,
            vi: ch.report.iterations,
            nutrient: nutrient_report.iterations,
        };
        self.state = State {
            t: old.t + p.dt,
            phi: ch.phi,
            mu: ch.mu,
            sigma,
            v,
            p: pressure,
        };
        self.steps += 1;
        self.last_report = StepReport {
            iterations: iters,
            divergence_defect,
            vi_equality: ch.equality_residual,
            vi_complementarity: ch.complementarity,
            mass_correction: ch.mass_correction,
        };
        Ok(iters)
    }

    /// Diagnostics of the current state, tagged with the iteration counts of
    /// the step that produced it.
    pub fn diagnostics(&self) -> Result<DiagnosticsRecord> {
        compute_diagnostics(
            &self.mesh,
            &self.locator,
            self.ch_ctx.mass(),
            self.ch_ctx.stiffness(),
            self.state.t,
            &self.state.phi,
            &self.state.sigma,
            &self.state.v,
            self.params.beta,
            self.params.epsilon,
            self.last_report.iterations,
        )
    }
}

/// Advances a state by one step on `mesh` (operators are rebuilt; use
/// [`Simulation`] for repeated steps).
pub fn advance(state: &State, params: &Parameters, mesh: &Mesh) -> Result<State> {
    let mut sim = Simulation::with_mesh(params.clone(), mesh.clone())?;
    sim.set_state(state.clone())?;
    sim.advance()?;
    Ok(sim.state)
}

/// Iteration counts and residual checks of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub iterations: StageIterations,
    /// Divergence equation tested with 1 (zero when the flow is frozen).
    pub divergence_defect: f64,
    pub vi_equality: f64,
    pub vi_complementarity: f64,
    pub mass_correction: f64,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
}

/// Runs from the initial state to `t_end`, collecting one diagnostics record
/// per time level. With an output directory, field files are written every
/// `output.every` steps and at the end, and `diagnostics.csv` after the run.
///
/// On a solver failure the last good state is written as
/// `fields_last_good.vtk` together with the diagnostics so far.
pub fn run(params: &Parameters, output: Option<(&Path, &OutputOptions)>) -> Result<RunSummary> {
    let mut sim = Simulation::new(params.clone())?;
    run_simulation(&mut sim, output)
}

/// [`run`] for an already constructed simulation.
pub fn run_simulation(sim: &mut Simulation, output: Option<(&Path, &OutputOptions)>) -> Result<RunSummary> {
    if let Some((dir, _)) = output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let total = sim.params().num_steps();
    let mut records = vec![sim.diagnostics()?];
    let write_fields = |sim: &Simulation, name: String| -> Result<()> {
        if let Some((dir, opts)) = output {
            if opts.vtk {
                write_vtk(sim.mesh(), sim.state(), &dir.join(name))?;
            }
        }
        Ok(())
    };
    write_fields(sim, format!("fields_{:06}.vtk", 0))?;
    for step in 1..=total {
        if let Err(e) = sim.advance() {
            log::error!("step {step} failed: {e}");
            write_fields(sim, "fields_last_good.vtk".into())?;
            if let Some((dir, _)) = output {
                write_diag_csv(&records, &dir.join("diagnostics.csv"))?;
            }
            return Err(e);
        }
        records.push(sim.diagnostics()?);
        let every = output.map_or(0, |(_, o)| o.every);
        if (every > 0 && step % every == 0) || step == total {
            write_fields(sim, format!("fields_{step:06}.vtk"))?;
        }
        log::debug!(
            "step {step}/{total} t = {:.6} iterations flow {} vi {} nutrient {}",
            sim.state().t,
            sim.last_iterations().flow,
            sim.last_iterations().vi,
            sim.last_iterations().nutrient
        );
    }
    if let Some((dir, _)) = output {
        write_diag_csv(&records, &dir.join("diagnostics.csv"))?;
    }
    Ok(RunSummary {
        steps: sim.steps(),
        records,
        final_state: sim.state().clone(),
    })
}
