//! Model parameters, the TOML configuration format and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::MobilityKind;
use crate::error::{Error, Result};
use crate::mesh::Side;
use crate::sim::Profile;
use crate::solvers::{GmresOptions, ObstacleOptions};

/// Lower bound applied to both phase viscosities.
pub const ETA_FLOOR: f64 = 1e-7;

/// Physical constants, discretisation choices and solver settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub epsilon: f64,
    /// Adhesion (surface energy) coefficient.
    pub beta: f64,
    pub chi_phi: f64,
    /// Active transport coefficient.
    pub chi: f64,
    pub diffusivity: f64,
    pub proliferation: f64,
    pub apoptosis: f64,
    pub consumption: f64,
    pub alpha: f64,
    pub rho_s: f64,
    pub nu: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub lambda_bulk: f64,
    pub sigma_b: f64,
    pub mobility: MobilityKind,
    pub profile: Profile,

    pub dt: f64,
    pub t_end: f64,
    pub mesh_n: usize,
    pub refine_levels: usize,
    pub no_slip: Vec<Side>,

    pub flow: GmresOptions,
    /// Relative tolerance of the inner CG used by the flow preconditioner.
    pub flow_inner_tol: f64,
    pub vi: ObstacleOptions,
    pub nutrient_tol: f64,
    pub nutrient_maxit: usize,

    /// Radial oracle: time step, grid intervals and outer radius.
    pub radial_dt: f64,
    pub radial_grid: usize,
    pub radial_domain: f64,
}

impl Default for Parameters {
    /// Desk-scale defaults: the reference parameter set with ε = 0.08 on a
    /// 64 x 64 grid and dt = 1e-3, stress-free boundary everywhere.
    fn default() -> Self {
        Parameters {
            epsilon: 0.08,
            beta: 0.1,
            chi_phi: 5.0,
            chi: 0.02,
            diffusivity: 1.0,
            proliferation: 0.1,
            apoptosis: 0.0,
            consumption: 2.0,
            alpha: 0.5,
            rho_s: 2.0,
            nu: 100.0,
            eta_minus: 0.1,
            eta_plus: 0.1,
            lambda_bulk: 0.0,
            sigma_b: 1.0,
            mobility: MobilityKind::OneSidedDegenerate { m0: 1.0 },
            profile: Profile::R,
            dt: 1e-3,
            t_end: 0.1,
            mesh_n: 64,
            refine_levels: 0,
            no_slip: Vec::new(),
            flow: GmresOptions::default(),
            flow_inner_tol: 1e-1,
            vi: ObstacleOptions::default(),
            nutrient_tol: 1e-10,
            nutrient_maxit: 10_000,
            radial_dt: 1e-3,
            radial_grid: 512,
            radial_domain: 3.0,
        }
    }
}

impl Parameters {
    /// The reference parameter set at full resolution: ε = 0.02, τ = 1e-4.
    /// The adaptive fine mesh is not reproduced; `mesh_n` is the uniform
    /// coarse grid.
    pub fn reference() -> Self {
        Parameters {
            epsilon: 0.02,
            dt: 1e-4,
            mesh_n: 16,
            ..Parameters::default()
        }
    }

    /// Uniform mesh width `6 / mesh_n` of the default square.
    pub fn mesh_width(&self) -> f64 {
        6.0 / self.mesh_n as f64
    }

    /// Number of steps needed to reach `t_end` (rounded to the nearest step).
    pub fn num_steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as usize
        }
    }

    /// Viscosities after the floor is applied.
    pub fn floored_viscosities(&self) -> (f64, f64) {
        (self.eta_minus.max(ETA_FLOOR), self.eta_plus.max(ETA_FLOOR))
    }

    /// Range and sign checks. Returns a configuration error on the first
    /// violated constraint.
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("diffusivity", self.diffusivity),
            ("dt", self.dt),
            ("radial_dt", self.radial_dt),
            ("radial_domain", self.radial_domain),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("proliferation", self.proliferation),
            ("apoptosis", self.apoptosis),
            ("consumption", self.consumption),
            ("nu", self.nu),
            ("chi", self.chi),
            ("eta_minus", self.eta_minus),
            ("eta_plus", self.eta_plus),
            ("lambda_bulk", self.lambda_bulk),
            ("sigma_b", self.sigma_b),
            ("t_end", self.t_end),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        for (name, v) in [("chi_phi", self.chi_phi), ("alpha", self.alpha), ("rho_s", self.rho_s)] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if !(self.mobility.m0() > 0.0 && self.mobility.m0().is_finite()) {
            return Err(Error::config("mobility m0 must be positive"));
        }
        if self.mesh_n == 0 {
            return Err(Error::config("mesh n must be at least 1"));
        }
        if self.radial_grid < 64 {
            return Err(Error::config("radial_grid must be at least 64"));
        }
        if !(self.vi.tol > 0.0) || !(self.flow.tol > 0.0) || !(self.nutrient_tol > 0.0) {
            return Err(Error::config("solver tolerances must be positive"));
        }
        if !(self.flow_inner_tol > 0.0 && self.flow_inner_tol < 1.0) {
            return Err(Error::config("flow_inner_tol must lie in (0, 1)"));
        }
        if self.flow.restart == 0 || self.flow.max_restarts == 0 || self.vi.maxit == 0 || self.nutrient_maxit == 0 {
            return Err(Error::config("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

/// Consistency checks beyond plain ranges.
///
/// Errors: invalid ranges; an all no-slip boundary while the divergence source
/// `alpha (P sigma - A)` does not vanish (the source cannot integrate to zero
/// in general); zero permeability with no no-slip side (rigid motions make the
/// flow operator singular).
/// Warnings: ε-scaled mobility with `rho_s != alpha`; fewer than four elements
/// across the interface (`pi eps / h < 4`, with `h` the refined width there).
pub fn validate_config(p: &Parameters) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut error = |m: String| {
        out.push(Finding {
            severity: Severity::Error,
            message: m,
        })
    };
    if let Err(e) = p.check() {
        error(e.to_string());
    }
    let all_no_slip = Side::ALL.iter().all(|s| p.no_slip.contains(s));
    if all_no_slip && p.alpha * (p.proliferation * p.sigma_b - p.apoptosis) != 0.0 {
        error(format!(
            "the whole boundary is no-slip but the divergence source alpha*(P*sigma_b - A) = {} does not vanish",
            p.alpha * (p.proliferation * p.sigma_b - p.apoptosis)
        ));
    }
    if p.nu == 0.0 && p.no_slip.is_empty() {
        error("nu = 0 with a stress-free boundary leaves rigid motions undetermined".into());
    }
    if matches!(p.mobility, MobilityKind::ScaledConstant { .. }) && p.rho_s != p.alpha {
        out.push(Finding {
            severity: Severity::Warning,
            message: format!(
                "scaled constant mobility usually needs rho_s = alpha (got rho_s = {}, alpha = {})",
                p.rho_s, p.alpha
            ),
        });
    }
    if p.mesh_n > 0 {
        // band refinement halves the width at the interface once per level
        let h = p.mesh_width() / 2f64.powi(p.refine_levels.min(30) as i32);
        let ratio = std::f64::consts::PI * p.epsilon / h;
        if ratio < 4.0 {
            out.push(Finding {
                severity: Severity::Warning,
                message: format!(
                    "interface under-resolved: pi*eps/h = {ratio:.3} < 4 elements across the transition layer"
                ),
            });
        }
    }
    out
}

/// Runs [`validate_config`], logs warnings and returns the first error.
pub fn ensure_valid(p: &Parameters) -> Result<()> {
    let mut first = None;
    for f in validate_config(p) {
        match f.severity {
            Severity::Warning => log::warn!("{}", f.message),
            Severity::Error => {
                log::error!("{}", f.message);
                first.get_or_insert(f.message);
            }
        }
    }
    match first {
        Some(m) => Err(Error::config(m)),
        None => Ok(()),
    }
}

/// Output settings of a `run`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    /// Write fields every this many steps (the final state is always written).
    pub every: usize,
    pub vtk: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { every: 10, vtk: true }
    }
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: Parameters,
    pub output: OutputOptions,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let config = file.into_config();
        config.params.check()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from_config(self)).expect("configuration serialises")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    physics: PhysicsSection,
    #[serde(default)]
    numerics: NumericsSection,
    #[serde(default)]
    mesh: MeshSection,
    #[serde(default)]
    output: OutputOptions,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PhysicsSection {
    epsilon: f64,
    beta: f64,
    chi_phi: f64,
    chi: f64,
    diffusivity: f64,
    proliferation: f64,
    apoptosis: f64,
    consumption: f64,
    alpha: f64,
    rho_s: f64,
    nu: f64,
    eta_minus: f64,
    eta_plus: f64,
    lambda_bulk: f64,
    sigma_b: f64,
    mobility: MobilityKind,
    profile: Profile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NumericsSection {
    dt: f64,
    t_end: f64,
    flow_tol: f64,
    flow_restart: usize,
    flow_max_restarts: usize,
    flow_inner_tol: f64,
    vi_tol: f64,
    vi_maxit: usize,
    vi_active_correction_every: usize,
    nutrient_tol: f64,
    nutrient_maxit: usize,
    radial_dt: f64,
    radial_grid: usize,
    radial_domain: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MeshSection {
    n: usize,
    refine_levels: usize,
    no_slip: Vec<Side>,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self::from_params(&Parameters::default())
    }
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self::from_params(&Parameters::default())
    }
}

impl Default for MeshSection {
    fn default() -> Self {
        Self::from_params(&Parameters::default())
    }
}

impl PhysicsSection {
    fn from_params(p: &Parameters) -> Self {
        PhysicsSection {
            epsilon: p.epsilon,
            beta: p.beta,
            chi_phi: p.chi_phi,
            chi: p.chi,
            diffusivity: p.diffusivity,
            proliferation: p.proliferation,
            apoptosis: p.apoptosis,
            consumption: p.consumption,
            alpha: p.alpha,
            rho_s: p.rho_s,
            nu: p.nu,
            eta_minus: p.eta_minus,
            eta_plus: p.eta_plus,
            lambda_bulk: p.lambda_bulk,
            sigma_b: p.sigma_b,
            mobility: p.mobility,
            profile: p.profile,
        }
    }
}

impl NumericsSection {
    fn from_params(p: &Parameters) -> Self {
        NumericsSection {
            dt: p.dt,
            t_end: p.t_end,
            flow_tol: p.flow.tol,
            flow_restart: p.flow.restart,
            flow_max_restarts: p.flow.max_restarts,
            flow_inner_tol: p.flow_inner_tol,
            vi_tol: p.vi.tol,
            vi_maxit: p.vi.maxit,
            vi_active_correction_every: p.vi.active_correction_every,
            nutrient_tol: p.nutrient_tol,
            nutrient_maxit: p.nutrient_maxit,
            radial_dt: p.radial_dt,
            radial_grid: p.radial_grid,
            radial_domain: p.radial_domain,
        }
    }
}

impl MeshSection {
    fn from_params(p: &Parameters) -> Self {
        MeshSection {
            n: p.mesh_n,
            refine_levels: p.refine_levels,
            no_slip: p.no_slip.clone(),
        }
    }
}

impl ConfigFile {
    fn from_config(c: &Config) -> Self {
        ConfigFile {
            physics: PhysicsSection::from_params(&c.params),
            numerics: NumericsSection::from_params(&c.params),
            mesh: MeshSection::from_params(&c.params),
            output: c.output.clone(),
        }
    }

    fn into_config(self) -> Config {
        let ph = self.physics;
        let nu = self.numerics;
        Config {
            params: Parameters {
                epsilon: ph.epsilon,
                beta: ph.beta,
                chi_phi: ph.chi_phi,
                chi: ph.chi,
                diffusivity: ph.diffusivity,
                proliferation: ph.proliferation,
                apoptosis: ph.apoptosis,
                consumption: ph.consumption,
                alpha: ph.alpha,
                rho_s: ph.rho_s,
                nu: ph.nu,
                eta_minus: ph.eta_minus,
                eta_plus: ph.eta_plus,
                lambda_bulk: ph.lambda_bulk,
                sigma_b: ph.sigma_b,
                mobility: ph.mobility,
                profile: ph.profile,
                dt: nu.dt,
                t_end: nu.t_end,
                mesh_n: self.mesh.n,
                refine_levels: self.mesh.refine_levels,
                no_slip: self.mesh.no_slip,
                flow: GmresOptions {
                    tol: nu.flow_tol,
                    restart: nu.flow_restart,
                    max_restarts: nu.flow_max_restarts,
                },
                flow_inner_tol: nu.flow_inner_tol,
                vi: ObstacleOptions {
                    tol: nu.vi_tol,
                    maxit: nu.vi_maxit,
                    active_correction_every: nu.vi_active_correction_every,
                },
                nutrient_tol: nu.nutrient_tol,
                nutrient_maxit: nu.nutrient_maxit,
                radial_dt: nu.radial_dt,
                radial_grid: nu.radial_grid,
                radial_domain: nu.radial_domain,
            },
            output: self.output,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has(findings: &[Finding], sev: Severity, needle: &str) -> bool {
        findings
            .iter()
            .any(|f| f.severity == sev && f.message.contains(needle))
    }

    #[test]
    fn reference_config_is_under_resolved() {
        // h = 6/16 = 0.375, pi * 0.02 / 0.375 = 0.1676 < 4
        let f = validate_config(&Parameters::reference());
        assert!(has(&f, Severity::Warning, "under-resolved"));
        assert!(!f.iter().any(|x| x.severity == Severity::Error));
        // six band levels give the fine width 6/1024 at the interface
        let refined = Parameters {
            refine_levels: 6,
            ..Parameters::reference()
        };
        assert!(!has(&validate_config(&refined), Severity::Warning, "under-resolved"));
    }

    #[test]
    fn scaled_mobility_needs_matching_sources() {
        let mut p = Parameters {
            mobility: MobilityKind::ScaledConstant { m0: 1.0 },
            rho_s: 0.5,
            alpha: 0.5,
            ..Parameters::default()
        };
        assert!(!has(&validate_config(&p), Severity::Warning, "rho_s"));
        p.rho_s = 2.0;
        assert!(has(&validate_config(&p), Severity::Warning, "rho_s"));
    }

    #[test]
    fn pure_no_slip_compatibility() {
        let mut p = Parameters {
            no_slip: Side::ALL.to_vec(),
            ..Parameters::default()
        };
        assert!(has(&validate_config(&p), Severity::Error, "no-slip"));
        p.alpha = 0.0;
        assert!(validate_config(&p).iter().all(|f| f.severity != Severity::Error));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let c = Config {
            params: Parameters::default(),
            output: OutputOptions::default(),
        };
        let text = c.to_toml_string();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
        let partial = Config::from_toml_str("[physics]\nepsilon = 0.05\n[mesh]\nn = 32\nno_slip = [\"left\"]\n").unwrap();
        assert_eq!(partial.params.epsilon, 0.05);
        assert_eq!(partial.params.mesh_n, 32);
        assert_eq!(partial.params.no_slip, vec![Side::Left]);
        let err = Config::from_toml_str("[physics]\nepsilonn = 0.05\n").unwrap_err();
        assert!(err.is_config());
        assert!(Config::from_toml_str("[physics]\nepsilon = -1.0\n").is_err());
    }

    #[test]
    fn step_count() {
        let p = Parameters {
            dt: 1e-3,
            t_end: 3e-3,
            ..Parameters::default()
        };
        assert_eq!(p.num_steps(), 3);
        assert_eq!(Parameters { t_end: 0.0, ..p }.num_steps(), 0);
    }
}
