//! Finite-element simulation of avascular tumour growth with a
//! Cahn-Hilliard-Brinkman-nutrient model and a double-obstacle potential.
//!
//! The building blocks are usable on their own: [`mesh`] and [`fem`] for
//! triangulations and assembly, [`solvers`] for the Krylov and projected
//! kernels, and one module per stage of a time step ([`flow`],
//! [`cahn_hilliard`], [`nutrient`]). [`sim::Simulation`] ties them together;
//! [`radial`] is an independent reference model for disk-shaped tumours.

pub mod cahn_hilliard;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod flow;
pub mod mesh;
pub mod nutrient;
pub mod output;
pub mod params;
pub mod radial;
pub mod sim;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result, Stage};
pub use params::{Config, OutputOptions, Parameters};
pub use sim::{Simulation, State};
