//! Structured-grid simulation of the low-Mach-number compressible isentropic
//! Navier–Stokes equations with Navier slip walls.
//!
//! The crate provides
//!
//! * MAC-staggered fields with ghost layers and slip boundary conditions
//!   ([`fields`]),
//! * second-order discrete vector calculus and Sobolev-type norms
//!   ([`operators`]),
//! * an asymptotic-preserving IMEX integrator for the rescaled
//!   density-fluctuation / velocity system ([`compressible`]),
//! * a projection-method solver for the incompressible limit system
//!   ([`incompressible`]),
//! * energy functionals, the running solution norm and decay-inequality
//!   monitoring ([`diagnostics`]),
//! * experiment orchestration: single runs, Mach-number sweeps, rate fits
//!   and a self-verification suite ([`harness`]).
//!
//! The unknowns are the density fluctuation `sigma` with `rho = 1 + eps * sigma`
//! and the velocity `u`; the pressure law is `p(rho) = rho^gamma / gamma`.

pub mod cg;
pub mod compressible;
pub mod diagnostics;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod incompressible;
pub mod operators;

pub use compressible::{CompressibleState, PhysParams};
pub use diagnostics::{EnergyReport, FunctionalWeights};
pub use fields::{Field, Location, ScalarField, VectorField};
pub use geometry::{AxisBc, BoundaryPatch, Grid, GridSpec, Side};
pub use incompressible::IncompressibleState;
pub use operators::NormReport;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("field violates slip condition: {0}")]
    NotSlipCompatible(String),
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("density bound violated at t = {t}: rho in [{rho_min}, {rho_max}], allowed [0.25, 4]")]
    DensityBound { t: f64, rho_min: f64, rho_max: f64 },
    #[error("divergence residual {0:.3e} exceeds 1e-10 after projection")]
    DivergenceResidual(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown suite '{name}', valid suites: {valid}")]
    UnknownSuite { name: String, valid: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
