//! Solvers for McKean-Feynman-Kac equations.
//!
//! The crate computes the bounded mild solution of the semilinear Fokker-Planck
//! equation
//!
//! ```text
//! ∂ₜu = L*ₜu − div(b(t,x,u) u) + Λ(t,x,u) u,    u(0,·) = u₀
//! ```
//!
//! in two independent ways and lets the results be cross-checked:
//!
//! * [`mild`] iterates the Picard map of the mild formulation on short time
//!   slabs and glues the slabs together;
//! * [`particle`] simulates the associated McKean SDE with Feynman-Kac
//!   log-weights, either with a frozen `u` or closed through a weighted kernel
//!   density estimate.
//!
//! [`kernel`] holds the Gaussian fundamental solution of the linear part,
//! [`problem`] the coefficients and presets, [`oracles`] closed-form and
//! finite-volume references, and [`harness`] the configuration-driven runner
//! behind the `mfk` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod mild;
pub mod oracles;
pub mod particle;
pub mod problem;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, SpatialGrid};
pub use kernel::KernelModel;
pub use mild::{SolveReport, SolverOptions, TimeRule};
pub use particle::ParticleEnsemble;
pub use problem::{InitialDensity, PresetParams, ProblemSpec};
