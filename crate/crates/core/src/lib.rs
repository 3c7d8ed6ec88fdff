//! Pseudo-spectral simulation of the 3D incompressible Euler equations with
//! transport-type multiplicative noise on the periodic torus `[0, 2π)³`.
//!
//! The velocity is never time-stepped directly. Instead each time window is
//! solved through a Lagrangian fixed point: the noise part of the particle
//! flow is integrated first, the drift is pulled back through it, a random
//! ODE supplies the remaining flow, and the velocity is reconstructed from
//! the back-to-labels map by the Weber formula
//!
//! ```text
//! u = P[(∇A)ᵀ u₀ ∘ A],      A = X⁻¹,   P = Leray–Hodge projection.
//! ```
//!
//! Picard iteration of that reconstruction map converges on short windows;
//! windows are chained, with a Hölder-norm guard on `∇A − I` deciding when a
//! window must be truncated and restarted from fresh flows.
//!
//! Module map:
//! - [`grid`], [`field`], [`ops`]: N³ grids, vector fields with cached
//!   spectra, Leray projection, curl, Lie derivative and its adjoint.
//! - [`holder`]: discrete Hölder norm estimators (monitors, lower bounds).
//! - [`interp`], [`flow`]: periodic tricubic/spectral interpolation and
//!   torus diffeomorphisms (composition, Newton inversion, drift flows).
//! - [`noise`]: divergence-free noise bases, Wiener paths, Stratonovich
//!   (Heun) integration of the noise-only flow and its Jacobian.
//! - [`solver`]: the Weber operator, the window map Φ, Picard iteration and
//!   windowed continuation with the guard/restart logic.
//! - [`diagnostics`]: weak-form residuals, small-time pull-back statistics,
//!   Cauchy vorticity residuals, circulation, ∇A growth tracking.
//! - [`scenario`], [`config`], [`io`], [`runner`]: initial data library,
//!   run configuration, FIELD3 snapshots/CSV output, ensemble orchestration.
//! - [`verify`]: the self-check suite used by `cargo test` and the CLI.

pub mod config;
pub mod diagnostics;
mod error;
pub mod field;
mod fft;
pub mod flow;
pub mod grid;
pub mod holder;
pub mod interp;
pub mod io;
pub mod noise;
pub mod ops;
pub mod runner;
pub mod scenario;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use field::{MatrixField, VectorField};
pub use grid::Grid;
