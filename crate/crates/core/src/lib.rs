//! Numerical solvers for relativistic quantum Brownian motion in one dimension.
//!
//! * [`langevin`]: relativistic Langevin ensembles and the Boltzmann-Juttner equilibrium.
//! * [`phase_space`]: relativistic Klein-Kramers and Wigner-Klein-Kramers equations.
//! * [`wavefunction`]: Schrodinger evolution under the Breit-Fermi Hamiltonian and the
//!   relativistically corrected probability flux.
//! * [`madelung`]: dissipative Madelung hydrodynamics and the Bohm quantum potential.
//! * [`smoluchowski`]: overdamped quantum-relativistic diffusion, the linearised
//!   effective potential and the cubic-friction variant.
//!
//! Everything is in natural units by default; [`constants`] holds the SI values.

pub mod constants;
pub mod error;
pub mod grid;
pub mod langevin;
pub mod madelung;
pub mod phase_space;
pub mod potentials;
pub mod quadrature;
pub mod smoluchowski;
pub mod validation;
pub mod wavefunction;

pub use constants::{CodataConstants, PhysicalSystem, UnitSystem, CODATA_2018};
pub use error::{Error, Result};
pub use grid::{Grid, Spectral};
pub use potentials::Potential;

/// Relative density floor below which phases and velocities are treated as undefined.
pub const DENSITY_FLOOR: f64 = 1e-12;
