//! Electronic density of states for incommensurate 2D bilayers.
//!
//! Incommensurate stacks have no Bloch theory, but the thermodynamic-limit
//! DoS still exists and can be written as an integral of local densities of
//! states over relative shifts between the sheets. This crate implements
//! that route end to end:
//!
//! - [`geometry`]: Bravais lattices, ball enumeration, cell folding, shift
//!   grids and equidistribution diagnostics;
//! - [`model`]: tight-binding models with exponentially decaying hoppings,
//!   built-in monolayer graphene and twisted bilayer graphene, Gershgorin
//!   spectral bounds;
//! - [`hamiltonian`]: sparse symmetric cluster operators `H_{r,j}(b)` over
//!   all sites within radius `r`;
//! - [`kpm`]: Jackson-damped Chebyshev moments and LDoS reconstruction, with
//!   a dense eigendecomposition oracle;
//! - [`dos`]: the shift-grid quadrature assembling the total DoS, observables
//!   against it, and radius / kernel-order / grid convergence harnesses;
//! - [`config`] and [`output`]: TOML model files and reproducible CSV.

pub mod config;
pub mod dos;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod kpm;
pub mod model;
pub mod numerics;
pub mod output;

pub use error::{Error, Result};
pub use geometry::{LatticeBasis, ShiftGrid, ShiftVector, SitePoint};
pub use hamiltonian::{assemble, ClusterHamiltonian, DofIndex};
pub use kpm::{
    chebyshev_moments, dense_oracle, jackson_coefficients, reconstruct, KernelCoefficients,
    LdosSample, MomentTable,
};
pub use model::{
    builtin_model, spectral_bound, validate_decay, HoppingFunction, Orbital, OrbitalId, OrbitalSet,
    Sheet, SpectralWindow, TBModel,
};

pub use dos::{
    converge_coupled, converge_r, default_energy_grid, ldos_field, observable,
    quadrature_error_probe, total_dos, ConvergenceReport, DosCurve, Observable,
};
