//! Discrete multisymplectic field theory on a 2D rectangular lattice:
//! solving the field equations of a nonlinear scalar field, building and
//! verifying observable currents, their Poisson algebra, weak observable
//! currents from localized measurements, and coarse-graining transfer.
//!
//! The crate is organized along the pipeline:
//!
//! - [`lattice`]: the cell complex, oriented faces, chains and homology.
//! - [`dynamics`]: corner Lagrangians, action, field-equation residuals,
//!   Cartan and multisymplectic coefficients.
//! - [`solver`]: Newton-Dirichlet solves, the explicit march, first
//!   variations, presymplectic linear algebra.
//! - [`currents`]: observable currents, condition checks, Noether and
//!   symplectic-product families, Poisson bracket and product.
//! - [`weakoc`]: weak observable currents, localized measurement,
//!   improvement, separation witnesses.
//! - [`coarse`]: factor-3 refinement, corrected action, transfer of
//!   coarse currents.
//! - [`runner`]: the config-driven experiment harness behind the CLI.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod coarse;
pub mod currents;
pub mod dynamics;
pub mod lattice;
pub mod runner;
pub mod solver;
pub mod weakoc;
