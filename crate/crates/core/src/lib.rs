//! Fully implicit finite element scheme for the stochastic Cahn–Hilliard–Cook
//! equation with additive Q-Wiener noise.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs; IO, configuration and parallel Monte Carlo
//! orchestration live in the `chc` companion crate.
//!
//! Layout:
//! - [`spectral`]: Neumann Laplacian eigenpairs on intervals and rectangles,
//!   fractional norms and the exact semigroup `E(t) = exp(-t A^2)`.
//! - [`mesh`], [`fem`], [`eigen`]: P1 triangulations, mass/stiffness assembly,
//!   `L2` and Ritz projections, the discrete Laplacian and its spectrum.
//! - [`potential`]: quartic potentials and their structural constants.
//! - [`noise`]: counter-based Q-Wiener increments with level coupling.
//! - [`stepper`]: the backward Euler step solved by Newton in mixed form.
//! - [`rates`]: log-log regression for convergence studies.
#![no_std]
// `num_traits::Float` supplies float methods under no_std; with std linked it goes unused
#![allow(unused_imports)]

extern crate alloc;

pub mod eigen;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod noise;
pub mod potential;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod stepper;

pub use eigen::DiscreteSpectrum;
pub use error::{Error, Result};
pub use fem::{FemFunction, OperatorSet};
pub use mesh::Mesh;
pub use noise::{NoiseSpec, WienerIncrements};
pub use potential::Potential;
pub use spectral::{DomainSpec, EigenBasis, SpectralField};
pub use stepper::{State, StepDiagnostics, Stepper, StepperConfig};
