//! Simulation and optimization of a double-microring photonic circuit that
//! heralds high-order NOON states.
//!
//! The device is three parallel waveguides (a, b, c) coupled through two
//! micro-ring resonators. Tunable couplings (`tau0`, `tau1`) and ring
//! round-trip phases (`theta1`, `theta2`) shape its unitary 3x3 scattering
//! matrix. Photons entering all three waveguides interfere; detecting a
//! chosen photon count on the central output b leaves the outer modes in a
//! conditional state that, at the right parameters, is a NOON state
//! `(|N,0> + e^{i phi}|0,N>)/sqrt(2)` with certainty.
//!
//! The crate is organized along the pipeline:
//!
//! - [`device`]: junction matrices and the boundary-condition solve that
//!   produces the [`device::ScatteringMatrix`].
//! - [`fock`]: photon-number bases, permanents (Ryser), and the lift of a
//!   scattering matrix to multi-photon sectors.
//! - [`herald`]: projection on a detector outcome, click probability, NOON
//!   fidelity, and the end-to-end [`herald::run_experiment`].
//! - [`optimize`]: grid-seeded multi-start Nelder-Mead searches over the
//!   tunable parameters, parameter sweeps, Pareto fronts, and exploration
//!   of the optimum manifold.
//! - [`nm`]: the underlying bounded simplex minimizer.
//!
//! All numeric code is generic over the scalar type through
//! [`float::Real`] (`f32` or `f64`); the aliases below fix `f64`, which is
//! what the command-line tool and the quoted tolerances assume.

pub mod cmat;
pub mod device;
pub mod error;
pub mod float;
pub mod fock;
pub mod herald;
pub mod nm;
pub mod optimize;

pub use cmat::CMat;
pub use error::{Error, Result};
pub use float::{Real, C};

/// Complex double-precision scalar.
pub type C64 = num_complex::Complex<f64>;

pub type DeviceParams64 = device::DeviceParams<f64>;
pub type ScatteringMatrix64 = device::ScatteringMatrix<f64>;
pub type FockVector64 = fock::FockVector<f64>;
pub type PermanentWorkspace64 = fock::PermanentWorkspace<f64>;
pub type HeraldReport64 = herald::HeraldReport<f64>;
pub type Objective64 = optimize::Objective<f64>;
pub type OptimizationResult64 = optimize::OptimizationResult<f64>;
pub type ManifoldSample64 = optimize::ManifoldSample<f64>;
