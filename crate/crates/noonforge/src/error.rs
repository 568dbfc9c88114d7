//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Numeric values are reported as `f64` regardless of the scalar the
/// computation ran at.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter fell outside its documented range.
    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// The ring boundary-condition system is numerically singular for these
    /// parameters (lossless all-pass denominators vanish, e.g. tau0 = 1 with
    /// theta = 0), so no trustworthy scattering matrix exists.
    #[error(
        "degenerate device: boundary system condition number {condition:.3e} exceeds {limit:.1e} \
         at tau0={tau0}, tau1={tau1}, theta1={theta1}, theta2={theta2}"
    )]
    DegenerateDevice {
        tau0: f64,
        tau1: f64,
        theta1: f64,
        theta2: f64,
        condition: f64,
        limit: f64,
    },

    /// Photon number (or matrix dimension derived from it) above the
    /// configured maximum.
    #[error("photon number {requested} exceeds the configured maximum {max}")]
    Capacity { requested: usize, max: usize },

    /// A matrix or state had the wrong shape for the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A state lives in a different photon-number sector than required.
    #[error("photon-number sector mismatch: expected {expected}, got {actual}")]
    SectorMismatch { expected: usize, actual: usize },

    /// Herald photon count incompatible with the state being projected.
    #[error("herald count {count} exceeds sector photon number {total}")]
    HeraldCount { count: usize, total: usize },

    /// Mode index out of range.
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeIndex { mode: usize, modes: usize },

    /// A sweep grid with more points than the hard limit.
    #[error("sweep grid of {points} points exceeds the {max}-point limit")]
    GridTooLarge { points: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
