//! Heralded post-selection on the central mode.
//!
//! A number-resolving detector on one mode projects the device output onto
//! a definite photon count there; the surviving amplitudes form the
//! conditional state on the remaining modes. [`run_experiment`] chains
//! scattering-matrix construction, Fock evolution, projection, and NOON
//! fidelity into one report.

use serde::{Deserialize, Serialize};

use crate::device::{build_smatrix, DeviceParams};
use crate::error::{Error, Result};
use crate::fock::{evolve, FockState, FockVector, PermanentWorkspace};
use crate::float::Real;

/// A herald outcome: exactly `count` photons detected on mode `mode`.
///
/// Detection is assumed perfectly number-resolving. The CLI fixes
/// `mode = 1` (the central waveguide b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeraldSpec {
    pub mode: usize,
    pub count: u32,
}

impl HeraldSpec {
    /// Herald on the central mode of the three-waveguide device.
    pub fn on_central(count: u32) -> Self {
        Self { mode: 1, count }
    }
}

/// Projects `out` onto the herald outcome.
///
/// Returns the click probability (squared norm of the matching component)
/// and the renormalized conditional state over the remaining modes. A
/// herald that matches nothing yields probability zero and the zero vector.
pub fn project_herald<T: Real>(
    out: &FockVector<T>,
    herald: &HeraldSpec,
) -> Result<(T, FockVector<T>)> {
    let modes = out.modes();
    if modes < 2 {
        return Err(Error::Shape(
            "projection needs at least two modes".into(),
        ));
    }
    if herald.mode >= modes {
        return Err(Error::ModeIndex {
            mode: herald.mode,
            modes,
        });
    }
    if herald.count > out.n() {
        return Err(Error::HeraldCount {
            count: herald.count as usize,
            total: out.n() as usize,
        });
    }

    let remaining = (out.n() - herald.count) as usize;
    let mut conditional = FockVector::zero(remaining, modes - 1)?;
    let mut p_click = T::zero();
    for (state, amp) in out.iter() {
        if state.occ()[herald.mode] == herald.count {
            p_click += amp.norm_sqr();
            let reduced = state.without_mode(herald.mode);
            conditional
                .set_amplitude(&reduced, amp)
                .expect("reduced state lies in the conditional sector");
        }
    }
    if p_click > T::zero() {
        let inv = T::one() / p_click.sqrt();
        conditional.scale(inv);
    }
    Ok((p_click, conditional))
}

/// Squared overlap with the ideal two-mode NOON state of order `n`,
/// maximized over the unobservable relative phase:
/// `(|c_{n,0}| + |c_{0,n}|)^2 / 2`.
pub fn noon_fidelity<T: Real>(conditional: &FockVector<T>, n: u32) -> Result<T> {
    if conditional.modes() != 2 {
        return Err(Error::Shape(format!(
            "NOON fidelity is defined on two modes, state has {}",
            conditional.modes()
        )));
    }
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    if conditional.n() != n {
        return Err(Error::SectorMismatch {
            expected: n as usize,
            actual: conditional.n() as usize,
        });
    }
    let c_n0 = conditional.amplitude(&FockState::from_slice(&[n, 0])).norm();
    let c_0n = conditional.amplitude(&FockState::from_slice(&[0, n])).norm();
    let s = c_n0 + c_0n;
    Ok(s * s / T::of(2.0))
}

/// Outcome of one heralded run: click probability, conditional state over
/// the outer modes, and its NOON fidelity.
///
/// `f_noon` is `None` (serialized as `null`) when the herald outcome has
/// zero probability: an impossible herald has no conditional state, which
/// is distinct from a conditional state with zero NOON overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct HeraldReport<T> {
    pub p_click: T,
    pub f_noon: Option<T>,
    pub n_target: u32,
    pub conditional: FockVector<T>,
    pub params: DeviceParams<T>,
}

/// Runs the full pipeline: build S, evolve the input, herald, score.
///
/// The input must occupy the device's three modes and satisfy
/// `total photons = n_target + herald.count` so the conditional state lives
/// in the NOON sector being scored.
pub fn run_experiment<T: Real>(
    params: &DeviceParams<T>,
    input: &FockState,
    herald: &HeraldSpec,
    n_target: u32,
    ws: &mut PermanentWorkspace<T>,
) -> Result<HeraldReport<T>> {
    if input.modes() != 3 {
        return Err(Error::Shape(format!(
            "device input needs 3 modes, got {}",
            input.modes()
        )));
    }
    let expected = (n_target + herald.count) as usize;
    if input.total() as usize != expected {
        return Err(Error::SectorMismatch {
            expected,
            actual: input.total() as usize,
        });
    }

    let s = build_smatrix(params)?;
    let out = evolve(s.matrix(), input, ws)?;
    let (p_click, conditional) = project_herald(&out, herald)?;
    // Fidelity is undefined for an impossible herald and for the trivial
    // zero-photon target.
    let f_noon = if p_click > T::zero() && n_target > 0 {
        Some(noon_fidelity(&conditional, n_target)?)
    } else {
        None
    };
    Ok(HeraldReport {
        p_click,
        f_noon,
        n_target,
        conditional,
        params: *params,
    })
}
