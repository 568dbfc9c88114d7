//! Scattering matrix of the double-ring, triple-waveguide device.
//!
//! Three parallel waveguides (a, b, c) couple to two micro-ring resonators:
//! waveguide a to the upper ring and waveguide c to the lower ring through
//! identical 2x2 directional couplers with transmission `tau0`, and both
//! rings to waveguide b through a single central 3-mode junction with
//! transmission parameter `tau1`. Each ring carries a round-trip phase
//! `theta_j`, split between its two arcs.
//!
//! [`build_smatrix`] eliminates the four internal ring-arc amplitudes by
//! solving the junction boundary conditions, yielding the unitary 3x3 map
//! from input to output mode amplitudes. Mode order is (a, b, c) for both
//! rows (outputs) and columns (inputs), project-wide.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::float::{Real, C};

/// Condition-number limit above which the boundary solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// The tunable parameter vector of the device.
///
/// `tau0` is the amplitude transmission of both outer directional couplers,
/// `tau1` the transmission parameter of the central 3-mode junction, and
/// `theta1`, `theta2` the round-trip phases of the upper and lower ring.
/// Phases are reduced to `[0, 2*pi)` on construction. The combination
/// `tau0 = 1`, `theta = 0` makes the ring boundary system singular and is
/// rejected by [`build_smatrix`] with [`Error::DegenerateDevice`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeviceParams<T>")]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct DeviceParams<T> {
    tau0: T,
    tau1: T,
    theta1: T,
    theta2: T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeviceParams<T> {
    tau0: T,
    tau1: T,
    theta1: T,
    theta2: T,
}

impl<T: Real> TryFrom<RawDeviceParams<T>> for DeviceParams<T> {
    type Error = Error;

    fn try_from(raw: RawDeviceParams<T>) -> Result<Self> {
        Self::new(raw.tau0, raw.tau1, raw.theta1, raw.theta2)
    }
}

fn check_unit_range<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value >= T::zero() && value <= T::one() {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value: value.as_f64(),
            min: 0.0,
            max: 1.0,
        })
    }
}

/// Reduces an angle to `[0, 2*pi)`.
fn wrap_angle<T: Real>(theta: T) -> T {
    let tau = T::TAU();
    let mut t = theta % tau;
    if t < T::zero() {
        t += tau;
    }
    // `theta % tau` can round up to tau itself for values just below a
    // multiple of 2*pi.
    if t >= tau {
        t -= tau;
    }
    t
}

impl<T: Real> DeviceParams<T> {
    pub fn new(tau0: T, tau1: T, theta1: T, theta2: T) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::OutOfRange {
                name: "theta",
                value: if theta1.is_finite() {
                    theta2.as_f64()
                } else {
                    theta1.as_f64()
                },
                min: f64::NEG_INFINITY,
                max: f64::INFINITY,
            });
        }
        Ok(Self {
            tau0: check_unit_range("tau0", tau0)?,
            tau1: check_unit_range("tau1", tau1)?,
            theta1: wrap_angle(theta1),
            theta2: wrap_angle(theta2),
        })
    }

    /// Both ring phases tied to a single `theta`.
    pub fn tied(tau0: T, tau1: T, theta: T) -> Result<Self> {
        Self::new(tau0, tau1, theta, theta)
    }

    pub fn tau0(&self) -> T {
        self.tau0
    }

    pub fn tau1(&self) -> T {
        self.tau1
    }

    pub fn theta1(&self) -> T {
        self.theta1
    }

    pub fn theta2(&self) -> T {
        self.theta2
    }
}

/// 2x2 directional-coupler matrix `[[tau, kappa], [-kappa, tau]]`.
///
/// `kappa = sqrt(1 - tau^2)` is chosen real and non-negative; any coupler
/// phase is a gauge already absorbed by the ring round-trip phase.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionMatrix2<T> {
    entries: CMat<T>,
}

impl<T: Real> JunctionMatrix2<T> {
    pub fn entries(&self) -> &CMat<T> {
        &self.entries
    }

    pub fn unitarity_residual(&self) -> T {
        self.entries.unitarity_residual()
    }
}

/// Central 3-mode junction matrix, parametrized by `tau1`.
///
/// With `k = sqrt(2*tau1*(1 - tau1))` the matrix is
///
/// ```text
/// [ tau1      -k      tau1 - 1 ]
/// [ -k      1 - 2*tau1    -k   ]
/// [ tau1 - 1  -k        tau1   ]
/// ```
///
/// The off-diagonal sign pattern is forced by orthogonality together with
/// the symmetric-transition assumption: the three independent off-diagonal
/// phase factors must sum to pi, realized here as three negative signs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionMatrix3<T> {
    entries: [[T; 3]; 3],
}

impl<T: Real> JunctionMatrix3<T> {
    pub fn entries(&self) -> &[[T; 3]; 3] {
        &self.entries
    }

    pub fn entry(&self, r: usize, c: usize) -> T {
        self.entries[r][c]
    }

    /// Max-norm of `M^T M - I`.
    pub fn orthogonality_residual(&self) -> T {
        let m = CMat::from_fn(3, 3, |r, c| Complex::new(self.entries[r][c], T::zero()));
        m.unitarity_residual()
    }
}

/// Builds the outer directional coupler for transmission `tau0 in [0, 1]`.
pub fn coupler2<T: Real>(tau0: T) -> Result<JunctionMatrix2<T>> {
    let tau0 = check_unit_range("tau0", tau0)?;
    let kappa = (T::one() - tau0 * tau0).max(T::zero()).sqrt();
    let re = |x: T| Complex::new(x, T::zero());
    let entries = CMat::from_fn(2, 2, |r, c| match (r, c) {
        (0, 0) | (1, 1) => re(tau0),
        (0, 1) => re(kappa),
        _ => re(-kappa),
    });
    Ok(JunctionMatrix2 { entries })
}

/// Builds the central 3-mode junction for `tau1 in [0, 1]`.
pub fn junction3<T: Real>(tau1: T) -> Result<JunctionMatrix3<T>> {
    let tau1 = check_unit_range("tau1", tau1)?;
    let two = T::of(2.0);
    let k = (two * tau1 * (T::one() - tau1)).max(T::zero()).sqrt();
    let entries = [
        [tau1, -k, tau1 - T::one()],
        [-k, T::one() - two * tau1, -k],
        [tau1 - T::one(), -k, tau1],
    ];
    Ok(JunctionMatrix3 { entries })
}

/// How each ring's round-trip phase is split between its two arcs.
///
/// `ring1`/`ring2` give the fraction of `theta_j` picked up on the arc from
/// the outer coupler to the central junction; the remainder sits on the
/// return arc. The split is a gauge choice: it changes scattering-matrix
/// entries only by diagonal phases and leaves every |S_ij| invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPhaseSplit<T> {
    pub ring1: T,
    pub ring2: T,
}

impl<T: Real> Default for ArcPhaseSplit<T> {
    fn default() -> Self {
        Self {
            ring1: T::of(0.5),
            ring2: T::of(0.5),
        }
    }
}

/// The device's 3x3 unitary scattering matrix together with the parameters
/// it was built from.
///
/// Serializes as the row-major list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix<T> {
    entries: CMat<T>,
    params: DeviceParams<T>,
}

impl<T: Real> ScatteringMatrix<T> {
    pub fn matrix(&self) -> &CMat<T> {
        &self.entries
    }

    pub fn entry(&self, r: usize, c: usize) -> C<T> {
        self.entries[(r, c)]
    }

    pub fn params(&self) -> &DeviceParams<T> {
        &self.params
    }

    /// Max-norm of `S†S - I`.
    pub fn unitarity_residual(&self) -> T {
        self.entries.unitarity_residual()
    }
}

impl<T: Real + Serialize> Serialize for ScatteringMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(9))?;
        for e in self.entries.entries() {
            seq.serialize_element(&[e.re, e.im])?;
        }
        seq.end()
    }
}

/// Builds the scattering matrix with the default half/half arc-phase split.
///
/// Deterministic and reproducible bit-for-bit for fixed parameters. Fails
/// with [`Error::DegenerateDevice`] when the internal boundary system has a
/// condition number above [`CONDITION_LIMIT`].
pub fn build_smatrix<T: Real>(params: &DeviceParams<T>) -> Result<ScatteringMatrix<T>> {
    build_smatrix_split(params, &ArcPhaseSplit::default())
}

/// [`build_smatrix`] with an explicit arc-phase split (gauge choice).
pub fn build_smatrix_split<T: Real>(
    params: &DeviceParams<T>,
    split: &ArcPhaseSplit<T>,
) -> Result<ScatteringMatrix<T>> {
    check_unit_range("split.ring1", split.ring1)?;
    check_unit_range("split.ring2", split.ring2)?;

    let tau0 = params.tau0;
    let tau1 = params.tau1;
    let kappa = (T::one() - tau0 * tau0).max(T::zero()).sqrt();
    let kp = (T::of(2.0) * tau1 * (T::one() - tau1)).max(T::zero()).sqrt();

    let phase = |x: T| Complex::from_polar(T::one(), x);
    // Forward arc: outer coupler -> central junction. Return arc: back.
    let f1 = phase(split.ring1 * params.theta1);
    let r1 = phase((T::one() - split.ring1) * params.theta1);
    let f2 = phase(split.ring2 * params.theta2);
    let r2 = phase((T::one() - split.ring2) * params.theta2);

    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let re = |x: T| Complex::new(x, T::zero());

    // Internal unknowns x = (s1, u1, s2, u2): s_j leaves the outer coupler
    // into ring j, u_j leaves the central junction into ring j. Rows:
    //   s1 - tau0*r1*u1                        = -kappa * a_in
    //   -tau1*f1*s1 + u1 - (tau1-1)*f2*s2      = -kp * b_in
    //   s2 - tau0*r2*u2                        = -kappa * c_in
    //   -(tau1-1)*f1*s1 - tau1*f2*s2 + u2      = -kp * b_in
    let g = re(tau1 - T::one());
    let mut a = [
        [one, -r1 * tau0, zero, zero],
        [-f1 * tau1, one, -(f2 * g), zero],
        [zero, zero, one, -r2 * tau0],
        [-(f1 * g), zero, -f2 * tau1, one],
    ];

    let lu = Lu4::factor(&mut a).ok_or_else(|| degenerate_error(params, f64::INFINITY))?;

    let condition = lu.condition_estimate();
    if condition > T::of(CONDITION_LIMIT) {
        return Err(degenerate_error(params, condition.as_f64()));
    }

    let rhs = [
        [re(-kappa), zero, zero, zero],
        [zero, re(-kp), zero, re(-kp)],
        [zero, zero, re(-kappa), zero],
    ];

    let mut entries = CMat::zeros(3, 3);
    for (input, b) in rhs.iter().enumerate() {
        let mut x = *b;
        lu.solve(&mut x);
        let (s1, u1, s2, u2) = (x[0], x[1], x[2], x[3]);
        let delta = |m: usize| if input == m { T::one() } else { T::zero() };
        entries[(0, input)] = re(tau0 * delta(0)) + r1 * u1 * kappa;
        entries[(1, input)] =
            re((T::one() - T::of(2.0) * tau1) * delta(1)) - f1 * s1 * kp - f2 * s2 * kp;
        entries[(2, input)] = re(tau0 * delta(2)) + r2 * u2 * kappa;
    }

    Ok(ScatteringMatrix {
        entries,
        params: *params,
    })
}

fn degenerate_error<T: Real>(params: &DeviceParams<T>, condition: f64) -> Error {
    Error::DegenerateDevice {
        tau0: params.tau0.as_f64(),
        tau1: params.tau1.as_f64(),
        theta1: params.theta1.as_f64(),
        theta2: params.theta2.as_f64(),
        condition,
        limit: CONDITION_LIMIT,
    }
}

/// LU factorization with partial pivoting of the 4x4 boundary system.
struct Lu4<T> {
    lu: [[C<T>; 4]; 4],
    pivots: [usize; 4],
    norm1: T,
}

impl<T: Real> Lu4<T> {
    /// Factors `a` in place; `None` when exactly singular.
    fn factor(a: &mut [[C<T>; 4]; 4]) -> Option<Self> {
        let mut norm1 = T::zero();
        for c in 0..4 {
            let col: T = (0..4).map(|r| a[r][c].norm()).sum();
            norm1 = norm1.max(col);
        }

        let mut pivots = [0usize; 4];
        for k in 0..4 {
            let mut pivot = k;
            let mut best = a[k][k].norm_sqr();
            for i in k + 1..4 {
                let v = a[i][k].norm_sqr();
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best == T::zero() {
                return None;
            }
            pivots[k] = pivot;
            a.swap(k, pivot);
            let inv = a[k][k].inv();
            for i in k + 1..4 {
                let m = a[i][k] * inv;
                a[i][k] = m;
                for j in k + 1..4 {
                    let t = m * a[k][j];
                    a[i][j] -= t;
                }
            }
        }
        Some(Self {
            lu: *a,
            pivots,
            norm1,
        })
    }

    fn solve(&self, b: &mut [C<T>; 4]) {
        for k in 0..4 {
            b.swap(k, self.pivots[k]);
            for i in k + 1..4 {
                let t = self.lu[i][k] * b[k];
                b[i] -= t;
            }
        }
        for k in (0..4).rev() {
            for j in k + 1..4 {
                let t = self.lu[k][j] * b[j];
                b[k] -= t;
            }
            b[k] *= self.lu[k][k].inv();
        }
    }

    /// One-norm condition estimate via the explicit inverse.
    fn condition_estimate(&self) -> T {
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        let mut inv_norm1 = T::zero();
        for c in 0..4 {
            let mut e = [zero; 4];
            e[c] = one;
            self.solve(&mut e);
            let col: T = e.iter().map(|x| x.norm()).sum();
            inv_norm1 = inv_norm1.max(col);
        }
        self.norm1 * inv_norm1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const TOL: f64 = 1e-12;

    #[test]
    fn params_reject_out_of_range_tau() {
        assert!(DeviceParams::tied(1.2, 0.5, 0.0).is_err());
        assert!(DeviceParams::tied(-0.1, 0.5, 0.0).is_err());
        assert!(DeviceParams::tied(0.5, 1.0001, 0.0).is_err());
    }

    #[test]
    fn params_wrap_theta_into_principal_range() {
        let p = DeviceParams::tied(0.5, 0.5, -std::f64::consts::PI).unwrap();
        assert!((p.theta1() - std::f64::consts::PI).abs() < TOL);
        let q = DeviceParams::tied(0.5, 0.5, 2.0 * std::f64::consts::TAU + 1.0).unwrap();
        assert!((q.theta1() - 1.0).abs() < TOL);
        assert!(q.theta1() >= 0.0 && q.theta1() < std::f64::consts::TAU);
    }

    #[test]
    fn coupler2_fully_transmitting_is_identity() {
        let u = coupler2(1.0f64).unwrap();
        assert!(u.entries().max_abs_diff(&CMat::identity(2)) < TOL);
    }

    #[test]
    fn coupler2_fully_cross_coupling() {
        let u = coupler2(0.0f64).unwrap();
        assert_eq!(u.entries()[(0, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(u.entries()[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(u.entries()[(1, 0)], Complex64::new(-1.0, 0.0));
        assert_eq!(u.entries()[(1, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coupler2_balanced_is_unitary_to_machine_precision() {
        let u = coupler2(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((u.entries()[(0, 1)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(u.unitarity_residual() < 1e-15);
    }

    #[test]
    fn coupler2_rejects_out_of_range() {
        assert!(coupler2(1.5f64).is_err());
        assert!(coupler2(-0.5f64).is_err());
    }

    #[test]
    fn junction3_at_one_is_diag_signature() {
        let u = junction3(1.0f64).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((u.entry(r, c) - expect[r][c]).abs() < TOL);
            }
        }
    }

    #[test]
    fn junction3_at_zero_is_corner_swap() {
        let u = junction3(0.0f64).unwrap();
        let expect = [[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((u.entry(r, c) - expect[r][c]).abs() < TOL);
            }
        }
    }

    #[test]
    fn junction3_at_half_has_zero_center() {
        let u = junction3(0.5f64).unwrap();
        assert!(u.entry(1, 1).abs() < TOL);
        assert!((u.entry(0, 1).abs() - 0.5f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn junction3_orthogonal_on_dense_grid() {
        for i in 0..=1000 {
            let tau1 = i as f64 / 1000.0;
            let u = junction3(tau1).unwrap();
            assert!(
                u.orthogonality_residual() < 1e-14,
                "residual {} at tau1 = {}",
                u.orthogonality_residual(),
                tau1
            );
        }
    }

    #[test]
    fn junction3_rejects_out_of_range() {
        assert!(junction3(-0.01f64).is_err());
        assert!(junction3(1.01f64).is_err());
    }

    #[test]
    fn smatrix_all_pass_when_central_junction_closed() {
        // tau1 = 1 decouples both rings from b; each ring becomes an
        // all-pass filter with the textbook response
        // (tau0 - e^{i theta}) / (1 - tau0 e^{i theta}), and b flips sign.
        let tau0 = 0.7;
        let theta1 = 1.3;
        let theta2 = 2.1;
        let p = DeviceParams::new(tau0, 1.0, theta1, theta2).unwrap();
        let s = build_smatrix(&p).unwrap();

        let all_pass = |theta: f64| {
            let e = Complex64::from_polar(1.0, theta);
            (Complex64::new(tau0, 0.0) - e) / (Complex64::new(1.0, 0.0) - e * tau0)
        };
        assert!((s.entry(0, 0) - all_pass(theta1)).norm() < TOL);
        assert!((s.entry(1, 1) - Complex64::new(-1.0, 0.0)).norm() < TOL);
        assert!((s.entry(2, 2) - all_pass(theta2)).norm() < TOL);
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert!(s.entry(r, c).norm() < TOL);
                }
            }
        }
        assert!((s.entry(0, 0).norm() - 1.0).abs() < TOL);
        assert!((s.entry(2, 2).norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn smatrix_outer_waveguides_decouple_at_full_transmission() {
        let p = DeviceParams::new(1.0, 0.37, 0.9, 2.5).unwrap();
        let s = build_smatrix(&p).unwrap();
        for (r, c) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
            assert!(s.entry(r, c).norm() < TOL, "S[{r}][{c}] = {}", s.entry(r, c));
        }
        assert!((s.entry(0, 0).norm() - 1.0).abs() < TOL);
        assert!((s.entry(2, 2).norm() - 1.0).abs() < TOL);
        assert!((s.entry(1, 1).norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn smatrix_reported_operating_point_is_unitary() {
        let p = DeviceParams::tied(0.52, 0.54, std::f64::consts::PI).unwrap();
        let s = build_smatrix(&p).unwrap();
        assert!(s.unitarity_residual() < 1e-10);
    }

    #[test]
    fn smatrix_degenerate_corner_is_refused() {
        let p = DeviceParams::tied(1.0, 1.0, 0.0).unwrap();
        match build_smatrix(&p) {
            Err(Error::DegenerateDevice { .. }) => {}
            other => panic!("expected degenerate-device error, got {other:?}"),
        }
        let q = DeviceParams::tied(1.0, 0.5, 0.0).unwrap();
        assert!(matches!(
            build_smatrix(&q),
            Err(Error::DegenerateDevice { .. })
        ));
    }

    #[test]
    fn smatrix_deterministic_bit_for_bit() {
        let p = DeviceParams::tied(0.52, 0.54, 3.1).unwrap();
        let a = build_smatrix(&p).unwrap();
        let b = build_smatrix(&p).unwrap();
        assert_eq!(a.matrix().entries(), b.matrix().entries());
    }

    #[test]
    fn device_params_json_round_trip() {
        let p = DeviceParams::new(0.52, 0.54, 3.14, 3.14).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"tau0":0.52,"tau1":0.54,"theta1":3.14,"theta2":3.14}"#
        );
        let q: DeviceParams<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn device_params_json_rejects_unknown_fields_and_bad_ranges() {
        let unknown = r#"{"tau0":0.5,"tau1":0.5,"theta1":0.0,"theta2":0.0,"loss":0.1}"#;
        assert!(serde_json::from_str::<DeviceParams<f64>>(unknown).is_err());
        let bad = r#"{"tau0":1.5,"tau1":0.5,"theta1":0.0,"theta2":0.0}"#;
        assert!(serde_json::from_str::<DeviceParams<f64>>(bad).is_err());
    }

    #[test]
    fn smatrix_serializes_as_row_major_re_im_pairs() {
        let p = DeviceParams::tied(1.0, 1.0, 1.0).unwrap();
        let s = build_smatrix(&p).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 9);
        assert_eq!(arr[0].as_array().unwrap().len(), 2);
        // S[1][1] = -1 at tau1 = 1.
        assert!((arr[4][0].as_f64().unwrap() + 1.0).abs() < TOL);
    }
}
