//! Fixed-photon-number Fock bases and multi-photon evolution.
//!
//! A lossless linear device with single-photon transfer matrix `U` acts on
//! an n-photon Fock state through matrix permanents: the amplitude to go
//! from occupations `n` to occupations `m` is
//! `Per(U[m, n]) / sqrt(prod n_i! * prod m_j!)`, where `U[m, n]` repeats
//! column i of `U` n_i times and row j m_j times. Permanents are computed
//! exactly with Ryser's formula in Gray-code order, `O(2^k * k)` for a
//! k-photon sector.
//!
//! Basis ordering is part of the public contract: [`enumerate_basis`]
//! lists the compositions of n into the mode count in lexicographically
//! descending occupation order, e.g. for n = 2, modes = 3:
//! `(2,0,0), (1,1,0), (1,0,1), (0,2,0), (0,1,1), (0,0,2)`.

use std::fmt;

use num_complex::Complex;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::Serialize;

use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::float::{Real, C};

/// Default cap on the total photon number per state.
pub const DEFAULT_MAX_PHOTONS: usize = 12;

/// Amplitudes with |amp| below this are omitted from serialized output.
pub const SERIALIZE_AMPLITUDE_FLOOR: f64 = 1e-14;

/// Occupation-number basis element: photons per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockState {
    occ: Vec<u32>,
}

impl FockState {
    pub fn new(occ: Vec<u32>) -> Self {
        Self { occ }
    }

    pub fn from_slice(occ: &[u32]) -> Self {
        Self { occ: occ.to_vec() }
    }

    pub fn occ(&self) -> &[u32] {
        &self.occ
    }

    pub fn modes(&self) -> usize {
        self.occ.len()
    }

    /// Total photon number.
    pub fn total(&self) -> u32 {
        self.occ.iter().sum()
    }

    /// Occupations with `mode` removed.
    pub fn without_mode(&self, mode: usize) -> FockState {
        let mut occ = self.occ.clone();
        occ.remove(mode);
        FockState { occ }
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.occ.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "\u{27e9}")
    }
}

/// Number of compositions of `n` into `modes` parts: C(n + modes - 1, modes - 1).
pub fn sector_dimension(n: usize, modes: usize) -> usize {
    let mut dim = 1usize;
    for i in 0..modes.saturating_sub(1) {
        dim = dim * (n + i + 1) / (i + 1);
    }
    dim
}

/// All occupation vectors with total `n` over `modes` modes, in
/// lexicographically descending order, under the default photon cap.
pub fn enumerate_basis(n: usize, modes: usize) -> Result<Vec<FockState>> {
    enumerate_basis_capped(n, modes, DEFAULT_MAX_PHOTONS)
}

/// [`enumerate_basis`] with an explicit photon cap.
pub fn enumerate_basis_capped(n: usize, modes: usize, max_photons: usize) -> Result<Vec<FockState>> {
    if modes == 0 {
        return Err(Error::Shape("basis needs at least one mode".into()));
    }
    if n > max_photons {
        return Err(Error::Capacity {
            requested: n,
            max: max_photons,
        });
    }
    let mut states = Vec::with_capacity(sector_dimension(n, modes));
    let mut occ = vec![0u32; modes];
    fill_compositions(n as u32, 0, &mut occ, &mut states);
    Ok(states)
}

fn fill_compositions(rest: u32, mode: usize, occ: &mut [u32], out: &mut Vec<FockState>) {
    if mode == occ.len() - 1 {
        occ[mode] = rest;
        out.push(FockState::new(occ.to_vec()));
        return;
    }
    for k in (0..=rest).rev() {
        occ[mode] = k;
        fill_compositions(rest - k, mode + 1, occ, out);
    }
    occ[mode] = 0;
}

/// Index of `state` in the descending-lex basis ordering, if present.
fn basis_index(basis: &[FockState], state: &FockState) -> Option<usize> {
    basis
        .binary_search_by(|probe| state.occ.cmp(&probe.occ))
        .ok()
}

/// Complex amplitude map over one fixed-photon-number sector.
///
/// Amplitudes are stored densely in [`enumerate_basis`] order. Serializes
/// as `{"n": n, "amplitudes": [{"occ": [...], "re": x, "im": y}, ...]}`,
/// omitting entries with |amp| < 1e-14.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<T> {
    total: u32,
    states: Vec<FockState>,
    amps: Vec<C<T>>,
}

impl<T: Real> FockVector<T> {
    /// Zero vector over the `(n, modes)` sector.
    pub fn zero(n: usize, modes: usize) -> Result<Self> {
        let states = enumerate_basis_capped(n, modes, n)?;
        let amps = vec![Complex::new(T::zero(), T::zero()); states.len()];
        Ok(Self {
            total: n as u32,
            states,
            amps,
        })
    }

    /// Unit vector on a single basis state.
    pub fn basis_state(state: &FockState) -> Result<Self> {
        let mut v = Self::zero(state.total() as usize, state.modes())?;
        let idx = basis_index(&v.states, state).expect("state lies in its own sector");
        v.amps[idx] = Complex::new(T::one(), T::zero());
        Ok(v)
    }

    /// Builds a vector from dense amplitudes in basis order.
    pub fn from_amplitudes(n: usize, modes: usize, amps: Vec<C<T>>) -> Result<Self> {
        let states = enumerate_basis_capped(n, modes, n)?;
        if states.len() != amps.len() {
            return Err(Error::Shape(format!(
                "sector ({n}, {modes}) has {} states, got {} amplitudes",
                states.len(),
                amps.len()
            )));
        }
        Ok(Self {
            total: n as u32,
            states,
            amps,
        })
    }

    /// Total photon number of the sector.
    pub fn n(&self) -> u32 {
        self.total
    }

    pub fn modes(&self) -> usize {
        self.states.first().map_or(0, |s| s.modes())
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    /// Amplitude of `state`; zero when `state` is outside the sector.
    pub fn amplitude(&self, state: &FockState) -> C<T> {
        basis_index(&self.states, state)
            .map(|i| self.amps[i])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Overwrites the amplitude of one basis state.
    pub fn set_amplitude(&mut self, state: &FockState, amp: C<T>) -> Result<()> {
        match basis_index(&self.states, state) {
            Some(i) => {
                self.amps[i] = amp;
                Ok(())
            }
            None => Err(Error::SectorMismatch {
                expected: self.total as usize,
                actual: state.total() as usize,
            }),
        }
    }

    /// Multiplies every amplitude by a real factor.
    pub fn scale(&mut self, factor: T) {
        for a in &mut self.amps {
            *a = a.scale(factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockState, C<T>)> {
        self.states.iter().zip(self.amps.iter().copied())
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm; leaves the zero vector untouched.
    pub fn normalize(&mut self) {
        let n2 = self.norm_sqr();
        if n2 > T::zero() {
            let inv = T::one() / n2.sqrt();
            for a in &mut self.amps {
                *a = a.scale(inv);
            }
        }
    }
}

impl<T: Real + Serialize> Serialize for FockVector<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a, T> {
            occ: &'a [u32],
            re: T,
            im: T,
        }

        struct Amps<'a, T>(&'a FockVector<T>);

        impl<T: Real + Serialize> Serialize for Amps<'_, T> {
            fn serialize<S: serde::Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let floor = T::of(SERIALIZE_AMPLITUDE_FLOOR);
                let mut seq = serializer.serialize_seq(None)?;
                for (state, amp) in self.0.iter() {
                    if amp.norm() >= floor {
                        seq.serialize_element(&Entry {
                            occ: state.occ(),
                            re: amp.re,
                            im: amp.im,
                        })?;
                    }
                }
                seq.end()
            }
        }

        let mut st = serializer.serialize_struct("FockVector", 2)?;
        st.serialize_field("n", &self.total)?;
        st.serialize_field("amplitudes", &Amps(self))?;
        st.end()
    }
}

/// Reusable scratch buffers for permanent evaluation and Fock evolution.
///
/// Holds no semantic state between calls; one workspace per worker for
/// parallel sweeps. Also carries the configured photon cap.
#[derive(Debug, Clone)]
pub struct PermanentWorkspace<T> {
    max_photons: usize,
    row_sums: Vec<C<T>>,
    sub: Vec<C<T>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl<T: Real> PermanentWorkspace<T> {
    pub fn new() -> Self {
        Self::with_max_photons(DEFAULT_MAX_PHOTONS)
    }

    pub fn with_max_photons(max_photons: usize) -> Self {
        Self {
            max_photons,
            row_sums: Vec::with_capacity(max_photons),
            sub: Vec::with_capacity(max_photons * max_photons),
            rows: Vec::with_capacity(max_photons),
            cols: Vec::with_capacity(max_photons),
        }
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }
}

impl<T: Real> Default for PermanentWorkspace<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Largest permanent dimension supported by the Gray-code subset mask.
pub const MAX_PERMANENT_DIM: usize = 63;

/// Permanent of a square complex matrix via Ryser's formula with Gray-code
/// subset ordering.
pub fn permanent<T: Real>(m: &CMat<T>) -> Result<C<T>> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "permanent needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let k = m.rows();
    if k > MAX_PERMANENT_DIM {
        return Err(Error::Capacity {
            requested: k,
            max: MAX_PERMANENT_DIM,
        });
    }
    let mut row_sums = vec![Complex::new(T::zero(), T::zero()); k];
    Ok(ryser(m.entries(), k, &mut row_sums))
}

/// Ryser-with-Gray-code kernel over a row-major k*k slice.
///
/// `Per(A) = sum over non-empty column subsets S of
/// (-1)^(k - |S|) * prod_i sum_{j in S} A[i][j]`; the Gray-code walk updates
/// one column per step.
fn ryser<T: Real>(flat: &[C<T>], k: usize, row_sums: &mut [C<T>]) -> C<T> {
    if k == 0 {
        return Complex::new(T::one(), T::zero());
    }
    let zero = Complex::new(T::zero(), T::zero());
    row_sums[..k].fill(zero);

    let mut total = zero;
    for g in 1u64..(1u64 << k) {
        let j = g.trailing_zeros() as usize;
        let gray = g ^ (g >> 1);
        let added = gray & (1 << j) != 0;
        if added {
            for (i, rs) in row_sums[..k].iter_mut().enumerate() {
                *rs += flat[i * k + j];
            }
        } else {
            for (i, rs) in row_sums[..k].iter_mut().enumerate() {
                *rs -= flat[i * k + j];
            }
        }
        let mut prod = Complex::new(T::one(), T::zero());
        for rs in &row_sums[..k] {
            prod *= *rs;
        }
        if (k as u32 - gray.count_ones()) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Exact factorial as `f64` (exact for n <= 18, ample for photon caps here).
fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

fn occupation_factorial_product(occ: &[u32]) -> f64 {
    occ.iter().map(|&n| factorial(n)).product()
}

/// Evolves an input Fock state through the single-photon transfer matrix `u`.
///
/// `u` must be square with one row/column per mode. For unitary `u` the
/// output is normalized (photon number is conserved exactly: amplitudes
/// only appear inside the input's photon-number sector).
pub fn evolve<T: Real>(
    u: &CMat<T>,
    input: &FockState,
    ws: &mut PermanentWorkspace<T>,
) -> Result<FockVector<T>> {
    if !u.is_square() || u.rows() != input.modes() {
        return Err(Error::Shape(format!(
            "transfer matrix is {}x{}, input has {} modes",
            u.rows(),
            u.cols(),
            input.modes()
        )));
    }
    let n = input.total() as usize;
    if n > ws.max_photons {
        return Err(Error::Capacity {
            requested: n,
            max: ws.max_photons,
        });
    }

    let basis = enumerate_basis_capped(n, input.modes(), ws.max_photons)?;

    ws.cols.clear();
    for (mode, &occ) in input.occ().iter().enumerate() {
        ws.cols.extend(std::iter::repeat(mode).take(occ as usize));
    }
    let fact_in = occupation_factorial_product(input.occ());

    ws.row_sums
        .resize(n.max(1), Complex::new(T::zero(), T::zero()));
    ws.sub.resize(n * n, Complex::new(T::zero(), T::zero()));

    let mut amps = Vec::with_capacity(basis.len());
    for out in &basis {
        ws.rows.clear();
        for (mode, &occ) in out.occ().iter().enumerate() {
            ws.rows.extend(std::iter::repeat(mode).take(occ as usize));
        }
        for (r, &row) in ws.rows.iter().enumerate() {
            for (c, &col) in ws.cols.iter().enumerate() {
                ws.sub[r * n + c] = u[(row, col)];
            }
        }
        let per = ryser(&ws.sub, n, &mut ws.row_sums);
        let denom = (fact_in * occupation_factorial_product(out.occ())).sqrt();
        amps.push(per.scale(T::one() / T::of(denom)));
    }

    Ok(FockVector {
        total: n as u32,
        states: basis,
        amps,
    })
}

/// Full transfer matrix of `u` on the n-photon sector.
///
/// Row r, column c holds the amplitude from `enumerate_basis(n)[c]` to
/// `enumerate_basis(n)[r]`; unitary input gives a unitary sector matrix.
pub fn evolve_all<T: Real>(
    u: &CMat<T>,
    n: usize,
    ws: &mut PermanentWorkspace<T>,
) -> Result<CMat<T>> {
    let basis = enumerate_basis_capped(n, u.rows(), ws.max_photons)?;
    let dim = basis.len();
    let mut out = CMat::zeros(dim, dim);
    for (c, state) in basis.iter().enumerate() {
        let column = evolve(u, state, ws)?;
        for r in 0..dim {
            out[(r, c)] = column.amps[r];
        }
    }
    Ok(out)
}
