//! Shared helpers for the integration suites.
#![allow(dead_code)]

use noonforge::device::DeviceParams;
use noonforge::{C64, CMat};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random complex matrix with entries uniform in the unit square.
pub fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
    CMat::from_fn(n, n, |_, _| random_complex(rng))
}

/// Haar-like random unitary via modified Gram-Schmidt on a Gaussian-ish
/// complex matrix. Good enough for property tests; not used for statistics.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
    loop {
        let mut cols: Vec<Vec<C64>> = (0..n)
            .map(|_| (0..n).map(|_| random_complex(rng)).collect())
            .collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let proj: C64 = (0..n).map(|i| cols[k][i].conj() * cols[j][i]).sum();
                for i in 0..n {
                    let t = proj * cols[k][i];
                    cols[j][i] -= t;
                }
            }
            let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for z in &mut cols[j] {
                *z /= norm;
            }
        }
        if ok {
            return CMat::from_fn(n, n, |r, c| cols[c][r]);
        }
    }
}

/// Uniform random device parameters over the full valid box.
pub fn random_params(rng: &mut ChaCha8Rng) -> DeviceParams<f64> {
    DeviceParams::new(
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
    )
    .expect("sampled inside the valid box")
}

/// Frozen optimizer output for the vacuum-herald target (input (1,1,1),
/// herald 0, N = 3), computed once with the default configuration and
/// verified to give p_click = 4/9 and f_noon = 1 to high precision.
pub const VACUUM_OPT: (f64, f64, f64) = (
    7.54326135113959850e-1,
    6.67680978739089603e-1,
    2.50002325518197122e-1,
);

/// Frozen optimizer output for the single-photon-herald target (input
/// (1,2,1), herald 1, N = 3); phases canonicalized to pi.
pub const HERALD1_OPT: (f64, f64, f64) = (
    2.98956497778486319e-1,
    6.68233920084505328e-1,
    std::f64::consts::PI,
);
