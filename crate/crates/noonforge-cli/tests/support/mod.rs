//! Helpers shared by the acceptance suite.
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

pub fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
    CMat::from_fn(n, n, |_, _| random_complex(rng))
}

/// Haar-like random unitary via modified Gram-Schmidt.
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

pub fn random_params(rng: &mut ChaCha8Rng) -> DeviceParams<f64> {
    DeviceParams::new(
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
    )
    .expect("sampled inside the valid box")
}

/// Brute-force permanent via Heap's permutation algorithm.
pub fn naive_permanent(m: &CMat<f64>) -> C64 {
    let k = m.rows();
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut counters = vec![0usize; k];

    let product = |perm: &[usize]| -> C64 {
        let mut prod = C64::new(1.0, 0.0);
        for (row, &col) in perm.iter().enumerate() {
            prod *= m[(row, col)];
        }
        prod
    };

    total += product(&perm);
    let mut i = 0;
    while i < k {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            total += product(&perm);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    total
}
