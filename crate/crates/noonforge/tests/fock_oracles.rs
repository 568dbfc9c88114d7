//! Fock evolution checked against independent oracles: brute-force
//! permutation-sum permanents and direct polynomial expansion of creation
//! operators.

mod common;

use std::collections::HashMap;

use common::{random_matrix, random_unitary, rng};
use itertools::Itertools;
use noonforge::fock::{
    enumerate_basis, evolve, evolve_all, permanent, FockState, PermanentWorkspace,
};
use noonforge::{C64, CMat};

/// Brute-force permanent: sum over all permutations.
fn naive_permanent(m: &CMat<f64>) -> C64 {
    let k = m.rows();
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for perm in (0..k).permutations(k) {
        let mut prod = C64::new(1.0, 0.0);
        for (row, &col) in perm.iter().enumerate() {
            prod *= m[(row, col)];
        }
        total += prod;
    }
    total
}

/// Direct expansion oracle: applies `prod_i (sum_m U[m][i] a_m^dag)^{n_i}`
/// to the vacuum by explicit polynomial multiplication, then normalizes by
/// `sqrt(prod n_i!)`. Completely independent of the permanent route.
fn expand_creation_operators(u: &CMat<f64>, input: &[u32]) -> HashMap<Vec<u32>, C64> {
    let modes = input.len();
    let mut state: HashMap<Vec<u32>, C64> = HashMap::new();
    state.insert(vec![0u32; modes], C64::new(1.0, 0.0));
    for (mode, &count) in input.iter().enumerate() {
        for _ in 0..count {
            let mut next: HashMap<Vec<u32>, C64> = HashMap::new();
            for (occ, amp) in &state {
                for m in 0..modes {
                    // a^dag on |k> gives sqrt(k+1) |k+1>.
                    let mut occ2 = occ.clone();
                    occ2[m] += 1;
                    let coeff = u[(m, mode)] * amp * (occ[m] as f64 + 1.0).sqrt();
                    *next.entry(occ2).or_insert(C64::new(0.0, 0.0)) += coeff;
                }
            }
            state = next;
        }
    }
    let norm: f64 = input
        .iter()
        .map(|&n| (1..=n as u64).map(|x| x as f64).product::<f64>())
        .product::<f64>()
        .sqrt();
    for amp in state.values_mut() {
        *amp /= norm;
    }
    state
}

#[test]
fn ryser_matches_naive_permutation_sum_up_to_5() {
    let mut r = rng(0xf0c1);
    for k in 1..=5 {
        for _ in 0..50 {
            let m = random_matrix(k, &mut r);
            let fast = permanent(&m).unwrap();
            let slow = naive_permanent(&m);
            let denom = slow.norm().max(1e-30);
            assert!(
                (fast - slow).norm() / denom < 1e-12,
                "k = {k}: ryser {fast} vs naive {slow}"
            );
        }
    }
}

#[test]
fn permanent_is_multilinear_in_rows() {
    let mut r = rng(0xf0c2);
    for k in 3..=5 {
        for _ in 0..20 {
            let m = random_matrix(k, &mut r);
            let alpha = C64::new(0.7, -1.3);
            let scaled = CMat::from_fn(k, k, |row, col| {
                if row == 1 {
                    m[(row, col)] * alpha
                } else {
                    m[(row, col)]
                }
            });
            let a = permanent(&m).unwrap() * alpha;
            let b = permanent(&scaled).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }
}

#[test]
fn evolve_matches_direct_expansion() {
    let mut r = rng(0xf0c3);
    let mut ws = PermanentWorkspace::new();
    let inputs: [&[u32]; 6] = [
        &[1, 1, 1],
        &[1, 2, 1],
        &[0, 3, 0],
        &[2, 0, 1],
        &[1, 3, 1],
        &[1, 1],
    ];
    for input in inputs {
        let u = random_unitary(input.len(), &mut r);
        let state = FockState::from_slice(input);
        let out = evolve(&u, &state, &mut ws).unwrap();
        let oracle = expand_creation_operators(&u, input);
        for (basis_state, amp) in out.iter() {
            let expect = oracle
                .get(basis_state.occ())
                .copied()
                .unwrap_or(C64::new(0.0, 0.0));
            assert!(
                (amp - expect).norm() < 1e-10,
                "amplitude mismatch on {basis_state}: {amp} vs {expect}"
            );
        }
        // The oracle must not contain states outside the enumerated sector.
        assert_eq!(oracle.len(), out.dim());
    }
}

#[test]
fn evolve_preserves_norm_for_unitaries_up_to_six_photons() {
    let mut r = rng(0xf0c4);
    let mut ws = PermanentWorkspace::new();
    let inputs: [&[u32]; 5] = [&[1, 1, 1], &[2, 2, 2], &[1, 4, 1], &[0, 6, 0], &[3, 2, 1]];
    for input in inputs {
        for _ in 0..10 {
            let u = random_unitary(3, &mut r);
            let out = evolve(&u, &FockState::from_slice(input), &mut ws).unwrap();
            assert!(
                (out.norm_sqr() - 1.0).abs() < 1e-10,
                "norm {} for input {input:?}",
                out.norm_sqr()
            );
        }
    }
}

#[test]
fn evolution_is_a_homomorphism_on_small_sectors() {
    let mut r = rng(0xf0c5);
    let mut ws = PermanentWorkspace::new();
    for n in 1..=3usize {
        for _ in 0..5 {
            let u1 = random_unitary(3, &mut r);
            let u2 = random_unitary(3, &mut r);
            let product = u2.mul(&u1);
            let lifted_product = evolve_all(&product, n, &mut ws).unwrap();
            let lifted_composed = evolve_all(&u2, n, &mut ws)
                .unwrap()
                .mul(&evolve_all(&u1, n, &mut ws).unwrap());
            assert!(
                lifted_product.max_abs_diff(&lifted_composed) < 1e-9,
                "sector {n} lift is not multiplicative"
            );
        }
    }
}

#[test]
fn sector_lift_of_unitary_is_unitary() {
    let mut r = rng(0xf0c6);
    let mut ws = PermanentWorkspace::new();
    for n in [2usize, 3, 4] {
        let u = random_unitary(3, &mut r);
        let lifted = evolve_all(&u, n, &mut ws).unwrap();
        assert!(lifted.unitarity_residual() < 1e-9);
    }
}

#[test]
fn photon_number_is_conserved() {
    // Output amplitudes exist only on the input's photon-number sector by
    // construction; cross-check via the basis the output reports.
    let mut r = rng(0xf0c7);
    let mut ws = PermanentWorkspace::new();
    let u = random_unitary(3, &mut r);
    let out = evolve(&u, &FockState::from_slice(&[2, 1, 1]), &mut ws).unwrap();
    assert_eq!(out.n(), 4);
    for (state, _) in out.iter() {
        assert_eq!(state.total(), 4);
    }
    assert_eq!(out.dim(), enumerate_basis(4, 3).unwrap().len());
}
