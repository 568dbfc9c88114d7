//! Heralding properties and the frozen optimal operating points.

mod common;

use common::{random_params, random_unitary, rng, HERALD1_OPT, VACUUM_OPT};
use noonforge::device::{build_smatrix, DeviceParams};
use noonforge::fock::{evolve, FockState, FockVector, PermanentWorkspace};
use noonforge::herald::{noon_fidelity, project_herald, run_experiment, HeraldSpec};
use noonforge::C64;

#[test]
fn click_probabilities_are_complete() {
    let mut r = rng(0x4e1a);
    let mut ws = PermanentWorkspace::new();
    for _ in 0..50 {
        let u = random_unitary(3, &mut r);
        for input in [[1u32, 1, 1], [1, 2, 1], [2, 1, 2]] {
            let out = evolve(&u, &FockState::from_slice(&input), &mut ws).unwrap();
            let n = out.n();
            let total: f64 = (0..=n)
                .map(|k| {
                    project_herald(&out, &HeraldSpec::on_central(k))
                        .unwrap()
                        .0
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "sum of p_click = {total}");
        }
    }
}

#[test]
fn herald_branches_reassemble_the_full_state() {
    let mut r = rng(0x4e1b);
    let mut ws = PermanentWorkspace::new();
    for _ in 0..20 {
        let u = random_unitary(3, &mut r);
        let out = evolve(&u, &FockState::from_slice(&[1, 2, 1]), &mut ws).unwrap();
        for k in 0..=out.n() {
            let (p, conditional) = project_herald(&out, &HeraldSpec::on_central(k)).unwrap();
            let sqrt_p = p.sqrt();
            for (reduced, amp) in conditional.iter() {
                let mut occ = reduced.occ().to_vec();
                occ.insert(1, k);
                let original = out.amplitude(&FockState::new(occ));
                assert!(
                    (amp.norm() * sqrt_p - original.norm()).abs() < 1e-10,
                    "branch k = {k} does not reassemble"
                );
            }
        }
    }
}

#[test]
fn noon_fidelity_stays_in_unit_interval_and_rises_as_accidentals_fade() {
    let mut r = rng(0x4e1c);
    for _ in 0..100 {
        let n = 3usize;
        let mut v = FockVector::<f64>::zero(n, 2).unwrap();
        for state in v.states().to_vec() {
            v.set_amplitude(&state, common::random_complex(&mut r)).unwrap();
        }
        v.normalize();
        let f0 = noon_fidelity(&v, n as u32).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&f0));

        // Halve every non-NOON amplitude and renormalize: fidelity must
        // not decrease.
        let mut damped = v.clone();
        for state in damped.states().to_vec() {
            let occ = state.occ();
            if occ != [n as u32, 0] && occ != [0, n as u32] {
                let amp = damped.amplitude(&state);
                damped.set_amplitude(&state, amp * 0.5).unwrap();
            }
        }
        damped.normalize();
        let f1 = noon_fidelity(&damped, n as u32).unwrap();
        assert!(
            f1 >= f0 - 1e-12,
            "fidelity dropped from {f0} to {f1} as accidentals faded"
        );
    }
}

#[test]
fn frozen_vacuum_optimum_reproduces_four_ninths() {
    let (tau0, tau1, theta) = VACUUM_OPT;
    let params = DeviceParams::tied(tau0, tau1, theta).unwrap();
    let mut ws = PermanentWorkspace::new();
    let report = run_experiment(
        &params,
        &FockState::from_slice(&[1, 1, 1]),
        &HeraldSpec::on_central(0),
        3,
        &mut ws,
    )
    .unwrap();
    assert!((report.p_click - 4.0 / 9.0).abs() < 1e-9);
    assert!(report.f_noon.unwrap() > 1.0 - 1e-9);

    // The conditional state is an equal-magnitude NOON superposition.
    let c30 = report.conditional.amplitude(&FockState::from_slice(&[3, 0]));
    let c03 = report.conditional.amplitude(&FockState::from_slice(&[0, 3]));
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    assert!((c30.norm() - inv).abs() < 1e-5);
    assert!((c03.norm() - inv).abs() < 1e-5);
}

#[test]
fn frozen_single_photon_optimum_reproduces_eight_twentysevenths() {
    let (tau0, tau1, theta) = HERALD1_OPT;
    let params = DeviceParams::tied(tau0, tau1, theta).unwrap();
    let mut ws = PermanentWorkspace::new();
    let report = run_experiment(
        &params,
        &FockState::from_slice(&[1, 2, 1]),
        &HeraldSpec::on_central(1),
        3,
        &mut ws,
    )
    .unwrap();
    assert!((report.p_click - 8.0 / 27.0).abs() < 1e-5);
    assert!(report.f_noon.unwrap() > 1.0 - 1e-9);
}

#[test]
fn published_n4_operating_point_reproduces_quoted_values() {
    let params = DeviceParams::tied(0.50, 0.56, std::f64::consts::PI).unwrap();
    let mut ws = PermanentWorkspace::new();
    let report = run_experiment(
        &params,
        &FockState::from_slice(&[1, 3, 1]),
        &HeraldSpec::on_central(1),
        4,
        &mut ws,
    )
    .unwrap();
    assert!((report.p_click - 0.23).abs() <= 0.02, "p = {}", report.p_click);
    assert!(
        (report.f_noon.unwrap() - 0.85).abs() <= 0.02,
        "f = {:?}",
        report.f_noon
    );
}

#[test]
fn vacuum_click_probability_never_beats_the_noon_bound_when_faithful() {
    // p_click * f <= 4/9 for the (1,1,1)/vacuum-herald configuration: the
    // NOON weight is |C300|^2 + |C003|^2 <= 2/9 + 2/9 for any unitary.
    let mut r = rng(0x4e1d);
    let mut ws = PermanentWorkspace::new();
    for _ in 0..300 {
        let p = random_params(&mut r);
        let Ok(s) = build_smatrix(&p) else { continue };
        let out = evolve(s.matrix(), &FockState::from_slice(&[1, 1, 1]), &mut ws).unwrap();
        let (p_click, conditional) = project_herald(&out, &HeraldSpec::on_central(0)).unwrap();
        if p_click == 0.0 {
            continue;
        }
        let f = noon_fidelity(&conditional, 3).unwrap();
        assert!(p_click * f <= 4.0 / 9.0 + 1e-10);
    }
}

#[test]
fn two_photon_reference_is_deterministic_hom() {
    // N = 2 on a 50/50 beam splitter: (|2,0> - |0,2>)/sqrt(2), so P = 1 and
    // F = 1 with no heralding at all.
    let mut ws = PermanentWorkspace::new();
    let u = noonforge::device::coupler2(std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let out = evolve(u.entries(), &FockState::from_slice(&[1, 1]), &mut ws).unwrap();
    assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    let f = noon_fidelity(&out, 2).unwrap();
    assert!((f - 1.0).abs() < 1e-12);
    assert!(out.amplitude(&FockState::from_slice(&[1, 1])).norm() < 1e-12);
}

#[test]
fn zero_probability_heralds_have_undefined_fidelity() {
    // tau1 = 1 keeps all photons in their waveguides, so heralding 0
    // photons from (1,2,1) is impossible.
    let params = DeviceParams::<f64>::tied(0.7, 1.0, 1.0).unwrap();
    let mut ws = PermanentWorkspace::new();
    let report = run_experiment(
        &params,
        &FockState::from_slice(&[1, 2, 1]),
        &HeraldSpec::on_central(0),
        4,
        &mut ws,
    )
    .unwrap();
    assert_eq!(report.p_click, 0.0);
    assert_eq!(report.f_noon, None);
    assert_eq!(
        C64::new(0.0, 0.0),
        report.conditional.amplitude(&FockState::from_slice(&[2, 2]))
    );
}
