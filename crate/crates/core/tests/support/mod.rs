//! Randomised invariants across the basis, Hamiltonian, spectrum, closed
//! forms and dynamics, shared by the property tests and the acceptance run.
//! Couplings stay at or below 0.1 ω_a and draws with near-resonant
//! denominators are discarded. Each check runs a seeded proptest runner, so
//! failures reproduce.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::fmt::Debug;

use nalgebra::DMatrix;
use noon_core::dynamics::{
    apply_pulse, dressed_channels, evolve_lindblad_eigen, evolve_unitary, state_fidelity, DecoherenceRates,
    DensityMatrix, LindbladBackend, LindbladOptions, Observables, PulseDirection, PulseSpec, State,
};
use noon_core::hilbert::{
    mode_operator, qutrit_operator, BasisSpec, BasisState, LadderKind, Level, Mode, QutritOpKind, QutritPair,
    StateVector,
};
use noon_core::model::{build_full, build_h0, SystemParams};
use noon_core::perturb::{effective_coupling, effective_resonance, n_scaling, ResonanceKind};
use noon_core::spectrum::{diagonalize, dress_in_eigenbasis};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{RngAlgorithm, TestRng, TestRunner};

fn run<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let config = ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn params() -> impl Strategy<Value = SystemParams> {
    (
        1.2f64..2.6,
        1.4f64..3.6,
        0.3f64..3.0,
        0.0f64..=0.1,
        0.0f64..=0.1,
        0.0f64..=FRAC_PI_2,
        0.0f64..=0.05,
    )
        .prop_map(|(wb, weg, dfg, ga, gb, theta, gab)| SystemParams {
            omega_a: 1.0,
            omega_b: wb,
            omega_eg: weg,
            omega_fg: weg + dfg,
            g_a: ga,
            g_b: gb,
            theta,
            g_ab: gab,
        })
}

fn spec() -> impl Strategy<Value = BasisSpec> {
    (0usize..5, 0usize..5).prop_map(|(a, b)| BasisSpec::new(a, b))
}

fn state(dim: usize) -> impl Strategy<Value = StateVector> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("non-zero", |v| v.iter().any(|(r, i)| r.abs() + i.abs() > 1e-3))
        .prop_map(|v| {
            let z: Vec<Complex64> = v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect();
            StateVector::from_vector(nalgebra::DVector::from_vec(z)).normalized()
        })
}

fn max_norm<'a>(m: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    m.into_iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn far_from(x: f64, tol: f64) -> bool {
    x.abs() > tol
}

/// Denominators of the two-photon closed forms at bare resonance stay away
/// from zero.
fn two_photon_safe(p: &SystemParams) -> bool {
    let (wa, wb) = (p.omega_a, p.omega_b);
    [
        wb - wa,
        2.0 * wb - wa,
        2.0 * wa - wb,
        2.0 * wb - 3.0 * wa,
        2.0 * wa - 3.0 * wb,
        p.omega_fg - wa,
        p.omega_fg - 3.0 * wa,
        p.omega_eg - wb,
        p.omega_eg - 3.0 * wb,
        p.omega_fg + wb - 2.0 * wa,
        2.0 * wb - wa - p.omega_eg,
    ]
    .iter()
    .all(|&d| far_from(d, 0.05))
}

pub fn index_bijection(cases: u32) -> Result<(), String> {
    run(cases, spec(), |spec| {
        prop_assert_eq!(spec.dim(), 3 * (spec.cutoff_a() + 1) * (spec.cutoff_b() + 1));
        for (i, s) in spec.states().enumerate() {
            prop_assert_eq!(spec.index(s).unwrap(), i);
            prop_assert_eq!(spec.state(i), s);
        }
        Ok(())
    })
}

pub fn ladder_operator_algebra(cases: u32) -> Result<(), String> {
    run(cases, spec(), |spec| {
        for mode in [Mode::A, Mode::B] {
            let a = mode_operator(&spec, mode, LadderKind::Annihilate);
            let ad = mode_operator(&spec, mode, LadderKind::Create);
            let n = mode_operator(&spec, mode, LadderKind::Number);
            prop_assert_eq!(a.adjoint().into_matrix(), ad.matrix().clone());
            prop_assert!(n.is_diagonal());
            prop_assert!((n.matrix() - (&ad * &a).matrix()).amax() < 1e-13);
            // [a, a†] = 1 below the cutoff.
            let comm = &(&a * &ad) - &(&ad * &a);
            let cut = match mode {
                Mode::A => spec.cutoff_a(),
                Mode::B => spec.cutoff_b(),
            };
            for (i, s) in spec.states().enumerate() {
                let occ = match mode {
                    Mode::A => s.n_a,
                    Mode::B => s.n_b,
                };
                let expect = if occ == cut { -(cut as f64) } else { 1.0 };
                prop_assert!((comm.get(i, i) - expect).abs() < 1e-12);
            }
        }
        Ok(())
    })
}

pub fn qutrit_operators_hermitian(cases: u32) -> Result<(), String> {
    run(cases, spec(), |spec| {
        for pair in QutritPair::ALL {
            for kind in [QutritOpKind::SigmaX, QutritOpKind::SigmaZ, QutritOpKind::ProjectUpper] {
                prop_assert_eq!(qutrit_operator(&spec, pair, kind).max_asymmetry(), 0.0);
            }
        }
        Ok(())
    })
}

pub fn hamiltonian_symmetric_and_bare_diagonal(cases: u32) -> Result<(), String> {
    run(cases, (params(), spec()), |(p, spec)| {
        let h = build_full(&p, &spec, true);
        prop_assert_eq!(h.max_asymmetry(), 0.0);
        let h0 = build_h0(&p, &spec);
        for (i, s) in spec.states().enumerate() {
            prop_assert!((h0.get(i, i) - p.bare_energy(s)).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn eigensystem_invariants(cases: u32) -> Result<(), String> {
    run(cases, (params(), spec()), |(p, spec)| {
        let h = build_full(&p, &spec, true);
        let es = diagonalize(&h).unwrap();
        // Spectral norm of a symmetric matrix.
        let norm = es.energies().amax();
        prop_assert!(es.max_residual(&h) <= 1e-9 * norm);
        let u = es.vectors();
        let orth = (u.transpose() * u - DMatrix::identity(spec.dim(), spec.dim())).amax();
        prop_assert!(orth < 1e-9);
        prop_assert!((es.reconstruct() - h.matrix()).amax() <= 1e-8 * norm);
        prop_assert!(es.energies().as_slice().windows(2).all(|w| w[0] <= w[1]));
        Ok(())
    })
}

pub fn dressed_operators_strictly_lowering(cases: u32) -> Result<(), String> {
    run(cases, (params(), spec()), |(p, spec)| {
        let es = diagonalize(&build_full(&p, &spec, false)).unwrap();
        let o = dress_in_eigenbasis(&es, &mode_operator(&spec, Mode::A, LadderKind::Annihilate), None);
        for m in 0..spec.dim() {
            for n in 0..=m {
                prop_assert_eq!(o[(m, n)], 0.0);
            }
        }
        Ok(())
    })
}

pub fn n_scaling_is_exact(cases: u32) -> Result<(), String> {
    run(cases, (params(), 0usize..=10), |(p, n)| {
        prop_assume!(two_photon_safe(&p));
        for kind in [ResonanceKind::two_photon_a(n), ResonanceKind::two_photon_b(n)] {
            let base = ResonanceKind { n_offset: 0, ..kind };
            let g0 = effective_coupling(&p, base).unwrap();
            prop_assume!(g0.abs() > 1e-14);
            let ratio = effective_coupling(&p, kind).unwrap() / g0;
            prop_assert!((ratio - n_scaling(n)).abs() <= 1e-12 * n_scaling(n));
            let expect = (((n + 1) * (n + 2)) as f64 / 2.0).sqrt();
            prop_assert!((n_scaling(n) - expect).abs() <= 1e-15 * expect);
        }
        Ok(())
    })
}

pub fn resonant_spacing_identity(cases: u32) -> Result<(), String> {
    run(cases, (params(), 0usize..=6), |(p, n)| {
        prop_assume!(two_photon_safe(&p));
        for kind in [ResonanceKind::two_photon_a(n), ResonanceKind::two_photon_b(n)] {
            let r = effective_resonance(&kind.at_bare_resonance(&p), kind, false).unwrap();
            let k = if kind.uses_omega_eg() { p.omega_a } else { p.omega_b };
            prop_assert_eq!(r.resonant_spacing, 2.0 * k + r.shift);
        }
        Ok(())
    })
}

pub fn unitary_evolution_preserves_norm(cases: u32) -> Result<(), String> {
    run(cases, (params(), 0.0f64..2000.0, state(27)), |(p, t, seed)| {
        let spec = BasisSpec::new(2, 2);
        let h = build_full(&p, &spec, true);
        let (traj, psi) = evolve_unitary(&h, &seed, t, 5, &Observables::default(), None).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-9);
        for tr in traj.trace {
            prop_assert!((tr - 1.0).abs() < 1e-9);
        }
        Ok(())
    })
}

pub fn pulses_preserve_photon_marginals(cases: u32) -> Result<(), String> {
    run(
        cases,
        (state(27), -3.2f64..3.2, any::<bool>(), any::<bool>()),
        |(seed, phase, up, fg)| {
            let spec = BasisSpec::new(2, 2);
            let pulse = PulseSpec {
                phase,
                ..PulseSpec::instantaneous(if fg { QutritPair::Fg } else { QutritPair::Eg }, 0.075)
            };
            let dir = if up { PulseDirection::Up } else { PulseDirection::Down };
            let State::Pure(out) = apply_pulse(&State::Pure(seed.clone()), &pulse, dir, None).unwrap() else {
                panic!("pure in, pure out")
            };
            let marginal = |v: &StateVector, a: usize, b: usize| -> f64 {
                Level::ALL
                    .iter()
                    .map(|&l| v.amplitude(&spec, BasisState::new(a, b, l)).unwrap().norm_sqr())
                    .sum()
            };
            for a in 0..=2 {
                for b in 0..=2 {
                    prop_assert!((marginal(&seed, a, b) - marginal(&out, a, b)).abs() < 1e-15);
                }
            }
            let other = if up { PulseDirection::Down } else { PulseDirection::Up };
            let State::Pure(back) = apply_pulse(&State::Pure(out), &pulse, other, None).unwrap() else {
                panic!("pure in, pure out")
            };
            if up {
                prop_assert!(max_norm(&(back.vector() - seed.vector())) < 1e-14);
            }
            Ok(())
        },
    )
}

pub fn density_matrix_basics(cases: u32) -> Result<(), String> {
    run(cases, state(27), |seed| {
        let rho = DensityMatrix::from_pure(&seed);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_error() < 1e-15);
        prop_assert!((rho.purity() - 1.0).abs() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-12);
        let f = state_fidelity(&rho, &seed);
        prop_assert!((f - 1.0).abs() < 1e-12);
        Ok(())
    })
}

pub fn lindblad_trace_hermiticity_positivity(cases: u32) -> Result<(), String> {
    run(
        cases,
        (params(), state(27), 1e-4f64..2e-2, 1.0f64..100.0, any::<bool>()),
        |(p, seed, gamma, t, dense)| {
            let spec = BasisSpec::new(2, 2);
            let es = diagonalize(&build_full(&p, &spec, false)).unwrap();
            let rates = DecoherenceRates {
                kappa_a: gamma,
                kappa_b: 0.5 * gamma,
                gamma_eg: 0.7 * gamma,
                gamma_fg: 0.3 * gamma,
                gamma_fe: gamma,
                gamma_e: 0.2 * gamma,
                gamma_f: 0.4 * gamma,
            };
            let ch = dressed_channels(&es, &spec, &rates);
            let u = es.vectors().map(|x| Complex64::new(x, 0.0));
            let rho0 = DensityMatrix::from_pure(&seed);
            let mut rho = u.transpose() * rho0.matrix() * &u;
            let opts = LindbladOptions {
                backend: if dense {
                    LindbladBackend::Dense
                } else {
                    LindbladBackend::default()
                },
                pop_tol: 0.0,
                ..LindbladOptions::default()
            };
            evolve_lindblad_eigen(&es, &ch, &mut rho, t, &[], &opts, &mut |_, _| Ok(())).unwrap();
            let out = DensityMatrix::from_matrix(&u * rho * u.transpose()).unwrap();
            prop_assert!((out.trace() - 1.0).abs() < 1e-6, "trace {}", out.trace());
            prop_assert!(out.hermiticity_error() < 1e-8);
            prop_assert!(out.min_eigenvalue() > -1e-8, "min eigenvalue {}", out.min_eigenvalue());
            Ok(())
        },
    )
}

pub fn lindblad_without_rates_is_unitary(cases: u32) -> Result<(), String> {
    run(cases, (params(), state(27), 1.0f64..500.0), |(p, seed, t)| {
        let spec = BasisSpec::new(2, 2);
        let h = build_full(&p, &spec, true);
        let es = diagonalize(&h).unwrap();
        let u = es.vectors().map(|x| Complex64::new(x, 0.0));
        let rho0 = DensityMatrix::from_pure(&seed);
        let mut rho = u.transpose() * rho0.matrix() * &u;
        evolve_lindblad_eigen(&es, &[], &mut rho, t, &[], &LindbladOptions::default(), &mut |_, _| {
            Ok(())
        })
        .unwrap();
        let out = DensityMatrix::from_matrix(&u * rho * u.transpose()).unwrap();
        let (_, psi) = evolve_unitary(&h, &seed, t, 0, &Observables::default(), None).unwrap();
        let expect = DensityMatrix::from_pure(&psi);
        prop_assert!(max_norm(&(out.matrix() - expect.matrix())) < 1e-6);
        prop_assert!((out.purity() - 1.0).abs() < 1e-8);
        Ok(())
    })
}

pub const ALL: &[(&str, fn(u32) -> Result<(), String>)] = &[
    ("index_bijection", index_bijection),
    ("ladder_operator_algebra", ladder_operator_algebra),
    ("qutrit_operators_hermitian", qutrit_operators_hermitian),
    (
        "hamiltonian_symmetric_and_bare_diagonal",
        hamiltonian_symmetric_and_bare_diagonal,
    ),
    ("eigensystem_invariants", eigensystem_invariants),
    (
        "dressed_operators_strictly_lowering",
        dressed_operators_strictly_lowering,
    ),
    ("n_scaling_is_exact", n_scaling_is_exact),
    ("resonant_spacing_identity", resonant_spacing_identity),
    ("unitary_evolution_preserves_norm", unitary_evolution_preserves_norm),
    ("pulses_preserve_photon_marginals", pulses_preserve_photon_marginals),
    ("density_matrix_basics", density_matrix_basics),
    (
        "lindblad_trace_hermiticity_positivity",
        lindblad_trace_hermiticity_positivity,
    ),
    ("lindblad_without_rates_is_unitary", lindblad_without_rates_is_unitary),
];
