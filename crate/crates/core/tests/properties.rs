//! Randomized invariants of the basis, the model compiler, the propagators
//! and the extremal system.

use blochgate::basis::{build_basis, BlochDecomposition, OperatorBasis, StructureConstants};
use blochgate::dynamics::{
    expm_hermitian, first_integrals, propagate_bloch, propagate_unitary_oracle, terminal_cost,
    BlochGenerators, ControlTrajectory, OracleScheme, PropagationOptions,
};
use blochgate::model::{
    compile_gate_target, compile_hamiltonian, preset_experiment, two_qubit_system,
    unitarity_defect, GatePreset, HamiltonianSpec,
};
use blochgate::pmp::{control_feedback, extremal_rhs, stationarity_residual, ExtremalState};
use blochgate::CMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let a = random_matrix(rng, d);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    expm_hermitian(&random_hermitian(rng, d), 1.0)
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(8)]
}

/// A state on the unit sphere: the Bloch data of a random unitary.
fn unit_state(rng: &mut ChaCha8Rng, basis: &OperatorBasis) -> Vec<Complex64> {
    basis
        .decompose(&random_unitary(rng, basis.dim()))
        .unwrap()
        .to_state()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frobenius_norm_identity(d in dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = build_basis(d).unwrap();
        let x = random_matrix(&mut rng, d);
        let dec = basis.decompose(&x).unwrap();
        let frob = x.norm_squared() / d as f64;
        prop_assert!((dec.norm_sqr() - frob).abs() <= 1e-12 * frob);
        let back = basis.reconstruct(&dec).unwrap();
        prop_assert!((back - &x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn bloch_norm_is_basis_independent(d in prop_oneof![Just(2usize), Just(4)], seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = build_basis(d).unwrap();
        let n = basis.len();
        let q = random_orthogonal(&mut rng, n);
        let ops: Vec<CMatrix> = basis.operators().iter().map(|o| o.to_dense()).collect();
        let mixed: Vec<CMatrix> = (0..n)
            .map(|k| (0..n).fold(CMatrix::zeros(d, d), |acc, j| acc + &ops[j] * c(q[(k, j)], 0.0)))
            .collect();
        for (k, a) in mixed.iter().enumerate() {
            prop_assert!((a - a.adjoint()).norm() <= 1e-12);
            prop_assert!(a.trace().norm() <= 1e-12);
            for (m, b) in mixed.iter().enumerate() {
                let expected = if k == m { 2.0 } else { 0.0 };
                prop_assert!(((a * b).trace() - c(expected, 0.0)).norm() <= 1e-12);
            }
        }
        let x = random_matrix(&mut rng, d);
        let scale = (2.0 * d as f64).sqrt();
        let mixed_norm: f64 = mixed.iter().map(|a| ((a * &x).trace() / scale).norm_sqr()).sum();
        let norm = basis.decompose(&x).unwrap().vector.iter().map(|v| v.norm_sqr()).sum::<f64>();
        prop_assert!((mixed_norm - norm).abs() <= 1e-12 * norm.max(1.0));
    }

    #[test]
    fn terminal_cost_on_the_sphere(n_qubits in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n_qubits;
        let basis = build_basis(d).unwrap();
        let target = compile_gate_target(&random_unitary(&mut rng, d), rng.random_range(-3.0..3.0), &basis).unwrap();
        let z = unit_state(&mut rng, &basis);
        let cost = terminal_cost(&z, &target);
        let overlap: Complex64 = target.state().iter().zip(&z).map(|(g, u)| g.conj() * u).sum();
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&cost));
        prop_assert!((cost - (1.0 - overlap.re)).abs() <= 1e-10);
    }

    #[test]
    fn gate_target_paths_agree(n_qubits in 1usize..=3, phase in -3.2f64..3.2, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n_qubits;
        let basis = build_basis(d).unwrap();
        let u = random_unitary(&mut rng, d);
        let target = compile_gate_target(&u, phase, &basis).unwrap();
        let direct = basis.decompose(&(&u * Complex64::from_polar(1.0, phase))).unwrap().to_state();
        prop_assert!(max_diff(&target.state(), &direct) <= 1e-12);
        let norm: f64 = target.state().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bloch_propagation_matches_unitary_oracle(two_qubit in any::<bool>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if two_qubit {
            preset_experiment("cz").unwrap().hamiltonian
        } else {
            preset_experiment("not").unwrap().hamiltonian
        };
        let report = cross_oracle(&spec, &mut rng);
        prop_assert!(report.state_gap <= 1e-7, "state gap {}", report.state_gap);
        prop_assert!(report.norm <= 1e-8, "norm {}", report.norm);
        prop_assert!(report.components <= 1e-7, "components {}", report.components);
        prop_assert!(report.unitarity <= 1e-7, "unitarity {}", report.unitarity);
    }

    #[test]
    fn feedback_zeroes_stationarity(d in prop_oneof![Just(2usize), Just(4)], eps in 1e-3f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = preset_experiment(if d == 2 { "not" } else { "cz" }).unwrap();
        let basis = build_basis(d).unwrap();
        let sc = StructureConstants::compute(&basis);
        let model = compile_hamiltonian(&cfg.hamiltonian, &basis, None).unwrap();
        let st = ExtremalState::new(unit_state(&mut rng, &basis), unit_state(&mut rng, &basis)).unwrap();
        let nu = control_feedback(&st, &model, eps, &sc).unwrap();
        let res = stationarity_residual(&st, &nu, &model, eps, &sc);
        for (r, ch) in res.iter().zip(&model.channels) {
            prop_assert!(r.abs() <= 1e-12 * (1.0 + eps * ch.weight));
        }
        let y = st.encode();
        let a = extremal_rhs(0.0, &y, &model, eps, &sc).unwrap();
        let b = extremal_rhs(rng.random_range(-50.0..50.0), &y, &model, eps, &sc).unwrap();
        prop_assert_eq!(a, b);
    }
}

struct CrossOracle {
    state_gap: f64,
    norm: f64,
    components: f64,
    unitarity: f64,
}

/// Random smooth controls on a random horizon, propagated both ways.
fn cross_oracle(spec: &HamiltonianSpec, rng: &mut ChaCha8Rng) -> CrossOracle {
    let basis = build_basis(spec.dim()).unwrap();
    let sc = StructureConstants::compute(&basis);
    let model = compile_hamiltonian(spec, &basis, None).unwrap();
    let gens = BlochGenerators::new(&model, &sc).unwrap();
    let horizon = rng.random_range(0.5..3.0);
    let nodes = 12;
    let mesh: Vec<f64> = (0..=nodes)
        .map(|i| horizon * i as f64 / nodes as f64)
        .collect();
    let values = (0..model.n_controls())
        .map(|_| mesh.iter().map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let ctl = ControlTrajectory::cubic(mesh.clone(), values).unwrap();
    let opts = PropagationOptions {
        tol: 1e-11,
        ..PropagationOptions::default()
    };
    let traj = propagate_bloch(&gens, &ctl, &mesh, &opts).unwrap();
    let us = propagate_unitary_oracle(spec, &ctl, &mesh, OracleScheme::default(), &opts).unwrap();
    let mut state_gap: f64 = 0.0;
    let mut unitarity: f64 = 0.0;
    for (z, u) in traj.states.iter().zip(&us) {
        state_gap = state_gap.max(max_diff(z, &basis.decompose(u).unwrap().to_state()));
        let rebuilt = basis
            .reconstruct(&BlochDecomposition::from_state(z))
            .unwrap();
        unitarity = unitarity.max(unitarity_defect(&rebuilt));
    }
    let fi = first_integrals(traj.states.iter().map(Vec::as_slice), &sc);
    CrossOracle {
        state_gap,
        norm: fi.norm,
        components: fi.components,
        unitarity,
    }
}

#[test]
fn structure_constant_symmetries() {
    for d in [2, 4] {
        let sc = StructureConstants::compute(&build_basis(d).unwrap());
        let n = sc.len();
        for t in sc.f() {
            assert_eq!(sc.f_value(t.m, t.k, t.l), -t.value);
        }
        for t in sc.g() {
            assert_eq!(sc.g_value(t.m, t.k, t.l), t.value);
        }
        for k in 1..=n {
            for m in 1..=n {
                for l in 1..=n {
                    assert!((sc.f_value(k, m, l) - sc.f_value(l, k, m)).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn product_expansion_reconstructs_products() {
    for d in [2, 4] {
        let basis = build_basis(d).unwrap();
        let sc = StructureConstants::compute(&basis);
        let ops: Vec<CMatrix> = basis.operators().iter().map(|o| o.to_dense()).collect();
        for k in 1..=ops.len() {
            for m in 1..=ops.len() {
                let exp = sc.product_expand(k, m).unwrap();
                let mut prod = CMatrix::identity(d, d) * exp.scalar;
                for (l, v) in exp.vector.iter().enumerate() {
                    prod += &ops[l] * *v;
                }
                assert!(
                    (prod - &ops[k - 1] * &ops[m - 1]).norm() <= 1e-12,
                    "d={d} k={k} m={m}"
                );
            }
        }
    }
}

#[test]
fn one_qubit_presets_have_unit_determinant() {
    let basis = build_basis(2).unwrap();
    for g in [
        GatePreset::Not,
        GatePreset::Hadamard,
        GatePreset::S,
        GatePreset::T,
    ] {
        let target = compile_gate_target(&g.unitary(), g.phase(), &basis).unwrap();
        let det = target.phased_unitary().determinant();
        assert!((det - c(1.0, 0.0)).norm() <= 1e-10, "{g:?}: {det}");
    }
}

#[test]
fn every_preset_target_is_on_the_sphere() {
    for g in GatePreset::ALL {
        let basis = build_basis(1 << g.n_qubits()).unwrap();
        let target = compile_gate_target(&g.unitary(), g.phase(), &basis).unwrap();
        let norm: f64 = target.state().iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() <= 1e-12, "{g:?}");
    }
}

#[test]
fn traceless_specs_compile_without_scalar_parts() {
    let spec = two_qubit_system(3.0, 4.0, 1.0, 1.25, 1.25);
    let basis = build_basis(4).unwrap();
    let model = compile_hamiltonian(&spec, &basis, None).unwrap();
    assert_eq!(model.free_scalar, 0.0);
    assert!(model.channels.iter().all(|ch| ch.scalar == 0.0));
}
