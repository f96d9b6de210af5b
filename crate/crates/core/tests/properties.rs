//! Structural invariants of the linear algebra, Hamiltonian and channel layers.

mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qaqc_core::ansatz::{build_hva, circuit_unitary};
use qaqc_core::cost::CostEvaluator;
use qaqc_core::gates::{elementary, fredkin, toffoli};
use qaqc_core::linalg::{hermitian_expm, hs_overlap, kron, ComplexMatrix, DensityMatrix};
use qaqc_core::pauli::{heisenberg_spec, pauli_matrix, wrap_angle, ParameterVector};
use qaqc_core::simulator::amplitude_damping;

fn matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        ComplexMatrix::from_vec(
            dim,
            dim,
            v.into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        )
        .unwrap()
    })
}

fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(dim).prop_map(|a| &a + &a.adjoint())
}

fn theta15() -> impl Strategy<Value = ParameterVector> {
    prop::collection::vec(-PI..PI, 15).prop_map(ParameterVector::new)
}

fn density(n_qubits: usize) -> impl Strategy<Value = DensityMatrix> {
    matrix(1 << n_qubits).prop_map(|a| {
        let mut rho = &a * &a.adjoint();
        let tr = rho.trace();
        rho = rho.scale(Complex64::new(1.0, 0.0) / tr);
        DensityMatrix::from_matrix(rho).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(a in matrix(2), b in matrix(2), c in matrix(2)) {
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn kron_mixed_product(a in matrix(2), b in matrix(2), c in matrix(2), d in matrix(2)) {
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn expm_group_law(h in hermitian(4), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let lhs = &hermitian_expm(&h, s).unwrap() * &hermitian_expm(&h, t).unwrap();
        let rhs = hermitian_expm(&h, s + t).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        prop_assert!(rhs.is_unitary(1e-10));
    }

    #[test]
    fn hs_overlap_symmetric_and_bounded(h in hermitian(8), g in hermitian(8), s in -1.0f64..1.0) {
        let u = hermitian_expm(&h, s).unwrap();
        let v = hermitian_expm(&g, 1.0).unwrap();
        let uv = hs_overlap(&u, &v).unwrap();
        prop_assert!((uv - hs_overlap(&v, &u).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&uv));
        prop_assert!((hs_overlap(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assembled_hamiltonian_hermitian_traceless(theta in theta15()) {
        let spec = heisenberg_spec(3).unwrap();
        let h = spec.assemble(&theta).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
        prop_assert!(h.trace().norm() < 1e-12);
    }

    #[test]
    fn assemble_is_linear(a in theta15(), b in theta15(), s in -2.0f64..2.0) {
        let spec = heisenberg_spec(3).unwrap();
        let combo = ParameterVector::new(
            a.values().iter().zip(b.values()).map(|(x, y)| x + s * y).collect(),
        );
        let lhs = spec.assemble(&combo).unwrap();
        let rhs = &spec.assemble(&a).unwrap() + &spec.assemble(&b).unwrap().scale(Complex64::new(s, 0.0));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn circuit_unitary_is_unitary(theta in theta15(), m in 1usize..5) {
        let spec = heisenberg_spec(3).unwrap();
        let c = build_hva(&spec, m, 1.0).unwrap();
        prop_assert!(circuit_unitary(&c, &theta).unwrap().is_unitary(1e-10));
    }

    #[test]
    fn damping_is_complete_and_trace_preserving(p in 0.0f64..=1.0, rho in density(3), q in 0usize..3) {
        let ch = amplitude_damping(p).unwrap();
        prop_assert!(ch.completeness_error() < 1e-10);
        let mut out = rho.matrix().clone();
        ch.apply(&mut out, q);
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(out.trace().im.abs() < 1e-10);
        prop_assert!(out.hermiticity_error() < 1e-10);
        prop_assert!(DensityMatrix::from_matrix(out).unwrap().min_eigenvalue() > -1e-10);
    }

    #[test]
    fn cost_periodic_in_each_parameter(theta in theta15(), j in 0usize..15) {
        let spec = heisenberg_spec(3).unwrap();
        let eval = CostEvaluator::exact(build_hva(&spec, 2, 1.0).unwrap(), toffoli()).unwrap();
        let mut shifted = theta.clone();
        shifted.values_mut()[j] += 2.0 * PI;
        let diff = (eval.cost(&theta).unwrap() - eval.cost(&shifted).unwrap()).abs();
        prop_assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn cost_periodic_exactly_on_dyadic_angles(k in prop::collection::vec(-64i32..64, 15), j in 0usize..15) {
        let spec = heisenberg_spec(3).unwrap();
        let eval = CostEvaluator::exact(build_hva(&spec, 2, 1.0).unwrap(), fredkin()).unwrap();
        let theta = ParameterVector::new(k.iter().map(|&v| f64::from(v) / 32.0).collect());
        let mut shifted = theta.clone();
        shifted.values_mut()[j] += 2.0 * PI;
        prop_assert_eq!(eval.cost(&theta).unwrap(), eval.cost(&shifted).unwrap());
    }

    #[test]
    fn wrapped_angles_land_in_range(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!((-PI..=PI).contains(&w));
        prop_assert!(((x - w) / (2.0 * PI) - ((x - w) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn parameter_text_round_trip(theta in theta15()) {
        let spec = heisenberg_spec(3).unwrap();
        let back = spec.parse_text(&spec.to_text(&theta).unwrap()).unwrap();
        for (a, b) in theta.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn named_gates_are_unitary() {
    for g in [toffoli(), fredkin()] {
        assert!(g.matrix().is_unitary(1e-10), "{}", g.name());
    }
    for name in ["H", "CNOT", "I"] {
        assert!(
            elementary(name).unwrap().matrix().is_unitary(1e-10),
            "{name}"
        );
    }
}

#[test]
fn pauli_terms_square_to_identity() {
    let spec = heisenberg_spec(3).unwrap();
    for term in spec.terms() {
        let p = pauli_matrix(&term.pauli);
        assert!((&p * &p).max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
        assert!(p.hermiticity_error() < 1e-12);
    }
}

#[test]
fn canonical_term_order() {
    let labels = heisenberg_spec(3).unwrap().labels();
    let expected = [
        "X1", "Y1", "Z1", "X2", "Y2", "Z2", "X3", "Y3", "Z3", "X1X2", "Y1Y2", "Z1Z2", "X2X3",
        "Y2Y3", "Z2Z3",
    ];
    assert_eq!(labels, expected);
}
