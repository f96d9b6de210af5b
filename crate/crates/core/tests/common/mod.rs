//! Independent dense-matrix oracles shared by the integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use qaqc_core::ansatz::AnsatzCircuit;
use qaqc_core::gates::TargetGate;
use qaqc_core::linalg::{hermitian_expm, kron, ComplexMatrix, StateVector};
use qaqc_core::pauli::{pauli_matrix, HamiltonianSpec, ParameterVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_theta<R: Rng>(rng: &mut R, n: usize) -> ParameterVector {
    ParameterVector::new(
        (0..n)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect(),
    )
}

pub fn random_state<R: Rng>(rng: &mut R, n_qubits: usize) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << n_qubits)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

/// `L^m` with `L = G_Q ⋯ G_1` and `G_j = exp(−i θ_j t0 P_j)`, each factor
/// exponentiated densely.
pub fn dense_circuit(
    spec: &HamiltonianSpec,
    theta: &ParameterVector,
    m: usize,
    t0: f64,
) -> ComplexMatrix {
    let d = 1 << spec.n_qubits();
    let mut layer = ComplexMatrix::identity(d);
    for term in spec.terms() {
        let g = hermitian_expm(
            &pauli_matrix(&term.pauli),
            theta.values()[term.param_index] * t0,
        )
        .unwrap();
        layer = &g * &layer;
    }
    let mut u = ComplexMatrix::identity(d);
    for _ in 0..m {
        u = &layer * &u;
    }
    u
}

/// `|Tr(T† U)|² / d²` straight from the definition.
pub fn dense_fidelity(target: &TargetGate, u: &ComplexMatrix) -> f64 {
    let prod = &target.matrix().adjoint() * u;
    let d = u.rows() as f64;
    prod.trace().norm_sqr() / (d * d)
}

pub fn extend_identity(u: &ComplexMatrix, extra_qubits: usize) -> ComplexMatrix {
    kron(u, &ComplexMatrix::identity(1 << extra_qubits))
}

pub fn circuit_oracle(
    circuit: &AnsatzCircuit,
    spec: &HamiltonianSpec,
    theta: &ParameterVector,
) -> ComplexMatrix {
    dense_circuit(spec, theta, circuit.depth(), circuit.layer_time())
}
