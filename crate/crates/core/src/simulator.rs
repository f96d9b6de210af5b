//! Statevector and density-matrix execution of the ansatz, including the
//! full 2n-qubit Hilbert-Schmidt test.
//!
//! Register layout for the test: qubits `0..n` form register A (the system
//! the circuit acts on), qubits `n..2n` form register B. Qubit `i` of A is
//! paired with qubit `i` of B in a Bell state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzCircuit;
use crate::error::{Error, Result};
use crate::gates::TargetGate;
use crate::linalg::{ComplexMatrix, DensityMatrix, StateVector, C0};
use crate::pauli::{ParameterVector, PauliAction};

/// Single-qubit channel in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    label: String,
    operators: Vec<ComplexMatrix>,
    /// Set for amplitude damping, which has a closed-form block update.
    damping: Option<f64>,
}

impl KrausChannel {
    pub fn new(label: impl Into<String>, operators: Vec<ComplexMatrix>) -> Result<Self> {
        for op in &operators {
            if op.rows() != 2 || op.cols() != 2 {
                return Err(Error::DimMismatch {
                    expected: 2,
                    actual: op.rows(),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            operators,
            damping: None,
        })
    }

    pub fn identity() -> Self {
        Self {
            label: "identity".into(),
            operators: vec![ComplexMatrix::identity(2)],
            damping: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// `‖Σ_k E_k† E_k − I‖_max`.
    pub fn completeness_error(&self) -> f64 {
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(2, 2), |acc, e| {
                &acc + &(&e.adjoint() * e)
            });
        sum.max_abs_diff(&ComplexMatrix::identity(2))
    }

    /// `ρ ↦ Σ_k E_k ρ E_k†` on 0-based register qubit `qubit`.
    pub fn apply(&self, rho: &mut ComplexMatrix, qubit: usize) {
        let dim = rho.rows();
        let n = dim.trailing_zeros() as usize;
        let bit = 1usize << (n - 1 - qubit);
        let ops: Vec<[Complex64; 4]> = self
            .operators
            .iter()
            .map(|op| [op[(0, 0)], op[(0, 1)], op[(1, 0)], op[(1, 1)]])
            .collect();
        let data = rho.as_mut_slice();
        // The 2×2 blocks indexed by (r0, c0) are disjoint, so each one is
        // read, mapped and written back in place.
        for r0 in (0..dim).filter(|r| r & bit == 0) {
            let rows = [r0 * dim, (r0 | bit) * dim];
            for c0 in (0..dim).filter(|c| c & bit == 0) {
                let cols = [c0, c0 | bit];
                let b = [
                    data[rows[0] + cols[0]],
                    data[rows[0] + cols[1]],
                    data[rows[1] + cols[0]],
                    data[rows[1] + cols[1]],
                ];
                let out = match self.damping {
                    Some(p) => damp_block(b, p),
                    None => kraus_block(b, &ops),
                };
                data[rows[0] + cols[0]] = out[0];
                data[rows[0] + cols[1]] = out[1];
                data[rows[1] + cols[0]] = out[2];
                data[rows[1] + cols[1]] = out[3];
            }
        }
    }
}

/// `[[b00 + p b11, s b01], [s b10, (1−p) b11]]` with `s = √(1−p)`.
fn damp_block(b: [Complex64; 4], p: f64) -> [Complex64; 4] {
    let s = (1.0 - p).sqrt();
    [b[0] + b[3] * p, b[1] * s, b[2] * s, b[3] * (1.0 - p)]
}

fn kraus_block(b: [Complex64; 4], ops: &[[Complex64; 4]]) -> [Complex64; 4] {
    let mut out = [C0; 4];
    for e in ops {
        // t = E B, then out += t E†.
        let t = [
            e[0] * b[0] + e[1] * b[2],
            e[0] * b[1] + e[1] * b[3],
            e[2] * b[0] + e[3] * b[2],
            e[2] * b[1] + e[3] * b[3],
        ];
        out[0] += t[0] * e[0].conj() + t[1] * e[1].conj();
        out[1] += t[0] * e[2].conj() + t[1] * e[3].conj();
        out[2] += t[2] * e[0].conj() + t[3] * e[1].conj();
        out[3] += t[2] * e[2].conj() + t[3] * e[3].conj();
    }
    out
}

/// Amplitude damping with decay probability `p`:
/// `E0 = [[1, 0], [0, √(1−p)]]`, `E1 = [[0, √p], [0, 0]]`.
pub fn amplitude_damping(p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            min: 0.0,
            max: 1.0,
        });
    }
    let e0 = ComplexMatrix::from_real(2, &[1.0, 0.0, 0.0, (1.0 - p).sqrt()])?;
    let e1 = ComplexMatrix::from_real(2, &[0.0, p.sqrt(), 0.0, 0.0])?;
    let mut ch = KrausChannel::new(format!("amplitude_damping(p={p})"), vec![e0, e1])?;
    ch.damping = Some(p);
    Ok(ch)
}

/// Where channels are inserted into the ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    #[default]
    AfterEachLayer,
    AfterEachGate,
    FinalOnly,
}

impl std::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "after-each-layer" => Ok(Self::AfterEachLayer),
            "after-each-gate" => Ok(Self::AfterEachGate),
            "final-only" => Ok(Self::FinalOnly),
            _ => Err(Error::Config(format!("unknown placement {s:?}"))),
        }
    }
}

/// Channel insertion schedule for a noisy run of the ansatz.
#[derive(Debug, Clone)]
pub struct NoisyCircuitPlan {
    pub circuit: AnsatzCircuit,
    pub channel: KrausChannel,
    pub placement: Placement,
    /// 0-based qubits of the circuit that the channel acts on.
    pub target_qubits: Vec<usize>,
}

impl NoisyCircuitPlan {
    /// Default plan: channel after every layer on every circuit qubit.
    pub fn new(circuit: AnsatzCircuit, channel: KrausChannel) -> Self {
        let target_qubits = (0..circuit.n_qubits()).collect();
        Self {
            circuit,
            channel,
            placement: Placement::AfterEachLayer,
            target_qubits,
        }
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_targets(mut self, targets: Vec<usize>) -> Self {
        self.target_qubits = targets;
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(&q) = self
            .target_qubits
            .iter()
            .find(|&&q| q >= self.circuit.n_qubits())
        {
            return Err(Error::DimMismatch {
                expected: self.circuit.n_qubits(),
                actual: q + 1,
            });
        }
        Ok(())
    }

    /// Runs the plan on a density matrix whose leading qubits hold the circuit.
    pub(crate) fn run(&self, theta: &ParameterVector, rho: &mut ComplexMatrix) -> Result<()> {
        self.validate()?;
        let c = &self.circuit;
        c.check_len(theta)?;
        let register = rho.rows().trailing_zeros() as usize;
        if !rho.is_square() || !rho.rows().is_power_of_two() || c.n_qubits() > register {
            return Err(Error::DimMismatch {
                expected: c.dim(),
                actual: rho.rows(),
            });
        }
        let damp = |rho: &mut ComplexMatrix| {
            for &q in &self.target_qubits {
                self.channel.apply(rho, q);
            }
        };
        match self.placement {
            Placement::AfterEachGate => {
                let actions: Vec<PauliAction> = c
                    .layer()
                    .iter()
                    .map(|g| g.pauli().action(register, 0))
                    .collect();
                for _ in 0..c.depth() {
                    for (gate, action) in c.layer().iter().zip(&actions) {
                        action.conjugate(rho, gate.exponent(theta.values()));
                        damp(rho);
                    }
                }
            }
            Placement::AfterEachLayer => {
                let layer = c.layer_unitary(theta)?;
                for _ in 0..c.depth() {
                    conjugate_leading(&layer, rho);
                    damp(rho);
                }
            }
            Placement::FinalOnly => {
                conjugate_leading(&c.unitary(theta)?, rho);
                damp(rho);
            }
        }
        Ok(())
    }
}

/// Evolves `rho` through the noisy circuit; the circuit acts on the leading
/// qubits of the register.
pub fn evolve_density(
    plan: &NoisyCircuitPlan,
    theta: &ParameterVector,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let mut m = rho.matrix().clone();
    plan.run(theta, &mut m)?;
    DensityMatrix::from_matrix(m)
}

/// Bell-pair preparation on a 2n-qubit register: `H` on A_i then `CNOT A_i → B_i`.
fn bell_prepare(psi: &mut [Complex64], n: usize) {
    for i in 0..n {
        hadamard(psi, 2 * n, i);
        cnot(psi, 2 * n, i, n + i);
    }
}

fn bell_unprepare(psi: &mut [Complex64], n: usize) {
    for i in (0..n).rev() {
        cnot(psi, 2 * n, i, n + i);
        hadamard(psi, 2 * n, i);
    }
}

fn hadamard(psi: &mut [Complex64], register: usize, q: usize) {
    let bit = 1usize << (register - 1 - q);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for b in (0..psi.len()).filter(|b| b & bit == 0) {
        let (a0, a1) = (psi[b], psi[b | bit]);
        psi[b] = (a0 + a1) * s;
        psi[b | bit] = (a0 - a1) * s;
    }
}

fn cnot(psi: &mut [Complex64], register: usize, control: usize, target: usize) {
    let cb = 1usize << (register - 1 - control);
    let tb = 1usize << (register - 1 - target);
    for b in (0..psi.len()).filter(|b| b & cb != 0 && b & tb == 0) {
        psi.swap(b, b | tb);
    }
}

/// `v ← (M ⊗ I_B) v` with `M` acting on the leading `n` qubits.
fn apply_leading(m: &ComplexMatrix, v: &mut [Complex64]) {
    let d = m.rows();
    let rest = v.len() / d;
    let mut col = vec![C0; d];
    for low in 0..rest {
        for (a, slot) in col.iter_mut().enumerate() {
            *slot = v[a * rest + low];
        }
        for r in 0..d {
            v[r * rest + low] = (0..d).map(|k| m[(r, k)] * col[k]).sum();
        }
    }
}

/// `ρ ← (M ⊗ I) ρ (M ⊗ I)†`.
fn conjugate_leading(m: &ComplexMatrix, rho: &mut ComplexMatrix) {
    let dim = rho.rows();
    let d = m.rows();
    let rest = dim / d;
    let mm = m.as_slice();
    // Left factor: block row `a` (rest × dim rows) ← Σ_k M_ak · block row `k`.
    let src = rho.as_slice().to_vec();
    let stripe = rest * dim;
    let out = rho.as_mut_slice();
    for a in 0..d {
        let dst = &mut out[a * stripe..(a + 1) * stripe];
        dst.iter_mut().for_each(|z| *z = C0);
        for k in 0..d {
            let w = mm[a * d + k];
            if w == C0 {
                continue;
            }
            dst.iter_mut()
                .zip(&src[k * stripe..(k + 1) * stripe])
                .for_each(|(z, s)| *z += w * s);
        }
    }
    // Right factor on every row: v ← (M* ⊗ I) v.
    let mut row = vec![C0; dim];
    for r in 0..dim {
        let line = &mut out[r * dim..(r + 1) * dim];
        row.copy_from_slice(line);
        for b in 0..d {
            let dst = &mut line[b * rest..(b + 1) * rest];
            dst.iter_mut().for_each(|z| *z = C0);
            for l in 0..d {
                let w = mm[b * d + l].conj();
                if w == C0 {
                    continue;
                }
                dst.iter_mut()
                    .zip(&row[l * rest..(l + 1) * rest])
                    .for_each(|(z, s)| *z += w * s);
            }
        }
    }
}

/// Probability of reading all 2n qubits as zero in the Hilbert-Schmidt test.
///
/// The circuit and then `U_target†` act on register A between Bell-pair
/// preparation and its inverse. With a plan, the circuit runs on density
/// matrices with channels inside the circuit only.
pub fn hs_test_probability(
    circuit: &AnsatzCircuit,
    theta: &ParameterVector,
    target: &TargetGate,
    plan: Option<&NoisyCircuitPlan>,
) -> Result<f64> {
    let n = circuit.n_qubits();
    if target.n_qubits() != n {
        return Err(Error::DimMismatch {
            expected: circuit.dim(),
            actual: target.dim(),
        });
    }
    circuit.check_len(theta)?;
    let mut psi = StateVector::zero(2 * n);
    bell_prepare(psi.amplitudes_mut(), n);
    match plan {
        None => {
            circuit.apply_at(theta, &mut psi, 0)?;
            apply_leading(&target.matrix().adjoint(), psi.amplitudes_mut());
            bell_unprepare(psi.amplitudes_mut(), n);
            Ok(psi.probability(0).clamp(0.0, 1.0))
        }
        Some(plan) => {
            if plan.circuit.n_qubits() != n {
                return Err(Error::DimMismatch {
                    expected: circuit.dim(),
                    actual: plan.circuit.dim(),
                });
            }
            let mut rho = psi.to_density().into_matrix();
            plan.run(theta, &mut rho)?;
            // ⟨0|B† (T†⊗I) ρ (T⊗I) B|0⟩ = ⟨Φ_T|ρ|Φ_T⟩ with |Φ_T⟩ = (T⊗I)|Φ⟩
            // and |Φ⟩ = B|0⟩ the Bell-pair state.
            let mut phi = StateVector::zero(2 * n);
            bell_prepare(phi.amplitudes_mut(), n);
            apply_leading(target.matrix(), phi.amplitudes_mut());
            let rho_phi = rho.apply(phi.amplitudes())?;
            let p: Complex64 = phi
                .amplitudes()
                .iter()
                .zip(&rho_phi)
                .map(|(a, b)| a.conj() * b)
                .sum();
            Ok(p.re.clamp(0.0, 1.0))
        }
    }
}
