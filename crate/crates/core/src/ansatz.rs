//! Hamiltonian variational ansatz.
//!
//! One Trotter layer applies `exp(−i θ_j H_j t_0)` for every term in the
//! canonical order; the circuit repeats that layer `m` times with the same
//! parameters. In rotation-gate language each factor is `R_α(2 θ_j t_0)` or
//! `R_αα(2 θ_j t_0)` with `R(φ) = exp(−i φ σ / 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector};
use crate::pauli::{wrap_angle, HamiltonianSpec, ParameterVector, Pauli, PauliAction, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    SingleRotation,
    TwoRotation,
}

/// One parameterized rotation inside a Trotter layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub axis: Pauli,
    /// 0-based qubit indices; two-qubit rotations act on neighbours.
    pub qubits: Vec<usize>,
    pub param_index: usize,
    /// Rotation angle per unit θ; fixed at `2 t_0`.
    pub angle_scale: f64,
    pauli: PauliString,
}

impl GateOp {
    pub fn pauli(&self) -> &PauliString {
        &self.pauli
    }

    /// The `R_α` rotation angle for the given parameters.
    ///
    /// At `t_0 = 1` the gate is 2π-periodic in θ, and θ is reduced into
    /// `[−π, π]` first so that shifted parameters give bit-identical gates.
    pub fn angle(&self, theta: &[f64]) -> f64 {
        let x = theta[self.param_index];
        if self.angle_scale == 2.0 {
            self.angle_scale * wrap_angle(x)
        } else {
            self.angle_scale * x
        }
    }

    /// Half-angle φ in `exp(−iφP)`.
    #[inline]
    pub(crate) fn exponent(&self, theta: &[f64]) -> f64 {
        0.5 * self.angle(theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzCircuit {
    n_qubits: usize,
    depth: usize,
    layer_time: f64,
    layer: Vec<GateOp>,
    n_params: usize,
    /// Cached actions on the bare n-qubit register.
    actions: Vec<PauliAction>,
}

/// Builds the `m`-layer ansatz for `spec` with layer time `t0`.
pub fn build_hva(spec: &HamiltonianSpec, m: usize, t0: f64) -> Result<AnsatzCircuit> {
    if m == 0 {
        return Err(Error::InvalidDepth(m));
    }
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::InvalidLayerTime(t0));
    }
    let n = spec.n_qubits();
    let layer: Vec<GateOp> = spec
        .terms()
        .iter()
        .map(|term| {
            let qubits = term.pauli.support();
            let axis = term.pauli.letters()[qubits[0]];
            let kind = if qubits.len() == 1 {
                GateKind::SingleRotation
            } else {
                debug_assert_eq!(qubits.len(), 2);
                debug_assert_eq!(qubits[1], qubits[0] + 1);
                GateKind::TwoRotation
            };
            GateOp {
                kind,
                axis,
                qubits,
                param_index: term.param_index,
                angle_scale: 2.0 * t0,
                pauli: term.pauli.clone(),
            }
        })
        .collect();
    let actions = layer.iter().map(|g| g.pauli.action(n, 0)).collect();
    Ok(AnsatzCircuit {
        n_qubits: n,
        depth: m,
        layer_time: t0,
        layer,
        n_params: spec.n_params(),
        actions,
    })
}

impl AnsatzCircuit {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn layer_time(&self) -> f64 {
        self.layer_time
    }

    pub fn total_time(&self) -> f64 {
        self.layer_time * self.depth as f64
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// The gate list shared by every layer.
    pub fn layer(&self) -> &[GateOp] {
        &self.layer
    }

    pub fn n_gates(&self) -> usize {
        self.layer.len() * self.depth
    }

    /// All gate applications in time order, tagged with their layer.
    pub fn gate_sequence(&self) -> impl Iterator<Item = (usize, &GateOp)> {
        (0..self.depth).flat_map(move |l| self.layer.iter().map(move |g| (l, g)))
    }

    pub(crate) fn actions(&self) -> &[PauliAction] {
        &self.actions
    }

    pub fn check_len(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::LengthMismatch {
                expected: self.n_params,
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// Unitary of a single Trotter layer.
    pub fn layer_unitary(&self, theta: &ParameterVector) -> Result<ComplexMatrix> {
        self.check_len(theta)?;
        let mut u = ComplexMatrix::identity(self.dim());
        for (gate, action) in self.layer.iter().zip(&self.actions) {
            action.rotate_left(&mut u, gate.exponent(theta.values()));
        }
        Ok(u)
    }

    /// Full circuit unitary: the layer unitary raised to the depth.
    pub fn unitary(&self, theta: &ParameterVector) -> Result<ComplexMatrix> {
        Ok(self.layer_unitary(theta)?.pow(self.depth))
    }

    /// Applies every gate to `psi`, with the circuit's qubit 1 placed at
    /// 0-based register qubit `offset`.
    pub fn apply_at(
        &self,
        theta: &ParameterVector,
        psi: &mut StateVector,
        offset: usize,
    ) -> Result<()> {
        self.check_len(theta)?;
        let register = psi.n_qubits();
        if offset + self.n_qubits > register {
            return Err(Error::DimMismatch {
                expected: 1 << (offset + self.n_qubits),
                actual: psi.dim(),
            });
        }
        let actions: Vec<PauliAction> = self
            .layer
            .iter()
            .map(|g| g.pauli.action(register, offset))
            .collect();
        for _ in 0..self.depth {
            for (gate, action) in self.layer.iter().zip(&actions) {
                action.rotate_vector(psi.amplitudes_mut(), gate.exponent(theta.values()));
            }
        }
        Ok(())
    }
}

pub fn circuit_unitary(c: &AnsatzCircuit, theta: &ParameterVector) -> Result<ComplexMatrix> {
    c.unitary(theta)
}

/// Gate-by-gate statevector application on the leading qubits of `psi`.
pub fn apply_circuit(
    c: &AnsatzCircuit,
    theta: &ParameterVector,
    psi: &StateVector,
) -> Result<StateVector> {
    let mut out = psi.clone();
    c.apply_at(theta, &mut out, 0)?;
    Ok(out)
}
