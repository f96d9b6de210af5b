//! Pauli strings and the anisotropic Heisenberg chain Hamiltonian
//! `H(θ) = Σ_j θ_j H_j`.
//!
//! Terms are kept in a frozen canonical order: local fields by qubit
//! (X, Y, Z each), then nearest-neighbour couplings by bond (XX, YY, ZZ each).
//! For three qubits that is
//! `X1 Y1 Z1 X2 Y2 Z2 X3 Y3 Z3 X1X2 Y1Y2 Z1Z2 X2X3 Y2Y3 Z2Z3`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, C0, C1, CI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        let data = match self {
            Pauli::I => vec![C1, C0, C0, C1],
            Pauli::X => vec![C0, C1, C1, C0],
            Pauli::Y => vec![C0, -CI, CI, C0],
            Pauli::Z => vec![C1, C0, C0, -C1],
        };
        ComplexMatrix::from_vec(2, 2, data).expect("2x2")
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub const AXES: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

/// Tensor product of single-qubit Paulis; `letters[0]` acts on qubit 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n])
    }

    /// Single non-identity letter at 0-based `qubit`.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.letters[qubit] = p;
        s
    }

    /// `p ⊗ p` on 0-based qubits `qubit` and `qubit + 1`.
    pub fn pair(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.letters[qubit] = p;
        s.letters[qubit + 1] = p;
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// 0-based indices of the non-identity letters.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(i, _)| i)
            .collect()
    }

    /// Report label such as `X1`, `Z3` or `X1X2` (1-based qubit numbers).
    pub fn label(&self) -> String {
        let support = self.support();
        if support.is_empty() {
            return "I".to_string();
        }
        support
            .iter()
            .map(|&q| format!("{}{}", self.letters[q].symbol(), q + 1))
            .collect()
    }

    /// Parses a label like `Y2` or `Z2Z3` for an `n`-qubit register.
    pub fn from_label(label: &str, n: usize) -> Result<Self> {
        let mut s = Self::identity(n);
        let chars: Vec<char> = label.chars().collect();
        if label == "I" {
            return Ok(s);
        }
        let mut i = 0;
        while i < chars.len() {
            let p = Pauli::from_symbol(chars[i])
                .ok_or_else(|| Error::Parse(format!("bad Pauli label {label:?}")))?;
            i += 1;
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let q: usize = chars[start..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| Error::Parse(format!("bad Pauli label {label:?}")))?;
            if q == 0 || q > n {
                return Err(Error::Parse(format!("qubit {q} out of range in {label:?}")));
            }
            s.letters[q - 1] = p;
        }
        Ok(s)
    }

    /// Bit-level action on a register of `register_qubits` qubits where this
    /// string starts at 0-based qubit `offset`.
    pub fn action(&self, register_qubits: usize, offset: usize) -> PauliAction {
        assert!(offset + self.n_qubits() <= register_qubits);
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut n_y = 0u32;
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (register_qubits - 1 - (offset + q));
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= bit,
                Pauli::Z => z_mask |= bit,
                Pauli::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                    n_y += 1;
                }
            }
        }
        let global = match n_y % 4 {
            0 => C1,
            1 => CI,
            2 => -C1,
            _ => -CI,
        };
        PauliAction {
            x_mask,
            z_mask,
            global,
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses a dense word such as `XXI`.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| Pauli::from_symbol(c).ok_or_else(|| Error::Parse(format!("bad Pauli {c:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

/// `P|b⟩ = global · (−1)^{popcount(b & z_mask)} |b ⊕ x_mask⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliAction {
    pub x_mask: usize,
    pub z_mask: usize,
    pub global: Complex64,
}

impl PauliAction {
    #[inline]
    pub fn phase(&self, b: usize) -> Complex64 {
        if (b & self.z_mask).count_ones() % 2 == 1 {
            -self.global
        } else {
            self.global
        }
    }

    /// `v ← exp(−iφP) v` on a strided view: element `k` lives at
    /// `base + k * stride`, `k` ranging over the register dimension.
    #[inline]
    fn rotate_strided(
        &self,
        v: &mut [Complex64],
        dim: usize,
        base: usize,
        stride: usize,
        c: f64,
        s: f64,
    ) {
        let ms = Complex64::new(0.0, -s);
        if self.x_mask == 0 {
            for b in 0..dim {
                let idx = base + b * stride;
                v[idx] *= c + ms * self.phase(b);
            }
            return;
        }
        // Pair each index with its partner a = b ⊕ x_mask once.
        let pivot = 1usize << (usize::BITS - 1 - self.x_mask.leading_zeros());
        for b in 0..dim {
            if b & pivot != 0 {
                continue;
            }
            let a = b ^ self.x_mask;
            let (ib, ia) = (base + b * stride, base + a * stride);
            let (vb, va) = (v[ib], v[ia]);
            // (Pv)[b] = phase(a) v[a], (Pv)[a] = phase(b) v[b]
            v[ib] = vb * c + ms * self.phase(a) * va;
            v[ia] = va * c + ms * self.phase(b) * vb;
        }
    }

    /// `ψ ← exp(−iφP) ψ`.
    pub fn rotate_vector(&self, psi: &mut [Complex64], angle: f64) {
        let (s, c) = angle.sin_cos();
        let dim = psi.len();
        self.rotate_strided(psi, dim, 0, 1, c, s);
    }

    /// `M ← exp(−iφP) M` (acts on every column).
    pub fn rotate_left(&self, m: &mut ComplexMatrix, angle: f64) {
        let (s, c) = angle.sin_cos();
        let (rows, cols) = (m.rows(), m.cols());
        let data = m.as_mut_slice();
        for col in 0..cols {
            self.rotate_strided(data, rows, col, cols, c, s);
        }
    }

    /// `M ← M exp(+iφP)`, i.e. right-multiplication by the adjoint rotation.
    pub fn rotate_right_adjoint(&self, m: &mut ComplexMatrix, angle: f64) {
        // (M G†)ᵀ = conj(G) Mᵀ; row r of M transforms like a vector under conj(G).
        // conj(exp(−iφP)) = exp(+iφ conj(P)), conj(P) = P with conj(global).
        let conj = PauliAction {
            global: self.global.conj(),
            ..*self
        };
        let (s, c) = angle.sin_cos();
        let (rows, cols) = (m.rows(), m.cols());
        let data = m.as_mut_slice();
        for row in 0..rows {
            conj.rotate_strided(data, cols, row * cols, 1, c, -s);
        }
    }

    /// `ρ ← G ρ G†` with `G = exp(−iφP)`.
    pub fn conjugate(&self, rho: &mut ComplexMatrix, angle: f64) {
        self.rotate_left(rho, angle);
        self.rotate_right_adjoint(rho, angle);
    }
}

/// Dense `2^n × 2^n` matrix of a Pauli string, qubit 1 most significant.
pub fn pauli_matrix(p: &PauliString) -> ComplexMatrix {
    p.letters
        .iter()
        .fold(ComplexMatrix::identity(1), |acc, &l| {
            kron(&acc, &l.matrix())
        })
}

/// One Hamiltonian term: a Pauli string with the index of its coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub pauli: PauliString,
    pub param_index: usize,
}

/// Ordered term list of the anisotropic Heisenberg chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    n_qubits: usize,
    terms: Vec<HamiltonianTerm>,
}

impl HamiltonianSpec {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    pub fn n_params(&self) -> usize {
        self.terms.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.pauli.label()).collect()
    }

    /// Parameter indices of the local `Z_i` fields.
    pub fn longitudinal_field_indices(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter(|t| t.pauli.weight() == 1 && t.pauli.letters().contains(&Pauli::Z))
            .map(|t| t.param_index)
            .collect()
    }

    /// Parameter indices of the two-qubit exchange couplings.
    pub fn coupling_indices(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter(|t| t.pauli.weight() == 2)
            .map(|t| t.param_index)
            .collect()
    }

    /// Parameter vector of the right length with every value zero.
    pub fn zeros(&self) -> ParameterVector {
        ParameterVector::new(vec![0.0; self.n_params()])
    }

    /// `H(θ) = Σ_j θ_j H_j`.
    pub fn assemble(&self, theta: &ParameterVector) -> Result<ComplexMatrix> {
        self.check_len(theta)?;
        let dim = 1usize << self.n_qubits;
        let mut h = ComplexMatrix::zeros(dim, dim);
        for term in &self.terms {
            let coeff = theta.values[term.param_index];
            if coeff == 0.0 {
                continue;
            }
            let action = term.pauli.action(self.n_qubits, 0);
            for b in 0..dim {
                // column b of P has a single entry at row b ⊕ x_mask
                h[(b ^ action.x_mask, b)] += action.phase(b) * coeff;
            }
        }
        Ok(h)
    }

    pub fn check_len(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                expected: self.n_params(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// `LABEL index value` lines, one per term.
    pub fn to_text(&self, theta: &ParameterVector) -> Result<String> {
        self.check_len(theta)?;
        let mut out = String::new();
        for term in &self.terms {
            out.push_str(&format!(
                "{} {} {:.10}\n",
                term.pauli.label(),
                term.param_index,
                theta.values[term.param_index]
            ));
        }
        Ok(out)
    }

    /// Inverse of [`HamiltonianSpec::to_text`]; labels must match this spec.
    pub fn parse_text(&self, text: &str) -> Result<ParameterVector> {
        let mut values = vec![None; self.n_params()];
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [label, index, value] = fields[..] else {
                return Err(Error::Parse(format!(
                    "expected `LABEL index value`, got {line:?}"
                )));
            };
            let index: usize = index
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in {line:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("bad value in {line:?}")))?;
            let term = self
                .terms
                .iter()
                .find(|t| t.param_index == index)
                .ok_or_else(|| Error::Parse(format!("index {index} out of range")))?;
            if term.pauli.label() != label {
                return Err(Error::Parse(format!(
                    "label {label} does not match term {} at index {index}",
                    term.pauli.label()
                )));
            }
            values[index] = Some(value);
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("missing parameter {i}"))))
            .collect::<Result<Vec<_>>>()
            .map(ParameterVector::new)
    }
}

/// Canonical anisotropic Heisenberg chain on `n` qubits: `3n` local fields
/// followed by `3(n − 1)` nearest-neighbour couplings.
pub fn heisenberg_spec(n: usize) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(Error::InvalidQubitCount(n));
    }
    let locals = (0..n).flat_map(|q| Pauli::AXES.map(|p| PauliString::single(n, q, p)));
    let couplings = (0..n - 1).flat_map(|q| Pauli::AXES.map(|p| PauliString::pair(n, q, p)));
    let terms = locals
        .chain(couplings)
        .enumerate()
        .map(|(param_index, pauli)| HamiltonianTerm { pauli, param_index })
        .collect();
    Ok(HamiltonianSpec { n_qubits: n, terms })
}

/// Maps an angle onto `[−π, π]` by adding multiples of 2π.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..=PI).contains(&x) {
        return x;
    }
    // A single rounded multiple of 2π is subtracted, so `wrap_angle(x + 2π)`
    // returns `x` exactly whenever `x + 2π` itself was exact.
    let turns = (x / TAU).round();
    (x - turns * TAU).clamp(-PI, PI)
}

/// Hamiltonian coefficients θ in units of the reference energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn wrapped(&self) -> Self {
        Self::new(self.values.iter().map(|&x| wrap_angle(x)).collect())
    }

    pub fn is_wrapped(&self) -> bool {
        self.values.iter().all(|x| (-PI..=PI).contains(x))
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}
