//! Target gates and the elementary gates used by the Hilbert-Schmidt test.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetGate {
    name: String,
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl TargetGate {
    /// Wraps a unitary; fails unless it is `2^n × 2^n` and unitary to 1e-10.
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || !matrix.rows().is_power_of_two() {
            return Err(Error::DimMismatch {
                expected: matrix.rows().next_power_of_two(),
                actual: matrix.cols(),
            });
        }
        let err = matrix.unitarity_error();
        if err > 1e-10 {
            return Err(Error::Parse(format!(
                "matrix is not unitary (error {err:.3e})"
            )));
        }
        Ok(Self {
            name: name.into(),
            n_qubits: matrix.rows().trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

fn permutation(dim: usize, image: impl Fn(usize) -> usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for b in 0..dim {
        m[(image(b), b)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Controlled-controlled-NOT: qubits 1 and 2 control, qubit 3 flips.
pub fn toffoli() -> TargetGate {
    let m = permutation(8, |b| if b & 0b110 == 0b110 { b ^ 0b001 } else { b });
    TargetGate::new("toffoli", m).expect("permutation is unitary")
}

/// Controlled-SWAP: qubit 1 controls, qubits 2 and 3 exchange.
pub fn fredkin() -> TargetGate {
    let m = permutation(8, |b| match b {
        0b101 => 0b110,
        0b110 => 0b101,
        _ => b,
    });
    TargetGate::new("fredkin", m).expect("permutation is unitary")
}

/// `H`, `CNOT` (first qubit controls) or `I`.
pub fn elementary(name: &str) -> Result<TargetGate> {
    let m = match name.to_ascii_uppercase().as_str() {
        "H" => ComplexMatrix::from_real(
            2,
            &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        )?,
        "CNOT" | "CX" => permutation(4, |b| if b & 0b10 != 0 { b ^ 0b01 } else { b }),
        "I" => ComplexMatrix::identity(2),
        _ => return Err(Error::UnknownGate(name.to_string())),
    };
    TargetGate::new(name.to_ascii_uppercase(), m)
}

/// Parses a square matrix: one row per line, entries `re,im` separated by
/// whitespace. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|entry| {
                let (re, im) = entry
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("expected `re,im`, got {entry:?}")))?;
                let re: f64 = re
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad real part {re:?}")))?;
                let im: f64 = im
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad imaginary part {im:?}")))?;
                Ok(Complex64::new(re, im))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let dim = rows.len();
    if dim == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    ComplexMatrix::from_vec(dim, dim, rows.into_iter().flatten().collect())
}

pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|c| format!("{:e},{:e}", m[(r, c)].re, m[(r, c)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Resolves `toffoli`, `fredkin`, or a path to a matrix file.
pub fn resolve_target(spec: &str) -> Result<TargetGate> {
    match spec.to_ascii_lowercase().as_str() {
        "toffoli" | "ccx" | "ccnot" => Ok(toffoli()),
        "fredkin" | "cswap" => Ok(fredkin()),
        _ => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(Error::UnknownGate(spec.to_string()));
            }
            let text = std::fs::read_to_string(path)?;
            let m = parse_matrix(&text)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            TargetGate::new(name, m)
        }
    }
}
