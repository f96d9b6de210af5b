//! Hilbert-Schmidt cost `C(θ) = 1 − |Tr(U_target† U(θ))|² / d²` and its gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzCircuit;
use crate::error::{Error, Result};
use crate::gates::TargetGate;
use crate::linalg::{ComplexMatrix, C0};
use crate::optimizer::InitScheme;
use crate::pauli::ParameterVector;
use crate::simulator::{hs_test_probability, NoisyCircuitPlan};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// Direct trace of the 2^n-dimensional circuit unitary.
    ExactTrace,
    /// Full 2n-qubit Hilbert-Schmidt test on statevectors.
    HsTestStatevector,
    /// Hilbert-Schmidt test on density matrices with the noise plan applied.
    HsTestDensity,
}

impl CostMode {
    pub fn is_noisy(self) -> bool {
        matches!(self, CostMode::HsTestDensity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    CentralDiff,
    Adjoint,
}

/// Cost function bound to a circuit and a target, with an evaluation counter.
#[derive(Debug)]
pub struct CostEvaluator {
    mode: CostMode,
    target: TargetGate,
    circuit: AnsatzCircuit,
    noise_plan: Option<NoisyCircuitPlan>,
    target_adjoint: ComplexMatrix,
    eval_count: AtomicU64,
}

impl Clone for CostEvaluator {
    fn clone(&self) -> Self {
        Self {
            mode: self.mode,
            target: self.target.clone(),
            circuit: self.circuit.clone(),
            noise_plan: self.noise_plan.clone(),
            target_adjoint: self.target_adjoint.clone(),
            eval_count: AtomicU64::new(self.eval_count()),
        }
    }
}

impl CostEvaluator {
    pub fn new(mode: CostMode, circuit: AnsatzCircuit, target: TargetGate) -> Result<Self> {
        if mode.is_noisy() {
            return Err(Error::Config(
                "density mode needs a noise plan; use CostEvaluator::noisy".into(),
            ));
        }
        Self::build(mode, circuit, target, None)
    }

    pub fn exact(circuit: AnsatzCircuit, target: TargetGate) -> Result<Self> {
        Self::new(CostMode::ExactTrace, circuit, target)
    }

    /// Density-matrix cost `1 − P_HS` with channels inserted per `plan`.
    pub fn noisy(plan: NoisyCircuitPlan, target: TargetGate) -> Result<Self> {
        let circuit = plan.circuit.clone();
        Self::build(CostMode::HsTestDensity, circuit, target, Some(plan))
    }

    fn build(
        mode: CostMode,
        circuit: AnsatzCircuit,
        target: TargetGate,
        noise_plan: Option<NoisyCircuitPlan>,
    ) -> Result<Self> {
        if target.n_qubits() != circuit.n_qubits() {
            return Err(Error::DimMismatch {
                expected: circuit.dim(),
                actual: target.dim(),
            });
        }
        let target_adjoint = target.matrix().adjoint();
        Ok(Self {
            mode,
            target,
            circuit,
            noise_plan,
            target_adjoint,
            eval_count: AtomicU64::new(0),
        })
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    pub fn target(&self) -> &TargetGate {
        &self.target
    }

    pub fn circuit(&self) -> &AnsatzCircuit {
        &self.circuit
    }

    pub fn noise_plan(&self) -> Option<&NoisyCircuitPlan> {
        self.noise_plan.as_ref()
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    pub fn reset_eval_count(&self) {
        self.eval_count.store(0, Ordering::Relaxed);
    }

    fn dim_sq(&self) -> f64 {
        let d = self.circuit.dim() as f64;
        d * d
    }

    /// `Tr(U_target† U(θ))`.
    pub fn trace_overlap(&self, theta: &ParameterVector) -> Result<Complex64> {
        let u = self.circuit.unitary(theta)?;
        Ok(trace_product(&self.target_adjoint, &u))
    }

    /// Cost `C(θ) ∈ [0, 1]`; counts one evaluation.
    pub fn cost(&self, theta: &ParameterVector) -> Result<f64> {
        self.circuit.check_len(theta)?;
        self.eval_count.fetch_add(1, Ordering::Relaxed);
        let fidelity = match self.mode {
            CostMode::ExactTrace => self.trace_overlap(theta)?.norm_sqr() / self.dim_sq(),
            CostMode::HsTestStatevector => {
                hs_test_probability(&self.circuit, theta, &self.target, None)?
            }
            CostMode::HsTestDensity => {
                hs_test_probability(&self.circuit, theta, &self.target, self.noise_plan.as_ref())?
            }
        };
        Ok((1.0 - fidelity).clamp(0.0, 1.0))
    }

    pub fn fidelity(&self, theta: &ParameterVector) -> Result<f64> {
        Ok(1.0 - self.cost(theta)?)
    }

    pub fn gradient(&self, theta: &ParameterVector, method: GradientMethod) -> Result<Vec<f64>> {
        match method {
            GradientMethod::Adjoint => Ok(self.cost_and_gradient(theta)?.1),
            GradientMethod::CentralDiff => self.central_diff_gradient(theta),
        }
    }

    fn central_diff_gradient(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        if self.mode.is_noisy() {
            return Err(Error::NoisyModeUnsupported);
        }
        self.circuit.check_len(theta)?;
        let mut probe = theta.clone();
        (0..theta.len())
            .map(|j| {
                let x = theta.values()[j];
                probe.values_mut()[j] = x + FD_STEP;
                let plus = self.cost(&probe)?;
                probe.values_mut()[j] = x - FD_STEP;
                let minus = self.cost(&probe)?;
                probe.values_mut()[j] = x;
                Ok((plus - minus) / (2.0 * FD_STEP))
            })
            .collect()
    }

    /// Cost and adjoint-mode gradient in one forward and one backward sweep.
    ///
    /// With `W_0 = T† U` and `W_k = G_k W_{k−1} G_k†` over gates in time order,
    /// gate `k` with generator `P` contributes `−i t_0 Tr(P W_k)` to
    /// `∂ Tr(T† U) / ∂θ_j`.
    pub fn cost_and_gradient(&self, theta: &ParameterVector) -> Result<(f64, Vec<f64>)> {
        if self.mode.is_noisy() {
            return Err(Error::NoisyModeUnsupported);
        }
        self.circuit.check_len(theta)?;
        self.eval_count.fetch_add(1, Ordering::Relaxed);
        let c = &self.circuit;
        let u = c.unitary(theta)?;
        let mut w = &self.target_adjoint * &u;
        let tr = w.trace();
        let mut dtr = vec![C0; theta.len()];
        let t0 = c.layer_time();
        for _ in 0..c.depth() {
            for (gate, action) in c.layer().iter().zip(c.actions()) {
                action.conjugate(&mut w, gate.exponent(theta.values()));
                let dim = w.rows();
                let tr_pw: Complex64 = (0..dim)
                    .map(|b| {
                        let a = b ^ action.x_mask;
                        action.phase(a) * w[(a, b)]
                    })
                    .sum();
                dtr[gate.param_index] += Complex64::new(0.0, -t0) * tr_pw;
            }
        }
        let d2 = self.dim_sq();
        let cost = (1.0 - tr.norm_sqr() / d2).clamp(0.0, 1.0);
        let grad = dtr.iter().map(|g| -2.0 * (tr.conj() * g).re / d2).collect();
        Ok((cost, grad))
    }

    /// Gradient-variance probe over random initial points.
    pub fn gradient_stats(
        &self,
        samples: usize,
        init: &InitScheme,
        seed: u64,
    ) -> Result<GradientStats> {
        if samples < 2 {
            return Err(Error::Config(format!(
                "gradient_stats needs at least 2 samples, got {samples}"
            )));
        }
        let mut rng = crate::seed::rng(seed);
        let grads = (0..samples)
            .map(|_| {
                let theta = init.sample(self.n_params(), &mut rng);
                Ok(self.cost_and_gradient(&theta)?.1)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GradientStats::from_samples(&grads))
    }
}

/// `Tr(A B)` without forming the product.
fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    let mut acc = C0;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStats {
    pub samples: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample variance of each gradient coordinate.
    pub variance: Vec<f64>,
    /// Mean of the per-coordinate variances.
    pub overall_variance: f64,
}

impl GradientStats {
    pub fn from_samples(grads: &[Vec<f64>]) -> Self {
        let n = grads.len();
        let q = grads.first().map_or(0, Vec::len);
        // Shifted by the first sample so identical samples give exactly zero variance.
        let mean: Vec<f64> = (0..q)
            .map(|j| {
                let shift = grads[0][j];
                shift + grads.iter().map(|g| g[j] - shift).sum::<f64>() / n as f64
            })
            .collect();
        let variance: Vec<f64> = (0..q)
            .map(|j| grads.iter().map(|g| (g[j] - mean[j]).powi(2)).sum::<f64>() / (n as f64 - 1.0))
            .collect();
        let overall_variance = if q == 0 {
            0.0
        } else {
            variance.iter().sum::<f64>() / q as f64
        };
        Self {
            samples: n,
            mean,
            variance,
            overall_variance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::build_hva;
    use crate::gates::toffoli;
    use crate::pauli::heisenberg_spec;
    use crate::simulator::amplitude_damping;

    fn evaluator(m: usize) -> CostEvaluator {
        let spec = heisenberg_spec(3).unwrap();
        CostEvaluator::exact(build_hva(&spec, m, 1.0).unwrap(), toffoli()).unwrap()
    }

    #[test]
    fn identity_cost_against_toffoli() {
        let e = evaluator(6);
        let c = e.cost(&ParameterVector::new(vec![0.0; 15])).unwrap();
        assert!((c - 0.4375).abs() < 1e-12);
        assert_eq!(e.eval_count(), 1);
    }

    #[test]
    fn zero_point_gradient_is_zero() {
        // θ = 0 is a stationary point for every real target.
        let e = evaluator(3);
        let g = e
            .gradient(
                &ParameterVector::new(vec![0.0; 15]),
                GradientMethod::Adjoint,
            )
            .unwrap();
        let fd = e
            .gradient(
                &ParameterVector::new(vec![0.0; 15]),
                GradientMethod::CentralDiff,
            )
            .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!(a.abs() < 1e-12);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn noisy_mode_has_no_gradient() {
        let spec = heisenberg_spec(3).unwrap();
        let plan = NoisyCircuitPlan::new(
            build_hva(&spec, 1, 1.0).unwrap(),
            amplitude_damping(0.01).unwrap(),
        );
        let e = CostEvaluator::noisy(plan, toffoli()).unwrap();
        let theta = spec.zeros();
        assert_eq!(
            e.gradient(&theta, GradientMethod::Adjoint),
            Err(Error::NoisyModeUnsupported)
        );
        assert_eq!(
            e.gradient(&theta, GradientMethod::CentralDiff),
            Err(Error::NoisyModeUnsupported)
        );
        assert!(CostEvaluator::new(
            CostMode::HsTestDensity,
            build_hva(&spec, 1, 1.0).unwrap(),
            toffoli()
        )
        .is_err());
    }

    #[test]
    fn length_mismatch() {
        let e = evaluator(1);
        assert!(matches!(
            e.cost(&ParameterVector::new(vec![0.0; 4])),
            Err(Error::LengthMismatch {
                expected: 15,
                actual: 4
            })
        ));
    }

    #[test]
    fn gradient_stats_needs_two_samples() {
        let e = evaluator(1);
        assert!(e.gradient_stats(1, &InitScheme::default(), 0).is_err());
    }

    #[test]
    fn fixed_init_has_zero_variance() {
        let e = evaluator(2);
        let init = InitScheme::fixed(vec![0.3; 15]);
        let stats = e.gradient_stats(5, &init, 1).unwrap();
        assert!(stats.variance.iter().all(|&v| v == 0.0));
        assert_eq!(stats.overall_variance, 0.0);
    }
}
