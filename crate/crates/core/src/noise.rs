//! Coherent noise applied to compiled parameters: charge noise on the
//! exchange couplings and nuclear noise on the longitudinal fields.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzCircuit;
use crate::cost::CostEvaluator;
use crate::error::{Error, Result};
use crate::gates::TargetGate;
use crate::optimizer::PopulationStats;
use crate::pauli::{HamiltonianSpec, ParameterVector};
use crate::seed::{derive_seed, rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Shifts every coupling `J_i^α`.
    Charge,
    /// Shifts every longitudinal field `h_i^z`.
    Nuclear,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Charge => "charge",
            NoiseKind::Nuclear => "nuclear",
        }
    }

    /// Parameter indices this kind of noise touches.
    pub fn affected_indices(self, spec: &HamiltonianSpec) -> Vec<usize> {
        match self {
            NoiseKind::Charge => spec.coupling_indices(),
            NoiseKind::Nuclear => spec.longitudinal_field_indices(),
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charge" => Ok(Self::Charge),
            "nuclear" => Ok(Self::Nuclear),
            _ => Err(Error::Config(format!("unknown noise kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Every affected parameter is shifted by exactly `+δ`.
    #[default]
    DeterministicShift,
    /// One shared draw `u ~ U[0, δ]` per realization.
    UniformSample,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::DeterministicShift => "deterministic-shift",
            NoiseMode::UniformSample => "uniform-sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentNoise {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub mode: NoiseMode,
    /// Realizations averaged per grid point in sampled mode.
    pub samples: usize,
    pub seed: u64,
}

impl CoherentNoise {
    pub fn shift(kind: NoiseKind, amplitude: f64) -> Self {
        Self {
            kind,
            amplitude,
            mode: NoiseMode::DeterministicShift,
            samples: 1,
            seed: 0,
        }
    }

    pub fn sampled(kind: NoiseKind, amplitude: f64, samples: usize, seed: u64) -> Self {
        Self {
            kind,
            amplitude,
            mode: NoiseMode::UniformSample,
            samples,
            seed,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::NegativeAmplitude(self.amplitude));
        }
        if self.mode == NoiseMode::UniformSample && self.samples == 0 {
            return Err(Error::Config("sampled noise needs samples >= 1".into()));
        }
        Ok(())
    }
}

/// Adds the noise shift to the affected entries of `theta_star`.
///
/// The result is not re-wrapped: the shift is a physical field offset.
pub fn perturb(
    theta_star: &ParameterVector,
    spec: &HamiltonianSpec,
    noise: &CoherentNoise,
    draw_index: u64,
) -> Result<ParameterVector> {
    noise.validate()?;
    spec.check_len(theta_star)?;
    let shift = match noise.mode {
        NoiseMode::DeterministicShift => noise.amplitude,
        NoiseMode::UniformSample => {
            let mut r = rng(derive_seed(noise.seed, Stream::NoiseDraw, draw_index));
            noise.amplitude * r.gen::<f64>()
        }
    };
    let mut out = theta_star.clone();
    for j in noise.kind.affected_indices(spec) {
        out.values_mut()[j] += shift;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub kind: NoiseKind,
    pub mode: NoiseMode,
    pub points: Vec<SweepPoint>,
}

impl RobustnessCurve {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_fidelity).collect()
    }
}

/// `0, step, 2·step, …, max` (inclusive up to rounding).
pub fn delta_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Default grid: 0 to 0.5 in steps of 0.025.
pub fn default_delta_grid() -> Vec<f64> {
    delta_grid(0.5, 0.025)
}

/// Fidelity of the compiled parameters under each amplitude of `grid`.
///
/// In sampled mode, grid point `k` draws its realizations from the seed
/// derived from `(noise.seed, k)`.
pub fn robustness_sweep(
    theta_star: &ParameterVector,
    spec: &HamiltonianSpec,
    circuit: &AnsatzCircuit,
    target: &TargetGate,
    noise: &CoherentNoise,
    grid: &[f64],
) -> Result<RobustnessCurve> {
    if let Some(&bad) = grid.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::NegativeAmplitude(bad));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("delta grid must be ascending".into()));
    }
    noise.validate()?;
    let evaluator = CostEvaluator::exact(circuit.clone(), target.clone())?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(k, &delta)| {
            let point_noise = CoherentNoise {
                amplitude: delta,
                seed: derive_seed(noise.seed, Stream::GridPoint, k as u64),
                ..noise.clone()
            };
            let draws = match noise.mode {
                NoiseMode::DeterministicShift => 1,
                NoiseMode::UniformSample => noise.samples,
            };
            let fids = (0..draws as u64)
                .map(|i| evaluator.fidelity(&perturb(theta_star, spec, &point_noise, i)?))
                .collect::<Result<Vec<_>>>()?;
            let stats = PopulationStats::from_values(&fids);
            Ok(SweepPoint {
                delta,
                mean_fidelity: stats.mean,
                std_fidelity: stats.std,
                samples: draws,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessCurve {
        kind: noise.kind,
        mode: noise.mode,
        points,
    })
}

/// CSV with columns `noise_kind,mode,delta,mean_fidelity,std_fidelity,samples`.
pub fn curves_to_csv(curves: &[RobustnessCurve]) -> String {
    let mut out = String::from("noise_kind,mode,delta,mean_fidelity,std_fidelity,samples\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{}",
                c.kind.name(),
                c.mode.name(),
                p.delta,
                p.mean_fidelity,
                p.std_fidelity,
                p.samples
            );
        }
    }
    out
}
