//! Config-driven experiment runs.
//!
//! Every run writes into a fresh run-scoped directory under `output_dir`:
//! plot-ready CSV files plus a `record.json` holding the effective config,
//! per-restart summaries and the headline statistics. Re-running the same
//! config reproduces every number except wall-clock fields (`elapsed_ms`,
//! timestamps).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_hva, AnsatzCircuit};
use crate::cost::{CostEvaluator, CostMode};
use crate::error::{Error, Result};
use crate::gates::{resolve_target, TargetGate};
use crate::noise::{
    curves_to_csv, delta_grid, robustness_sweep, CoherentNoise, NoiseKind, NoiseMode,
    RobustnessCurve,
};
use crate::optimizer::{
    multi_restart, traces_to_csv, InitKind, InitScheme, MultiRestartResult, OptimizationTrace,
    OptimizerConfig, PopulationStats, StopReason,
};
use crate::pauli::{heisenberg_spec, HamiltonianSpec, ParameterVector};
use crate::seed::{derive_seed, Stream};
use crate::simulator::{amplitude_damping, NoisyCircuitPlan, Placement};

/// Version of the `record.json` layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Number of spins in the Heisenberg chain.
const N_QUBITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Compile,
    TrotterSweep,
    CoherentNoiseSweep,
    DampingSweep,
    GradStats,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Compile => "compile",
            Experiment::TrotterSweep => "trotter-sweep",
            Experiment::CoherentNoiseSweep => "coherent-noise-sweep",
            Experiment::DampingSweep => "damping-sweep",
            Experiment::GradStats => "grad-stats",
        }
    }

    /// Depths used when the config leaves `m` unset.
    pub fn default_depths(self) -> Vec<usize> {
        match self {
            Experiment::TrotterSweep => (1..=8).collect(),
            Experiment::GradStats => (1..=6).collect(),
            _ => vec![6],
        }
    }

    fn sweeps_depth(self) -> bool {
        matches!(self, Experiment::TrotterSweep | Experiment::GradStats)
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compile" => Ok(Self::Compile),
            "trotter-sweep" => Ok(Self::TrotterSweep),
            "coherent-noise-sweep" | "noise-sweep" => Ok(Self::CoherentNoiseSweep),
            "damping-sweep" => Ok(Self::DampingSweep),
            "grad-stats" => Ok(Self::GradStats),
            _ => Err(Error::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

/// A single Trotter depth or a list of them.
///
/// In TOML: an integer, an array, or a string in the `--m` syntax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, try_from = "DepthsRepr")]
pub enum Depths {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DepthsRepr {
    One(usize),
    Many(Vec<usize>),
    Text(String),
}

impl TryFrom<DepthsRepr> for Depths {
    type Error = Error;

    fn try_from(r: DepthsRepr) -> Result<Self> {
        match r {
            DepthsRepr::One(m) => Ok(Depths::One(m)),
            DepthsRepr::Many(v) => Ok(Depths::Many(v)),
            DepthsRepr::Text(s) => s.parse(),
        }
    }
}

impl Depths {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Depths::One(m) => vec![*m],
            Depths::Many(v) => v.clone(),
        }
    }
}

impl std::str::FromStr for Depths {
    type Err = Error;

    /// `6`, `1,2,4` or the inclusive range `1-8`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid depth list {s:?}"));
        let s = s.trim();
        if let Some((lo, hi)) = s.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            return Ok(Depths::Many((lo..=hi).collect()));
        }
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Ok(match values[..] {
            [m] => Depths::One(m),
            _ => Depths::Many(values),
        })
    }
}

/// Clipped-Gaussian starting points for noiseless compilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub mean: f64,
    pub sigma: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            mean: 0.0,
            sigma: 0.5,
            clip_lo: -1.0,
            clip_hi: 1.0,
        }
    }
}

impl InitConfig {
    pub fn scheme(&self, seed: u64) -> InitScheme {
        InitScheme {
            kind: InitKind::GaussianClipped {
                mean: self.mean,
                sigma: self.sigma,
                clip_lo: self.clip_lo,
                clip_hi: self.clip_hi,
            },
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(self.clip_lo <= self.clip_hi) {
            return Err(Error::Config(format!(
                "init needs sigma >= 0 and clip_lo <= clip_hi, got sigma = {}, clip = [{}, {}]",
                self.sigma, self.clip_lo, self.clip_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherentSweepConfig {
    pub kinds: Vec<NoiseKind>,
    pub mode: NoiseMode,
    /// Realizations per grid point in uniform-sample mode.
    pub samples: usize,
    pub delta_max: f64,
    pub delta_step: f64,
}

impl Default for CoherentSweepConfig {
    fn default() -> Self {
        Self {
            kinds: vec![NoiseKind::Charge, NoiseKind::Nuclear],
            mode: NoiseMode::DeterministicShift,
            samples: 100,
            delta_max: 0.5,
            delta_step: 0.025,
        }
    }
}

/// How each noisy restart is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingStart {
    /// Compiled noiseless parameters plus `N(0, warm_start_sigma²)`.
    #[default]
    WarmStart,
    /// Fresh clipped-Gaussian draws from `[init]`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingSweepConfig {
    pub grid: Vec<f64>,
    pub placement: Placement,
    pub start: DampingStart,
    pub warm_start_sigma: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for DampingSweepConfig {
    fn default() -> Self {
        Self {
            grid: vec![0.0, 0.005, 0.01, 0.015, 0.02],
            placement: Placement::AfterEachLayer,
            start: DampingStart::WarmStart,
            warm_start_sigma: 0.05,
            optimizer: OptimizerConfig::nelder_mead().with_restarts(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradStatsConfig {
    pub samples: usize,
}

impl Default for GradStatsConfig {
    fn default() -> Self {
        Self { samples: 100 }
    }
}

/// Full description of one run. Every field has a default; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `toffoli`, `fredkin`, or a path to an 8×8 matrix file.
    pub target: String,
    /// Trotter depth(s); unset means [`Experiment::default_depths`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Depths>,
    pub layer_time: f64,
    /// Noiseless cost used for compilation.
    pub cost_mode: CostMode,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Compiled parameters in `LABEL index value` form; when unset, noise
    /// sweeps compile first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
    pub init: InitConfig,
    pub coherent: CoherentSweepConfig,
    pub damping: DampingSweepConfig,
    pub grad_stats: GradStatsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Compile,
            target: "toffoli".into(),
            m: None,
            layer_time: 1.0,
            cost_mode: CostMode::ExactTrace,
            master_seed: 0,
            output_dir: PathBuf::from("runs"),
            theta_star: None,
            optimizer: OptimizerConfig::lbfgs(),
            init: InitConfig::default(),
            coherent: CoherentSweepConfig::default(),
            damping: DampingSweepConfig::default(),
            grad_stats: GradStatsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn depths(&self) -> Vec<usize> {
        self.m
            .as_ref()
            .map_or_else(|| self.experiment.default_depths(), Depths::values)
    }

    /// The single depth of a non-sweep experiment.
    pub fn depth(&self) -> Result<usize> {
        match self.depths()[..] {
            [m] => Ok(m),
            _ => Err(Error::Config(format!(
                "{} takes a single depth, got {:?}",
                self.experiment.name(),
                self.depths()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let depths = self.depths();
        if depths.is_empty() {
            return Err(Error::Config("empty depth list".into()));
        }
        if let Some(&m) = depths.iter().find(|&&m| m == 0) {
            return Err(Error::InvalidDepth(m));
        }
        if !self.experiment.sweeps_depth() {
            self.depth()?;
        }
        if !(self.layer_time > 0.0) || !self.layer_time.is_finite() {
            return Err(Error::InvalidLayerTime(self.layer_time));
        }
        if self.cost_mode.is_noisy() {
            return Err(Error::Config(
                "cost_mode must be noiseless; damping sweeps build their own noisy cost".into(),
            ));
        }
        // A bad target file is a config problem, whatever the reason.
        let target = resolve_target(&self.target).map_err(|e| match e {
            e if e.is_config() => e,
            e => Error::Config(format!("target {:?}: {e}", self.target)),
        })?;
        if target.n_qubits() != N_QUBITS {
            return Err(Error::Config(format!(
                "target {:?} acts on {} qubits; the ansatz has {N_QUBITS}",
                self.target,
                target.n_qubits()
            )));
        }
        self.optimizer.validate()?;
        self.init.validate()?;
        match self.experiment {
            Experiment::CoherentNoiseSweep => {
                let c = &self.coherent;
                if c.kinds.is_empty() {
                    return Err(Error::Config("coherent.kinds is empty".into()));
                }
                if !(c.delta_step > 0.0) || !(c.delta_max >= 0.0) {
                    return Err(Error::Config(
                        "coherent grid needs delta_step > 0 and delta_max >= 0".into(),
                    ));
                }
                if c.mode == NoiseMode::UniformSample && c.samples == 0 {
                    return Err(Error::Config("coherent.samples must be at least 1".into()));
                }
            }
            Experiment::DampingSweep => {
                let d = &self.damping;
                d.optimizer.validate()?;
                if d.grid.is_empty() {
                    return Err(Error::Config("damping.grid is empty".into()));
                }
                if let Some(&p) = d.grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::OutOfRange {
                        name: "p",
                        value: p,
                        min: 0.0,
                        max: 1.0,
                    });
                }
                if d.grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "damping.grid must be strictly ascending".into(),
                    ));
                }
                if !(d.warm_start_sigma >= 0.0) {
                    return Err(Error::Config(
                        "damping.warm_start_sigma must be >= 0".into(),
                    ));
                }
            }
            Experiment::GradStats if self.grad_stats.samples < 2 => {
                return Err(Error::Config(
                    "grad_stats.samples must be at least 2".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// A parameter value with its Hamiltonian-term label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledValue {
    pub label: String,
    pub index: usize,
    pub value: f64,
}

fn labeled(spec: &HamiltonianSpec, theta: &ParameterVector) -> Vec<LabeledValue> {
    spec.labels()
        .into_iter()
        .zip(theta.values())
        .enumerate()
        .map(|(index, (label, &value))| LabeledValue {
            label,
            index,
            value,
        })
        .collect()
}

/// Per-restart outcome without the iteration log (that lives in the CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    pub iterations: usize,
    pub evaluations: u64,
    pub final_cost: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub initial_theta: Vec<f64>,
    pub final_theta: Vec<f64>,
}

impl From<&OptimizationTrace> for RestartSummary {
    fn from(t: &OptimizationTrace) -> Self {
        Self {
            restart: t.restart,
            seed: t.seed,
            iterations: t.iterations(),
            evaluations: t.evaluations,
            final_cost: t.final_cost,
            converged: t.converged,
            stop_reason: t.stop_reason,
            initial_theta: t.initial_theta.clone(),
            final_theta: t.final_theta.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileSummary {
    pub target: String,
    pub m: usize,
    pub best_restart: usize,
    pub best_cost: f64,
    pub best_fidelity: f64,
    pub fidelity: PopulationStats,
    pub final_cost: PopulationStats,
    /// Restarts whose final cost reached the cost tolerance.
    pub success_count: usize,
    pub successful_fidelity: Option<PopulationStats>,
    pub parameters: Vec<LabeledValue>,
    pub restarts: Vec<RestartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPoint {
    pub m: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
    pub best_cost: f64,
    pub success_count: usize,
    pub successful_mean_fidelity: Option<f64>,
    pub restarts: usize,
    pub best_parameters: Vec<LabeledValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterSummary {
    pub target: String,
    pub points: Vec<TrotterPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSummary {
    pub target: String,
    pub m: usize,
    pub compiled_cost: f64,
    pub theta_star: Vec<LabeledValue>,
    pub curves: Vec<RobustnessCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingPoint {
    pub p: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
    pub restarts: usize,
    pub mean_iterations: f64,
    /// Noisy fidelity of the compiled parameters before re-optimization
    /// (warm starts only).
    pub compiled_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingSummary {
    pub target: String,
    pub m: usize,
    pub placement: Placement,
    /// Noiseless cost of the warm-start parameters.
    pub compiled_cost: Option<f64>,
    pub theta_star: Option<Vec<LabeledValue>>,
    pub points: Vec<DampingPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradPoint {
    pub m: usize,
    pub samples: usize,
    pub overall_variance: f64,
    pub min_variance: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSummary {
    pub target: String,
    pub labels: Vec<String>,
    pub points: Vec<GradPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Summary {
    Compile(CompileSummary),
    TrotterSweep(TrotterSummary),
    CoherentNoiseSweep(CoherentSummary),
    DampingSweep(DampingSummary),
    GradStats(GradSummary),
}

/// Provenance and results of one run, written as `record.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub artifact_version: String,
    pub experiment: Experiment,
    /// Effective config, verbatim as TOML.
    pub config_toml: String,
    pub config: ExperimentConfig,
    pub run_dir: PathBuf,
    pub files: Vec<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub summary: Summary,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Single-writer handle on a freshly created run directory.
struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    /// Creates `<output_dir>/<experiment>-<target>-seed<seed>-<k>` with the
    /// smallest free `k`; existing directories are never reused.
    fn create(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir)?;
        let target: String = Path::new(&cfg.target)
            .file_stem()
            .map_or_else(|| cfg.target.clone(), |s| s.to_string_lossy().into_owned())
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let stem = format!(
            "{}-{}-seed{}",
            cfg.experiment.name(),
            target,
            cfg.master_seed
        );
        for k in 0..100_000 {
            let path = cfg.output_dir.join(format!("{stem}-{k:03}"));
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        files: vec![],
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Io(format!("no free run directory for {stem}")))
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path.join(name))?;
        f.write_all(contents.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        cfg: &ExperimentConfig,
        started: u64,
        summary: Summary,
    ) -> Result<RunOutput> {
        self.files.push("record.json".into());
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.to_string(),
            experiment: cfg.experiment,
            config_toml: cfg.to_toml_string()?,
            config: cfg.clone(),
            run_dir: self.path.clone(),
            files: self.files.clone(),
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
            summary,
        };
        let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
        self.files.pop();
        self.write("record.json", &json)?;
        Ok(RunOutput {
            record,
            dir: self.path,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub dir: PathBuf,
}

/// Runs whichever experiment `cfg` names.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment {
        Experiment::Compile => run_compile(cfg),
        Experiment::TrotterSweep => run_trotter_sweep(cfg),
        Experiment::CoherentNoiseSweep => run_coherent_noise_sweep(cfg),
        Experiment::DampingSweep => run_damping_sweep(cfg),
        Experiment::GradStats => run_grad_stats(cfg),
    }
}

fn expect(cfg: &ExperimentConfig, experiment: Experiment) -> Result<()> {
    if cfg.experiment != experiment {
        return Err(Error::Config(format!(
            "config is for {}, not {}",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    cfg.validate()
}

struct Setup {
    spec: HamiltonianSpec,
    target: TargetGate,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            spec: heisenberg_spec(N_QUBITS)?,
            target: resolve_target(&cfg.target)?,
        })
    }

    fn circuit(&self, cfg: &ExperimentConfig, m: usize) -> Result<AnsatzCircuit> {
        build_hva(&self.spec, m, cfg.layer_time)
    }

    /// Noiseless multi-restart compilation at depth `m`.
    fn compile(&self, cfg: &ExperimentConfig, m: usize) -> Result<MultiRestartResult> {
        let evaluator =
            CostEvaluator::new(cfg.cost_mode, self.circuit(cfg, m)?, self.target.clone())?;
        multi_restart(
            &evaluator,
            &cfg.init.scheme(cfg.master_seed),
            &cfg.optimizer,
        )
    }

    /// Compiled parameters, loaded from `theta_star` or compiled now. The
    /// compile artifacts are written to `dir` in the latter case.
    fn theta_star(
        &self,
        cfg: &ExperimentConfig,
        m: usize,
        dir: &mut RunDir,
    ) -> Result<(ParameterVector, f64)> {
        match &cfg.theta_star {
            Some(path) => {
                let theta = self.spec.parse_text(&fs::read_to_string(path)?)?;
                let cost = CostEvaluator::exact(self.circuit(cfg, m)?, self.target.clone())?
                    .cost(&theta)?;
                Ok((theta, cost))
            }
            None => {
                let result = self.compile(cfg, m)?;
                write_compile_files(&self.spec, &result, dir)?;
                let best = result.best();
                Ok((best.final_theta.clone(), best.final_cost))
            }
        }
    }
}

fn write_compile_files(
    spec: &HamiltonianSpec,
    result: &MultiRestartResult,
    dir: &mut RunDir,
) -> Result<()> {
    dir.write("training_curve.csv", &traces_to_csv(&result.traces))?;

    let labels = spec.labels();
    let mut traj = format!("restart,iteration,{}\n", labels.join(","));
    for t in &result.traces {
        for r in &t.records {
            let _ = write!(traj, "{},{}", t.restart, r.iteration);
            for v in &r.theta {
                let _ = write!(traj, ",{v:e}");
            }
            traj.push('\n');
        }
    }
    dir.write("parameter_trajectory.csv", &traj)?;

    let mut restarts = String::from(
        "restart,seed,iterations,evaluations,final_cost,final_fidelity,converged,stop_reason\n",
    );
    for t in &result.traces {
        let _ = writeln!(
            restarts,
            "{},{},{},{},{:e},{:e},{},{}",
            t.restart,
            t.seed,
            t.iterations(),
            t.evaluations,
            t.final_cost,
            t.final_fidelity(),
            t.converged,
            stop_name(t.stop_reason)
        );
    }
    dir.write("restarts.csv", &restarts)?;

    let best = &result.best().final_theta;
    let mut table = String::from("label,index,value,magnitude\n");
    for lv in labeled(spec, best) {
        let _ = writeln!(
            table,
            "{},{},{:e},{:e}",
            lv.label,
            lv.index,
            lv.value,
            lv.value.abs()
        );
    }
    dir.write("parameters.csv", &table)?;
    dir.write("theta_star.txt", &spec.to_text(best)?)?;
    Ok(())
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::CostTolerance => "cost-tolerance",
        StopReason::GradientTolerance => "gradient-tolerance",
        StopReason::SimplexSpread => "simplex-spread",
        StopReason::MaxIters => "max-iters",
        StopReason::LineSearchFailure => "line-search-failure",
    }
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Multi-restart noiseless compilation at a single depth.
///
/// Emits `training_curve.csv`, `parameter_trajectory.csv`, `restarts.csv`,
/// `parameters.csv` and `theta_star.txt`.
pub fn run_compile(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect(cfg, Experiment::Compile)?;
    let started = unix_ms();
    let setup = Setup::new(cfg)?;
    let m = cfg.depth()?;
    let result = setup.compile(cfg, m)?;
    let mut dir = RunDir::create(cfg)?;
    write_compile_files(&setup.spec, &result, &mut dir)?;
    let best = result.best();
    let summary = CompileSummary {
        target: setup.target.name().to_string(),
        m,
        best_restart: best.restart,
        best_cost: best.final_cost,
        best_fidelity: best.final_fidelity(),
        fidelity: result.fidelity,
        final_cost: result.final_cost,
        success_count: result.success_count,
        successful_fidelity: result.successful_fidelity,
        parameters: labeled(&setup.spec, &best.final_theta),
        restarts: result.traces.iter().map(RestartSummary::from).collect(),
    };
    dir.finish(cfg, started, Summary::Compile(summary))
}

/// Independent compilation at every depth; emits `trotter_sweep.csv`.
///
/// Every depth uses the same master seed, so restart `r` starts from the
/// same draw at each `m`.
pub fn run_trotter_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect(cfg, Experiment::TrotterSweep)?;
    let started = unix_ms();
    let setup = Setup::new(cfg)?;
    let mut points = Vec::new();
    for m in cfg.depths() {
        let r = setup.compile(cfg, m)?;
        points.push(TrotterPoint {
            m,
            mean_fidelity: r.fidelity.mean,
            std_fidelity: r.fidelity.std,
            min_fidelity: r.fidelity.min,
            max_fidelity: r.fidelity.max,
            best_cost: r.final_cost.min,
            success_count: r.success_count,
            successful_mean_fidelity: r.successful_fidelity.map(|s| s.mean),
            restarts: r.traces.len(),
            best_parameters: labeled(&setup.spec, &r.best().final_theta),
        });
    }
    let mut dir = RunDir::create(cfg)?;
    let mut csv = String::from(
        "m,mean_fidelity,std_fidelity,min_fidelity,max_fidelity,best_cost,success_count,successful_mean_fidelity,restarts\n",
    );
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            p.m,
            p.mean_fidelity,
            p.std_fidelity,
            p.min_fidelity,
            p.max_fidelity,
            p.best_cost,
            p.success_count,
            opt_csv(p.successful_mean_fidelity),
            p.restarts
        );
    }
    dir.write("trotter_sweep.csv", &csv)?;
    let summary = TrotterSummary {
        target: setup.target.name().to_string(),
        points,
    };
    dir.finish(cfg, started, Summary::TrotterSweep(summary))
}

/// Charge- and nuclear-noise robustness curves of the compiled parameters;
/// emits `coherent_noise.csv` (plus the compile files if it compiled).
pub fn run_coherent_noise_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect(cfg, Experiment::CoherentNoiseSweep)?;
    let started = unix_ms();
    let setup = Setup::new(cfg)?;
    let m = cfg.depth()?;
    let circuit = setup.circuit(cfg, m)?;
    let mut dir = RunDir::create(cfg)?;
    let (theta_star, compiled_cost) = setup.theta_star(cfg, m, &mut dir)?;
    let c = &cfg.coherent;
    let grid = delta_grid(c.delta_max, c.delta_step);
    let curves = c
        .kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let noise = CoherentNoise {
                kind,
                amplitude: 0.0,
                mode: c.mode,
                samples: c.samples,
                seed: derive_seed(cfg.master_seed, Stream::NoiseDraw, k as u64),
            };
            robustness_sweep(
                &theta_star,
                &setup.spec,
                &circuit,
                &setup.target,
                &noise,
                &grid,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    dir.write("coherent_noise.csv", &curves_to_csv(&curves))?;
    let summary = CoherentSummary {
        target: setup.target.name().to_string(),
        m,
        compiled_cost,
        theta_star: labeled(&setup.spec, &theta_star),
        curves,
    };
    dir.finish(cfg, started, Summary::CoherentNoiseSweep(summary))
}

/// Nelder-Mead optimization of the amplitude-damped cost at each `p`;
/// emits `damping_sweep.csv` and `damping_restarts.csv`.
///
/// Grid point `k` seeds its restarts from `(master_seed, k)`.
pub fn run_damping_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect(cfg, Experiment::DampingSweep)?;
    let started = unix_ms();
    let setup = Setup::new(cfg)?;
    let m = cfg.depth()?;
    let circuit = setup.circuit(cfg, m)?;
    let mut dir = RunDir::create(cfg)?;
    let d = &cfg.damping;
    let warm = match d.start {
        DampingStart::WarmStart => Some(setup.theta_star(cfg, m, &mut dir)?),
        DampingStart::Random => None,
    };

    let mut points = Vec::new();
    let mut restarts_csv =
        String::from("p,restart,seed,iterations,evaluations,final_fidelity,stop_reason\n");
    for (k, &p) in d.grid.iter().enumerate() {
        let plan = NoisyCircuitPlan::new(circuit.clone(), amplitude_damping(p)?)
            .with_placement(d.placement);
        let evaluator = CostEvaluator::noisy(plan, setup.target.clone())?;
        let seed = derive_seed(cfg.master_seed, Stream::GridPoint, k as u64);
        let (init, compiled_fidelity) = match &warm {
            Some((theta, _)) => (
                InitScheme::perturbed(theta.values().to_vec(), d.warm_start_sigma, seed),
                Some(evaluator.fidelity(theta)?),
            ),
            None => (cfg.init.scheme(seed), None),
        };
        let r = multi_restart(&evaluator, &init, &d.optimizer)?;
        for t in &r.traces {
            let _ = writeln!(
                restarts_csv,
                "{},{},{},{},{},{:e},{}",
                p,
                t.restart,
                t.seed,
                t.iterations(),
                t.evaluations,
                t.final_fidelity(),
                stop_name(t.stop_reason)
            );
        }
        let iters: Vec<f64> = r.traces.iter().map(|t| t.iterations() as f64).collect();
        points.push(DampingPoint {
            p,
            mean_fidelity: r.fidelity.mean,
            std_fidelity: r.fidelity.std,
            min_fidelity: r.fidelity.min,
            max_fidelity: r.fidelity.max,
            restarts: r.traces.len(),
            mean_iterations: PopulationStats::from_values(&iters).mean,
            compiled_fidelity,
        });
    }
    let mut csv = String::from("p,mean_fidelity,std_fidelity,min_fidelity,max_fidelity,restarts,mean_iterations,compiled_fidelity\n");
    for pt in &points {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{:e},{:e},{},{:e},{}",
            pt.p,
            pt.mean_fidelity,
            pt.std_fidelity,
            pt.min_fidelity,
            pt.max_fidelity,
            pt.restarts,
            pt.mean_iterations,
            opt_csv(pt.compiled_fidelity)
        );
    }
    dir.write("damping_sweep.csv", &csv)?;
    dir.write("damping_restarts.csv", &restarts_csv)?;
    let summary = DampingSummary {
        target: setup.target.name().to_string(),
        m,
        placement: d.placement,
        compiled_cost: warm.as_ref().map(|(_, c)| *c),
        theta_star: warm.as_ref().map(|(t, _)| labeled(&setup.spec, t)),
        points,
    };
    dir.finish(cfg, started, Summary::DampingSweep(summary))
}

/// Gradient mean and variance per coordinate over random initial points,
/// for each depth; emits `grad_stats.csv` and `grad_stats_summary.csv`.
pub fn run_grad_stats(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect(cfg, Experiment::GradStats)?;
    let started = unix_ms();
    let setup = Setup::new(cfg)?;
    let labels = setup.spec.labels();
    let mut points = Vec::new();
    for m in cfg.depths() {
        let evaluator =
            CostEvaluator::new(cfg.cost_mode, setup.circuit(cfg, m)?, setup.target.clone())?;
        let seed = derive_seed(cfg.master_seed, Stream::GradientSample, m as u64);
        let stats =
            evaluator.gradient_stats(cfg.grad_stats.samples, &cfg.init.scheme(seed), seed)?;
        points.push(GradPoint {
            m,
            samples: stats.samples,
            overall_variance: stats.overall_variance,
            min_variance: stats.variance.iter().copied().fold(f64::INFINITY, f64::min),
            mean: stats.mean,
            variance: stats.variance,
        });
    }
    let mut dir = RunDir::create(cfg)?;
    let mut detail = String::from("m,param_index,label,mean_gradient,variance\n");
    let mut overview = String::from("m,samples,overall_variance,min_variance\n");
    for p in &points {
        for (j, label) in labels.iter().enumerate() {
            let _ = writeln!(
                detail,
                "{},{},{},{:e},{:e}",
                p.m, j, label, p.mean[j], p.variance[j]
            );
        }
        let _ = writeln!(
            overview,
            "{},{},{:e},{:e}",
            p.m, p.samples, p.overall_variance, p.min_variance
        );
    }
    dir.write("grad_stats.csv", &detail)?;
    dir.write("grad_stats_summary.csv", &overview)?;
    let summary = GradSummary {
        target: setup.target.name().to_string(),
        labels,
        points,
    };
    dir.finish(cfg, started, Summary::GradStats(summary))
}
