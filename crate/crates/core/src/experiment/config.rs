use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{strongly_entangling_layout, AnsatzLayout, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::hamiltonian::{parse_pauli_sum, PauliSum};
use crate::optimizer::{Method, OptimizerConfig};

/// Builtin observable name accepted in the `hamiltonian` field.
pub const BUILTIN_SUM_Z: &str = "sum_z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Trajectories,
    PerfVsR,
    EscapeVsShots,
    TVsEps,
    CriticalNoiseSweep,
    SaddleCensus,
    DepolarizingSweep,
    LinearModel,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Trajectories => "trajectories",
            ExperimentKind::PerfVsR => "perf_vs_r",
            ExperimentKind::EscapeVsShots => "escape_vs_shots",
            ExperimentKind::TVsEps => "t_vs_eps",
            ExperimentKind::CriticalNoiseSweep => "critical_noise_sweep",
            ExperimentKind::SaddleCensus => "saddle_census",
            ExperimentKind::DepolarizingSweep => "depolarizing_sweep",
            ExperimentKind::LinearModel => "linear_model",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    R,
    NShots,
    Eta,
    Q,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::R => "r",
            SweepParameter::NShots => "n_shots",
            SweepParameter::Eta => "eta",
            SweepParameter::Q => "q",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &OptimizerConfig, value: f64) -> OptimizerConfig {
        let mut cfg = base.clone();
        match self {
            SweepParameter::R => cfg.r = value,
            SweepParameter::NShots => cfg.n_shots = value as u64,
            SweepParameter::Eta => cfg.eta = value,
            SweepParameter::Q => cfg.q = value,
        }
        cfg
    }

    fn check(self, value: f64) -> Result<()> {
        let ok = match self {
            SweepParameter::R | SweepParameter::Eta => value.is_finite() && value > 0.0,
            SweepParameter::NShots => {
                value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64
            }
            SweepParameter::Q => (0.0..=1.0).contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid {} sweep value {value}",
                self.as_str()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Where trajectories start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPoint {
    Explicit {
        values: Vec<f64>,
    },
    /// Uniform on `[0, 2pi)^p`. The census draws one point per run.
    Random {
        seed: u64,
    },
    /// The `pick`-th hit of a noiseless trapped-seed search over
    /// `candidates` uniform starts.
    Trapped {
        candidates: usize,
        seed: u64,
        #[serde(default)]
        pick: usize,
    },
}

fn default_l0() -> f64 {
    1.0
}

fn default_slopes() -> Vec<f64> {
    vec![1.0, 1.0]
}

/// Linear toy loss `L(theta) = L0 + c . (theta - theta0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelConfig {
    #[serde(default = "default_l0")]
    pub l0: f64,
    #[serde(default = "default_slopes")]
    pub c: Vec<f64>,
}

impl Default for LinearModelConfig {
    fn default() -> Self {
        Self {
            l0: default_l0(),
            c: default_slopes(),
        }
    }
}

fn default_hamiltonian() -> String {
    BUILTIN_SUM_Z.to_string()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_qubits: usize,
    pub n_layers: usize,
    /// `"sum_z"` or a path to a Hamiltonian file, relative paths resolved
    /// against the config file.
    #[serde(default = "default_hamiltonian")]
    pub hamiltonian: String,
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub theta0: InitialPoint,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Noise grid scanned at every swept `eta` by `critical_noise_sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_model: Option<LinearModelConfig>,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config: `sum_z`, a given optimizer, one run from a random point.
    pub fn new(
        experiment: ExperimentKind,
        n_qubits: usize,
        n_layers: usize,
        optimizer: OptimizerConfig,
    ) -> Self {
        Self {
            experiment,
            n_qubits,
            n_layers,
            hamiltonian: default_hamiltonian(),
            optimizer,
            sweep: None,
            n_runs: 1,
            master_seed: 0,
            theta0: InitialPoint::Random { seed: 0 },
            output_dir: default_output_dir(),
            r_grid: None,
            linear_model: None,
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// One optimizer config per sweep value, or the base config alone.
    pub fn optimizer_grid(&self) -> Vec<OptimizerConfig> {
        match &self.sweep {
            Some(s) => s
                .values
                .iter()
                .map(|&v| s.parameter.apply(&self.optimizer, v))
                .collect(),
            None => vec![self.optimizer.clone()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Config("n_qubits must be positive".into()));
        }
        if self.n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "{} qubits exceeds the cap of {MAX_QUBITS}",
                self.n_qubits
            )));
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be positive".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            for &v in &s.values {
                s.parameter.check(v)?;
                s.parameter.apply(&self.optimizer, v).validate()?;
            }
        } else {
            self.optimizer.validate()?;
        }
        if let InitialPoint::Trapped { candidates, .. } = self.theta0 {
            if candidates == 0 {
                return Err(Error::Config(
                    "trapped search needs at least one candidate".into(),
                ));
            }
        }
        let swept = self.sweep.as_ref().map(|s| s.parameter);
        let method = self.optimizer.method;
        let name = self.experiment.as_str();
        let require = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} {what}")))
            }
        };
        match self.experiment {
            ExperimentKind::PerfVsR | ExperimentKind::TVsEps => {
                require(method == Method::Pgd, "requires method pgd")?;
                require(swept == Some(SweepParameter::R), "requires a sweep over r")?;
            }
            ExperimentKind::EscapeVsShots => {
                require(method == Method::ShotGd, "requires method shot_gd")?;
                require(
                    swept == Some(SweepParameter::NShots),
                    "requires a sweep over n_shots",
                )?;
            }
            ExperimentKind::CriticalNoiseSweep => {
                require(method == Method::Pgd, "requires method pgd")?;
                require(
                    swept == Some(SweepParameter::Eta),
                    "requires a sweep over eta",
                )?;
                let grid = self.r_grid.as_deref().unwrap_or_default();
                require(!grid.is_empty(), "requires a nonempty r_grid")?;
                for &r in grid {
                    SweepParameter::R.check(r)?;
                }
            }
            ExperimentKind::DepolarizingSweep => {
                require(swept == Some(SweepParameter::Q), "requires a sweep over q")?;
            }
            ExperimentKind::SaddleCensus => {
                require(
                    matches!(self.theta0, InitialPoint::Random { .. }),
                    "requires theta0 of kind random",
                )?;
            }
            ExperimentKind::LinearModel => {
                require(
                    swept.is_none() || swept == Some(SweepParameter::R),
                    "sweeps only r (the noise scale)",
                )?;
                let lm = self.linear_model.clone().unwrap_or_default();
                require(!lm.c.is_empty(), "linear_model.c must be nonempty")?;
                require(
                    lm.l0.is_finite() && lm.l0 > 0.0,
                    "linear_model.l0 must be positive",
                )?;
            }
            ExperimentKind::Trajectories => {}
        }
        if self.r_grid.is_some() && self.experiment != ExperimentKind::CriticalNoiseSweep {
            return Err(Error::Config(
                "r_grid is only used by critical_noise_sweep".into(),
            ));
        }
        if self.linear_model.is_some() && self.experiment != ExperimentKind::LinearModel {
            return Err(Error::Config(
                "linear_model is only used by the linear_model experiment".into(),
            ));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<AnsatzLayout> {
        strongly_entangling_layout(self.n_qubits, self.n_layers)
    }

    /// Builtin or file-backed observable.
    pub fn observable(&self) -> Result<PauliSum> {
        if self.hamiltonian == BUILTIN_SUM_Z {
            return PauliSum::sum_z(self.n_qubits);
        }
        let mut path = PathBuf::from(&self.hamiltonian);
        if path.is_relative() {
            if let Some(base) = &self.base_dir {
                path = base.join(path);
            }
        }
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!("cannot read Hamiltonian {}: {e}", path.display()))
        })?;
        parse_pauli_sum(&text, self.n_qubits)
    }
}
