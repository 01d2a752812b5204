//! Run configuration files.
//!
//! A config is a TOML document with `[model]`, `[solver]`, `[trajectory]` and
//! `[output]` tables. Only `[model]` is required:
//!
//! ```toml
//! [model]
//! period = 1.0
//! beta = 2.0
//! sigma = 1.0
//! epsilon = 0.2
//! alpha = { kind = "sinusoid", offset = 2.0, amplitude = 1.0, cycles = 1 }
//! gamma = { kind = "raised_cos_squared", offset = 1.0, amplitude = 1.0, cycles = 1 }
//! ```

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use cellflux::cell_model::{ModelParams, SolverConfig};
use cellflux::monotone::MonotoneConfig;
use cellflux::periodic::{ForcingSpec, PeriodicForcing, DEFAULT_GRID};
use cellflux::trajectory::{DEFAULT_ATTRACTION_TOL, DEFAULT_STEPS_PER_PERIOD};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub period: f64,
    pub beta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub alpha: ForcingConfig,
    pub gamma: ForcingConfig,
}

/// Forcing description. Sinusoidal kinds take either `cycles` (whole cycles
/// per period) or an explicit angular frequency `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    Constant {
        value: f64,
    },
    Sinusoid {
        offset: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cycles: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default)]
        phase: f64,
    },
    RaisedCosSquared {
        offset: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cycles: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default)]
        phase: f64,
    },
    Harmonic {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Table {
        values: Vec<f64>,
    },
}

impl ForcingConfig {
    fn angular(
        name: &str,
        period: f64,
        cycles: Option<u32>,
        omega: Option<f64>,
    ) -> Result<f64, CliError> {
        match (cycles, omega) {
            (Some(c), None) => Ok(TAU * f64::from(c) / period),
            (None, Some(w)) => Ok(w),
            (None, None) => Err(CliError::Config(format!(
                "model.{name}: one of `cycles` or `omega` is required"
            ))),
            (Some(_), Some(_)) => Err(CliError::Config(format!(
                "model.{name}: give either `cycles` or `omega`, not both"
            ))),
        }
    }

    pub fn to_forcing(&self, name: &str, period: f64) -> Result<PeriodicForcing, CliError> {
        let spec = match self.clone() {
            ForcingConfig::Constant { value } => ForcingSpec::Constant { value },
            ForcingConfig::Sinusoid {
                offset,
                amplitude,
                cycles,
                omega,
                phase,
            } => ForcingSpec::Sinusoid {
                offset,
                amplitude,
                omega: Self::angular(name, period, cycles, omega)?,
                phase,
            },
            ForcingConfig::RaisedCosSquared {
                offset,
                amplitude,
                cycles,
                omega,
                phase,
            } => ForcingSpec::RaisedCosSquared {
                offset,
                amplitude,
                omega: Self::angular(name, period, cycles, omega)?,
                phase,
            },
            ForcingConfig::Harmonic { cos, sin } => ForcingSpec::Harmonic { cos, sin },
            ForcingConfig::Table { values } => ForcingSpec::Table { values },
        };
        PeriodicForcing::new(period, spec).map_err(|e| CliError::Config(format!("model.{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub grid: usize,
    pub tol_step: f64,
    pub tol_unique: f64,
    pub max_iter: usize,
    pub m_scale: f64,
    /// Re-estimate M as the iterates close in; fixed M is slower but keeps
    /// the ordering exact on coarse grids.
    pub adaptive_m: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_override: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let m = MonotoneConfig::default();
        Self {
            grid: DEFAULT_GRID,
            tol_step: m.tol_step,
            tol_unique: m.tol_unique,
            max_iter: m.max_iter,
            m_scale: m.m_scale,
            adaptive_m: m.adaptive_m,
            m_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    /// Integration step; defaults to `period / 2000`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Number of periods to integrate.
    pub horizon: usize,
    pub initial_points: Vec<[f64; 2]>,
    /// Extra initial points drawn uniformly from `random_range` squared.
    pub random_points: usize,
    pub random_range: [f64; 2],
    pub seed: u64,
    pub attraction_tol: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            step: None,
            horizon: 20,
            initial_points: Vec::new(),
            random_points: 0,
            random_range: [0.05, 5.0],
            seed: 0,
            attraction_tol: DEFAULT_ATTRACTION_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Prepended to every output file name.
    pub prefix: String,
    /// Write every n-th trajectory sample.
    pub trajectory_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            prefix: String::new(),
            trajectory_stride: 1,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configuration of the built-in demonstration run.
    pub fn demo() -> Self {
        Self {
            model: ModelSection {
                period: 1.0,
                beta: 2.0,
                sigma: 1.0,
                epsilon: 0.2,
                alpha: ForcingConfig::Sinusoid {
                    offset: 2.0,
                    amplitude: 1.0,
                    cycles: Some(1),
                    omega: None,
                    phase: 0.0,
                },
                gamma: ForcingConfig::RaisedCosSquared {
                    offset: 1.0,
                    amplitude: 1.0,
                    cycles: Some(1),
                    omega: None,
                    phase: 0.0,
                },
            },
            solver: SolverSection::default(),
            trajectory: TrajectorySection {
                initial_points: vec![[1.0, 0.4]],
                ..TrajectorySection::default()
            },
            output: OutputSection {
                directory: PathBuf::from("demo_out"),
                ..OutputSection::default()
            },
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("model.period", self.model.period)?;
        positive("model.beta", self.model.beta)?;
        positive("model.sigma", self.model.sigma)?;
        positive("model.epsilon", self.model.epsilon)?;
        positive("solver.tol_step", self.solver.tol_step)?;
        positive("solver.tol_unique", self.solver.tol_unique)?;
        positive("solver.m_scale", self.solver.m_scale)?;
        if let Some(m) = self.solver.m_override {
            positive("solver.m_override", m)?;
        }
        positive("trajectory.attraction_tol", self.trajectory.attraction_tol)?;
        if let Some(step) = self.trajectory.step {
            positive("trajectory.step", step)?;
        }
        if self.solver.grid < 4 || self.solver.grid % 2 != 0 {
            return Err(CliError::Config(format!(
                "solver.grid must be even and at least 4, got {}",
                self.solver.grid
            )));
        }
        if self.solver.max_iter == 0 {
            return Err(CliError::Config("solver.max_iter must be at least 1".into()));
        }
        if self.trajectory.horizon < 4 {
            return Err(CliError::Config(format!(
                "trajectory.horizon must be at least 4 periods, got {}",
                self.trajectory.horizon
            )));
        }
        let [lo, hi] = self.trajectory.random_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config(format!(
                "trajectory.random_range must satisfy 0 < low < high, got [{lo}, {hi}]"
            )));
        }
        if self.output.trajectory_stride == 0 {
            return Err(CliError::Config("output.trajectory_stride must be at least 1".into()));
        }
        let params = self.model_params()?;
        params
            .check_positive_forcings(self.solver.grid)
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        ModelParams::new(
            m.alpha.to_forcing("alpha", m.period)?,
            m.gamma.to_forcing("gamma", m.period)?,
            m.beta,
            m.sigma,
            m.epsilon,
        )
        .map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            intervals: self.solver.grid,
            monotone: MonotoneConfig {
                m_override: self.solver.m_override,
                m_scale: self.solver.m_scale,
                adaptive_m: self.solver.adaptive_m,
                tol_step: self.solver.tol_step,
                tol_unique: self.solver.tol_unique,
                max_iter: self.solver.max_iter,
                ..MonotoneConfig::default()
            },
        }
    }

    pub fn step(&self) -> f64 {
        self.trajectory
            .step
            .unwrap_or(self.model.period / DEFAULT_STEPS_PER_PERIOD as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
[model]
period = 1.0
beta = 2.0
sigma = 1.0
epsilon = 0.2
alpha = { kind = "sinusoid", offset = 2.0, amplitude = 1.0, cycles = 1 }
gamma = { kind = "raised_cos_squared", offset = 1.0, amplitude = 1.0, cycles = 1 }
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::parse(DEMO).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.trajectory.horizon, 20);
        assert_eq!(cfg.model_params().unwrap(), ModelParams::demo());
        assert_eq!(cfg.step(), 1.0 / 2000.0);
    }

    #[test]
    fn missing_field_is_reported_with_location() {
        let text = DEMO.replace("epsilon = 0.2\n", "");
        match RunConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("epsilon"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = DEMO.replace("beta = 2.0", "beta = \"two\"");
        match RunConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        for (from, to) in [
            ("beta = 2.0", "beta = -2.0"),
            ("cycles = 1 }\ngamma", "omega = 1.0 }\ngamma"),
            ("offset = 2.0, amplitude = 1.0", "offset = 0.5, amplitude = 1.0"),
        ] {
            let text = DEMO.replacen(from, to, 1);
            assert_ne!(text, DEMO);
            assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))), "{to}");
        }
        let text = format!("{DEMO}\n[solver]\ngrid = 1023\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        let text = format!("{DEMO}\n[solver]\nunknown = 1\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn round_trip_is_identity() {
        let demo = RunConfig::demo();
        assert_eq!(RunConfig::parse(&demo.to_toml()).unwrap(), demo);
        let parsed = RunConfig::parse(DEMO).unwrap();
        assert_eq!(RunConfig::parse(&parsed.to_toml()).unwrap(), parsed);
    }
}
