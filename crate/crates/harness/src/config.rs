//! Experiment configuration: a flat TOML document whose keys all have
//! defaults matching the reference setup. Unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qtompc_core::{
    BoundInputs, ControlAxes, GrapeParams, NominalModel, OcpSpec, QubitState, SolverParams,
    UncertaintyFamily, UncertaintyKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Qtompc,
    Tompc,
    Grape,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Qtompc, Algorithm::Tompc, Algorithm::Grape];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qtompc => "qtompc",
            Algorithm::Tompc => "tompc",
            Algorithm::Grape => "grape",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Uncertainty {
    None,
    Periodic,
    Uniform,
    Gaussian,
}

impl Uncertainty {
    /// Table order: the disturbed models first, then the undisturbed check.
    pub const ALL: [Uncertainty; 4] = [
        Uncertainty::Periodic,
        Uncertainty::Uniform,
        Uncertainty::Gaussian,
        Uncertainty::None,
    ];

    pub fn kind(self) -> UncertaintyKind {
        match self {
            Uncertainty::None => UncertaintyKind::None,
            Uncertainty::Periodic => UncertaintyKind::Periodic,
            Uncertainty::Uniform => UncertaintyKind::Uniform,
            Uncertainty::Gaussian => UncertaintyKind::Gaussian,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().name()
    }
}

impl fmt::Display for Uncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All rates in rad/ns, times in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub uncertainty: Uncertainty,

    /// Drift coefficient `r` of `r sigma_z`.
    pub drift: f64,
    pub sample_time: f64,
    /// Actuated Pauli axes, e.g. `"xy"`.
    pub control_axes: String,
    /// One of `0`, `1`, `+`, `-`, `+i`, `-i`.
    pub initial_state: String,
    /// `0` or `1`; the target must be held by zero control.
    pub target_state: String,

    pub horizon: usize,
    pub theta: f64,
    pub control_bound: f64,
    /// Terminal tolerance on the trace distance.
    pub terminal_tolerance: f64,

    /// Closed-loop steps per trial.
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// A trial counts as at target once `fidelity >= 1 - target_infidelity`.
    pub target_infidelity: f64,

    /// Componentwise disturbance bound.
    pub disturbance_bound: f64,
    pub gaussian_stddev: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub phase_min: f64,
    pub phase_max: f64,

    pub solver_restarts: usize,
    pub solver_max_iterations: usize,
    pub solver_extra_horizons: usize,
    pub solver_seed: u64,

    pub grape_restarts: usize,
    pub grape_max_iterations: usize,
    pub grape_tolerance: f64,
    pub grape_init_fraction: f64,
    pub grape_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverParams::default();
        let grape = GrapeParams::default();
        Self {
            algorithm: Algorithm::Qtompc,
            uncertainty: Uncertainty::Uniform,
            drift: 0.05,
            sample_time: 1.0,
            control_axes: "xy".into(),
            initial_state: "0".into(),
            target_state: "1".into(),
            horizon: 10,
            theta: 1.9,
            control_bound: 0.5,
            terminal_tolerance: solver.terminal_tolerance,
            steps: 100,
            trials: 300,
            seed: 2024,
            out_dir: PathBuf::from("out"),
            target_infidelity: 1e-3,
            disturbance_bound: 0.05,
            gaussian_stddev: 0.025,
            omega_min: 0.015 * PI,
            omega_max: 0.025 * PI,
            phase_min: -PI,
            phase_max: PI,
            solver_restarts: solver.restarts,
            solver_max_iterations: solver.max_iterations,
            solver_extra_horizons: solver.extra_horizons,
            solver_seed: solver.seed,
            grape_restarts: grape.restarts,
            grape_max_iterations: grape.max_iterations,
            grape_tolerance: grape.tolerance,
            grape_init_fraction: grape.init_fraction,
            grape_seed: grape.seed,
        }
    }
}

fn parse_state(label: &str) -> anyhow::Result<QubitState> {
    use num_complex::Complex64 as C;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = match label.trim() {
        "0" => (C::new(1.0, 0.0), C::new(0.0, 0.0)),
        "1" => (C::new(0.0, 0.0), C::new(1.0, 0.0)),
        "+" => (C::new(h, 0.0), C::new(h, 0.0)),
        "-" => (C::new(h, 0.0), C::new(-h, 0.0)),
        "+i" => (C::new(h, 0.0), C::new(0.0, h)),
        "-i" => (C::new(h, 0.0), C::new(0.0, -h)),
        other => bail!("unknown state label '{other}' (expected 0, 1, +, -, +i, -i)"),
    };
    Ok(QubitState::new(a, b)?)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.steps == 0 {
            bail!("steps must be at least 1");
        }
        if !(self.target_infidelity > 0.0 && self.target_infidelity < 1.0) {
            bail!("target_infidelity must lie in (0, 1)");
        }
        if !matches!(self.target_state.trim(), "0" | "1") {
            bail!("target_state must be 0 or 1 (a state held by zero control)");
        }
        self.initial()?;
        self.ocp_spec()?;
        self.solver_params().validate()?;
        self.grape_params().validate()?;
        self.family().validate()?;
        Ok(())
    }

    /// Hash of every setting except the output directory.
    pub fn hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn initial(&self) -> anyhow::Result<QubitState> {
        parse_state(&self.initial_state)
    }

    pub fn target(&self) -> anyhow::Result<QubitState> {
        parse_state(&self.target_state)
    }

    pub fn axes(&self) -> anyhow::Result<ControlAxes> {
        Ok(self.control_axes.parse::<ControlAxes>()?)
    }

    pub fn model(&self) -> anyhow::Result<NominalModel> {
        Ok(NominalModel::new(self.drift, self.axes()?, self.sample_time)?)
    }

    pub fn ocp_spec(&self) -> anyhow::Result<OcpSpec> {
        Ok(OcpSpec::new(
            self.horizon,
            self.theta,
            self.control_bound,
            self.model()?,
            self.target()?,
        )?)
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            restarts: self.solver_restarts,
            max_iterations: self.solver_max_iterations,
            terminal_tolerance: self.terminal_tolerance,
            extra_horizons: self.solver_extra_horizons,
            seed: self.solver_seed,
            ..SolverParams::default()
        }
    }

    pub fn grape_params(&self) -> GrapeParams {
        GrapeParams {
            steps: self.steps,
            bound: self.control_bound,
            max_iterations: self.grape_max_iterations,
            tolerance: self.grape_tolerance,
            restarts: self.grape_restarts,
            init_fraction: self.grape_init_fraction,
            seed: self.grape_seed,
            ..GrapeParams::default()
        }
    }

    pub fn family(&self) -> UncertaintyFamily {
        UncertaintyFamily {
            kind: self.uncertainty.kind(),
            bound: self.disturbance_bound,
            stddev: self.gaussian_stddev,
            omega_range: (self.omega_min, self.omega_max),
            phase_range: (self.phase_min, self.phase_max),
        }
    }

    /// Norm bound of the two-component disturbance, `sqrt(2)` times the
    /// componentwise bound; zero without disturbance.
    pub fn effective_bound(&self) -> f64 {
        match self.uncertainty {
            Uncertainty::None => 0.0,
            _ => self.disturbance_bound * std::f64::consts::SQRT_2,
        }
    }

    pub fn bound_inputs(&self) -> anyhow::Result<BoundInputs<f64>> {
        Ok(BoundInputs::from_disturbance(
            self.effective_bound(),
            self.sample_time,
            self.horizon,
        )?)
    }
}
