//! Analysis configuration: JSON parsing, defaults and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use smib_core::simulator::{BasinBox, CONVERGENCE_THRESHOLD};
use smib_core::{GridParams, MachineParams, SimOptions, UnitSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Rk4,
    Rk45,
}

/// Trajectory settings. Times are in bus periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub method: MethodKind,
    /// RK4 step, or RK45 initial step.
    pub step_periods: f64,
    pub duration_periods: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Frequency offset added to the steady state at `t = 0`.
    pub perturb_omega: f64,
    /// Keep every n-th integrator step in the trajectory CSV.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            method: MethodKind::Rk4,
            step_periods: 1e-3,
            duration_periods: 20.0,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            perturb_omega: 0.01,
            record_every: 1,
        }
    }
}

/// Monte Carlo settings for the attraction estimate. Runs use RK45 with
/// the tolerances from `sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinConfig {
    pub samples: usize,
    pub seed: u64,
    pub horizon_periods: f64,
    #[serde(rename = "box")]
    pub sampling_box: BasinBox,
    pub threshold: f64,
    /// Count only draws inside the certified sublevel component, and skip
    /// simulating the others.
    pub in_sublevel_only: bool,
    /// Upper bound on draws when `in_sublevel_only` is set.
    pub max_draws: usize,
}

impl Default for BasinConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            seed: 0,
            horizon_periods: 200.0,
            sampling_box: BasinBox::symmetric(0.3, 0.3, 0.07),
            threshold: CONVERGENCE_THRESHOLD,
            in_sublevel_only: false,
            max_draws: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub machine: MachineParams,
    pub grid: GridParams,
    pub units: UnitSystem,
    /// Fixed η; `null` or absent selects it from the feasible intervals.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub basin: Option<BasinConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("smib-out")
}

fn check(ok: bool, what: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Validation(what.to_owned()))
    }
}

fn range_ok(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let param = |e: smib_core::model::ParamError| ConfigError::Validation(e.to_string());
        self.machine.validate().map_err(param)?;
        self.grid.validate().map_err(param)?;
        self.units.validate().map_err(param)?;
        if let Some(eta) = self.eta {
            check(
                eta.is_finite() && eta >= 0.0,
                "`eta` must be finite and >= 0",
            )?;
        }
        let s = &self.sim;
        check(
            s.step_periods.is_finite() && s.step_periods > 0.0,
            "`sim.step_periods` must be > 0",
        )?;
        check(
            s.duration_periods.is_finite() && s.duration_periods > 0.0,
            "`sim.duration_periods` must be > 0",
        )?;
        check(
            s.rel_tol.is_finite() && s.rel_tol > 0.0,
            "`sim.rel_tol` must be > 0",
        )?;
        check(
            s.abs_tol.is_finite() && s.abs_tol > 0.0,
            "`sim.abs_tol` must be > 0",
        )?;
        check(
            s.perturb_omega.is_finite(),
            "`sim.perturb_omega` must be finite",
        )?;
        if let Some(b) = &self.basin {
            check(b.samples > 0, "`basin.samples` must be > 0")?;
            check(
                b.horizon_periods.is_finite() && b.horizon_periods > 0.0,
                "`basin.horizon_periods` must be > 0",
            )?;
            check(
                b.threshold.is_finite() && b.threshold > 0.0,
                "`basin.threshold` must be > 0",
            )?;
            let bx = &b.sampling_box;
            check(
                [bx.phi, bx.domega, bx.re_z, bx.im_z]
                    .into_iter()
                    .all(range_ok),
                "`basin.box` ranges must be finite with lo <= hi",
            )?;
            check(
                b.max_draws >= b.samples,
                "`basin.max_draws` must be >= `basin.samples`",
            )?;
        }
        Ok(())
    }

    /// Integration options for the trajectory stage.
    pub fn sim_options(&self) -> SimOptions {
        let p = self.grid.period();
        let s = &self.sim;
        let mut o = match s.method {
            MethodKind::Rk4 => SimOptions::rk4(s.step_periods * p, s.duration_periods * p),
            MethodKind::Rk45 => SimOptions::rk45(
                s.step_periods * p,
                s.duration_periods * p,
                s.rel_tol,
                s.abs_tol,
            ),
        };
        o.record_every = s.record_every;
        o
    }

    /// Integration options for one basin run.
    pub fn basin_sim_options(&self, b: &BasinConfig) -> SimOptions {
        let p = self.grid.period();
        let mut o = SimOptions::rk45(
            self.sim.step_periods * p,
            b.horizon_periods * p,
            self.sim.rel_tol,
            self.sim.abs_tol,
        );
        o.record_every = 0;
        o
    }
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<AnalysisConfig, ConfigError> {
    let cfg: AnalysisConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
