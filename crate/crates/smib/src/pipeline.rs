//! Stage orchestration and the report document.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use smib_core::certificate::BalanceCheck;
use smib_core::simulator::{
    basin_draw, lyapunov_monitor, simulate_draw, BasinCase, BasinDraw, BasinOptions, SimError,
};
use smib_core::{
    certify, existence_indicator, integrate, linearize, solve_steady_states, BasinReport,
    Certificate, ExistenceReport, LinearizationResult, SteadyState, Verdict,
};

use crate::config::{AnalysisConfig, BasinConfig};
use crate::output::{to_json, write_basin_csv, write_trajectory_csv};

/// Pipeline stage selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Steady,
    Certify,
    Linearize,
    Simulate,
    Basin,
    All,
}

impl Stage {
    fn runs(self, other: Stage) -> bool {
        self == Stage::All || self == other
    }

    fn needs_certificate(self) -> bool {
        !matches!(self, Stage::Steady | Stage::Linearize)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateEntry {
    pub index: usize,
    pub certificate: Option<Certificate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationEntry {
    pub index: usize,
    pub linearization: Option<LinearizationResult>,
    pub max_real_part: Option<f64>,
    pub unstable_count: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SimulationEntry {
    pub index: usize,
    pub csv: Option<String>,
    pub samples: usize,
    pub eta: f64,
    pub initial_storage: Option<f64>,
    pub final_storage: Option<f64>,
    pub monotone: Option<bool>,
    pub max_increase: Option<f64>,
    pub tolerance: Option<f64>,
    pub first_exit: Option<f64>,
    pub balance: Option<BalanceCheck>,
    pub balance_error: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BasinEntry {
    pub index: usize,
    pub ran: bool,
    pub reason: Option<String>,
    pub csv: Option<String>,
    pub n_draws: usize,
    pub report: Option<BasinReport>,
    pub sound: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub stage: Stage,
    pub config: AnalysisConfig,
    pub existence: ExistenceReport,
    pub steady_states: Vec<SteadyState>,
    pub certificates: Option<Vec<CertificateEntry>>,
    pub linearizations: Option<Vec<LinearizationEntry>>,
    pub simulations: Option<Vec<SimulationEntry>>,
    pub basins: Option<Vec<BasinEntry>>,
}

impl Report {
    /// Any in-sublevel sample failed to converge.
    pub fn soundness_violated(&self) -> bool {
        self.basins.iter().flatten().any(|b| b.sound == Some(false))
    }
}

/// Report plus the files it references, not yet written.
pub struct Outcome {
    pub report: Report,
    pub trajectories: Vec<(String, smib_core::Trajectory)>,
    pub basin_cases: Vec<(String, Vec<BasinCase>)>,
}

fn certificates(cfg: &AnalysisConfig, ss: &[SteadyState]) -> Vec<CertificateEntry> {
    ss.iter()
        .enumerate()
        .map(
            |(index, s)| match certify(&cfg.machine, s, &cfg.units, cfg.eta) {
                Ok(c) => CertificateEntry {
                    index,
                    certificate: Some(c),
                    error: None,
                },
                Err(e) => CertificateEntry {
                    index,
                    certificate: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect()
}

fn linearizations(cfg: &AnalysisConfig, ss: &[SteadyState]) -> Vec<LinearizationEntry> {
    ss.iter()
        .enumerate()
        .map(|(index, s)| match linearize(s, &cfg.machine, &cfg.grid) {
            Ok(l) => LinearizationEntry {
                index,
                max_real_part: Some(l.max_real_part()),
                unstable_count: Some(l.unstable_count()),
                linearization: Some(l),
                error: None,
            },
            Err(e) => LinearizationEntry {
                index,
                linearization: None,
                max_real_part: None,
                unstable_count: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn simulate(
    cfg: &AnalysisConfig,
    index: usize,
    ss: &SteadyState,
    cert: Option<&Certificate>,
) -> (SimulationEntry, Option<(String, smib_core::Trajectory)>) {
    let eta = cert.map_or(cfg.eta.unwrap_or(0.0), |c| c.eta);
    let mut entry = SimulationEntry {
        index,
        eta,
        ..Default::default()
    };
    let mut x0 = ss.state_at(0.0, &cfg.grid);
    x0.omega += cfg.sim.perturb_omega;
    let opts = cfg.sim_options().with_storage(*ss, eta);
    let traj = match integrate(&x0, &cfg.machine, &cfg.grid, &opts) {
        Ok(t) => t,
        Err(e) => {
            entry.error = Some(e.to_string());
            return (entry, None);
        }
    };
    entry.samples = traj.len();
    entry.initial_storage = traj.storage.first().copied();
    entry.final_storage = traj.storage.last().copied();
    if let Some(c) = cert {
        let rep = lyapunov_monitor(&traj, ss, c, &cfg.machine, &cfg.grid, &cfg.units);
        entry.monotone = Some(rep.monotone);
        entry.max_increase = Some(rep.max_increase);
        entry.tolerance = Some(rep.tolerance);
        entry.first_exit = rep.first_exit;
        match rep.balance {
            Ok(b) => entry.balance = Some(b),
            Err(e) => entry.balance_error = Some(e.to_string()),
        }
    }
    let name = format!("trajectory_ss{index}.csv");
    entry.csv = Some(name.clone());
    (entry, Some((name, traj)))
}

/// Draws for one steady state. With `in_sublevel_only`, draws continue
/// until `samples` of them fall in the sublevel component.
fn draws(
    cfg: &AnalysisConfig,
    b: &BasinConfig,
    ss: &SteadyState,
    cert: &Certificate,
    opts: &BasinOptions,
) -> Result<(usize, Vec<BasinDraw>), SimError> {
    let draw = |i| basin_draw(i, ss, cert, &cfg.machine, &cfg.grid, &b.sampling_box, opts);
    if !b.in_sublevel_only {
        let all = (0..b.samples)
            .into_par_iter()
            .map(draw)
            .collect::<Result<Vec<_>, _>>()?;
        return Ok((b.samples, all));
    }
    let mut kept = Vec::with_capacity(b.samples);
    let mut next = 0;
    while kept.len() < b.samples && next < b.max_draws {
        let batch = (b.samples - kept.len()).max(64).min(b.max_draws - next);
        let found = (next..next + batch)
            .into_par_iter()
            .map(draw)
            .collect::<Result<Vec<_>, _>>()?;
        next += batch;
        kept.extend(found.into_iter().filter(|d| d.in_sublevel));
    }
    kept.truncate(b.samples);
    let used = kept.last().map_or(next, |d| d.index + 1);
    Ok((used, kept))
}

fn basin(
    cfg: &AnalysisConfig,
    b: &BasinConfig,
    index: usize,
    ss: &SteadyState,
    cert: Option<&Certificate>,
) -> (BasinEntry, Option<(String, Vec<BasinCase>)>) {
    let mut entry = BasinEntry {
        index,
        ..Default::default()
    };
    let Some(cert) = cert.filter(|c| c.verdict == Verdict::CertifiedROA) else {
        entry.reason = Some("no attraction estimate: verdict is not CertifiedROA".into());
        return (entry, None);
    };
    let opts = BasinOptions {
        samples: b.samples,
        seed: b.seed,
        sim: cfg.basin_sim_options(b),
        threshold: b.threshold,
    };
    let (n_draws, drawn) = match draws(cfg, b, ss, cert, &opts) {
        Ok(d) => d,
        Err(e) => {
            entry.reason = Some(e.to_string());
            return (entry, None);
        }
    };
    let cases: Vec<BasinCase> = drawn
        .par_iter()
        .map(|d| simulate_draw(d, ss, &cfg.machine, &cfg.grid, &opts))
        .collect();
    let report = BasinReport::from_cases(&cases);
    let name = format!("basin_ss{index}.csv");
    entry.ran = true;
    entry.csv = Some(name.clone());
    entry.n_draws = n_draws;
    entry.sound = Some(report.soundness().is_ok());
    entry.report = Some(report);
    (entry, Some((name, cases)))
}

/// Runs the requested stage and everything it depends on.
pub fn run(cfg: &AnalysisConfig, stage: Stage) -> Result<Outcome> {
    let existence = existence_indicator(&cfg.machine, &cfg.grid);
    let steady =
        solve_steady_states(&cfg.machine, &cfg.grid).context("solving for steady states")?;
    let certs = stage
        .needs_certificate()
        .then(|| certificates(cfg, &steady));
    let cert_of = |i: usize| {
        certs
            .as_ref()
            .and_then(|c| c.get(i))
            .and_then(|e| e.certificate.as_ref())
    };

    let mut trajectories = Vec::new();
    let simulations = stage.runs(Stage::Simulate).then(|| {
        steady
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (entry, file) = simulate(cfg, i, s, cert_of(i));
                trajectories.extend(file);
                entry
            })
            .collect()
    });

    let mut basin_cases = Vec::new();
    let basins = match (&cfg.basin, stage.runs(Stage::Basin)) {
        (Some(b), true) => Some(
            steady
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let (entry, file) = basin(cfg, b, i, s, cert_of(i));
                    basin_cases.extend(file);
                    entry
                })
                .collect(),
        ),
        _ => None,
    };

    let report = Report {
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        stage,
        config: cfg.clone(),
        existence,
        certificates: certs,
        linearizations: stage
            .runs(Stage::Linearize)
            .then(|| linearizations(cfg, &steady)),
        steady_states: steady,
        simulations,
        basins,
    };
    Ok(Outcome {
        report,
        trajectories,
        basin_cases,
    })
}

/// Writes `report.json` and the CSV files into `dir`.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, traj) in &outcome.trajectories {
        write_trajectory_csv(&dir.join(name), traj).with_context(|| format!("writing {name}"))?;
    }
    for (name, cases) in &outcome.basin_cases {
        write_basin_csv(&dir.join(name), cases).with_context(|| format!("writing {name}"))?;
    }
    let path = dir.join("report.json");
    fs::write(&path, to_json(&outcome.report)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
