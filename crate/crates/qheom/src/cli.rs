// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario runner: config file parsing, the named simulation scenarios, CSV
//! emission, and the command-line front end.
//!
//! A run is described by a flat `key = value` config file (`#` starts a
//! comment). Recognized keys and their defaults:
//!
//! ```text
//! epsilon = 1.5         qubit level splitting
//! J = 1.0               flip-flip coupling
//! lambda = 0.3          bath reorganization energy
//! gamma = 0.5           bath cutoff
//! beta = 2.5            inverse temperature
//! L = 6                 hierarchy tier cutoff
//! M = 2                 Matsubara terms
//! dt = 0.001            integrator step
//! tEnd = 10.0           propagation end time
//! sampleStride = 10     steps between samples
//! scenario = <name>     required; see below
//! outputPath = <path>   optional CSV destination
//! tEq = 50.0            equilibration time (fig2 scenarios)
//! stationarityTol = 1e-7
//! zeroTol = 1e-6        concurrence death threshold
//! ```
//!
//! Scenarios: `fig1` (hierarchy from the Bell singlet), `fig2-correlated`
//! (equilibrate, pulse qubit 1, propagate), `fig2-factorized` (same but the
//! system-bath correlations are discarded before the pulse),
//! `redfield-fig1` / `redfield-fig2` (the weak-coupling reference for each),
//! `toymodel` (closed-form coherence table, no trajectory), and
//! `convergence-sweep` (fig1 rerun at deeper hierarchy cutoffs, reporting
//! sup-norm concurrence differences).
//!
//! Unknown keys are rejected: a typo must fail loudly, not silently fall back
//! to a default. Runs are deterministic; the same config byte-for-byte
//! reproduces the same CSV.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bath::{build_expansion, BathError, DrudeParams};
use crate::entangle::{self, DeathRevivalReport, EntangleError};
use crate::heom::{
    EquilibrateOptions, HeomError, Hierarchy, HierarchyState, PropagateOptions, Qubit,
    SystemModel,
};
use crate::qmat::{C64, ComplexMatrix, DensityMatrix, QmatError};
use crate::redfield::{build_redfield, propagate_redfield, RedfieldError};
use crate::toymodel::{system_bath_coherence, ToyModelError, ToyParams};
use crate::trajectory::{Trajectory, TrajectoryError};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Heom(#[from] HeomError),
    #[error(transparent)]
    Redfield(#[from] RedfieldError),
    #[error(transparent)]
    Entangle(#[from] EntangleError),
    #[error(transparent)]
    Qmat(#[from] QmatError),
    #[error(transparent)]
    Toy(#[from] ToyModelError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// The named simulations the binary can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig1,
    Fig2Correlated,
    Fig2Factorized,
    RedfieldFig1,
    RedfieldFig2,
    ToyModel,
    ConvergenceSweep,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Fig1,
        Scenario::Fig2Correlated,
        Scenario::Fig2Factorized,
        Scenario::RedfieldFig1,
        Scenario::RedfieldFig2,
        Scenario::ToyModel,
        Scenario::ConvergenceSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2Correlated => "fig2-correlated",
            Scenario::Fig2Factorized => "fig2-factorized",
            Scenario::RedfieldFig1 => "redfield-fig1",
            Scenario::RedfieldFig2 => "redfield-fig2",
            Scenario::ToyModel => "toymodel",
            Scenario::ConvergenceSweep => "convergence-sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|sc| sc.name()).collect();
                CliError::Config(format!(
                    "unknown scenario '{s}'; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Full description of one run. Defaults reproduce the strong-coupling
/// regime the figures use; only `scenario` has no default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub epsilon: f64,
    pub j: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
    pub l: usize,
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
    pub scenario: Option<Scenario>,
    pub output_path: Option<PathBuf>,
    pub t_eq: f64,
    pub stationarity_tol: f64,
    pub zero_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 1.5,
            j: 1.0,
            lambda: 0.3,
            gamma: 0.5,
            beta: 2.5,
            l: 6,
            m: 2,
            dt: 1e-3,
            t_end: 10.0,
            sample_stride: 10,
            scenario: None,
            output_path: None,
            t_eq: 50.0,
            stationarity_tol: 1e-7,
            zero_tol: 1e-6,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("key '{key}': cannot parse '{value}'")))
}

impl RunConfig {
    /// Applies one `key = value` entry; unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "J" => self.j = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "L" => self.l = parse_num(key, value)?,
            "M" => self.m = parse_num(key, value)?,
            "dt" => self.dt = parse_num(key, value)?,
            "tEnd" => self.t_end = parse_num(key, value)?,
            "sampleStride" => self.sample_stride = parse_num(key, value)?,
            "scenario" => self.scenario = Some(value.parse()?),
            "outputPath" => self.output_path = Some(PathBuf::from(value)),
            "tEq" => self.t_eq = parse_num(key, value)?,
            "stationarityTol" => self.stationarity_tol = parse_num(key, value)?,
            "zeroTol" => self.zero_tol = parse_num(key, value)?,
            other => {
                return Err(CliError::Config(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    /// Applies a command-line `--override key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{spec}' is not key=value")))?;
        self.apply(key.trim(), value.trim())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario
            .ok_or_else(|| CliError::Config("no scenario selected".to_string()))
    }

    fn drude_params(&self) -> Result<DrudeParams, CliError> {
        Ok(DrudeParams::new(self.lambda, self.gamma, self.beta)?)
    }

    fn hierarchy(&self) -> Result<Hierarchy, CliError> {
        let sys = SystemModel::new(self.epsilon, self.j);
        let bath = build_expansion(&self.drude_params()?, self.m)?;
        Ok(Hierarchy::new(sys, bath, self.l, self.m)?)
    }

    fn propagate_options(&self) -> PropagateOptions {
        PropagateOptions {
            dt: self.dt,
            t_end: self.t_end,
            sample_stride: self.sample_stride,
        }
    }

    fn equilibrate_options(&self) -> EquilibrateOptions {
        EquilibrateOptions {
            t_eq: self.t_eq,
            stationarity_tol: self.stationarity_tol,
            ..EquilibrateOptions::default()
        }
    }
}

/// The Bell state (|01> - |10>)/sqrt(2) both strong-coupling figures start
/// from (as a projector; the global sign drops out).
pub fn singlet_state() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::projector(&[
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
        C64::new(-s, 0.0),
        C64::new(0.0, 0.0),
    ])
}

/// Equilibrates, extending the run in `t_eq / 2` chunks until the residual
/// passes or the total integrated time reaches four times the configured
/// `t_eq`. The slowest hierarchy mode is not known a priori, so a fixed
/// budget with a hard cap beats guessing a single horizon.
pub fn equilibrate_extended(
    hier: &Hierarchy,
    opts: &EquilibrateOptions,
) -> Result<HierarchyState, CliError> {
    let mut outcome = hier.equilibrate(opts);
    loop {
        match outcome {
            Ok(state) => return Ok(state),
            Err(HeomError::NotStationary {
                residual,
                tol,
                state,
            }) => {
                if state.t >= 4.0 * opts.t_eq - 1e-9 {
                    return Err(CliError::Heom(HeomError::NotStationary {
                        residual,
                        tol,
                        state,
                    }));
                }
                let mut state = *state;
                hier.advance(&mut state, opts.t_eq / 2.0, opts.dt)?;
                let residual = hier.rhs_max_abs(&state);
                outcome = if residual > tol {
                    Err(HeomError::NotStationary {
                        residual,
                        tol,
                        state: Box::new(state),
                    })
                } else {
                    Ok(state)
                };
            }
            Err(e) => return Err(CliError::Heom(e)),
        }
    }
}

/// Everything a scenario produces: the sampled trajectory (empty for
/// `toymodel`), the death/revival scan, and printable summary lines.
#[derive(Debug)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub report: DeathRevivalReport,
    pub summary: Vec<String>,
}

/// Runs the configured scenario to completion.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let scenario = cfg.scenario()?;
    match scenario {
        Scenario::Fig1 => {
            let hier = cfg.hierarchy()?;
            let mut state = hier.initial_state(&singlet_state());
            let traj = hier.propagate(&mut state, &cfg.propagate_options())?;
            finish(cfg, scenario, traj, Vec::new())
        }
        Scenario::Fig2Correlated | Scenario::Fig2Factorized => {
            let hier = cfg.hierarchy()?;
            let mut state = equilibrate_extended(&hier, &cfg.equilibrate_options())?;
            state.t = 0.0;
            if scenario == Scenario::Fig2Factorized {
                state.factorize();
            }
            state.apply_pulse(Qubit::One);
            let traj = hier.propagate(&mut state, &cfg.propagate_options())?;
            finish(cfg, scenario, traj, Vec::new())
        }
        Scenario::RedfieldFig1 => {
            let sys = SystemModel::new(cfg.epsilon, cfg.j);
            let gen = build_redfield(&sys, &cfg.drude_params()?)?;
            let traj = propagate_redfield(&gen, &singlet_state(), &cfg.propagate_options())?;
            finish(cfg, scenario, traj, Vec::new())
        }
        Scenario::RedfieldFig2 => {
            // The weak-coupling theory has no bath correlations to carry, so
            // its pulse acts on the factorized thermal system state.
            let sys = SystemModel::new(cfg.epsilon, cfg.j);
            let gen = build_redfield(&sys, &cfg.drude_params()?)?;
            let gibbs = DensityMatrix::thermal(&sys.h_s, cfg.beta);
            let rho0 = pulse_operator().mul(gibbs.matrix()).mul(&pulse_operator().dagger());
            let traj = propagate_redfield(&gen, &rho0, &cfg.propagate_options())?;
            finish(cfg, scenario, traj, Vec::new())
        }
        Scenario::ToyModel => {
            let mut summary = vec![format!("scenario = {scenario}")];
            let mut worst: f64 = 0.0;
            for &epsilon in &[0.5, 1.0, 1.5, 2.0] {
                for &g in &[0.0, 0.25, 0.5, 1.0] {
                    for &beta in &[0.5, 1.0, 2.5, 4.0] {
                        let p = ToyParams::new(epsilon, g, beta)?;
                        let coh = system_bath_coherence(&p);
                        let diff = (coh.numeric.re - coh.closed_form).abs();
                        worst = worst.max(diff);
                        summary.push(format!(
                            "toy: epsilon={epsilon} g={g} beta={beta} closed={} numeric={} diff={diff:e}",
                            sig(coh.closed_form),
                            sig(coh.numeric.re),
                        ));
                    }
                }
            }
            summary.push(format!("worst_coherence_diff = {worst:e}"));
            Ok(ScenarioOutput {
                scenario,
                trajectory: Trajectory::new(),
                report: DeathRevivalReport::default(),
                summary,
            })
        }
        Scenario::ConvergenceSweep => {
            let base = run_at_depth(cfg, cfg.l, cfg.m)?;
            let deeper = run_at_depth(cfg, cfg.l + 2, cfg.m)?;
            let more_matsubara = run_at_depth(cfg, cfg.l, cfg.m + 1)?;
            let extra = vec![
                format!(
                    "sup_diff_depth = {:e}",
                    base.sup_norm_concurrence_diff(&deeper)?
                ),
                format!(
                    "sup_diff_matsubara = {:e}",
                    base.sup_norm_concurrence_diff(&more_matsubara)?
                ),
            ];
            finish(cfg, scenario, base, extra)
        }
    }
}

/// sy on qubit 1 as a 4x4 unitary; the pi-pulse both fig2 branches apply.
fn pulse_operator() -> ComplexMatrix {
    let sy = ComplexMatrix::from_row_major(
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    );
    sy.kron(&ComplexMatrix::identity(2))
}

fn run_at_depth(cfg: &RunConfig, l: usize, m: usize) -> Result<Trajectory, CliError> {
    let mut sub = cfg.clone();
    sub.l = l;
    sub.m = m;
    let hier = sub.hierarchy()?;
    let mut state = hier.initial_state(&singlet_state());
    Ok(hier.propagate(&mut state, &sub.propagate_options())?)
}

/// Scans the trajectory, assembles the summary, and writes the CSV if the
/// config asks for one.
fn finish(
    cfg: &RunConfig,
    scenario: Scenario,
    trajectory: Trajectory,
    extra_summary: Vec<String>,
) -> Result<ScenarioOutput, CliError> {
    let report = entangle::detect_death_revival(&trajectory.concurrence_series(), cfg.zero_tol);
    let mut summary = vec![
        format!("scenario = {scenario}"),
        format!("samples = {}", trajectory.len()),
        format!("worst_trace_error = {:e}", trajectory.worst_trace_error()),
        format!(
            "worst_hermiticity_defect = {:e}",
            trajectory.worst_hermiticity_defect()
        ),
        format!(
            "lowest_min_eigenvalue = {:e}",
            trajectory.lowest_min_eigenvalue()
        ),
        format!(
            "equilibrium_concurrence = {}",
            sig(trajectory.equilibrium_concurrence()?)
        ),
    ];
    for (a, b) in &report.death_intervals {
        summary.push(format!("death_interval = {} {}", sig(*a), sig(*b)));
    }
    for t in &report.revival_times {
        summary.push(format!("revival_time = {}", sig(*t)));
    }
    summary.push(format!(
        "total_death_length = {}",
        sig(report.total_death_length())
    ));
    summary.extend(extra_summary);
    Ok(ScenarioOutput {
        scenario,
        trajectory,
        report,
        summary,
    })
}

/// 12 significant digits; enough that writing and re-reading a sample does
/// not move any derived quantity above the comparison tolerances.
fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Renders the trajectory as CSV: time, concurrence, entanglement of
/// formation, the full reduced state (16 real then 16 imaginary parts,
/// row-major), and the conservation diagnostics.
pub fn emit_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("t,C,eof");
    for part in ["re", "im"] {
        for i in 0..4 {
            for j in 0..4 {
                out.push_str(&format!(",{part}_rho_{i}{j}"));
            }
        }
    }
    out.push_str(",trace_error,min_eig\n");
    for s in &traj.samples {
        out.push_str(&sig(s.t));
        out.push(',');
        out.push_str(&sig(s.concurrence));
        out.push(',');
        out.push_str(&sig(s.eof));
        let m = s.rho.matrix();
        for part in 0..2 {
            for i in 0..4 {
                for j in 0..4 {
                    let z = m[(i, j)];
                    out.push(',');
                    out.push_str(&sig(if part == 0 { z.re } else { z.im }));
                }
            }
        }
        out.push(',');
        out.push_str(&sig(s.trace_error));
        out.push(',');
        out.push_str(&sig(s.min_eigenvalue));
        out.push('\n');
    }
    out
}

pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    Ok(std::fs::write(path, emit_csv(traj))?)
}

/// Dissipative two-qubit entanglement dynamics from the bath hierarchy.
#[derive(Debug, Parser)]
#[command(name = "qheom", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario from a config file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Scenario name, overriding the config.
    #[arg(long)]
    scenario: Option<String>,
    /// CSV destination, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Cli {
    /// Executes the parsed command; summary lines go to stdout.
    pub fn execute(&self) -> Result<(), CliError> {
        match &self.command {
            Command::Run(args) => {
                let mut cfg = RunConfig::load(&args.config)?;
                if let Some(name) = &args.scenario {
                    cfg.scenario = Some(name.parse()?);
                }
                if let Some(path) = &args.out {
                    cfg.output_path = Some(path.clone());
                }
                for spec in &args.overrides {
                    cfg.apply_override(spec)?;
                }
                let output = run_scenario(&cfg)?;
                if let Some(path) = &cfg.output_path {
                    write_csv(&output.trajectory, path)?;
                }
                for line in &output.summary {
                    println!("{line}");
                }
                Ok(())
            }
        }
    }
}
