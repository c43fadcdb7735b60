//! `key = value` experiment plans.

use polywall::params::{kv_lines, parse_f64, ParamsConfig};
use polywall::solver::{Forcing, Mode, SolverConfig};
use polywall::{Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    SingleRun,
    SweepRe,
    SweepAlpha,
    MicroVerify,
    EnergyAudit,
    InviscidLimit,
}

impl PlanKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "single_run" | "run" => Self::SingleRun,
            "sweep_re" => Self::SweepRe,
            "sweep_alpha" => Self::SweepAlpha,
            "micro_verify" => Self::MicroVerify,
            "energy_audit" => Self::EnergyAudit,
            "inviscid_limit" => Self::InviscidLimit,
            _ => return Err(Error::Input(format!("unknown kind '{s}'"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SingleRun => "single_run",
            Self::SweepRe => "sweep_re",
            Self::SweepAlpha => "sweep_alpha",
            Self::MicroVerify => "micro_verify",
            Self::EnergyAudit => "energy_audit",
            Self::InviscidLimit => "inviscid_limit",
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self, Self::SweepRe | Self::SweepAlpha | Self::InviscidLimit)
    }
}

/// Mean profile of the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProfile {
    /// Slip-Poiseuille steady state under a pressure gradient, shear otherwise.
    Auto,
    /// `U(y) = sin(pi y / 2)`, a steady Euler shear.
    Shear,
    /// Steady slip-Poiseuille profile of the configured pressure gradient.
    Poiseuille,
    Zero,
}

impl InitialProfile {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => Self::Auto,
            "shear" => Self::Shear,
            "poiseuille" => Self::Poiseuille,
            "zero" => Self::Zero,
            _ => return Err(Error::Input(format!("unknown initial_profile '{s}'"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Shear => "shear",
            Self::Poiseuille => "poiseuille",
            Self::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroSpec {
    pub members: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Spacing of the comparison times.
    pub sample_interval: f64,
    /// Cell size of the Fokker-Planck grid.
    pub fp_cell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub params: ParamsConfig,
    pub grid: GridSpec,
    /// Solver settings; the forcing inside is rebuilt from `forcing_name`
    /// and `forcing_amplitude` by [`ExperimentPlan::solver_config`].
    pub solver: SolverConfig,
    pub forcing_name: String,
    pub forcing_amplitude: f64,
    pub initial_profile: InitialProfile,
    /// Amplitude of the streamfunction perturbation `eps sin(2 pi x / lx) (1 - y^2)^2`.
    pub perturbation: f64,
    pub sweep_values: Vec<f64>,
    /// `alpha Re Wi / tau`, held fixed across Re sweeps by adjusting `tau`.
    pub friction_ratio: f64,
    /// Start of the averaging window as a fraction of `t_end`.
    pub window_start: f64,
    /// Interval between Euler-reference comparison times.
    pub reference_interval: f64,
    /// Start-up time excluded from the residual-order measurement.
    pub audit_skip: f64,
    pub micro: MicroSpec,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

/// Every accepted key, in echo order.
pub const PLAN_KEYS: [&str; 34] = [
    "kind",
    "re",
    "wi",
    "tau",
    "alpha",
    "kappa",
    "stokes_einstein",
    "scaling_mode",
    "gamma",
    "beta_exp",
    "nx",
    "ny",
    "lx",
    "dt",
    "t_end",
    "mode",
    "forcing",
    "forcing_amplitude",
    "cfl_max",
    "checkpoint_every",
    "sample_every",
    "initial_profile",
    "perturbation",
    "sweep_values",
    "friction_ratio",
    "window_start",
    "reference_interval",
    "audit_skip",
    "members",
    "micro_dt",
    "micro_t_end",
    "micro_sample_interval",
    "fp_cell",
    "seed",
];

impl ExperimentPlan {
    /// Defaults of the canned experiment for `kind`.
    pub fn defaults(kind: PlanKind) -> Self {
        let mut params = ParamsConfig::default();
        params.sim.re = 1000.0;
        params.sim.tau = 1000.0;
        let mut plan = Self {
            kind,
            params,
            grid: GridSpec {
                nx: 64,
                ny: 65,
                lx: 2.0 * PI,
            },
            solver: SolverConfig::default(),
            forcing_name: "zero".into(),
            forcing_amplitude: 0.0,
            initial_profile: InitialProfile::Auto,
            perturbation: 0.01,
            sweep_values: Vec::new(),
            friction_ratio: 10.0,
            window_start: 0.5,
            reference_interval: 0.1,
            audit_skip: 0.1,
            micro: MicroSpec {
                members: 100_000,
                dt: 1e-3,
                t_end: 5.0,
                sample_interval: 0.25,
                fp_cell: 0.12,
            },
            seed: 0,
            output_dir: None,
        };
        match kind {
            PlanKind::SingleRun | PlanKind::MicroVerify => {}
            PlanKind::SweepRe => {
                plan.sweep_values = vec![250.0, 500.0, 1000.0, 2000.0, 4000.0];
                plan.solver.dt = 2e-3;
                plan.solver.t_end = 2.0;
                plan.solver.sample_every = 10;
                plan.solver.checkpoint_every = 0;
                plan.forcing_amplitude = 2.0;
            }
            PlanKind::InviscidLimit => {
                plan.sweep_values = vec![250.0, 1000.0, 4000.0];
                plan.initial_profile = InitialProfile::Shear;
                plan.solver.dt = 2e-3;
                plan.solver.t_end = 2.0;
                plan.solver.sample_every = 10;
                plan.solver.checkpoint_every = 0;
            }
            PlanKind::SweepAlpha => {
                plan.sweep_values = vec![10.0, 100.0, 1000.0];
                plan.params.sim.re = 10.0;
                plan.params.sim.tau = 5.0;
                plan.grid = GridSpec { nx: 8, ny: 17, lx: 2.0 };
                plan.solver.dt = 0.05;
                plan.solver.t_end = 200.0;
                plan.solver.sample_every = 100;
                plan.solver.checkpoint_every = 0;
                plan.forcing_name = "pressure_gradient".into();
                plan.forcing_amplitude = 0.1;
                plan.initial_profile = InitialProfile::Zero;
                plan.perturbation = 0.0;
            }
            PlanKind::EnergyAudit => {
                plan.params.sim.re = 100.0;
                plan.params.sim.tau = 100.0;
                plan.grid = GridSpec {
                    nx: 16,
                    ny: 33,
                    lx: 2.0 * PI,
                };
                plan.solver.dt = 0.01;
                plan.solver.t_end = 0.5;
                plan.solver.sample_every = 1;
                plan.solver.checkpoint_every = 0;
                plan.initial_profile = InitialProfile::Shear;
                plan.perturbation = 0.1;
            }
        }
        plan
    }

    /// Solver settings with the configured forcing.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        self.solver_config_scaled(1.0)
    }

    /// Solver settings with the forcing amplitude multiplied by `scale`.
    pub fn solver_config_scaled(&self, scale: f64) -> Result<SolverConfig> {
        Ok(SolverConfig {
            forcing: Forcing::parse(&self.forcing_name, self.forcing_amplitude * scale)?,
            ..self.solver
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver_config()?.validate()?;
        if self.grid.nx < 4 || self.grid.nx % 2 != 0 || self.grid.ny < 5 || !(self.grid.lx > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "grid needs even nx >= 4, ny >= 5 and lx > 0; got {:?}",
                self.grid
            )));
        }
        if self.kind.is_sweep() && self.sweep_values.is_empty() {
            return Err(Error::Input(format!("{} needs sweep_values", self.kind.as_str())));
        }
        if self.sweep_values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::ParameterDomain("sweep values must be positive".into()));
        }
        if self.kind == PlanKind::SweepAlpha {
            let kappa = self.params.sim.kappa;
            if let Some(a) = self.sweep_values.iter().find(|&&a| a <= 4.0 * kappa) {
                return Err(Error::ParameterDomain(format!(
                    "sweep value alpha = {a} violates alpha > 4 kappa = {}",
                    4.0 * kappa
                )));
            }
        }
        if !(self.friction_ratio > 0.0) {
            return Err(Error::ParameterDomain("friction_ratio must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.window_start) {
            return Err(Error::ParameterDomain("window_start must lie in [0, 1)".into()));
        }
        if !(self.reference_interval > 0.0) || self.audit_skip < 0.0 {
            return Err(Error::ParameterDomain(
                "reference_interval must be positive and audit_skip non-negative".into(),
            ));
        }
        let m = &self.micro;
        if m.members == 0 || !(m.dt > 0.0) || m.t_end < 0.0 || !(m.sample_interval > 0.0) || !(m.fp_cell > 0.0) {
            return Err(Error::ParameterDomain(format!("invalid micro settings {m:?}")));
        }
        if self.initial_profile == InitialProfile::Poiseuille
            && !matches!(self.solver_config()?.forcing, Forcing::PressureGradient(_))
        {
            return Err(Error::Input("initial_profile = poiseuille needs pressure_gradient forcing".into()));
        }
        Ok(())
    }

    /// All keys with their resolved values, in [`PLAN_KEYS`] order.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.echo_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// The resolved plan as `key = value` text that parses back to the same plan.
    pub fn echo_text(&self) -> String {
        self.echo_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn echo_pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.params.sim;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = Vec::new();
        for key in PLAN_KEYS {
            let v = match key {
                "kind" => self.kind.as_str().to_string(),
                "re" => s.re.to_string(),
                "wi" => s.wi.to_string(),
                "tau" => s.tau.to_string(),
                "alpha" => s.alpha.to_string(),
                "kappa" => s.kappa.to_string(),
                "stokes_einstein" => self.params.stokes_einstein.to_string(),
                "scaling_mode" => self.params.scenario.mode.as_str().to_string(),
                "gamma" => self.params.scenario.gamma.to_string(),
                "beta_exp" => self.params.scenario.beta_exp.to_string(),
                "nx" => self.grid.nx.to_string(),
                "ny" => self.grid.ny.to_string(),
                "lx" => self.grid.lx.to_string(),
                "dt" => self.solver.dt.to_string(),
                "t_end" => self.solver.t_end.to_string(),
                "mode" => self.solver.mode.as_str().to_string(),
                "forcing" => self.forcing_name.clone(),
                "forcing_amplitude" => self.forcing_amplitude.to_string(),
                "cfl_max" => self.solver.cfl_max.to_string(),
                "checkpoint_every" => self.solver.checkpoint_every.to_string(),
                "sample_every" => self.solver.sample_every.to_string(),
                "initial_profile" => self.initial_profile.as_str().to_string(),
                "perturbation" => self.perturbation.to_string(),
                "sweep_values" => list(&self.sweep_values),
                "friction_ratio" => self.friction_ratio.to_string(),
                "window_start" => self.window_start.to_string(),
                "reference_interval" => self.reference_interval.to_string(),
                "audit_skip" => self.audit_skip.to_string(),
                "members" => self.micro.members.to_string(),
                "micro_dt" => self.micro.dt.to_string(),
                "micro_t_end" => self.micro.t_end.to_string(),
                "micro_sample_interval" => self.micro.sample_interval.to_string(),
                "fp_cell" => self.micro.fp_cell.to_string(),
                "seed" => self.seed.to_string(),
                _ => unreachable!("key list out of sync"),
            };
            out.push((key, v));
        }
        out
    }

    /// Applies one `key = value` pair; `Ok(false)` for an unknown key.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<bool> {
        if self.params.set_key(key, value)? {
            return Ok(true);
        }
        let usize_of = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Input(format!("{key}: expected a non-negative integer, got '{v}'")))
        };
        match key {
            "kind" => self.kind = PlanKind::parse(value)?,
            "nx" => self.grid.nx = usize_of(value)?,
            "ny" => self.grid.ny = usize_of(value)?,
            "lx" => self.grid.lx = parse_f64(key, value)?,
            "dt" => self.solver.dt = parse_f64(key, value)?,
            "t_end" => self.solver.t_end = parse_f64(key, value)?,
            "mode" => self.solver.mode = Mode::parse(value)?,
            "forcing" => {
                Forcing::parse(value, 0.0)?;
                self.forcing_name = value.to_string();
            }
            "forcing_amplitude" => self.forcing_amplitude = parse_f64(key, value)?,
            "cfl_max" => self.solver.cfl_max = parse_f64(key, value)?,
            "checkpoint_every" => self.solver.checkpoint_every = usize_of(value)? as u64,
            "sample_every" => self.solver.sample_every = usize_of(value)? as u64,
            "initial_profile" => self.initial_profile = InitialProfile::parse(value)?,
            "perturbation" => self.perturbation = parse_f64(key, value)?,
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| parse_f64(key, v))
                    .collect::<Result<_>>()?
            }
            "friction_ratio" => self.friction_ratio = parse_f64(key, value)?,
            "window_start" => self.window_start = parse_f64(key, value)?,
            "reference_interval" => self.reference_interval = parse_f64(key, value)?,
            "audit_skip" => self.audit_skip = parse_f64(key, value)?,
            "members" => self.micro.members = usize_of(value)?,
            "micro_dt" => self.micro.dt = parse_f64(key, value)?,
            "micro_t_end" => self.micro.t_end = parse_f64(key, value)?,
            "micro_sample_interval" => self.micro.sample_interval = parse_f64(key, value)?,
            "fp_cell" => self.micro.fp_cell = parse_f64(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Input(format!("seed: expected a 64-bit integer, got '{value}'")))?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Parses a plan. The kind comes from `kind_override` if given, else from a
/// `kind` line, else `single_run`; its canned defaults are applied first and
/// the file's keys on top.
pub fn parse_config(text: &str, kind_override: Option<PlanKind>) -> Result<ExperimentPlan> {
    let lines = kv_lines(text)?;
    let mut kind = PlanKind::SingleRun;
    for (lineno, key, value) in &lines {
        if *key == "kind" {
            kind = PlanKind::parse(value).map_err(|e| at_line(*lineno, e))?;
        }
    }
    let kind = kind_override.unwrap_or(kind);
    let mut plan = ExperimentPlan::defaults(kind);
    for (lineno, key, value) in lines {
        if key == "kind" {
            continue;
        }
        if !plan.set_key(key, value).map_err(|e| at_line(lineno, e))? {
            return Err(Error::Input(format!("line {lineno}: unknown key '{key}'")));
        }
    }
    plan.validate()?;
    Ok(plan)
}

fn at_line(lineno: usize, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("line {lineno}: {m}")),
        Error::ParameterDomain(m) => Error::ParameterDomain(format!("line {lineno}: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests;
