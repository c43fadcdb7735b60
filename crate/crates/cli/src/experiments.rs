//! The canned experiments behind each plan kind.

use crate::config::{ExperimentPlan, InitialProfile, PlanKind};
use crate::summary::{Check, PointSummary, RunSummary};
use polywall::bc::steady_slip_velocity;
use polywall::diagnostics::{
    dissipation_average, euler_error, fit_scaling, friction_factor, snapshot, write_records_csv,
    DiagnosticsRecord, ScalingFit,
};
use polywall::micro::{
    closure_ode_step, fokker_planck_solve, kramers_stress, sde_advance, Density, FokkerPlanck, FpGrid,
    MicroParams, PolymerEnsemble, SpringPotential, StressMoments,
};
use polywall::params::SimParams;
use polywall::solver::{
    read_checkpoint, write_checkpoint, Forcing, FlowState, Mode, NsSolver, RunSink, SolverConfig,
};
use polywall::spectral::ChannelGrid;
use polywall::{Error, Result};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Header line of the per-point table written for multi-point plans.
pub const POINTS_CSV_HEADER: &str = "# polywall-points v1";
/// Header line of the micro verification table.
pub const MICRO_CSV_HEADER: &str = "# polywall-micro v1";

/// Runs `plan` and writes its outputs under `plan.output_dir` when set.
pub fn execute(plan: &ExperimentPlan) -> Result<RunSummary> {
    plan.validate()?;
    let start = Instant::now();
    let out = Outputs::new(plan.output_dir.as_deref())?;
    let mut summary = match plan.kind {
        PlanKind::SingleRun => single_run(plan, &out, None)?,
        PlanKind::SweepRe => sweep_re(plan, &out)?,
        PlanKind::SweepAlpha => sweep_alpha(plan, &out)?,
        PlanKind::InviscidLimit => inviscid_limit(plan, &out)?,
        PlanKind::EnergyAudit => energy_audit(plan, &out)?,
        PlanKind::MicroVerify => micro_verify(plan, &out)?,
    };
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    out.write_summary(&summary)?;
    Ok(summary)
}

/// Continues the run stored in `checkpoint` to the plan's `t_end` with the
/// plan's parameters and the checkpoint's time step.
pub fn restart(plan: &ExperimentPlan, checkpoint: &Path) -> Result<RunSummary> {
    plan.validate()?;
    let start = Instant::now();
    let out = Outputs::new(plan.output_dir.as_deref())?;
    let mut summary = single_run(plan, &out, Some(checkpoint))?;
    summary.kind = "restart".into();
    summary.wall_clock_seconds = start.elapsed().as_secs_f64();
    out.write_summary(&summary)?;
    Ok(summary)
}

struct Outputs {
    dir: Option<PathBuf>,
}

impl Outputs {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    fn checkpoint_dir(&self, label: Option<&str>) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| match label {
            Some(l) => d.join("checkpoints").join(l),
            None => d.join("checkpoints"),
        })
    }

    fn write_records(&self, name: &str, records: &[DiagnosticsRecord]) -> Result<()> {
        if let Some(p) = self.path(name) {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_records_csv(BufWriter::new(File::create(p)?), records)?;
        }
        Ok(())
    }

    fn write_points(&self, points: &[PointSummary]) -> Result<()> {
        let Some(p) = self.path("records.csv") else {
            return Ok(());
        };
        let keys: BTreeSet<&str> = points
            .iter()
            .flat_map(|pt| pt.observables.keys().map(String::as_str))
            .collect();
        let mut f = BufWriter::new(File::create(p)?);
        writeln!(f, "{POINTS_CSV_HEADER}")?;
        let mut w = csv::Writer::from_writer(f);
        let header: Vec<&str> = ["value", "steps", "error"].into_iter().chain(keys.iter().copied()).collect();
        w.write_record(&header).map_err(csv_err)?;
        for pt in points {
            let mut row = vec![
                format!("{:e}", pt.value),
                pt.steps.to_string(),
                pt.error.clone().unwrap_or_default(),
            ];
            row.extend(keys.iter().map(|k| pt.get(k).map(|v| format!("{v:e}")).unwrap_or_default()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_summary(&self, summary: &RunSummary) -> Result<()> {
        if let Some(p) = self.path("summary.json") {
            std::fs::write(p, summary.to_json())?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Records every sample and writes checkpoints into an optional directory.
struct CollectSink {
    records: Vec<DiagnosticsRecord>,
    dir: Option<PathBuf>,
}

impl CollectSink {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self {
            records: Vec::new(),
            dir,
        })
    }
}

impl RunSink for CollectSink {
    fn record(&mut self, record: DiagnosticsRecord) -> Result<()> {
        self.records.push(record);
        Ok(())
    }

    fn checkpoint(&mut self, state: &FlowState, dt: f64) -> Result<()> {
        if let Some(d) = &self.dir {
            write_checkpoint(&d.join(format!("step_{:010}.nspb", state.step_index)), state, dt)?;
        }
        Ok(())
    }
}

fn empty_summary(plan: &ExperimentPlan) -> RunSummary {
    RunSummary {
        kind: plan.kind.as_str().to_string(),
        plan: plan.echo(),
        notes: Vec::new(),
        points: Vec::new(),
        fits: BTreeMap::new(),
        checks: Vec::new(),
        total_steps: 0,
        wall_clock_seconds: 0.0,
    }
}

fn make_grid(plan: &ExperimentPlan) -> Result<Arc<ChannelGrid>> {
    ChannelGrid::new(plan.grid.nx, plan.grid.ny, plan.grid.lx)
}

/// Initial state for `profile` with the plan's perturbation.
pub fn initial_state(
    plan: &ExperimentPlan,
    grid: &Arc<ChannelGrid>,
    params: &SimParams,
    forcing: &Forcing,
) -> Result<FlowState> {
    let profile = match (plan.initial_profile, forcing) {
        (InitialProfile::Auto, Forcing::PressureGradient(_)) => InitialProfile::Poiseuille,
        (InitialProfile::Auto, _) => InitialProfile::Shear,
        (p, _) => p,
    };
    let mean: Box<dyn Fn(f64) -> f64> = match profile {
        InitialProfile::Shear => Box::new(|y| (0.5 * PI * y).sin()),
        InitialProfile::Zero => Box::new(|_| 0.0),
        InitialProfile::Poiseuille => {
            let Forcing::PressureGradient(f) = *forcing else {
                return Err(Error::Input("initial_profile = poiseuille needs pressure_gradient forcing".into()));
            };
            let shear = params.re * f;
            let slip = steady_slip_velocity(params, shear)?;
            Box::new(move |y| 0.5 * shear * (1.0 - y * y) + slip)
        }
        InitialProfile::Auto => unreachable!("resolved above"),
    };
    let (eps, lx) = (plan.perturbation, grid.lx());
    FlowState::from_fields(
        grid,
        mean,
        move |x, y| eps * (2.0 * PI * x / lx).sin() * (1.0 - y * y).powi(2),
        params,
    )
}

fn max_of(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    records.iter().map(f).fold(0.0, f64::max)
}

/// Count of consecutive record pairs whose total energy rises by more than `tol`.
fn energy_increases(records: &[DiagnosticsRecord], tol: f64) -> usize {
    records
        .windows(2)
        .filter(|w| w[1].total_energy() > w[0].total_energy() + tol)
        .count()
}

fn energy_tolerance(records: &[DiagnosticsRecord], dt: f64) -> f64 {
    dt.powi(3) * records.first().map_or(0.0, |r| r.total_energy())
}

fn single_run(plan: &ExperimentPlan, out: &Outputs, from: Option<&Path>) -> Result<RunSummary> {
    let params = plan.params.sim;
    let mut cfg = plan.solver_config()?;
    let mut summary = empty_summary(plan);
    let state = match from {
        Some(path) => {
            let (state, dt) = read_checkpoint(path)?;
            cfg.dt = dt;
            summary.notes.push(format!(
                "restarted from {} at t = {} (step {}) with the checkpoint's dt = {dt}",
                path.display(),
                state.t,
                state.step_index
            ));
            state
        }
        None => initial_state(plan, &make_grid(plan)?, &params, &cfg.forcing)?,
    };
    let solver = NsSolver::new(state.grid(), cfg, params)?;
    let ckpt_dir = if cfg.checkpoint_every > 0 {
        out.checkpoint_dir(None)
    } else {
        None
    };
    let mut sink = CollectSink::new(ckpt_dir)?;
    let first_step = state.step_index;
    let end = solver.run(state, &mut sink)?;
    if let Some(d) = out.checkpoint_dir(None) {
        std::fs::create_dir_all(&d)?;
        write_checkpoint(&d.join("final.nspb"), &end, cfg.dt)?;
    }
    out.write_records("records.csv", &sink.records)?;

    let mut point = PointSummary::new(params.re);
    point.steps = end.step_index - first_step;
    point.set("t_final", end.t);
    if let (Some(first), Some(last)) = (sink.records.first(), sink.records.last()) {
        point.set("kinetic_energy_initial", first.kinetic_energy);
        point.set("kinetic_energy_final", last.kinetic_energy);
        point.set("max_omega", max_of(&sink.records, |r| r.omega_inf_norm));
        point.set("max_budget_residual", max_of(&sink.records, |r| r.budget_residual));
        point.set("dissipation_average", dissipation_average(&sink.records, (first.t, last.t))?);
    }
    summary.total_steps = point.steps;
    if cfg.forcing == Forcing::Zero && cfg.mode == Mode::NavierStokes {
        let tol = energy_tolerance(&sink.records, cfg.dt);
        let bad = energy_increases(&sink.records, tol);
        summary.checks.push(Check::new(
            "energy_nonincreasing",
            5,
            bad == 0,
            format!("{bad} record intervals gained more than dt^3 E0 = {tol:e}"),
        ));
    }
    summary.points.push(point);
    Ok(summary)
}

fn sweep_label(prefix: &str, v: f64) -> String {
    format!("{prefix}_{v}")
}

struct PointRun {
    summary: PointSummary,
    records: Vec<DiagnosticsRecord>,
}

fn point_failure(value: f64, e: Error) -> PointRun {
    let mut summary = PointSummary::new(value);
    summary.error = Some(e.to_string());
    PointRun {
        summary,
        records: Vec::new(),
    }
}

/// Fit over the points that report `key`; `None` if fewer than two points
/// survived or any point failed.
fn fit_points(points: &[PointSummary], key: &str) -> Option<ScalingFit> {
    if points.iter().any(|p| p.error.is_some()) {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| Some((p.value, p.get(key)?))).unzip();
    fit_scaling(&x, &y).ok()
}

fn failed_points(points: &[PointSummary]) -> String {
    let bad: Vec<String> = points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| format!("{}: {e}", p.value)))
        .collect();
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failed points: {}", bad.join("; "))
    }
}

fn slope_check(name: &str, criterion: u8, fit: Option<&ScalingFit>, lo: f64, hi: f64, min_r2: f64, points: &[PointSummary]) -> Check {
    match fit {
        Some(f) => Check::new(
            name,
            criterion,
            (lo..=hi).contains(&f.slope) && f.r_squared >= min_r2,
            format!("slope {:.4} (window [{lo}, {hi}]), r^2 {:.5} (min {min_r2})", f.slope, f.r_squared),
        ),
        None => Check::new(name, criterion, false, format!("no fit available{}", failed_points(points))),
    }
}

fn sweep_re(plan: &ExperimentPlan, out: &Outputs) -> Result<RunSummary> {
    let grid = make_grid(plan)?;
    let base = plan.params.sim;
    let t_end = plan.solver.t_end;
    let window = (plan.window_start * t_end, t_end);
    let runs: Vec<PointRun> = plan
        .sweep_values
        .par_iter()
        .map(|&re| {
            let run = || -> Result<PointRun> {
                let p = SimParams { re, ..base }.with_friction_ratio(plan.friction_ratio)?;
                let cfg = plan.solver_config_scaled(1.0 / re)?;
                let s0 = initial_state(plan, &grid, &p, &cfg.forcing)?;
                let ckpt = if cfg.checkpoint_every > 0 {
                    out.checkpoint_dir(Some(&sweep_label("re", re)))
                } else {
                    None
                };
                let mut sink = CollectSink::new(ckpt)?;
                let end = NsSolver::new(&grid, cfg, p)?.run(s0, &mut sink)?;
                let recs = sink.records;
                let mut s = PointSummary::new(re);
                s.steps = end.step_index;
                s.set("tau", p.tau);
                s.set("forcing_amplitude", cfg.forcing.amplitude());
                s.set("dissipation_average", dissipation_average(&recs, (0.0, t_end))?);
                s.set("max_omega", max_of(&recs, |r| r.omega_inf_norm));
                let ff = friction_factor(&recs, window)?;
                s.set("friction_trace", ff.trace);
                s.set("friction_tangential", ff.tangential);
                s.set("friction_magnitude", ff.magnitude());
                s.set("friction_route_gap", ff.max_route_gap);
                Ok(PointRun { summary: s, records: recs })
            };
            run().unwrap_or_else(|e| point_failure(re, e))
        })
        .collect();

    let mut summary = empty_summary(plan);
    summary.notes.push(format!(
        "friction_ratio = alpha Re Wi / tau held at {} by setting tau = alpha Re Wi / {} at each Re",
        plan.friction_ratio, plan.friction_ratio
    ));
    let forcing = plan.solver_config()?.forcing;
    if forcing != Forcing::Zero {
        summary.notes.push(format!(
            "forcing amplitude {} is divided by Re at each point",
            plan.forcing_amplitude
        ));
    }
    for r in &runs {
        out.write_records(&format!("points/{}/records.csv", sweep_label("re", r.summary.value)), &r.records)?;
    }
    let points: Vec<PointSummary> = runs.into_iter().map(|r| r.summary).collect();
    summary.total_steps = points.iter().map(|p| p.steps).sum();
    let diss = fit_points(&points, "dissipation_average");
    let fric = fit_points(&points, "friction_magnitude");
    match forcing {
        Forcing::Zero => {
            summary.checks.push(slope_check("dissipation_scaling", 1, diss.as_ref(), -1.2, -0.8, 0.98, &points));
            let w: Vec<f64> = points.iter().filter_map(|p| p.get("max_omega")).collect();
            let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            let ok = w.len() == points.len() && !w.is_empty() && hi <= 2.0 * lo;
            summary.checks.push(Check::new(
                "vorticity_uniform_bound",
                9,
                ok,
                format!("max-in-time |omega|_inf spans [{lo:.4}, {hi:.4}], ratio {:.3} (max 2){}", hi / lo, failed_points(&points)),
            ));
        }
        Forcing::PressureGradient(_) => {
            summary.checks.push(slope_check("friction_scaling", 2, fric.as_ref(), -1.2, -0.8, 0.0, &points));
            let gap = points.iter().filter_map(|p| p.get("friction_route_gap")).fold(0.0, f64::max);
            let ok = points.iter().all(|p| p.error.is_none()) && gap <= 1e-8;
            summary.checks.push(Check::new(
                "friction_routes_agree",
                2,
                ok,
                format!("largest pointwise gap between trace and tangential routes {gap:e} (max 1e-8){}", failed_points(&points)),
            ));
        }
        Forcing::Sinusoidal(_) => {}
    }
    if let Some(f) = diss {
        summary.fits.insert("dissipation_average".into(), f);
    }
    if let Some(f) = fric {
        summary.fits.insert("friction_magnitude".into(), f);
    }
    out.write_points(&points)?;
    summary.points = points;
    Ok(summary)
}

fn sweep_alpha(plan: &ExperimentPlan, out: &Outputs) -> Result<RunSummary> {
    let grid = make_grid(plan)?;
    let base = plan.params.sim;
    let cfg = plan.solver_config()?;
    let runs: Vec<PointRun> = plan
        .sweep_values
        .par_iter()
        .map(|&alpha| {
            let run = || -> Result<PointRun> {
                let p = SimParams::new(base.re, base.wi, base.tau, alpha, base.kappa)?;
                let s0 = initial_state(plan, &grid, &p, &cfg.forcing)?;
                let ckpt = if cfg.checkpoint_every > 0 {
                    out.checkpoint_dir(Some(&sweep_label("alpha", alpha)))
                } else {
                    None
                };
                let mut sink = CollectSink::new(ckpt)?;
                let end = NsSolver::new(&grid, cfg, p)?.run(s0, &mut sink)?;
                let mut s = PointSummary::new(alpha);
                s.steps = end.step_index;
                let slip = end.wall_tangential_velocity()?.inf_norm();
                s.set("wall_slip", slip);
                s.set("slip_times_alpha", slip * alpha);
                s.set("friction_ratio", p.friction_ratio());
                if let Forcing::PressureGradient(f) = cfg.forcing {
                    let exact = steady_slip_velocity(&p, p.re * f)?;
                    s.set("closed_form_slip", exact);
                    s.set("slip_relative_error", (slip - exact).abs() / exact);
                }
                Ok(PointRun {
                    summary: s,
                    records: sink.records,
                })
            };
            run().unwrap_or_else(|e| point_failure(alpha, e))
        })
        .collect();
    let mut summary = empty_summary(plan);
    summary.notes.push(format!("tau = {} held fixed across the alpha sweep", base.tau));
    for r in &runs {
        out.write_records(&format!("points/{}/records.csv", sweep_label("alpha", r.summary.value)), &r.records)?;
    }
    let mut points: Vec<PointSummary> = runs.into_iter().map(|r| r.summary).collect();
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    summary.total_steps = points.iter().map(|p| p.steps).sum();
    let slips: Vec<f64> = points.iter().filter_map(|p| p.get("wall_slip")).collect();
    let complete = slips.len() == points.len() && points.len() >= 2;
    let decreasing = complete && slips.windows(2).all(|w| w[1] < w[0]);
    summary.checks.push(Check::new(
        "slip_strictly_decreasing",
        8,
        decreasing,
        format!("wall slip by increasing alpha: {slips:?}{}", failed_points(&points)),
    ));
    let errs: Vec<f64> = points.iter().filter_map(|p| p.get("slip_relative_error")).collect();
    let products: Vec<f64> = points.iter().filter_map(|p| p.get("slip_times_alpha")).collect();
    let (lo, hi) = products.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let trend_ok = complete && errs.len() == points.len() && worst <= 0.1 && hi <= 1.1 * lo;
    summary.checks.push(Check::new(
        "slip_inverse_alpha",
        8,
        trend_ok,
        if errs.len() == points.len() {
            format!("largest deviation from the closed form {worst:.3e}; alpha * slip spans [{lo:.5}, {hi:.5}] (10% allowed)")
        } else {
            "closed-form slip needs pressure_gradient forcing".to_string()
        },
    ));
    if let Some(f) = fit_points(&points, "wall_slip") {
        summary.fits.insert("wall_slip_vs_alpha".into(), f);
    }
    out.write_points(&points)?;
    summary.points = points;
    Ok(summary)
}

/// States every `every` steps from `s0` to `t_end`, starting with `s0`.
fn trajectory(solver: &NsSolver, s0: FlowState, every: u64) -> Result<(Vec<FlowState>, u64)> {
    let n = solver.steps_to_end(&s0);
    let mut out = vec![s0.clone()];
    let mut s = s0;
    for i in 1..=n {
        s = solver.step(&s)?;
        if i % every == 0 || i == n {
            out.push(s.clone());
        }
    }
    Ok((out, n))
}

fn inviscid_limit(plan: &ExperimentPlan, out: &Outputs) -> Result<RunSummary> {
    let grid = make_grid(plan)?;
    let base = plan.params.sim;
    let cfg = plan.solver_config()?;
    let every = ((plan.reference_interval / cfg.dt).round() as u64).max(1);
    let reference_params = SimParams { re: plan.sweep_values[0], ..base }.with_friction_ratio(plan.friction_ratio)?;
    let euler_cfg = SolverConfig { mode: Mode::Euler, ..cfg };
    let s0 = initial_state(plan, &grid, &reference_params, &cfg.forcing)?;
    let (reference, ref_steps) = trajectory(&NsSolver::new(&grid, euler_cfg, reference_params)?, s0, every)?;
    let runs: Vec<PointRun> = plan
        .sweep_values
        .par_iter()
        .map(|&re| {
            let run = || -> Result<PointRun> {
                let p = SimParams { re, ..base }.with_friction_ratio(plan.friction_ratio)?;
                let s0 = initial_state(plan, &grid, &p, &cfg.forcing)?;
                let (states, steps) = trajectory(&NsSolver::new(&grid, cfg, p)?, s0, every)?;
                let err = euler_error(&states, &reference)?;
                let mut s = PointSummary::new(re);
                s.steps = steps;
                s.set("tau", p.tau);
                s.set("sup_l2_error", err.sup);
                s.set("final_l2_error", err.errors.last().copied().unwrap_or(0.0));
                let records = states
                    .iter()
                    .map(|st| snapshot(st, &p, &cfg.forcing))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PointRun { summary: s, records })
            };
            run().unwrap_or_else(|e| point_failure(re, e))
        })
        .collect();
    let mut summary = empty_summary(plan);
    summary.notes.push(format!(
        "Euler reference on the same grid and time step, compared every {every} steps; friction_ratio held at {}",
        plan.friction_ratio
    ));
    for r in &runs {
        out.write_records(&format!("points/{}/records.csv", sweep_label("re", r.summary.value)), &r.records)?;
    }
    let points: Vec<PointSummary> = runs.into_iter().map(|r| r.summary).collect();
    summary.total_steps = ref_steps + points.iter().map(|p| p.steps).sum::<u64>();
    let fit = fit_points(&points, "sup_l2_error");
    summary.checks.push(slope_check("inviscid_rate", 3, fit.as_ref(), -0.7, -0.35, 0.0, &points));
    if let Some(f) = fit {
        summary.fits.insert("sup_l2_error".into(), f);
    }
    out.write_points(&points)?;
    summary.points = points;
    Ok(summary)
}

fn energy_audit(plan: &ExperimentPlan, out: &Outputs) -> Result<RunSummary> {
    let grid = make_grid(plan)?;
    let p = plan.params.sim;
    let base = SolverConfig {
        sample_every: 1,
        checkpoint_every: 0,
        ..plan.solver_config()?
    };
    let mut summary = empty_summary(plan);
    let mut points = Vec::new();
    let mut peak = Vec::new();
    let mut increases = 0;
    for dt in [base.dt, 0.5 * base.dt] {
        let cfg = SolverConfig { dt, ..base };
        let s0 = initial_state(plan, &grid, &p, &cfg.forcing)?;
        let mut sink = CollectSink::new(None)?;
        let end = NsSolver::new(&grid, cfg, p)?.run(s0, &mut sink)?;
        let recs = sink.records;
        let late = recs
            .iter()
            .filter(|r| r.t >= plan.audit_skip)
            .map(|r| r.budget_residual)
            .fold(0.0, f64::max);
        let tol = energy_tolerance(&recs, dt);
        let bad = energy_increases(&recs, tol);
        increases += bad;
        let mut s = PointSummary::new(dt);
        s.steps = end.step_index;
        s.set("max_budget_residual", late);
        s.set("energy_increases", bad as f64);
        s.set("energy_tolerance", tol);
        if let (Some(a), Some(b)) = (recs.first(), recs.last()) {
            s.set("total_energy_initial", a.total_energy());
            s.set("total_energy_final", b.total_energy());
        }
        out.write_records(&format!("points/dt_{dt}/records.csv"), &recs)?;
        peak.push(late);
        points.push(s);
    }
    let order = (peak[0] / peak[1]).log2();
    summary.notes.push(format!(
        "residual order from the largest per-step residual after t = {} at dt and dt/2",
        plan.audit_skip
    ));
    summary.checks.push(Check::new(
        "budget_residual_order",
        5,
        order >= 1.8,
        format!("residual {:.3e} -> {:.3e}, observed order {order:.3} (min 1.8)", peak[0], peak[1]),
    ));
    if base.forcing == Forcing::Zero {
        summary.checks.push(Check::new(
            "energy_nonincreasing",
            5,
            increases == 0,
            format!("{increases} record intervals gained more than dt^3 E0"),
        ));
    }
    summary.total_steps = points.iter().map(|p| p.steps).sum();
    out.write_points(&points)?;
    summary.points = points;
    Ok(summary)
}

/// Micro units: `kB_T = zeta = rho = N_P = R = 1`, `H = 1/4`.
fn micro_setup() -> (SpringPotential, MicroParams) {
    (SpringPotential::hookean(0.25, 1.0), MicroParams::default())
}

struct MicroRow {
    scenario: &'static str,
    t: f64,
    mc: StressMoments,
    closure: StressMoments,
    fp: StressMoments,
}

struct ScenarioResult {
    rows: Vec<MicroRow>,
    worst_tn: f64,
    worst_nn: f64,
    worst_fp_tn: f64,
    ensemble: PolymerEnsemble,
}

/// Runs the ensemble, the closure and the Fokker-Planck density side by side
/// from equilibrium under the wall velocity `u(t)`.
fn micro_scenario(
    plan: &ExperimentPlan,
    name: &'static str,
    seed: u64,
    u: impl Fn(f64) -> f64,
) -> Result<ScenarioResult> {
    let (pot, params) = micro_setup();
    let m = plan.micro;
    let mut ens = PolymerEnsemble::equilibrium(m.members, seed, pot, params)?;
    let mut closure = StressMoments::equilibrium(&params);
    let grid = FpGrid::for_potential(&pot, m.fp_cell)?;
    let mut density = Density::gibbs(grid, &pot, 1.0);
    let eq = params.equilibrium_normal_stress();
    let bias = 2.0 * m.dt * eq;
    let n = (m.t_end / m.dt).round() as u64;
    let every = ((m.sample_interval / m.dt).round() as u64).max(1);
    let mut rows = Vec::new();
    let (mut worst_tn, mut worst_nn, mut worst_fp_tn) = (0.0f64, 0.0f64, 0.0f64);
    let mut record = |t: f64, ens: &PolymerEnsemble, closure: StressMoments, density: &Density| -> Result<()> {
        let mc = kramers_stress(ens, params.n_p, params.rho)?;
        let fp = density.stress(&pot, &params);
        worst_tn = worst_tn.max((mc.sigma_tn - closure.sigma_tn).abs() / (3.0 * mc.se_tn + bias));
        worst_nn = worst_nn.max((mc.sigma_nn - closure.sigma_nn).abs() / (3.0 * mc.se_nn + bias));
        worst_fp_tn = worst_fp_tn.max((mc.sigma_tn - fp.sigma_tn).abs() / (3.0 * mc.se_tn + bias));
        rows.push(MicroRow {
            scenario: name,
            t,
            mc,
            closure,
            fp,
        });
        Ok(())
    };
    record(0.0, &ens, closure, &density)?;
    let mut operator: Option<(f64, FokkerPlanck)> = None;
    for i in 0..n {
        let t = i as f64 * m.dt;
        ens.u_slip = u(t);
        sde_advance(&mut ens, m.dt)?;
        let u_mid = u(t + 0.5 * m.dt);
        closure = closure_ode_step(closure, u_mid, &pot, &params, m.dt)?;
        if operator.as_ref().is_none_or(|(u0, _)| *u0 != u_mid) {
            operator = Some((u_mid, FokkerPlanck::new(grid, &pot, &params, u_mid)?));
        }
        let fp = &operator.as_ref().expect("operator built above").1;
        let sub = (m.dt / (0.9 * fp.max_dt())).ceil() as usize;
        for _ in 0..sub {
            fp.step(&mut density, m.dt / sub as f64)?;
        }
        if (i + 1) % every == 0 || i + 1 == n {
            record((i + 1) as f64 * m.dt, &ens, closure, &density)?;
        }
    }
    Ok(ScenarioResult {
        rows,
        worst_tn,
        worst_nn,
        worst_fp_tn,
        ensemble: ens,
    })
}

fn micro_verify(plan: &ExperimentPlan, out: &Outputs) -> Result<RunSummary> {
    let (pot, params) = micro_setup();
    let m = plan.micro;
    let seed = plan.seed;
    let scenarios: Vec<Result<ScenarioResult>> = [0usize, 1]
        .par_iter()
        .map(|&k| match k {
            0 => micro_scenario(plan, "constant", seed, |_| 1.0),
            _ => micro_scenario(plan, "sinusoidal", seed.wrapping_add(1), f64::sin),
        })
        .collect();
    let scenarios = scenarios.into_iter().collect::<Result<Vec<_>>>()?;

    let mut eq_ens = PolymerEnsemble::equilibrium(m.members, seed.wrapping_add(2), pot, params)?;
    let n = (m.t_end / m.dt).round() as u64;
    for _ in 0..n {
        sde_advance(&mut eq_ens, m.dt)?;
    }
    let eq_stress = kramers_stress(&eq_ens, params.n_p, params.rho)?;
    let eq = params.equilibrium_normal_stress();

    let grid = FpGrid::for_potential(&pot, m.fp_cell)?;
    let mut start = Density::from_fn(grid, |x| (-((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2))).exp());
    let mass = start.mass();
    start.values.iter_mut().for_each(|v| *v /= mass);
    let relaxed = fokker_planck_solve(&start, &pot, &params, 0.0, 30.0, 0.9)?;
    // half-plane normalization of exp(-H |m|^2 / R^2)
    let z = PI * pot.r * pot.r / (2.0 * 0.25);
    let gibbs = Density::from_fn(grid, |x| (-pot.energy(x)).exp() / z);
    let l1 = relaxed.relative_l1(&gibbs);

    let mut summary = empty_summary(plan);
    summary.notes.push(format!(
        "Hookean k = 1 in units kB_T = zeta = rho = N_P = R = 1, H = 1/4; {} members, dt = {}; \
         tolerance 3 standard errors + 2 dt sigma_eq",
        m.members, m.dt
    ));
    summary.total_steps = 3 * n;
    let mut points = Vec::new();
    for (k, sc) in scenarios.iter().enumerate() {
        let mut p = PointSummary::new(k as f64);
        p.steps = n;
        p.set("worst_shear_deviation_over_tolerance", sc.worst_tn);
        p.set("worst_normal_deviation_over_tolerance", sc.worst_nn);
        p.set("worst_shear_gap_to_fokker_planck_over_tolerance", sc.worst_fp_tn);
        if let Some(last) = sc.rows.last() {
            p.set("sigma_tn_final", last.mc.sigma_tn);
            p.set("sigma_tn_closure_final", last.closure.sigma_tn);
            p.set("sigma_tn_fokker_planck_final", last.fp.sigma_tn);
            p.set("sigma_nn_final", last.mc.sigma_nn);
        }
        points.push(p);
    }
    let worst_nn = scenarios.iter().map(|s| s.worst_nn).fold(0.0, f64::max);
    let worst_tn = scenarios.iter().map(|s| s.worst_tn).fold(0.0, f64::max);
    summary.checks.push(Check::new(
        "closure_tracking_normal_stress",
        6,
        worst_nn <= 1.0,
        format!("largest |sigma_nn MC - closure| / tolerance = {worst_nn:.3}"),
    ));
    summary.checks.push(Check::new(
        "closure_tracking_shear_stress",
        6,
        worst_tn <= 1.0,
        format!("largest |sigma_tn MC - closure| / tolerance = {worst_tn:.3}"),
    ));
    summary.checks.push(Check::new(
        "equilibrium_normal_stress",
        7,
        (eq_stress.sigma_nn - eq).abs() <= 3.0 * eq_stress.se_nn,
        format!("sigma_nn = {:.5} +- {:.5} against {eq}", eq_stress.sigma_nn, eq_stress.se_nn),
    ));
    summary.checks.push(Check::new(
        "fokker_planck_gibbs",
        7,
        l1 <= 1e-3,
        format!("relative L1 distance to exp(-U)/Z after t = 30: {l1:.3e} (max 1e-3)"),
    ));
    let mut eq_point = PointSummary::new(2.0);
    eq_point.steps = n;
    eq_point.set("equilibrium_sigma_nn", eq_stress.sigma_nn);
    eq_point.set("equilibrium_sigma_nn_se", eq_stress.se_nn);
    eq_point.set("fokker_planck_gibbs_l1", l1);
    points.push(eq_point);

    if let Some(path) = out.path("records.csv") {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "{MICRO_CSV_HEADER}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record([
            "scenario",
            "t",
            "sigma_tn_mc",
            "se_tn",
            "sigma_nn_mc",
            "se_nn",
            "sigma_tn_closure",
            "sigma_nn_closure",
            "sigma_tn_fokker_planck",
            "sigma_nn_fokker_planck",
        ])
        .map_err(csv_err)?;
        for r in scenarios.iter().flat_map(|s| &s.rows) {
            let row = [r.mc.sigma_tn, r.mc.se_tn, r.mc.sigma_nn, r.mc.se_nn, r.closure.sigma_tn, r.closure.sigma_nn, r.fp.sigma_tn, r.fp.sigma_nn];
            let mut fields = vec![r.scenario.to_string(), format!("{:e}", r.t)];
            fields.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush()?;
    }
    if let Some(path) = out.path("ensemble.csv") {
        scenarios[0].ensemble.write_csv(BufWriter::new(File::create(path)?))?;
    }
    summary.points = points;
    Ok(summary)
}
