//! Semi-implicit time integration of the channel vorticity system with the
//! dynamic polymer wall law, plus an inviscid (Euler) mode.
//!
//! The streamwise-mean velocity `U0(y)` is evolved directly; its vorticity
//! `-U0'` is the `k = 0` row of `omega`. Fourier modes `k >= 1` of `omega`
//! carry the fluctuation, whose velocity follows from the Dirichlet
//! streamfunction solve.

use crate::bc::{self, BoundaryStressState, WallOrientation};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::spectral::cheb::{self, HelmholtzOp, Robin};
use crate::spectral::{ChannelGrid, Field2D, WallTrace};
use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NavierStokes,
    Euler,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "navier_stokes" | "ns" => Ok(Mode::NavierStokes),
            "euler" => Ok(Mode::Euler),
            other => Err(Error::Input(format!("unknown mode '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::NavierStokes => "navier_stokes",
            Mode::Euler => "euler",
        }
    }
}

/// Streamwise body force `f = (f_x(y), 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Zero,
    /// Uniform `f_x = F`.
    PressureGradient(f64),
    /// `f_x = A sin(pi y)`.
    Sinusoidal(f64),
}

impl Forcing {
    pub fn parse(name: &str, amplitude: f64) -> Result<Self> {
        match name {
            "zero" | "none" => Ok(Forcing::Zero),
            "pressure_gradient" | "steady_pressure_gradient" => Ok(Forcing::PressureGradient(amplitude)),
            "sinusoidal" => Ok(Forcing::Sinusoidal(amplitude)),
            other => Err(Error::Input(format!("unknown forcing '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Forcing::Zero => "zero",
            Forcing::PressureGradient(_) => "pressure_gradient",
            Forcing::Sinusoidal(_) => "sinusoidal",
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::PressureGradient(a) | Forcing::Sinusoidal(a) => a,
        }
    }

    pub fn profile(&self, y: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::PressureGradient(f) => f,
            Forcing::Sinusoidal(a) => a * (PI * y).sin(),
        }
    }

    /// `curl f = -d f_x / dy`.
    pub fn curl(&self, y: f64) -> f64 {
        match *self {
            Forcing::Sinusoidal(a) => -a * PI * (PI * y).cos(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub mode: Mode,
    pub forcing: Forcing,
    pub cfl_max: f64,
    /// Steps between checkpoints; 0 disables them.
    pub checkpoint_every: u64,
    /// Steps between diagnostics records.
    pub sample_every: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            mode: Mode::NavierStokes,
            forcing: Forcing::Zero,
            cfl_max: 0.5,
            checkpoint_every: 1000,
            sample_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterDomain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::ParameterDomain(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_max > 0.0 && self.cfl_max < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "cfl_max must lie in (0, 1), got {}",
                self.cfl_max
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::ParameterDomain("sample_every must be >= 1".into()));
        }
        if !self.forcing.amplitude().is_finite() {
            return Err(Error::ParameterDomain("forcing amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Explicit terms of the previous step, kept for the two-step scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub omega_hat: Array2<Complex64>,
    pub mean_coef: Vec<f64>,
    pub nonlin_hat: Array2<Complex64>,
    pub mean_rhs: Vec<f64>,
    pub u_tau: WallTrace,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    /// Physical vorticity, including the mean row `-U0'`.
    pub omega: Field2D,
    /// Streamwise mean velocity at the Chebyshev nodes.
    pub mean_u: Vec<f64>,
    /// Boundary stress state at both walls.
    pub bc: BoundaryStressState,
    pub t: f64,
    pub step_index: u64,
    pub history: Option<History>,
}

impl FlowState {
    /// Builds a state from a vorticity field (its streamwise mean is replaced by
    /// `-U0'`) and a mean profile, with `g` initialized from its definition.
    pub fn new(omega: &Field2D, mean_u: Vec<f64>, params: &SimParams) -> Result<Self> {
        let grid = omega.grid().clone();
        if mean_u.len() != grid.ny() {
            return Err(Error::Input(format!(
                "mean profile length {} does not match ny = {}",
                mean_u.len(),
                grid.ny()
            )));
        }
        let mean_coef = grid.cheb_forward(&mean_u);
        let mut hat = omega.coefficients();
        set_mean_row(&mut hat, &mean_coef);
        let omega = Field2D::from_values(&grid, grid.inverse(&hat))?;
        let u_tau = wall_u_tau(&grid, &hat, &mean_coef);
        let beta = params.beta();
        let g0 = omega.wall_trace().zip_with(&u_tau, |w, u| w - beta * u);
        Ok(Self {
            omega,
            mean_u,
            bc: BoundaryStressState::new(g0),
            t: 0.0,
            step_index: 0,
            history: None,
        })
    }

    /// Mean profile `U0(y)` plus the fluctuation with streamfunction `psi(x, y)`,
    /// which must vanish on both walls.
    pub fn from_fields(
        grid: &Arc<ChannelGrid>,
        mean_u: impl Fn(f64) -> f64,
        psi: impl Fn(f64, f64) -> f64,
        params: &SimParams,
    ) -> Result<Self> {
        let psi_hat = Field2D::from_fn(grid, psi).coefficients();
        let dxx = grid.ddx_spec(&grid.ddx_spec(&psi_hat));
        let dyy = grid.ddy_spec(&grid.ddy_spec(&psi_hat));
        let omega = Field2D::from_spectral(grid, dxx + dyy)?;
        let mean: Vec<f64> = grid.y_nodes().iter().map(|&y| mean_u(y)).collect();
        Self::new(&omega, mean, params)
    }

    pub fn zero(grid: &Arc<ChannelGrid>, params: &SimParams) -> Result<Self> {
        Self::new(&Field2D::zeros(grid), vec![0.0; grid.ny()], params)
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        self.omega.grid()
    }

    /// Spectral velocity components `(u, v)` including the mean flow.
    pub fn velocity(&self) -> Result<(Field2D, Field2D)> {
        let grid = self.grid();
        let hat = grid.forward(self.omega.values()?);
        let (u, v) = velocity_spec(grid, &hat, &grid.cheb_forward(&self.mean_u));
        Ok((Field2D::from_spectral(grid, u)?, Field2D::from_spectral(grid, v)?))
    }

    /// `u . t` along both walls.
    pub fn wall_tangential_velocity(&self) -> Result<WallTrace> {
        let grid = self.grid();
        let hat = grid.forward(self.omega.values()?);
        Ok(wall_u_tau(grid, &hat, &grid.cheb_forward(&self.mean_u)))
    }
}

fn set_mean_row(hat: &mut Array2<Complex64>, mean_coef: &[f64]) {
    let d = cheb::derivative(mean_coef);
    for (n, v) in d.into_iter().enumerate() {
        hat[[0, n]] = Complex64::new(-v, 0.0);
    }
}

fn velocity_spec(
    grid: &ChannelGrid,
    omega_hat: &Array2<Complex64>,
    mean_coef: &[f64],
) -> (Array2<Complex64>, Array2<Complex64>) {
    let mut w = omega_hat.clone();
    w.row_mut(0).fill(ZERO);
    let psi = grid.poisson_spec(&w);
    let mut u = grid.ddy_spec(&psi).mapv(|c| -c);
    for (n, &c) in mean_coef.iter().enumerate() {
        u[[0, n]] = Complex64::new(c, 0.0);
    }
    (u, grid.ddx_spec(&psi))
}

fn wall_u_tau(grid: &ChannelGrid, omega_hat: &Array2<Complex64>, mean_coef: &[f64]) -> WallTrace {
    let (u, _) = velocity_spec(grid, omega_hat, mean_coef);
    let nk = grid.nkx();
    let mut top = vec![ZERO; nk];
    let mut bottom = vec![ZERO; nk];
    for k in 0..nk {
        let row = u.row(k).to_vec();
        top[k] = cheb::value_top(&row);
        bottom[k] = cheb::value_bottom(&row);
    }
    let (ot, ob) = (WallOrientation::TOP, WallOrientation::BOTTOM);
    WallTrace {
        top: grid.trace_inverse(&top).into_iter().map(|v| ot.tangential(v)).collect(),
        bottom: grid.trace_inverse(&bottom).into_iter().map(|v| ob.tangential(v)).collect(),
    }
}

/// Explicit-term evaluation at one time level.
struct Explicit {
    nonlin_hat: Array2<Complex64>,
    mean_rhs: Vec<f64>,
    u_tau: WallTrace,
    cfl: f64,
}

/// Time integrator with per-mode Helmholtz operators prefactored for a fixed `dt`.
pub struct NsSolver {
    grid: Arc<ChannelGrid>,
    cfg: SolverConfig,
    params: SimParams,
    /// Dirichlet operators per Fourier mode for the first-order start and the two-step scheme.
    mode_ops: [Vec<HelmholtzOp>; 2],
    mean_ops: [HelmholtzOp; 2],
    forcing_coef: Vec<f64>,
}

const A0: [f64; 2] = [1.0, 1.5];

impl NsSolver {
    pub fn new(grid: &Arc<ChannelGrid>, cfg: SolverConfig, params: SimParams) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if params.kappa != 0.0 {
            return Err(Error::ParameterDomain(format!(
                "flat channel walls have zero curvature, got kappa = {}",
                params.kappa
            )));
        }
        let ny = grid.ny();
        let re = params.re;
        let dt = cfg.dt;
        let (_, w1) = bc::exponential_weights(dt, params.wi);
        let friction = 0.5 * params.alpha + params.boundary_gain() * w1;
        let top = Robin::new(-friction, -1.0);
        let bottom = Robin::new(friction, -1.0);
        let build = |a0: f64| -> Result<(Vec<HelmholtzOp>, HelmholtzOp)> {
            let lambda = a0 * re / dt;
            let modes = (0..grid.nkx())
                .map(|k| {
                    let kw = grid.wavenumber(k);
                    HelmholtzOp::new(ny, lambda + kw * kw, Robin::DIRICHLET, Robin::DIRICHLET)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((modes, HelmholtzOp::new(ny, lambda, top, bottom)?))
        };
        let (m1, mean1) = build(A0[0])?;
        let (m2, mean2) = build(A0[1])?;
        let forcing_profile: Vec<f64> = grid.y_nodes().iter().map(|&y| cfg.forcing.profile(y)).collect();
        Ok(Self {
            grid: grid.clone(),
            cfg,
            params,
            mode_ops: [m1, m2],
            mean_ops: [mean1, mean2],
            forcing_coef: grid.cheb_forward(&forcing_profile),
        })
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    fn explicit(&self, omega_hat: &Array2<Complex64>, mean_coef: &[f64]) -> Explicit {
        let g = &self.grid;
        let (u_hat, v_hat) = velocity_spec(g, omega_hat, mean_coef);
        let u = g.inverse(&u_hat);
        let v = g.inverse(&v_hat);
        let wx = g.inverse(&g.ddx_spec(omega_hat));
        let wy = g.inverse(&g.ddy_spec(omega_hat));
        let adv = &u * &wx + &v * &wy;
        let mut nonlin_hat = g.forward(&adv);
        g.dealias(&mut nonlin_hat);

        let mut uv_hat = g.forward(&(&u * &v));
        g.dealias(&mut uv_hat);
        let uv0: Vec<f64> = uv_hat.row(0).iter().map(|c| c.re).collect();
        let mean_rhs = cheb::derivative(&uv0)
            .iter()
            .zip(&self.forcing_coef)
            .map(|(d, f)| f - d)
            .collect();

        let dx = g.dx();
        let mut cfl = 0.0f64;
        for j in 0..g.ny() {
            let dy = g.dy_local(j);
            for i in 0..g.nx() {
                cfl = cfl.max(u[[i, j]].abs() / dx + v[[i, j]].abs() / dy);
            }
        }
        let ny = g.ny();
        let (ot, ob) = (WallOrientation::TOP, WallOrientation::BOTTOM);
        let u_tau = WallTrace {
            top: (0..g.nx()).map(|i| ot.tangential(u[[i, 0]])).collect(),
            bottom: (0..g.nx()).map(|i| ob.tangential(u[[i, ny - 1]])).collect(),
        };
        Explicit {
            nonlin_hat,
            mean_rhs,
            u_tau,
            cfl: cfl * self.cfg.dt,
        }
    }

    fn check_cfl(&self, ex: &Explicit, step: u64) -> Result<()> {
        if !(ex.cfl <= self.cfg.cfl_max) {
            return Err(Error::Cfl {
                step,
                cfl: ex.cfl,
                limit: self.cfg.cfl_max,
            });
        }
        Ok(())
    }

    /// Advances one step of size `cfg.dt`.
    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        match self.cfg.mode {
            Mode::NavierStokes => self.step_ns(state),
            Mode::Euler => self.step_euler(state),
        }
    }

    fn step_ns(&self, s: &FlowState) -> Result<FlowState> {
        let g = &self.grid;
        let p = &self.params;
        let dt = self.cfg.dt;
        let re = p.re;
        let omega_hat = g.forward(s.omega.values()?);
        let mean_coef = g.cheb_forward(&s.mean_u);
        let ex = self.explicit(&omega_hat, &mean_coef);
        self.check_cfl(&ex, s.step_index)?;

        let (idx, rhs_hat, mean_rhs, mut u_tau_star) = match &s.history {
            None => (
                0,
                &omega_hat / dt - &ex.nonlin_hat,
                combine(&mean_coef, &ex.mean_rhs, |m, r| m / dt + r),
                ex.u_tau.clone(),
            ),
            Some(h) => (
                1,
                (&omega_hat * 2.0 - &h.omega_hat * 0.5) / dt - (&ex.nonlin_hat * 2.0 - &h.nonlin_hat),
                mean_coef
                    .iter()
                    .zip(&h.mean_coef)
                    .zip(ex.mean_rhs.iter().zip(&h.mean_rhs))
                    .map(|((m, mp), (r, rp))| (2.0 * m - 0.5 * mp) / dt + 2.0 * r - rp)
                    .collect(),
                ex.u_tau.zip_with(&h.u_tau, |a, b| 2.0 * a - b),
            ),
        };

        // mean flow with the wall law folded into Robin rows
        let decay = (-dt / p.wi).exp();
        let (w0, _) = bc::exponential_weights(dt, p.wi);
        let gain = p.boundary_gain();
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let c_top = decay * avg(&s.bc.g.top) - gain * w0 * avg(&ex.u_tau.top);
        let c_bottom = decay * avg(&s.bc.g.bottom) - gain * w0 * avg(&ex.u_tau.bottom);
        let rhs: Vec<f64> = mean_rhs.iter().map(|r| re * r).collect();
        let new_mean_coef = self.mean_ops[idx].solve_real(&rhs, c_top, c_bottom);

        let mut new_hat = Array2::<Complex64>::zeros(omega_hat.dim());
        set_mean_row(&mut new_hat, &new_mean_coef);
        let ops = &self.mode_ops[idx];
        for _pass in 0..2 {
            let bc_star = bc::step_boundary_ode(&s.bc, &ex.u_tau, &u_tau_star, p, dt)?;
            let wall = bc::wall_vorticity(&bc_star.g, &u_tau_star, p);
            let wt = g.trace_forward(&wall.top);
            let wb = g.trace_forward(&wall.bottom);
            for k in 1..g.nkx() {
                let row: Vec<Complex64> = rhs_hat.row(k).iter().map(|c| c * re).collect();
                let sol = ops[k].solve(&row, wt[k], wb[k]);
                for (n, v) in sol.into_iter().enumerate() {
                    new_hat[[k, n]] = v;
                }
            }
            u_tau_star = wall_u_tau(g, &new_hat, &new_mean_coef);
        }
        let bc_new = bc::step_boundary_ode(&s.bc, &ex.u_tau, &u_tau_star, p, dt)?;

        Ok(FlowState {
            omega: Field2D::from_values(g, g.inverse(&new_hat))?,
            mean_u: g.cheb_inverse(&new_mean_coef),
            bc: bc_new,
            t: s.t + dt,
            step_index: s.step_index + 1,
            history: Some(History {
                omega_hat,
                mean_coef,
                nonlin_hat: ex.nonlin_hat,
                mean_rhs: ex.mean_rhs,
                u_tau: ex.u_tau,
            }),
        })
    }

    /// Classical fourth-order Runge-Kutta on `(omega_k>=1, U0)`; the wall
    /// law is inactive and only impermeability is imposed.
    fn step_euler(&self, s: &FlowState) -> Result<FlowState> {
        let g = &self.grid;
        let dt = self.cfg.dt;
        let w0 = g.forward(s.omega.values()?);
        let m0 = g.cheb_forward(&s.mean_u);
        let ex = self.explicit(&w0, &m0);
        self.check_cfl(&ex, s.step_index)?;

        let rate = |w: &Array2<Complex64>, m: &[f64], ex: Option<Explicit>| {
            let ex = ex.unwrap_or_else(|| self.explicit(w, m));
            (ex.nonlin_hat.mapv(|c| -c), ex.mean_rhs)
        };
        let stage = |w: &Array2<Complex64>, m: &[f64], kw: &Array2<Complex64>, km: &[f64], h: f64| {
            let mut ws = w + &(kw * h);
            let ms: Vec<f64> = m.iter().zip(km).map(|(a, b)| a + h * b).collect();
            set_mean_row(&mut ws, &ms);
            (ws, ms)
        };
        let (k1w, k1m) = rate(&w0, &m0, Some(ex));
        let (w2, m2) = stage(&w0, &m0, &k1w, &k1m, 0.5 * dt);
        let (k2w, k2m) = rate(&w2, &m2, None);
        let (w3, m3) = stage(&w0, &m0, &k2w, &k2m, 0.5 * dt);
        let (k3w, k3m) = rate(&w3, &m3, None);
        let (w4, m4) = stage(&w0, &m0, &k3w, &k3m, dt);
        let (k4w, k4m) = rate(&w4, &m4, None);
        let kw = (&k1w + &(&k2w * 2.0) + &(&k3w * 2.0) + &k4w) / 6.0;
        let km: Vec<f64> = (0..m0.len())
            .map(|n| (k1m[n] + 2.0 * k2m[n] + 2.0 * k3m[n] + k4m[n]) / 6.0)
            .collect();
        let (new_hat, new_mean) = stage(&w0, &m0, &kw, &km, dt);

        let mut bc_new = s.bc.clone();
        bc_new.t += dt;
        Ok(FlowState {
            omega: Field2D::from_values(g, g.inverse(&new_hat))?,
            mean_u: g.cheb_inverse(&new_mean),
            bc: bc_new,
            t: s.t + dt,
            step_index: s.step_index + 1,
            history: None,
        })
    }

    /// Steps remaining from `state.t` to `cfg.t_end`.
    pub fn steps_to_end(&self, state: &FlowState) -> u64 {
        let remaining = (self.cfg.t_end - state.t) / self.cfg.dt;
        if remaining <= 0.5 {
            0
        } else {
            remaining.round() as u64
        }
    }

    /// Iterates to `t_end`, emitting a record every `sample_every` steps (and
    /// one for the initial state) and checkpoints every `checkpoint_every` steps.
    pub fn run(&self, initial: FlowState, sink: &mut dyn RunSink) -> Result<FlowState> {
        let n = self.steps_to_end(&initial);
        if n == 0 {
            return Ok(initial);
        }
        let forcing = self.cfg.forcing;
        let first = diagnostics::snapshot(&initial, &self.params, &forcing)?;
        sink.record(first)?;
        let mut last = Some(first);
        let mut state = initial;
        for i in 1..=n {
            let next = self.step(&state)?;
            let sample = i % self.cfg.sample_every == 0 || i == n;
            last = if sample {
                let before = match last {
                    Some(r) => r,
                    None => diagnostics::snapshot(&state, &self.params, &forcing)?,
                };
                let after = diagnostics::snapshot(&next, &self.params, &forcing)?;
                let rec = diagnostics::with_residual(&before, after, self.cfg.dt);
                sink.record(rec)?;
                Some(rec)
            } else {
                None
            };
            if self.cfg.checkpoint_every > 0 && next.step_index % self.cfg.checkpoint_every == 0 {
                sink.checkpoint(&next, self.cfg.dt)?;
            }
            state = next;
        }
        Ok(state)
    }
}

fn combine(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Receives diagnostics records and checkpoints from [`NsSolver::run`].
pub trait RunSink {
    fn record(&mut self, record: DiagnosticsRecord) -> Result<()>;
    fn checkpoint(&mut self, _state: &FlowState, _dt: f64) -> Result<()> {
        Ok(())
    }
}

/// Collects records in memory and keeps checkpointed states.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<DiagnosticsRecord>,
    pub checkpoints: Vec<FlowState>,
}

impl RunSink for MemorySink {
    fn record(&mut self, record: DiagnosticsRecord) -> Result<()> {
        self.records.push(record);
        Ok(())
    }
    fn checkpoint(&mut self, state: &FlowState, _dt: f64) -> Result<()> {
        self.checkpoints.push(state.clone());
        Ok(())
    }
}

/// Collects records in memory and writes checkpoints under a directory as
/// `step_<index>.nspb`.
#[derive(Debug)]
pub struct DirectorySink {
    pub records: Vec<DiagnosticsRecord>,
    pub dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl DirectorySink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            records: Vec::new(),
            dir,
            written: Vec::new(),
        })
    }
}

impl RunSink for DirectorySink {
    fn record(&mut self, record: DiagnosticsRecord) -> Result<()> {
        self.records.push(record);
        Ok(())
    }
    fn checkpoint(&mut self, state: &FlowState, dt: f64) -> Result<()> {
        let path = self.dir.join(format!("step_{:010}.nspb", state.step_index));
        write_checkpoint(&path, state, dt)?;
        self.written.push(path);
        Ok(())
    }
}

/// Discrete maximum-principle check over a run's records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleReport {
    pub max_omega: f64,
    pub initial_omega: f64,
    pub max_wall_omega: f64,
    pub forcing_term: f64,
    /// `|omega_0| + max |omega_wall| + T |curl f|`.
    pub bound: f64,
    pub satisfied: bool,
}

pub fn max_principle_bound(history: &[DiagnosticsRecord]) -> MaxPrincipleReport {
    let Some(first) = history.first() else {
        return MaxPrincipleReport {
            max_omega: 0.0,
            initial_omega: 0.0,
            max_wall_omega: 0.0,
            forcing_term: 0.0,
            bound: 0.0,
            satisfied: true,
        };
    };
    let max_omega = history.iter().fold(0.0f64, |m, r| m.max(r.omega_inf_norm));
    let max_wall = history.iter().fold(0.0f64, |m, r| m.max(r.wall_omega_inf_norm));
    let curl = history.iter().fold(0.0f64, |m, r| m.max(r.forcing_curl_inf_norm));
    let span = history.last().map_or(0.0, |l| l.t - first.t);
    let forcing_term = span * curl;
    let bound = first.omega_inf_norm + max_wall + forcing_term;
    MaxPrincipleReport {
        max_omega,
        initial_omega: first.omega_inf_norm,
        max_wall_omega: max_wall,
        forcing_term,
        bound,
        satisfied: max_omega <= bound,
    }
}

const MAGIC: &[u8; 4] = b"NSPB";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_f64s(w: &mut impl Write, v: impl IntoIterator<Item = f64>) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn put_complex(w: &mut impl Write, a: &Array2<Complex64>) -> Result<()> {
    put_f64s(w, a.iter().flat_map(|c| [c.re, c.im]))
}

/// Writes the binary checkpoint: header, core arrays, then an extension block
/// with `lx`, the step index, `g0` and the two-step history.
pub fn write_checkpoint(path: &Path, state: &FlowState, dt: f64) -> Result<()> {
    let grid = state.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.nx() as u32).to_le_bytes())?;
    w.write_all(&(grid.ny() as u32).to_le_bytes())?;
    put_f64s(&mut w, [state.t, dt])?;
    put_f64s(&mut w, state.omega.values()?.iter().copied())?;
    put_f64s(&mut w, state.mean_u.iter().copied())?;
    let bcs = &state.bc;
    for trace in [&bcs.g, &bcs.accum] {
        put_f64s(&mut w, trace.top.iter().copied())?;
        put_f64s(&mut w, trace.bottom.iter().copied())?;
    }
    put_f64s(&mut w, [grid.lx(), bcs.t])?;
    w.write_all(&state.step_index.to_le_bytes())?;
    put_f64s(&mut w, bcs.g0.top.iter().chain(&bcs.g0.bottom).copied())?;
    match &state.history {
        None => w.write_all(&[0u8])?,
        Some(h) => {
            w.write_all(&[1u8])?;
            put_complex(&mut w, &h.omega_hat)?;
            put_f64s(&mut w, h.mean_coef.iter().copied())?;
            put_complex(&mut w, &h.nonlin_hat)?;
            put_f64s(&mut w, h.mean_rhs.iter().copied())?;
            put_f64s(&mut w, h.u_tau.top.iter().chain(&h.u_tau.bottom).copied())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn trace(&mut self, n: usize) -> Result<WallTrace> {
        Ok(WallTrace {
            top: self.f64s(n)?,
            bottom: self.f64s(n)?,
        })
    }
    fn complex(&mut self, rows: usize, cols: usize) -> Result<Array2<Complex64>> {
        let v = self.f64s(2 * rows * cols)?;
        let data = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Reads a checkpoint, rebuilding the grid from its header; returns the state and `dt`.
pub fn read_checkpoint(path: &Path) -> Result<(FlowState, f64)> {
    let mut r = Reader(BufReader::new(File::open(path)?));
    let magic: [u8; 4] = r.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let t = r.f64()?;
    let dt = r.f64()?;
    let omega = Array2::from_shape_vec((nx, ny), r.f64s(nx * ny)?).map_err(|e| Error::Format(e.to_string()))?;
    let mean_u = r.f64s(ny)?;
    let g = r.trace(nx)?;
    let accum = r.trace(nx)?;
    let lx = r.f64()?;
    let bc_t = r.f64()?;
    let step_index = r.u64()?;
    let g0 = r.trace(nx)?;
    let grid = ChannelGrid::new(nx, ny, lx)?;
    let flag: [u8; 1] = r.bytes()?;
    let history = match flag[0] {
        0 => None,
        1 => {
            let nk = grid.nkx();
            Some(History {
                omega_hat: r.complex(nk, ny)?,
                mean_coef: r.f64s(ny)?,
                nonlin_hat: r.complex(nk, ny)?,
                mean_rhs: r.f64s(ny)?,
                u_tau: r.trace(nx)?,
            })
        }
        other => return Err(Error::Format(format!("bad history flag {other}"))),
    };
    let state = FlowState {
        omega: Field2D::from_values(&grid, omega)?,
        mean_u,
        bc: BoundaryStressState { g, g0, accum, t: bc_t },
        t,
        step_index,
        history,
    };
    Ok((state, dt))
}

#[cfg(test)]
mod tests;
