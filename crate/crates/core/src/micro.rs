//! Wall-grafted dumbbell kinetics: reflected Brownian-dynamics ensembles,
//! Kramers stress, the Hookean closure, a half-plane Fokker-Planck solver and
//! the free energy of the polymer layer.
//!
//! Configurations are stored as `(m_t, m_n)`: the tangential component and
//! the component along the inward normal `-n`, so the half-plane is `m_n > 0`.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpringKind {
    /// `U = h (|m|/R)^(2k)`.
    Hookean { h: f64, k: u32 },
    /// `U = -h log(1 - |m|^2 / max_extent^2)`.
    Fene { h: f64, max_extent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringPotential {
    pub kind: SpringKind,
    /// Length scale `R`.
    pub r: f64,
}

impl SpringPotential {
    pub fn hookean(h: f64, r: f64) -> Self {
        Self {
            kind: SpringKind::Hookean { h, k: 1 },
            r,
        }
    }

    /// FENE spring whose maximum extent is the length scale `R`.
    pub fn fene(h: f64, r: f64) -> Self {
        Self {
            kind: SpringKind::Fene { h, max_extent: r },
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::ParameterDomain(format!("R must be positive, got {}", self.r)));
        }
        match self.kind {
            SpringKind::Hookean { h, k } => {
                if !(h >= 0.0 && h.is_finite()) || k < 1 {
                    return Err(Error::ParameterDomain(format!("Hookean needs H >= 0, k >= 1; got H = {h}, k = {k}")));
                }
            }
            SpringKind::Fene { h, max_extent } => {
                if !(h > 0.0 && max_extent > 0.0 && h.is_finite() && max_extent.is_finite()) {
                    return Err(Error::ParameterDomain("FENE needs H > 0 and a positive maximum extent".into()));
                }
            }
        }
        Ok(())
    }

    /// `U(m)`; infinite outside the FENE ball.
    pub fn energy(&self, m: [f64; 2]) -> f64 {
        let m2 = m[0] * m[0] + m[1] * m[1];
        match self.kind {
            SpringKind::Hookean { h, k } => h * (m2 / (self.r * self.r)).powi(k as i32),
            SpringKind::Fene { h, max_extent } => {
                let x = m2 / (max_extent * max_extent);
                if x >= 1.0 {
                    f64::INFINITY
                } else {
                    -h * (-x).ln_1p()
                }
            }
        }
    }

    pub fn gradient(&self, m: [f64; 2]) -> [f64; 2] {
        let m2 = m[0] * m[0] + m[1] * m[1];
        let scale = match self.kind {
            SpringKind::Hookean { h, k } => {
                let r2 = self.r * self.r;
                2.0 * k as f64 * h * (m2 / r2).powi(k as i32 - 1) / r2
            }
            SpringKind::Fene { h, max_extent } => 2.0 * h / (max_extent * max_extent - m2),
        };
        [scale * m[0], scale * m[1]]
    }

    /// Hookean spring constant `H` when the closure applies (`k = 1`).
    fn closure_h(&self) -> Result<f64> {
        match self.kind {
            SpringKind::Hookean { h, k: 1 } => Ok(h),
            _ => Err(Error::UnsupportedClosure),
        }
    }

    /// Radius beyond which `U >= level`, used to truncate the Fokker-Planck box.
    pub fn truncation_radius(&self, level: f64) -> f64 {
        match self.kind {
            SpringKind::Hookean { h, k } => {
                if h == 0.0 {
                    f64::INFINITY
                } else {
                    self.r * (level / h).powf(0.5 / k as f64)
                }
            }
            SpringKind::Fene { h, max_extent } => max_extent * (1.0 - (-level / h).exp()).sqrt(),
        }
    }
}

/// Micro-scale constants. Defaults are the dimensionless units
/// `kB_T = zeta = rho = N_P = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroParams {
    pub kb_t: f64,
    pub zeta: f64,
    pub n_p: f64,
    pub rho: f64,
}

impl Default for MicroParams {
    fn default() -> Self {
        Self {
            kb_t: 1.0,
            zeta: 1.0,
            n_p: 1.0,
            rho: 1.0,
        }
    }
}

impl MicroParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kb_t", self.kb_t), ("zeta", self.zeta), ("n_p", self.n_p), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn diffusivity(&self) -> f64 {
        self.kb_t / self.zeta
    }

    /// Equilibrium wall-normal stress `kB_T N_P / rho`.
    pub fn equilibrium_normal_stress(&self) -> f64 {
        self.kb_t * self.n_p / self.rho
    }
}

/// Relaxation rate `4 H kB_T / (R^2 zeta)` of the Hookean stress moments.
pub fn relaxation_rate(potential: &SpringPotential, params: &MicroParams) -> Result<f64> {
    let h = potential.closure_h()?;
    Ok(4.0 * h * params.kb_t / (potential.r * potential.r * params.zeta))
}

const FENE_MAX_RETRIES: usize = 10_000;

/// Reflected dumbbell ensemble with one counter-based stream per member.
#[derive(Debug, Clone)]
pub struct PolymerEnsemble {
    pub members: Vec<[f64; 2]>,
    rngs: Vec<ChaCha8Rng>,
    pub t: f64,
    pub potential: SpringPotential,
    pub params: MicroParams,
    /// Wall slip velocity driving the tangential drift.
    pub u_slip: f64,
    /// Multiplier on the noise amplitude (1 for the physical law, 0 for the
    /// deterministic limit).
    pub noise_scale: f64,
}

fn member_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

impl PolymerEnsemble {
    pub fn from_positions(
        members: Vec<[f64; 2]>,
        seed: u64,
        potential: SpringPotential,
        params: MicroParams,
    ) -> Result<Self> {
        potential.validate()?;
        params.validate()?;
        if members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        for m in &members {
            if !(m[1] > 0.0) || !potential.energy(*m).is_finite() {
                return Err(Error::Input(format!("member {m:?} outside the admissible half-plane")));
            }
        }
        let rngs = (0..members.len()).map(|i| member_rng(seed, i)).collect();
        Ok(Self {
            members,
            rngs,
            t: 0.0,
            potential,
            params,
            u_slip: 0.0,
            noise_scale: 1.0,
        })
    }

    /// Exact draw from the half-plane Gibbs law of a Hookean `k = 1` spring:
    /// independent Gaussians of variance `R^2 / (2H)` with the normal one folded.
    pub fn equilibrium(n: usize, seed: u64, potential: SpringPotential, params: MicroParams) -> Result<Self> {
        let h = potential.closure_h()?;
        if !(h > 0.0) {
            return Err(Error::ParameterDomain("equilibrium draw needs H > 0".into()));
        }
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let sd = potential.r / (2.0 * h).sqrt();
        let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| member_rng(seed, i)).collect();
        let members = rngs
            .par_iter_mut()
            .map(|rng| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                [sd * a, reflect(sd * b)]
            })
            .collect();
        potential.validate()?;
        params.validate()?;
        Ok(Self {
            members,
            rngs,
            t: 0.0,
            potential,
            params,
            u_slip: 0.0,
            noise_scale: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Writes `member_id, m_tangential, m_normal` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["member_id", "m_tangential", "m_normal"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for (i, m) in self.members.iter().enumerate() {
            w.write_record(&[i.to_string(), format!("{:e}", m[0]), format!("{:e}", m[1])])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mirror image across the wall plane; a member landing exactly on the plane
/// is nudged to the smallest positive normal coordinate.
pub fn reflect(m_n: f64) -> f64 {
    if m_n > 0.0 {
        m_n
    } else if m_n < 0.0 {
        -m_n
    } else {
        f64::MIN_POSITIVE
    }
}

/// One Euler-Maruyama step with mirror reflection at the wall. FENE members
/// redraw the noise until the step stays inside the ball.
pub fn sde_step(ens: &PolymerEnsemble, dt: f64) -> Result<PolymerEnsemble> {
    let mut next = ens.clone();
    sde_advance(&mut next, dt)?;
    Ok(next)
}

/// In-place form of [`sde_step`].
pub fn sde_advance(ens: &mut PolymerEnsemble, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::ParameterDomain(format!("dt must be positive, got {dt}")));
    }
    let d = ens.params.diffusivity();
    let amp = (2.0 * d * dt).sqrt() * ens.noise_scale;
    let shear = ens.u_slip / ens.potential.r;
    let pot = ens.potential;
    let fene_extent = match pot.kind {
        SpringKind::Fene { max_extent, .. } => Some(max_extent),
        _ => None,
    };
    ens.members
        .par_iter_mut()
        .zip(ens.rngs.par_iter_mut())
        .for_each(|(m, rng)| {
            let grad = pot.gradient(*m);
            let det = [m[0] + (shear * m[1] - d * grad[0]) * dt, m[1] - d * grad[1] * dt];
            for _ in 0..FENE_MAX_RETRIES {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                let cand = [det[0] + amp * a, reflect(det[1] + amp * b)];
                match fene_extent {
                    Some(l) if cand[0] * cand[0] + cand[1] * cand[1] >= l * l => continue,
                    _ => {
                        *m = cand;
                        return;
                    }
                }
            }
            // every retry left the ball: keep the previous configuration
        });
    ens.t += dt;
    Ok(())
}

/// Wall stress moments: `sigma_tn = t . Sigma . (-n)` and `sigma_nn = (-n) . Sigma . (-n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressMoments {
    pub sigma_tn: f64,
    pub sigma_nn: f64,
    /// Standard errors of the Monte Carlo estimates (0 for deterministic values).
    pub se_tn: f64,
    pub se_nn: f64,
}

impl StressMoments {
    pub fn exact(sigma_tn: f64, sigma_nn: f64) -> Self {
        Self {
            sigma_tn,
            sigma_nn,
            se_tn: 0.0,
            se_nn: 0.0,
        }
    }

    pub fn equilibrium(params: &MicroParams) -> Self {
        Self::exact(0.0, params.equilibrium_normal_stress())
    }
}

/// Kramers estimate `(kB_T / rho) N_P E[m (x) grad U]` contracted on the wall
/// frame, with standard errors. Sums run in member order.
pub fn kramers_stress(ens: &PolymerEnsemble, n_p: f64, rho: f64) -> Result<StressMoments> {
    if ens.members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let scale = ens.params.kb_t * n_p / rho;
    let samples: Vec<(f64, f64)> = ens
        .members
        .par_iter()
        .map(|m| {
            let g = ens.potential.gradient(*m);
            (scale * m[0] * g[1], scale * m[1] * g[1])
        })
        .collect();
    let n = samples.len() as f64;
    let (mut s_tn, mut s_nn) = (0.0, 0.0);
    for (a, b) in &samples {
        s_tn += a;
        s_nn += b;
    }
    let (m_tn, m_nn) = (s_tn / n, s_nn / n);
    let (mut v_tn, mut v_nn) = (0.0, 0.0);
    for (a, b) in &samples {
        v_tn += (a - m_tn) * (a - m_tn);
        v_nn += (b - m_nn) * (b - m_nn);
    }
    let denom = if samples.len() > 1 { n * (n - 1.0) } else { f64::INFINITY };
    Ok(StressMoments {
        sigma_tn: m_tn,
        sigma_nn: m_nn,
        se_tn: (v_tn / denom).sqrt(),
        se_nn: (v_nn / denom).sqrt(),
    })
}

/// Exact step of the Hookean closure
/// `d sigma_tn/dt = (u/R) sigma_nn - r sigma_tn`,
/// `d sigma_nn/dt = -r sigma_nn + r sigma_eq` with `u` held constant.
pub fn closure_ode_step(
    mom: StressMoments,
    u_slip: f64,
    potential: &SpringPotential,
    params: &MicroParams,
    dt: f64,
) -> Result<StressMoments> {
    let rate = relaxation_rate(potential, params)?;
    let eq = params.equilibrium_normal_stress();
    let e = (-rate * dt).exp();
    let d = mom.sigma_nn - eq;
    let growth = if rate > 0.0 { -(-rate * dt).exp_m1() / rate } else { dt };
    Ok(StressMoments::exact(
        e * mom.sigma_tn + (u_slip / potential.r) * (eq * growth + d * dt * e),
        eq + d * e,
    ))
}

/// Cartesian cell grid on `[-extent, extent] x [0, extent]` in `(m_t, m_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpGrid {
    pub n_t: usize,
    pub n_n: usize,
    pub extent: f64,
}

impl FpGrid {
    /// Box truncated where `U >= 30`, with cells of roughly size `h`.
    pub fn for_potential(potential: &SpringPotential, h: f64) -> Result<Self> {
        let extent = potential.truncation_radius(30.0);
        if !extent.is_finite() {
            return Err(Error::ParameterDomain("potential does not confine; give an explicit extent".into()));
        }
        let n_n = (extent / h).ceil().max(2.0) as usize;
        Ok(Self { n_t: 2 * n_n, n_n, extent })
    }

    pub fn h_t(&self) -> f64 {
        2.0 * self.extent / self.n_t as f64
    }
    pub fn h_n(&self) -> f64 {
        self.extent / self.n_n as f64
    }
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            -self.extent + (i as f64 + 0.5) * self.h_t(),
            (j as f64 + 0.5) * self.h_n(),
        ]
    }
    pub fn cell_area(&self) -> f64 {
        self.h_t() * self.h_n()
    }
    fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_n + j
    }
}

/// Cell densities on an [`FpGrid`], indexed `i * n_n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: FpGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl Density {
    pub fn from_fn(grid: FpGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = vec![0.0; grid.n_t * grid.n_n];
        for i in 0..grid.n_t {
            for j in 0..grid.n_n {
                values[grid.index(i, j)] = f(grid.center(i, j));
            }
        }
        Self { grid, values, t: 0.0 }
    }

    /// Normalized Gibbs density `exp(-U) / Z` with the discrete normalization.
    pub fn gibbs(grid: FpGrid, potential: &SpringPotential, mass: f64) -> Self {
        let mut d = Self::from_fn(grid, |m| (-potential.energy(m)).exp());
        let total = d.mass();
        d.values.iter_mut().for_each(|v| *v *= mass / total);
        d
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `int w(m) f dm` by the midpoint rule.
    pub fn moment(&self, w: impl Fn([f64; 2]) -> f64) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for i in 0..g.n_t {
            for j in 0..g.n_n {
                s += w(g.center(i, j)) * self.values[g.index(i, j)];
            }
        }
        s * g.cell_area()
    }

    /// Kramers moments of a probability density (unit mass).
    pub fn stress(&self, potential: &SpringPotential, params: &MicroParams) -> StressMoments {
        let scale = params.kb_t * params.n_p / params.rho / self.mass();
        StressMoments::exact(
            scale * self.moment(|m| m[0] * potential.gradient(m)[1]),
            scale * self.moment(|m| m[1] * potential.gradient(m)[1]),
        )
    }

    /// Relative L1 distance `sum |f - g| / sum |g|`.
    pub fn relative_l1(&self, other: &Density) -> f64 {
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        num / other.values.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Bernoulli function `z / (e^z - 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Conservative finite-volume Fokker-Planck solver with Scharfetter-Gummel
/// fluxes and zero-flux walls. The potential drift on each face is
/// `-D (U_right - U_left) / h`, so `exp(-U)` at the cell centres is an exact
/// discrete steady state when `u_slip = 0`.
pub struct FokkerPlanck {
    grid: FpGrid,
    /// Coefficients of the flux `J = c_out f_left - c_in f_right` on t-faces then n-faces.
    t_faces: Vec<(f64, f64)>,
    n_faces: Vec<(f64, f64)>,
    max_outflow: f64,
}

impl FokkerPlanck {
    pub fn new(grid: FpGrid, potential: &SpringPotential, params: &MicroParams, u_slip: f64) -> Result<Self> {
        potential.validate()?;
        params.validate()?;
        let d = params.diffusivity();
        let (ht, hn) = (grid.h_t(), grid.h_n());
        let u: Vec<f64> = (0..grid.n_t * grid.n_n)
            .map(|k| potential.energy(grid.center(k / grid.n_n, k % grid.n_n)))
            .collect();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("grid reaches outside the potential's domain".into()));
        }
        let shear = u_slip / potential.r;
        let sg = |drift: f64, h: f64| {
            let pe = drift * h / d;
            (d / h * bernoulli(-pe), d / h * bernoulli(pe))
        };
        let mut t_faces = Vec::with_capacity((grid.n_t - 1) * grid.n_n);
        for i in 0..grid.n_t - 1 {
            for j in 0..grid.n_n {
                let du = u[grid.index(i + 1, j)] - u[grid.index(i, j)];
                let drift = -d * du / ht + shear * grid.center(i, j)[1];
                t_faces.push(sg(drift, ht));
            }
        }
        let mut n_faces = Vec::with_capacity(grid.n_t * (grid.n_n - 1));
        for i in 0..grid.n_t {
            for j in 0..grid.n_n - 1 {
                let du = u[grid.index(i, j + 1)] - u[grid.index(i, j)];
                n_faces.push(sg(-d * du / hn, hn));
            }
        }
        let mut outflow = vec![0.0; grid.n_t * grid.n_n];
        for i in 0..grid.n_t - 1 {
            for j in 0..grid.n_n {
                let (a, b) = t_faces[i * grid.n_n + j];
                outflow[grid.index(i, j)] += a / ht;
                outflow[grid.index(i + 1, j)] += b / ht;
            }
        }
        for i in 0..grid.n_t {
            for j in 0..grid.n_n - 1 {
                let (a, b) = n_faces[i * (grid.n_n - 1) + j];
                outflow[grid.index(i, j)] += a / hn;
                outflow[grid.index(i, j + 1)] += b / hn;
            }
        }
        let max_outflow = outflow.iter().fold(0.0f64, |m, &v| m.max(v));
        Ok(Self {
            grid,
            t_faces,
            n_faces,
            max_outflow,
        })
    }

    /// Largest stable explicit step (keeps every cell's update a convex combination).
    pub fn max_dt(&self) -> f64 {
        1.0 / self.max_outflow
    }

    pub fn step(&self, f: &mut Density, dt: f64) -> Result<()> {
        if dt * self.max_outflow > 1.0 {
            return Err(Error::Cfl {
                step: 0,
                cfl: dt * self.max_outflow,
                limit: 1.0,
            });
        }
        let g = &self.grid;
        let (ht, hn) = (g.h_t(), g.h_n());
        let mut change = vec![0.0; f.values.len()];
        for i in 0..g.n_t - 1 {
            for j in 0..g.n_n {
                let (a, b) = self.t_faces[i * g.n_n + j];
                let (l, r) = (g.index(i, j), g.index(i + 1, j));
                let flux = a * f.values[l] - b * f.values[r];
                change[l] -= flux / ht;
                change[r] += flux / ht;
            }
        }
        for i in 0..g.n_t {
            for j in 0..g.n_n - 1 {
                let (a, b) = self.n_faces[i * (g.n_n - 1) + j];
                let (l, r) = (g.index(i, j), g.index(i, j + 1));
                let flux = a * f.values[l] - b * f.values[r];
                change[l] -= flux / hn;
                change[r] += flux / hn;
            }
        }
        for (v, c) in f.values.iter_mut().zip(change) {
            *v += dt * c;
        }
        f.t += dt;
        Ok(())
    }
}

/// Advances `initial` to `t_end` with the largest stable step scaled by `safety`.
pub fn fokker_planck_solve(
    initial: &Density,
    potential: &SpringPotential,
    params: &MicroParams,
    u_slip: f64,
    t_end: f64,
    safety: f64,
) -> Result<Density> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::ParameterDomain(format!("safety must lie in (0, 1], got {safety}")));
    }
    let fp = FokkerPlanck::new(initial.grid, potential, params, u_slip)?;
    let span = t_end - initial.t;
    let n = (span / (safety * fp.max_dt())).ceil().max(0.0) as usize;
    let mut f = initial.clone();
    if n > 0 {
        let dt = span / n as f64;
        for _ in 0..n {
            fp.step(&mut f, dt)?;
        }
    }
    Ok(f)
}

/// `int f log(f / (N_P exp(-U))) dm` by the midpoint rule, with `0 log 0 = 0`.
pub fn free_energy(density: &Density, potential: &SpringPotential, n_p: f64) -> f64 {
    let g = &density.grid;
    let mut s = 0.0;
    for i in 0..g.n_t {
        for j in 0..g.n_n {
            let f = density.values[g.index(i, j)];
            if f > 0.0 {
                let u = potential.energy(g.center(i, j));
                s += f * ((f / n_p).ln() + u);
            }
        }
    }
    s * g.cell_area()
}

/// Histogram density of an ensemble on `grid` (bin width = cell size),
/// scaled to total mass `n_p`; members outside the box are dropped.
pub fn histogram_density(ens: &PolymerEnsemble, grid: FpGrid, n_p: f64) -> Result<Density> {
    if ens.members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut values = vec![0.0; grid.n_t * grid.n_n];
    let w = n_p / (ens.members.len() as f64 * grid.cell_area());
    for m in &ens.members {
        let i = ((m[0] + grid.extent) / grid.h_t()).floor();
        let j = (m[1] / grid.h_n()).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < grid.n_t && (j as usize) < grid.n_n {
            values[grid.index(i as usize, j as usize)] += w;
        }
    }
    Ok(Density { grid, values, t: ens.t })
}

/// Free energy of an ensemble through its histogram on `grid`.
pub fn free_energy_ensemble(ens: &PolymerEnsemble, grid: FpGrid, n_p: f64) -> Result<f64> {
    Ok(free_energy(&histogram_density(ens, grid, n_p)?, &ens.potential, n_p))
}
