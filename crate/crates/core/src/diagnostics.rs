//! Energy budget, dissipation, friction factor, momentum balance and
//! inviscid-limit error diagnostics.

use crate::bc::WallOrientation;
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::solver::{FlowState, Forcing};
use crate::spectral::ChannelGrid;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Version tag written in the first line of every records CSV.
pub const RECORDS_CSV_VERSION: u32 = 1;

/// One diagnostics sample. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    /// `1/2 |u|^2` over the domain.
    pub kinetic_energy: f64,
    /// `tau / (2 Re^2 alpha)` times the summed wall integrals of `g^2`.
    pub boundary_stress_energy: f64,
    /// `(1/Re) |grad u|^2`.
    pub dissipation_rate: f64,
    /// `alpha / (2 Re)` times the summed wall integrals of `(u.t)^2`.
    pub wall_slip_dissipation: f64,
    /// `tau / (Re^2 alpha Wi)` times the summed wall integrals of `g^2`.
    pub boundary_relaxation_dissipation: f64,
    /// `int f . u`.
    pub forcing_power: f64,
    /// Wall-curvature contribution, identically zero on flat walls.
    pub curvature_term: f64,
    /// `|dE/dt - rhs|` over the step ending at this record (0 for an initial snapshot).
    pub budget_residual: f64,
    pub omega_inf_norm: f64,
    pub wall_omega_inf_norm: f64,
    pub forcing_curl_inf_norm: f64,
    /// Wall-averaged `(1/Re) x . (n . grad u)`, from the normal derivative.
    pub friction_factor_integrand: f64,
    /// The same quantity from `2 (D(u) n) . t` times the tangent's x component.
    pub friction_factor_tangential: f64,
    /// `(1/Re)` times the summed wall integrals of `x . (n . grad u)`.
    pub wall_traction: f64,
    /// `int u dA`.
    pub momentum_x: f64,
    /// `int f_x dA`.
    pub forcing_momentum: f64,
    /// `max |u.t|` over both walls.
    pub wall_slip_max: f64,
}

impl DiagnosticsRecord {
    pub fn total_energy(&self) -> f64 {
        self.kinetic_energy + self.boundary_stress_energy
    }

    /// Right-hand side of the global energy balance.
    pub fn energy_rhs(&self) -> f64 {
        -self.dissipation_rate - self.wall_slip_dissipation - self.boundary_relaxation_dissipation
            + self.forcing_power
            + self.curvature_term
    }

    /// Right-hand side of the streamwise momentum balance.
    pub fn momentum_rhs(&self) -> f64 {
        self.forcing_momentum + self.wall_traction
    }
}

/// Evaluates every instantaneous term for one state; `budget_residual` is 0.
pub fn snapshot(state: &FlowState, params: &SimParams, forcing: &Forcing) -> Result<DiagnosticsRecord> {
    let grid = state.grid();
    let (u_f, v_f) = state.velocity()?;
    let (u_hat, v_hat) = (u_f.spectral()?, v_f.spectral()?);
    let u = grid.inverse(u_hat);
    let v = grid.inverse(v_hat);
    let ux = grid.inverse(&grid.ddx_spec(u_hat));
    let uy = grid.inverse(&grid.ddy_spec(u_hat));
    let vx = grid.inverse(&grid.ddx_spec(v_hat));
    let vy = grid.inverse(&grid.ddy_spec(v_hat));
    let (nx, ny) = (grid.nx(), grid.ny());
    let re = params.re;

    let kinetic_energy = 0.5 * grid.integrate(&(&u * &u + &v * &v));
    let grad2 = &ux * &ux + &uy * &uy + &vx * &vx + &vy * &vy;
    let dissipation_rate = grid.integrate(&grad2) / re;

    let walls = [(WallOrientation::TOP, 0usize), (WallOrientation::BOTTOM, ny - 1)];
    let mut slip2 = 0.0;
    let mut slip_max = 0.0f64;
    let mut traction = 0.0;
    let mut traction_tangential = 0.0;
    for (o, j) in walls {
        let ut: Vec<f64> = (0..nx).map(|i| o.tangential(u[[i, j]])).collect();
        slip2 += grid.integrate_x(&ut.iter().map(|a| a * a).collect::<Vec<_>>());
        slip_max = ut.iter().fold(slip_max, |m, a| m.max(a.abs()));
        let normal: Vec<f64> = (0..nx).map(|i| o.normal_sign * uy[[i, j]]).collect();
        traction += grid.integrate_x(&normal);
        let tangential: Vec<f64> = (0..nx)
            .map(|i| o.tangent_sign * o.strain_traction(uy[[i, j]] + vx[[i, j]]))
            .collect();
        traction_tangential += grid.integrate_x(&tangential);
    }
    let g = &state.bc.g;
    let g2 = grid.integrate_x(&g.top.iter().map(|a| a * a).collect::<Vec<_>>())
        + grid.integrate_x(&g.bottom.iter().map(|a| a * a).collect::<Vec<_>>());
    let wall_length = 2.0 * grid.lx();

    let f = Array2::from_shape_fn((nx, ny), |(_, j)| forcing.profile(grid.y_nodes()[j]));
    let curl_max = grid
        .y_nodes()
        .iter()
        .fold(0.0f64, |m, &y| m.max(forcing.curl(y).abs()));

    Ok(DiagnosticsRecord {
        step: state.step_index,
        t: state.t,
        kinetic_energy,
        boundary_stress_energy: params.tau / (2.0 * re * re * params.alpha) * g2,
        dissipation_rate,
        wall_slip_dissipation: params.alpha / (2.0 * re) * slip2,
        boundary_relaxation_dissipation: params.tau / (re * re * params.alpha * params.wi) * g2,
        forcing_power: grid.integrate(&(&f * &u)),
        curvature_term: 0.0,
        budget_residual: 0.0,
        omega_inf_norm: state.omega.inf_norm(),
        wall_omega_inf_norm: state.omega.wall_trace().inf_norm(),
        forcing_curl_inf_norm: curl_max,
        friction_factor_integrand: traction / (re * wall_length),
        friction_factor_tangential: traction_tangential / (re * wall_length),
        wall_traction: traction / re,
        momentum_x: grid.integrate(&u),
        forcing_momentum: grid.integrate(&f),
        wall_slip_max: slip_max,
    })
}

/// Record for `after` with the budget residual of the step from `before`.
pub fn energy_audit(
    before: &FlowState,
    after: &FlowState,
    params: &SimParams,
    forcing: &Forcing,
    dt: f64,
) -> Result<DiagnosticsRecord> {
    let r0 = snapshot(before, params, forcing)?;
    let r1 = snapshot(after, params, forcing)?;
    Ok(with_residual(&r0, r1, dt))
}

/// Sets `budget_residual` of `after` from the pair `(before, after)`:
/// `|(E1 - E0)/dt - (rhs0 + rhs1)/2|`.
pub fn with_residual(before: &DiagnosticsRecord, mut after: DiagnosticsRecord, dt: f64) -> DiagnosticsRecord {
    let de = (after.total_energy() - before.total_energy()) / dt;
    after.budget_residual = (de - 0.5 * (before.energy_rhs() + after.energy_rhs())).abs();
    after
}

fn in_window(history: &[DiagnosticsRecord], window: (f64, f64)) -> Result<Vec<&DiagnosticsRecord>> {
    let tol = 1e-9 * window.1.abs().max(1.0);
    let sel: Vec<_> = history
        .iter()
        .filter(|r| r.t >= window.0 - tol && r.t <= window.1 + tol)
        .collect();
    if sel.is_empty() {
        Err(Error::EmptyWindow)
    } else {
        Ok(sel)
    }
}

/// Trapezoid time average; a single sample is its own average.
fn time_average(records: &[&DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    if records.len() == 1 {
        return f(records[0]);
    }
    let mut area = 0.0;
    for w in records.windows(2) {
        area += 0.5 * (w[1].t - w[0].t) * (f(w[0]) + f(w[1]));
    }
    let span = records[records.len() - 1].t - records[0].t;
    if span > 0.0 {
        area / span
    } else {
        records.iter().map(|r| f(r)).sum::<f64>() / records.len() as f64
    }
}

/// Time- and wall-averaged friction factor by both routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrictionFactor {
    /// Signed average of `(1/Re) x . (n . grad u)`; negative for a flow
    /// driven in `+x` and retarded by the walls.
    pub trace: f64,
    pub tangential: f64,
    /// Largest per-record gap between the two routes.
    pub max_route_gap: f64,
}

impl FrictionFactor {
    pub fn magnitude(&self) -> f64 {
        self.trace.abs()
    }
}

pub fn friction_factor(history: &[DiagnosticsRecord], window: (f64, f64)) -> Result<FrictionFactor> {
    let sel = in_window(history, window)?;
    let gap = sel.iter().fold(0.0f64, |m, r| {
        m.max((r.friction_factor_integrand - r.friction_factor_tangential).abs())
    });
    Ok(FrictionFactor {
        trace: time_average(&sel, |r| r.friction_factor_integrand),
        tangential: time_average(&sel, |r| r.friction_factor_tangential),
        max_route_gap: gap,
    })
}

pub fn dissipation_average(history: &[DiagnosticsRecord], window: (f64, f64)) -> Result<f64> {
    let sel = in_window(history, window)?;
    Ok(time_average(&sel, |r| r.dissipation_rate))
}

/// `|u - u_ref|_L2` at matched sample times and its supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerErrorSeries {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub sup: f64,
}

/// Compares velocity snapshots with a reference sequence sampled at the same
/// times. A reference on a different resolution is mapped spectrally onto the
/// grid of `ns_history`.
pub fn euler_error(ns_history: &[FlowState], reference: &[FlowState]) -> Result<EulerErrorSeries> {
    if ns_history.len() != reference.len() {
        return Err(Error::Input(format!(
            "history lengths differ: {} vs {}",
            ns_history.len(),
            reference.len()
        )));
    }
    let mut times = Vec::with_capacity(ns_history.len());
    let mut errors = Vec::with_capacity(ns_history.len());
    for (a, b) in ns_history.iter().zip(reference) {
        let tol = 1e-9 * a.t.abs().max(1.0);
        if (a.t - b.t).abs() > tol {
            return Err(Error::Input(format!("sample times differ: {} vs {}", a.t, b.t)));
        }
        let grid = a.grid();
        let (ua, va) = a.velocity()?;
        let (ub, vb) = b.velocity()?;
        let ub = resample(ub.spectral()?, b.grid(), grid)?;
        let vb = resample(vb.spectral()?, b.grid(), grid)?;
        let du = grid.inverse(&(ua.spectral()? - &ub));
        let dv = grid.inverse(&(va.spectral()? - &vb));
        times.push(a.t);
        errors.push(grid.integrate(&(&du * &du + &dv * &dv)).max(0.0).sqrt());
    }
    let sup = errors.iter().fold(0.0f64, |m, &e| m.max(e));
    Ok(EulerErrorSeries { times, errors, sup })
}

/// Maps spectral coefficients between grids of equal period by truncation or
/// zero padding in both directions.
pub fn resample(spec: &Array2<Complex64>, from: &ChannelGrid, to: &ChannelGrid) -> Result<Array2<Complex64>> {
    if (from.lx() - to.lx()).abs() > 1e-12 * from.lx() {
        return Err(Error::Input("grids have different periods".into()));
    }
    let mut out = Array2::<Complex64>::zeros((to.nkx(), to.ny()));
    let ny = from.ny().min(to.ny());
    let (from_nyq, to_nyq) = (from.nx() / 2, to.nx() / 2);
    for k in 0..=from_nyq.min(to_nyq) {
        let scale = if k == from_nyq && from_nyq < to_nyq {
            // a source Nyquist row holds both signs of the wavenumber at once
            Complex64::new(0.5, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for n in 0..ny {
            let mut c = spec[[k, n]] * scale;
            if k == to_nyq && to_nyq < from_nyq {
                c = Complex64::new(2.0 * c.re, 0.0);
            }
            out[[k, n]] = c;
        }
    }
    Ok(out)
}

/// Streamwise momentum balance `d/dt int u = int f_x + wall traction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumReport {
    /// Largest `|dM/dt - trapezoid(rhs)|` over consecutive records.
    pub max_step_residual: f64,
    pub cumulative_change: f64,
    pub integrated_rhs: f64,
    pub cumulative_residual: f64,
}

pub fn momentum_audit(history: &[DiagnosticsRecord]) -> MomentumReport {
    let mut max_step = 0.0f64;
    let mut integrated = 0.0;
    for w in history.windows(2) {
        let dt = w[1].t - w[0].t;
        let avg = 0.5 * (w[0].momentum_rhs() + w[1].momentum_rhs());
        integrated += dt * avg;
        if dt > 0.0 {
            max_step = max_step.max(((w[1].momentum_x - w[0].momentum_x) / dt - avg).abs());
        }
    }
    if history.len() == 1 {
        max_step = history[0].momentum_rhs().abs();
    }
    let change = match (history.first(), history.last()) {
        (Some(a), Some(b)) => b.momentum_x - a.momentum_x,
        _ => 0.0,
    };
    MomentumReport {
        max_step_residual: max_step,
        cumulative_change: change,
        integrated_rhs: integrated,
        cumulative_residual: (change - integrated).abs(),
    }
}

/// Least-squares power-law fit in log-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub re_values: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn fit_scaling(re_values: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if re_values.len() != values.len() {
        return Err(Error::Input("re_values and values differ in length".into()));
    }
    if re_values.len() < 3 {
        return Err(Error::Input(format!("need at least 3 points, got {}", re_values.len())));
    }
    if let Some(bad) = re_values.iter().chain(values).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::ParameterDomain(format!("scaling fit needs positive values, got {bad}")));
    }
    let lx: Vec<f64> = re_values.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Input("re_values must not all be equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        slope,
        r_squared,
        n_points: re_values.len(),
        re_values: re_values.to_vec(),
        values: values.to_vec(),
    })
}

/// Writes records as CSV preceded by a `# polywall-records v<N>` comment line.
pub fn write_records_csv(out: impl Write, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# polywall-records v{RECORDS_CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    if records.is_empty() {
        w.write_record(RECORD_COLUMNS).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Column order of the records CSV.
pub const RECORD_COLUMNS: [&str; 19] = [
    "step",
    "t",
    "kinetic_energy",
    "boundary_stress_energy",
    "dissipation_rate",
    "wall_slip_dissipation",
    "boundary_relaxation_dissipation",
    "forcing_power",
    "curvature_term",
    "budget_residual",
    "omega_inf_norm",
    "wall_omega_inf_norm",
    "forcing_curl_inf_norm",
    "friction_factor_integrand",
    "friction_factor_tangential",
    "wall_traction",
    "momentum_x",
    "forcing_momentum",
    "wall_slip_max",
];

/// Reads records written by [`write_records_csv`].
pub fn read_records_csv(input: impl std::io::Read) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests;
