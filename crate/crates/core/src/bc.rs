//! Dynamic polymer wall law.
//!
//! The evolved unknown at each wall node is
//! `g = 2 (D(u) n) . t + (alpha/2) u . t`, which obeys
//! `(d/dt + 1/Wi) g = -(alpha Re / tau) u . t`.
//! Wall vorticity is derived from it as `omega = g + beta u . t`.

use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::spectral::WallTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Top,
    Bottom,
}

/// Unit normal and tangent of a channel wall as signs on `y` and `x`.
///
/// The outward normal is `+y` at the top wall and `-y` at the bottom. The
/// tangent is the normal rotated a quarter turn counter-clockwise, which is
/// the orientation under which `omega = 2 (D(u) n) . t` holds on a flat wall
/// with `omega = dv/dx - du/dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallOrientation {
    pub wall: Wall,
    /// `t = tangent_sign * x_hat`.
    pub tangent_sign: f64,
    /// `n = normal_sign * y_hat`.
    pub normal_sign: f64,
}

impl WallOrientation {
    pub const TOP: WallOrientation = WallOrientation {
        wall: Wall::Top,
        tangent_sign: -1.0,
        normal_sign: 1.0,
    };
    pub const BOTTOM: WallOrientation = WallOrientation {
        wall: Wall::Bottom,
        tangent_sign: 1.0,
        normal_sign: -1.0,
    };

    pub fn of(wall: Wall) -> Self {
        match wall {
            Wall::Top => Self::TOP,
            Wall::Bottom => Self::BOTTOM,
        }
    }

    /// `u . t` for streamwise velocity `u` (the normal velocity vanishes).
    pub fn tangential(&self, u: f64) -> f64 {
        self.tangent_sign * u
    }

    /// `2 (D(u) n) . t` from the shear-rate component `du/dy + dv/dx`.
    pub fn strain_traction(&self, shear_rate: f64) -> f64 {
        self.tangent_sign * self.normal_sign * shear_rate
    }
}

/// Per-wall boundary stress state.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStressState {
    pub g: WallTrace,
    pub g0: WallTrace,
    /// Running `int_0^t exp(-(t-s)/Wi) u.t(s) ds` at each node.
    pub accum: WallTrace,
    pub t: f64,
}

impl BoundaryStressState {
    pub fn new(g0: WallTrace) -> Self {
        let n = g0.len();
        Self {
            g: g0.clone(),
            g0,
            accum: WallTrace::zeros(n),
            t: 0.0,
        }
    }

    /// `g` rebuilt from `g0` and the accumulator, the Duhamel form of the state.
    pub fn duhamel_g(&self, params: &SimParams) -> WallTrace {
        let decay = (-self.t / params.wi).exp();
        let gain = params.boundary_gain();
        self.g0.zip_with(&self.accum, |g0, a| decay * g0 - gain * a)
    }
}

/// Exact weights `(w0, w1)` of
/// `int_0^dt exp(-(dt-s)/wi) [(1 - s/dt) u0 + (s/dt) u1] ds = w0 u0 + w1 u1`.
pub fn exponential_weights(dt: f64, wi: f64) -> (f64, f64) {
    let z = dt / wi;
    let total = -wi * (-z).exp_m1();
    // w0 = wi * (1 - e^{-z}(1 + z)) / z, evaluated by series when z is small
    let w0 = if z < 0.1 {
        let mut sum = 0.0;
        let mut zpow = z; // z^(n-1)
        let mut fact = 2.0; // n!
        for n in 2..40 {
            let term = (n as f64 - 1.0) * zpow / fact;
            sum += if n % 2 == 0 { term } else { -term };
            if term < 1e-18 * sum.abs() {
                break;
            }
            zpow *= z;
            fact *= (n + 1) as f64;
        }
        wi * sum
    } else {
        wi * (1.0 - (-z).exp() * (1.0 + z)) / z
    };
    (w0, total - w0)
}

/// Advances `g` over `[t, t + dt]` with the integrating factor, treating
/// `u.t` as linear between `u_start` and `u_end`. Passing the same trace
/// twice holds `u.t` constant over the step.
pub fn step_boundary_ode(
    state: &BoundaryStressState,
    u_start: &WallTrace,
    u_end: &WallTrace,
    params: &SimParams,
    dt: f64,
) -> Result<BoundaryStressState> {
    if !(dt > 0.0) {
        return Err(Error::ParameterDomain(format!("dt must be positive, got {dt}")));
    }
    let n = state.g.len();
    u_start.check_len(n)?;
    u_end.check_len(n)?;
    let decay = (-dt / params.wi).exp();
    let (w0, w1) = exponential_weights(dt, params.wi);
    let gain = params.boundary_gain();
    let forcing = u_start.zip_with(u_end, |a, b| w0 * a + w1 * b);
    Ok(BoundaryStressState {
        g: state.g.zip_with(&forcing, |g, f| decay * g - gain * f),
        g0: state.g0.clone(),
        accum: state.accum.zip_with(&forcing, |a, f| decay * a + f),
        t: state.t + dt,
    })
}

/// Reconstructs `g(t)` from a uniformly sampled `u.t` history starting at 0,
/// using the trapezoid rule with exact exponential weights at the samples.
pub fn duhamel_boundary(
    g0: &WallTrace,
    u_tau_series: &[(f64, WallTrace)],
    params: &SimParams,
    t: f64,
) -> Result<WallTrace> {
    if t == 0.0 {
        return Ok(g0.clone());
    }
    let (first, rest) = u_tau_series
        .split_first()
        .ok_or_else(|| Error::Input("empty u.t series".into()))?;
    if first.0 != 0.0 {
        return Err(Error::Input(format!("series starts at {} instead of 0", first.0)));
    }
    let h = rest
        .first()
        .map(|s| s.0 - first.0)
        .ok_or_else(|| Error::Input("series has a single sample".into()))?;
    if !(h > 0.0) {
        return Err(Error::Input("series times must increase".into()));
    }
    for (i, w) in u_tau_series.windows(2).enumerate() {
        let step = w[1].0 - w[0].0;
        if (step - h).abs() > 1e-9 * h {
            return Err(Error::Input(format!(
                "gap in series after sample {i}: spacing {step} differs from {h}"
            )));
        }
    }
    let n_steps = (t / h).round() as usize;
    if (n_steps as f64 * h - t).abs() > 1e-9 * h.max(t) || n_steps >= u_tau_series.len() {
        return Err(Error::Input(format!("series does not cover t = {t} on its sample grid")));
    }
    let n = g0.len();
    let mut integral = WallTrace::zeros(n);
    for (i, (s, trace)) in u_tau_series.iter().take(n_steps + 1).enumerate() {
        trace.check_len(n)?;
        let end = if i == 0 || i == n_steps { 0.5 } else { 1.0 };
        let w = h * end * (-(t - s) / params.wi).exp();
        integral = integral.zip_with(trace, |acc, u| acc + w * u);
    }
    let decay = (-t / params.wi).exp();
    let gain = params.boundary_gain();
    Ok(g0.zip_with(&integral, |g, i| decay * g - gain * i))
}

/// `omega|wall = g + beta u.t`.
pub fn wall_vorticity(g: &WallTrace, u_tau: &WallTrace, params: &SimParams) -> WallTrace {
    let beta = params.beta();
    g.zip_with(u_tau, |g, u| g + beta * u)
}

/// Right-hand side of the wall-vorticity evolution law
/// `d omega/dt = -omega/Wi + beta d(u.t)/dt - (alpha Re/tau - beta/Wi) u.t`.
pub fn wall_vorticity_rate(omega: f64, u_tau: f64, du_tau_dt: f64, params: &SimParams) -> f64 {
    let beta = params.beta();
    -omega / params.wi + beta * du_tau_dt - (params.boundary_gain() - beta / params.wi) * u_tau
}

/// Effective Navier-friction coefficient of the steady law: `alpha/2 + alpha Re Wi / tau`.
pub fn steady_friction_coefficient(params: &SimParams) -> f64 {
    0.5 * params.alpha + params.friction_ratio()
}

/// Steady wall slip `wall_shear / (alpha/2 + alpha Re Wi / tau)`.
pub fn steady_slip_velocity(params: &SimParams, wall_shear: f64) -> Result<f64> {
    let denom = steady_friction_coefficient(params);
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "steady friction coefficient must be positive, got {denom}"
        )));
    }
    Ok(wall_shear / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(re: f64, wi: f64, tau: f64, alpha: f64, kappa: f64) -> SimParams {
        SimParams::new(re, wi, tau, alpha, kappa).unwrap()
    }

    #[test]
    fn orientation_matches_vorticity_identity() {
        // u = y^2 (so du/dy = 2y, v = 0, omega = -2y): at the top wall
        // omega = -2 and 2 (D(u) n).t must equal it.
        let top = WallOrientation::TOP;
        assert_eq!(top.strain_traction(2.0), -2.0);
        let bottom = WallOrientation::BOTTOM;
        assert_eq!(bottom.strain_traction(-2.0), 2.0);
        // the rotated-normal rule t = (-n_y, n_x)
        for o in [top, bottom] {
            assert_eq!(o.tangent_sign, -o.normal_sign);
        }
    }

    #[test]
    fn weights_integrate_linear_data_exactly() {
        for &(dt, wi) in &[(1e-3, 1.0), (0.05, 0.7), (0.5, 1.0), (3.0, 0.2)] {
            let (w0, w1) = exponential_weights(dt, wi);
            // brute-force Simpson oracle
            let n = 20000;
            let h = dt / n as f64;
            let (mut i0, mut i1) = (0.0, 0.0);
            for k in 0..=n {
                let s = k as f64 * h;
                let c = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                let e = (-(dt - s) / wi).exp();
                i0 += c * e * (1.0 - s / dt);
                i1 += c * e * s / dt;
            }
            i0 *= h / 3.0;
            i1 *= h / 3.0;
            assert!((w0 - i0).abs() < 1e-12 * dt, "{dt} {wi}: {w0} vs {i0}");
            assert!((w1 - i1).abs() < 1e-12 * dt, "{dt} {wi}: {w1} vs {i1}");
        }
    }

    #[test]
    fn free_decay_step() {
        let p = params(1.0, 1.0, 1.0, 10.0, 0.0);
        let s = BoundaryStressState::new(WallTrace::constant(4, 1.0));
        let zero = WallTrace::zeros(4);
        let s = step_boundary_ode(&s, &zero, &zero, &p, 0.5).unwrap();
        assert!((s.g.top[0] - 0.606530659).abs() < 1e-9);
        assert!((s.g.top[0] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exponential_stability_is_exact() {
        let p = params(100.0, 0.8, 2.0, 10.0, 0.0);
        let mut s = BoundaryStressState::new(WallTrace::constant(3, 2.5));
        let zero = WallTrace::zeros(3);
        for _ in 0..1000 {
            s = step_boundary_ode(&s, &zero, &zero, &p, 0.01).unwrap();
        }
        let exact = 2.5 * (-s.t / 0.8).exp();
        assert!((s.g.bottom[1] - exact).abs() < 1e-12);
    }

    #[test]
    fn steady_state_under_constant_slip() {
        let p = params(20.0, 1.0, 4.0, 10.0, 0.0);
        let c = 0.3;
        let mut s = BoundaryStressState::new(WallTrace::zeros(2));
        let u = WallTrace::constant(2, c);
        for _ in 0..400 {
            s = step_boundary_ode(&s, &u, &u, &p, 0.1).unwrap();
        }
        let target = -p.friction_ratio() * c;
        assert!(((s.g.top[0] - target) / target).abs() < 1e-12);
    }

    fn sin_series(dt: f64, t_end: f64) -> Vec<(f64, WallTrace)> {
        let n = (t_end / dt).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                (t, WallTrace { top: vec![t.sin()], bottom: vec![-t.sin()] })
            })
            .collect()
    }

    fn ode_vs_duhamel(dt: f64) -> f64 {
        let p = params(5.0, 0.5, 10.0, 10.0, 0.0);
        let t_end = 2.0;
        let series = sin_series(dt, t_end);
        let g0 = WallTrace { top: vec![0.4], bottom: vec![-0.1] };
        let mut s = BoundaryStressState::new(g0.clone());
        for w in series.windows(2) {
            s = step_boundary_ode(&s, &w[0].1, &w[1].1, &p, dt).unwrap();
        }
        let d = duhamel_boundary(&g0, &series, &p, t_end).unwrap();
        s.g.zip_with(&d, |a, b| a - b).inf_norm()
    }

    #[test]
    fn ode_and_duhamel_agree_at_second_order() {
        let e1 = ode_vs_duhamel(0.02);
        let e2 = ode_vs_duhamel(0.01);
        let e3 = ode_vs_duhamel(0.005);
        assert!(e1 / e2 >= 3.5 && e2 / e3 >= 3.5, "{e1} {e2} {e3}");
    }

    #[test]
    fn state_duhamel_form_matches_stepping() {
        let p = params(5.0, 0.5, 10.0, 10.0, 0.0);
        let series = sin_series(0.01, 1.0);
        let mut s = BoundaryStressState::new(WallTrace { top: vec![0.4], bottom: vec![-0.1] });
        for w in series.windows(2) {
            s = step_boundary_ode(&s, &w[0].1, &w[1].1, &p, 0.01).unwrap();
        }
        let d = s.duhamel_g(&p);
        assert!(s.g.zip_with(&d, |a, b| a - b).inf_norm() < 1e-12);
    }

    #[test]
    fn duhamel_edge_cases() {
        let p = params(5.0, 0.5, 10.0, 10.0, 0.0);
        let g0 = WallTrace { top: vec![0.4], bottom: vec![-0.1] };
        assert_eq!(duhamel_boundary(&g0, &[], &p, 0.0).unwrap(), g0);
        let zero: Vec<(f64, WallTrace)> = (0..=10).map(|k| (0.1 * k as f64, WallTrace::zeros(1))).collect();
        let d = duhamel_boundary(&g0, &zero, &p, 1.0).unwrap();
        assert!((d.top[0] - 0.4 * (-2.0f64).exp()).abs() < 1e-15);
        let mut gappy = zero.clone();
        gappy.remove(4);
        assert!(duhamel_boundary(&g0, &gappy, &p, 1.0).is_err());
        assert!(duhamel_boundary(&g0, &zero[..5], &p, 1.0).is_err());
    }

    #[test]
    fn wall_vorticity_examples() {
        let p = params(1.0, 1.0, 1.0, 10.0, 0.0);
        let w = wall_vorticity(&WallTrace::zeros(1), &WallTrace::constant(1, 1.0), &p);
        assert_eq!(w.top[0], -5.0);
        let g = WallTrace::constant(1, 0.7);
        assert_eq!(wall_vorticity(&g, &WallTrace::zeros(1), &p), g);
        let p1 = params(1.0, 1.0, 1.0, 10.0, 1.0);
        assert_eq!(p1.beta(), -3.0);
        let w = wall_vorticity(&g, &WallTrace::constant(1, 2.0), &p1);
        assert!((w.top[0] - (0.7 - 6.0)).abs() < 1e-15);
    }

    #[test]
    fn vorticity_rate_law_with_curvature() {
        // Along an exact g trajectory driven by u.t = sin t, omega = g + beta u.t
        // must satisfy the wall-vorticity law (checked by central differences).
        let p = params(3.0, 0.6, 2.0, 10.0, 1.0);
        let gain = p.boundary_gain();
        let wi = p.wi;
        // closed form for g' = -g/wi - gain sin t, g(0) = g0
        let g0 = 0.3;
        let g = |t: f64| {
            let a = 1.0 / wi;
            let part = -gain * (a * t.sin() - t.cos()) / (a * a + 1.0);
            let c = g0 + gain * (-1.0) / (a * a + 1.0);
            c * (-a * t).exp() + part
        };
        let om = |t: f64| g(t) + p.beta() * t.sin();
        for &t in &[0.2, 1.0, 2.5] {
            let h = 1e-5;
            let lhs = (om(t + h) - om(t - h)) / (2.0 * h);
            let rhs = wall_vorticity_rate(om(t), t.sin(), t.cos(), &p);
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn steady_slip_examples() {
        let p = params(1.0, 1.0, 1.0, 10.0, 0.0);
        assert_eq!(p.friction_ratio(), 10.0);
        assert!((steady_slip_velocity(&p, 15.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(steady_slip_velocity(&p, 0.0).unwrap(), 0.0);
        let big = params(1.0, 1.0, 1.0, 1e8, 0.0);
        assert!(steady_slip_velocity(&big, 15.0).unwrap() < 1e-6);
    }

    proptest! {
        #[test]
        fn slip_decreases_in_alpha(a in 0.1f64..1e3, da in 1e-3f64..1e3, re in 1.0f64..1e4,
                                   wi in 0.1f64..10.0, tau in 0.1f64..10.0, shear in 0.01f64..100.0) {
            let p1 = params(re, wi, tau, a, 0.0);
            let p2 = params(re, wi, tau, a + da, 0.0);
            prop_assert!(steady_slip_velocity(&p2, shear).unwrap() < steady_slip_velocity(&p1, shear).unwrap());
        }

        #[test]
        fn orientation_flip_is_odd(g in -5.0f64..5.0, u in -5.0f64..5.0, kappa in -1.0f64..2.0) {
            let p = params(10.0, 1.0, 1.0, 10.0, kappa);
            let gt = WallTrace::constant(1, g);
            let ut = WallTrace::constant(1, u);
            let w = wall_vorticity(&gt, &ut, &p);
            let wf = wall_vorticity(&gt.map(|v| -v), &ut.map(|v| -v), &p);
            prop_assert_eq!(wf.top[0], -w.top[0]);
        }

        #[test]
        fn ode_duhamel_equivalence(amp in -2.0f64..2.0, freq in 0.1f64..3.0, g0 in -1.0f64..1.0) {
            let p = params(4.0, 0.5, 8.0, 10.0, 0.0);
            let err = |dt: f64| {
                let n = (1.0 / dt).round() as usize;
                let series: Vec<(f64, WallTrace)> = (0..=n)
                    .map(|k| { let t = k as f64 * dt; (t, WallTrace::constant(1, amp * (freq * t).sin())) })
                    .collect();
                let g0t = WallTrace::constant(1, g0);
                let mut s = BoundaryStressState::new(g0t.clone());
                for w in series.windows(2) {
                    s = step_boundary_ode(&s, &w[0].1, &w[1].1, &p, dt).unwrap();
                }
                let d = duhamel_boundary(&g0t, &series, &p, 1.0).unwrap();
                (s.g.top[0] - d.top[0]).abs()
            };
            let (e1, e2) = (err(0.02), err(0.01));
            prop_assert!(e2 <= e1 / 3.5 || e1 < 1e-13);
        }
    }
}
