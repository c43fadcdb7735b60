use super::*;
use crate::solver::{MemorySink, NsSolver, SolverConfig};
use crate::spectral::ChannelGrid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::sync::Arc;

fn params(re: f64) -> SimParams {
    SimParams::new(re, 1.0, re, 10.0, 0.0).unwrap()
}

fn perturbed(grid: &Arc<ChannelGrid>, p: &SimParams, eps: f64) -> FlowState {
    let lx = grid.lx();
    FlowState::from_fields(
        grid,
        |y| (0.5 * PI * y).sin(),
        move |x, y| eps * (2.0 * PI * x / lx).sin() * (1.0 - y * y).powi(2),
        p,
    )
    .unwrap()
}

fn run(grid: &Arc<ChannelGrid>, p: SimParams, cfg: SolverConfig, s0: FlowState) -> (FlowState, Vec<DiagnosticsRecord>) {
    let solver = NsSolver::new(grid, cfg, p).unwrap();
    let mut sink = MemorySink::default();
    let end = solver.run(s0, &mut sink).unwrap();
    (end, sink.records)
}

fn cfg(dt: f64, t_end: f64) -> SolverConfig {
    SolverConfig {
        dt,
        t_end,
        checkpoint_every: 0,
        ..SolverConfig::default()
    }
}

#[test]
fn zero_state_has_zero_terms() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s = FlowState::zero(&grid, &p).unwrap();
    let r = energy_audit(&s, &s, &p, &Forcing::Zero, 0.01).unwrap();
    for v in [
        r.kinetic_energy,
        r.boundary_stress_energy,
        r.dissipation_rate,
        r.wall_slip_dissipation,
        r.boundary_relaxation_dissipation,
        r.forcing_power,
        r.curvature_term,
        r.budget_residual,
        r.omega_inf_norm,
        r.friction_factor_integrand,
        r.momentum_x,
    ] {
        assert_eq!(v, 0.0);
    }
}

#[test]
fn dissipation_matches_hand_quadrature() {
    // U = y^2 and psi = eps sin(k x) (1 - y^2)^2, whose gradient integrals
    // reduce to polynomial integrals done by hand.
    let lx = 2.0 * PI;
    let grid = ChannelGrid::new(16, 25, lx).unwrap();
    let p = params(7.0);
    let eps = 0.3;
    let s = FlowState::from_fields(&grid, |y| y * y, |x, y| eps * x.sin() * (1.0 - y * y).powi(2), &p).unwrap();
    let r = snapshot(&s, &p, &Forcing::Zero).unwrap();
    let k = 1.0f64;
    let (phi2, dphi2, ddphi2) = (256.0 / 315.0, 256.0 / 105.0, 128.0 / 5.0);
    let mean = lx * 8.0 / 3.0;
    let fluct = eps * eps * lx / 2.0 * (2.0 * k * k * dphi2 + ddphi2 + k.powi(4) * phi2);
    let expected = (mean + fluct) / 7.0;
    assert!((r.dissipation_rate - expected).abs() < 1e-10, "{} vs {expected}", r.dissipation_rate);
    // kinetic energy: U^2 mean part plus eps^2 lx/4 (int phi'^2 + k^2 phi^2)
    let ke = 0.5 * lx * 0.4 + eps * eps * lx / 4.0 * (dphi2 + k * k * phi2);
    assert!((r.kinetic_energy - ke).abs() < 1e-10);
}

#[test]
fn energy_is_non_increasing_without_forcing() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(200.0);
    let s0 = perturbed(&grid, &p, 0.1);
    let (_, recs) = run(&grid, p, cfg(0.005, 1.0), s0);
    let e0 = recs[0].total_energy();
    for w in recs.windows(2) {
        let rise = w[1].total_energy() - w[0].total_energy();
        assert!(rise <= 0.005f64.powi(3) * e0, "energy rose by {rise} at t = {}", w[1].t);
    }
}

#[test]
fn budget_residual_is_second_order() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(100.0);
    let at = |dt: f64| {
        let (_, recs) = run(&grid, p, cfg(dt, 0.5), perturbed(&grid, &p, 0.1));
        recs.last().unwrap().budget_residual
    };
    let (r1, r2) = (at(0.01), at(0.005));
    assert!(r1 / r2 >= 3.5, "{r1} {r2}");
}

#[test]
fn steady_poiseuille_friction_and_momentum() {
    let grid = ChannelGrid::new(8, 17, 2.0).unwrap();
    let p = SimParams::new(10.0, 1.0, 5.0, 10.0, 0.0).unwrap();
    let f = 0.1;
    let c = SolverConfig {
        forcing: Forcing::PressureGradient(f),
        sample_every: 100,
        ..cfg(0.05, 300.0)
    };
    let (_, recs) = run(&grid, p, c, FlowState::zero(&grid, &p).unwrap());
    let ff = friction_factor(&recs, (290.0, 300.0)).unwrap();
    assert!(((ff.trace + f) / f).abs() < 1e-6, "{ff:?}");
    assert!((ff.magnitude() - f).abs() < 1e-6 * f);
    assert!(ff.max_route_gap <= 1e-8);
    let tail: Vec<_> = recs.iter().filter(|r| r.t >= 290.0).copied().collect();
    assert!(momentum_audit(&tail).max_step_residual <= 1e-8);
    let d = dissipation_average(&tail, (290.0, 300.0)).unwrap();
    assert!((d - tail.last().unwrap().dissipation_rate).abs() < 1e-10);
}

#[test]
fn routes_agree_on_unsteady_flow() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(300.0);
    let c = SolverConfig {
        forcing: Forcing::PressureGradient(0.01),
        ..cfg(0.01, 0.5)
    };
    let (_, recs) = run(&grid, p, c, perturbed(&grid, &p, 0.2));
    for r in &recs {
        assert!((r.friction_factor_integrand - r.friction_factor_tangential).abs() <= 1e-8);
    }
}

#[test]
fn zero_flow_averages() {
    let grid = ChannelGrid::new(8, 17, 2.0).unwrap();
    let p = params(10.0);
    let (_, recs) = run(&grid, p, cfg(0.1, 1.0), FlowState::zero(&grid, &p).unwrap());
    assert_eq!(friction_factor(&recs, (0.0, 1.0)).unwrap().trace, 0.0);
    assert_eq!(dissipation_average(&recs, (0.0, 1.0)).unwrap(), 0.0);
    let m = momentum_audit(&recs);
    assert_eq!(m.cumulative_residual, 0.0);
    assert!(matches!(friction_factor(&recs, (5.0, 6.0)), Err(Error::EmptyWindow)));
    assert!(matches!(dissipation_average(&[], (0.0, 1.0)), Err(Error::EmptyWindow)));
}

#[test]
fn momentum_balance_converges_at_second_order() {
    let grid = ChannelGrid::new(8, 25, 2.0).unwrap();
    let p = params(20.0);
    let c = |dt: f64| SolverConfig {
        forcing: Forcing::PressureGradient(0.2),
        ..cfg(dt, 1.0)
    };
    let residual = |dt: f64| {
        let (_, recs) = run(&grid, p, c(dt), FlowState::zero(&grid, &p).unwrap());
        momentum_audit(&recs).cumulative_residual
    };
    let (a, b) = (residual(0.02), residual(0.01));
    assert!(a / b >= 3.5, "{a} {b}");
}

#[test]
fn euler_error_of_identical_histories_is_zero() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s = perturbed(&grid, &p, 0.1);
    let e = euler_error(&[s.clone(), s.clone()], &[s.clone(), s]).unwrap();
    assert_eq!(e.sup, 0.0);
    assert_eq!(e.errors, vec![0.0, 0.0]);
}

#[test]
fn euler_error_interpolates_finer_reference() {
    let coarse = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let fine = ChannelGrid::new(32, 33, 2.0 * PI).unwrap();
    let p = params(100.0);
    let a = perturbed(&coarse, &p, 0.1);
    let b = perturbed(&fine, &p, 0.1);
    let e = euler_error(&[a.clone()], &[b]).unwrap();
    assert!(e.sup < 1e-12, "{}", e.sup);
    let mut late = a.clone();
    late.t = 1.0;
    assert!(euler_error(&[a], &[late]).is_err());
}

#[test]
fn resample_handles_nyquist_rows() {
    let small = ChannelGrid::new(8, 9, 2.0 * PI).unwrap();
    let big = ChannelGrid::new(16, 9, 2.0 * PI).unwrap();
    // cos(4x) is the Nyquist mode of the small grid
    let f = |x: f64, y: f64| (4.0 * x).cos() * (1.0 + y) + (x).sin();
    let s = small.forward(&Array2::from_shape_fn((8, 9), |(i, j)| f(small.x_nodes()[i], small.y_nodes()[j])));
    let up = big.inverse(&resample(&s, &small, &big).unwrap());
    for i in 0..16 {
        for j in 0..9 {
            let exact = f(big.x_nodes()[i], big.y_nodes()[j]);
            assert!((up[[i, j]] - exact).abs() < 1e-12);
        }
    }
    let b = big.forward(&Array2::from_shape_fn((16, 9), |(i, j)| f(big.x_nodes()[i], big.y_nodes()[j])));
    let down = small.inverse(&resample(&b, &big, &small).unwrap());
    for i in 0..8 {
        for j in 0..9 {
            let exact = f(small.x_nodes()[i], small.y_nodes()[j]);
            assert!((down[[i, j]] - exact).abs() < 1e-12);
        }
    }
}

#[test]
fn scaling_fit_examples() {
    let re = [250.0, 500.0, 1000.0, 2000.0, 4000.0];
    let inv: Vec<f64> = re.iter().map(|r| 3.0 / r).collect();
    let fit = fit_scaling(&re, &inv).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    let half: Vec<f64> = re.iter().map(|r| 0.2 * r.powf(-0.5)).collect();
    assert!((fit_scaling(&re, &half).unwrap().slope + 0.5).abs() < 1e-12);
    assert!(fit_scaling(&re[..2], &inv[..2]).is_err());
    assert!(fit_scaling(&re, &[1.0, 2.0, 0.0, 1.0, 1.0]).is_err());
    let json = serde_json::to_value(&fit).unwrap();
    for key in ["slope", "r_squared", "n_points", "re_values", "values"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn noisy_power_law_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::<f64>::new(0.0, 0.1).unwrap();
    let re = [250.0, 500.0, 1000.0, 2000.0, 4000.0];
    let mut within = 0;
    for _ in 0..200 {
        let truth = -rng.random_range(0.3..1.2);
        let vals: Vec<f64> = re.iter().map(|r: &f64| r.powf(truth) * noise.sample(&mut rng).exp()).collect();
        if (fit_scaling(&re, &vals).unwrap().slope - truth).abs() <= 0.15 {
            within += 1;
        }
    }
    assert!(within >= 198, "{within}");
}

#[test]
fn records_csv_round_trip() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(100.0);
    let (_, recs) = run(&grid, p, cfg(0.01, 0.05), perturbed(&grid, &p, 0.1));
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# polywall-records v1");
    assert_eq!(lines.next().unwrap(), RECORD_COLUMNS.join(","));
    let back = read_records_csv(&buf[..]).unwrap();
    assert_eq!(back, recs);
}

proptest! {
    #[test]
    fn fit_recovers_exact_exponents(slope in -2.0f64..2.0, c in 0.01f64..100.0, n in 3usize..8) {
        let re: Vec<f64> = (0..n).map(|i| 100.0 * 1.7f64.powi(i as i32)).collect();
        let vals: Vec<f64> = re.iter().map(|r| c * r.powf(slope)).collect();
        let fit = fit_scaling(&re, &vals).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.r_squared > 1.0 - 1e-10);
    }
}
