use super::*;
use crate::bc::steady_slip_velocity;
use std::f64::consts::PI;

fn params(re: f64) -> SimParams {
    SimParams::new(re, 1.0, re, 10.0, 0.0).unwrap()
}

fn cfg(dt: f64, t_end: f64) -> SolverConfig {
    SolverConfig {
        dt,
        t_end,
        checkpoint_every: 0,
        ..SolverConfig::default()
    }
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

fn omega_diff(a: &FlowState, b: &FlowState) -> f64 {
    let (x, y) = (a.omega.values().unwrap(), b.omega.values().unwrap());
    x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

#[test]
fn zero_state_is_a_fixed_point() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(100.0);
    let solver = NsSolver::new(&grid, cfg(0.01, 0.2), p).unwrap();
    let mut sink = MemorySink::default();
    let end = solver.run(FlowState::zero(&grid, &p).unwrap(), &mut sink).unwrap();
    assert_eq!(end.omega.inf_norm(), 0.0);
    assert!(end.mean_u.iter().all(|&v| v == 0.0));
    assert_eq!(end.bc.g.inf_norm(), 0.0);
    assert_eq!(end.step_index, 20);
}

#[test]
fn t_end_zero_returns_initial() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s0 = perturbed(&grid, &p, 0.01);
    let solver = NsSolver::new(&grid, cfg(0.01, 0.0), p).unwrap();
    let mut sink = MemorySink::default();
    let end = solver.run(s0.clone(), &mut sink).unwrap();
    assert_eq!(omega_diff(&end, &s0), 0.0);
    assert_eq!(end.step_index, 0);
    assert!(sink.records.is_empty());
}

#[test]
fn initial_boundary_state_is_consistent() {
    let grid = ChannelGrid::new(16, 25, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s = perturbed(&grid, &p, 0.05);
    let u_tau = s.wall_tangential_velocity().unwrap();
    let omega_wall = crate::bc::wall_vorticity(&s.bc.g, &u_tau, &p);
    let gap = omega_wall.zip_with(&s.omega.wall_trace(), |a, b| a - b).inf_norm();
    assert!(gap < 1e-12, "{gap}");
    // mean profile sin(pi y / 2): u.t = -1 at the top, -1 at the bottom
    assert!((u_tau.top[0] + 1.0).abs() < 1e-12 && (u_tau.bottom[0] + 1.0).abs() < 1e-12);
}

#[test]
fn velocity_is_impermeable_and_solenoidal() {
    let grid = ChannelGrid::new(16, 25, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s = perturbed(&grid, &p, 0.1);
    let solver = NsSolver::new(&grid, cfg(0.01, 0.1), p).unwrap();
    let end = solver.run(s, &mut MemorySink::default()).unwrap();
    let (u, v) = end.velocity().unwrap();
    let vw = Field2D::from_spectral(&grid, v.spectral().unwrap().clone()).unwrap().wall_trace();
    assert!(vw.inf_norm() < 1e-13);
    let div = grid.ddx_spec(u.spectral().unwrap()) + grid.ddy_spec(v.spectral().unwrap());
    let div = grid.inverse(&div);
    assert!(div.iter().fold(0.0f64, |m, d| m.max(d.abs())) < 1e-10);
}

#[test]
fn steady_slip_poiseuille() {
    let grid = ChannelGrid::new(8, 17, 2.0).unwrap();
    let p = SimParams::new(10.0, 1.0, 5.0, 10.0, 0.0).unwrap();
    let f = 0.1;
    let c = SolverConfig {
        forcing: Forcing::PressureGradient(f),
        ..cfg(0.05, 300.0)
    };
    let solver = NsSolver::new(&grid, c, p).unwrap();
    let end = solver.run(FlowState::zero(&grid, &p).unwrap(), &mut MemorySink::default()).unwrap();
    let slip = steady_slip_velocity(&p, p.re * f).unwrap();
    for (&y, &u) in grid.y_nodes().iter().zip(&end.mean_u) {
        let exact = 0.5 * p.re * f * (1.0 - y * y) + slip;
        assert!(((u - exact) / exact).abs() < 1e-6, "y = {y}: {u} vs {exact}");
    }
}

#[test]
fn euler_mode_keeps_parallel_shear_steady() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s0 = FlowState::from_fields(&grid, |y| 0.7 * (PI * y).sin(), |_, _| 0.0, &p).unwrap();
    let c = SolverConfig {
        mode: Mode::Euler,
        ..cfg(1e-3, 1.0)
    };
    let solver = NsSolver::new(&grid, c, p).unwrap();
    let mut s = s0.clone();
    for _ in 0..1000 {
        s = solver.step(&s).unwrap();
        assert!(omega_diff(&s, &s0) <= 1e-8);
    }
}

#[test]
fn euler_mode_conserves_energy() {
    let grid = ChannelGrid::new(16, 25, 2.0 * PI).unwrap();
    let p = params(100.0);
    let s0 = perturbed(&grid, &p, 0.05);
    let c = SolverConfig {
        mode: Mode::Euler,
        sample_every: 100,
        ..cfg(1e-3, 1.0)
    };
    let solver = NsSolver::new(&grid, c, p).unwrap();
    let mut sink = MemorySink::default();
    solver.run(s0, &mut sink).unwrap();
    let e0 = sink.records[0].kinetic_energy;
    let e1 = sink.records.last().unwrap().kinetic_energy;
    assert!(((e1 - e0) / e0).abs() <= 1e-6, "{e0} {e1}");
}

#[test]
fn restart_reproduces_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(200.0);
    let s0 = perturbed(&grid, &p, 0.05);
    let c = SolverConfig {
        checkpoint_every: 25,
        ..cfg(0.01, 0.5)
    };
    let solver = NsSolver::new(&grid, c, p).unwrap();
    let mut sink = DirectorySink::new(dir.path()).unwrap();
    let full = solver.run(s0, &mut sink).unwrap();
    assert_eq!(sink.written.len(), 2);
    let (mid, dt) = read_checkpoint(&sink.written[0]).unwrap();
    assert_eq!(dt, 0.01);
    assert_eq!(mid.step_index, 25);
    let solver2 = NsSolver::new(mid.grid(), c, p).unwrap();
    let resumed = solver2.run(mid, &mut MemorySink::default()).unwrap();
    assert!(omega_diff(&full, &resumed) <= 1e-12);
    assert_eq!(full.t, resumed.t);
    assert_eq!(full.bc, resumed.bc);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(200.0);
    let solver = NsSolver::new(&grid, cfg(0.01, 0.2), p).unwrap();
    let a = solver.run(perturbed(&grid, &p, 0.05), &mut MemorySink::default()).unwrap();
    let b = solver.run(perturbed(&grid, &p, 0.05), &mut MemorySink::default()).unwrap();
    assert_eq!(omega_diff(&a, &b), 0.0);
    assert_eq!(a.mean_u, b.mean_u);
}

#[test]
fn second_order_in_time() {
    let grid = ChannelGrid::new(16, 25, 2.0 * PI).unwrap();
    let p = params(50.0);
    let run = |dt: f64| {
        let solver = NsSolver::new(&grid, cfg(dt, 0.4), p).unwrap();
        solver.run(perturbed(&grid, &p, 0.2), &mut MemorySink::default()).unwrap()
    };
    let reference = run(0.0025);
    let e1 = omega_diff(&run(0.01), &reference);
    let e2 = omega_diff(&run(0.005), &reference);
    assert!(e1 / e2 >= 3.5, "{e1} {e2}");
}

#[test]
fn unforced_run_obeys_maximum_principle() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(200.0);
    let solver = NsSolver::new(&grid, cfg(0.005, 1.0), p).unwrap();
    let mut sink = MemorySink::default();
    solver.run(perturbed(&grid, &p, 0.1), &mut sink).unwrap();
    let report = max_principle_bound(&sink.records);
    assert!(report.satisfied);
    let tight = report.initial_omega.max(report.max_wall_omega);
    assert!(report.max_omega <= tight + 1e-8, "{report:?}");
}

#[test]
fn max_principle_of_nothing() {
    let r = max_principle_bound(&[]);
    assert_eq!(r.bound, 0.0);
    assert!(r.satisfied);
}

#[test]
fn cfl_violation_aborts() {
    let grid = ChannelGrid::new(16, 33, 2.0 * PI).unwrap();
    let p = params(200.0);
    let solver = NsSolver::new(&grid, cfg(0.5, 1.0), p).unwrap();
    let err = solver.step(&perturbed(&grid, &p, 0.1)).unwrap_err();
    assert!(matches!(err, Error::Cfl { step: 0, .. }), "{err}");
}

#[test]
fn rejects_bad_configuration() {
    let grid = ChannelGrid::new(16, 17, 2.0 * PI).unwrap();
    let p = params(200.0);
    assert!(NsSolver::new(&grid, cfg(0.0, 1.0), p).is_err());
    let c = SolverConfig { cfl_max: 1.0, ..cfg(0.01, 1.0) };
    assert!(NsSolver::new(&grid, c, p).is_err());
    let curved = SimParams::new(200.0, 1.0, 200.0, 10.0, 1.0).unwrap();
    assert!(NsSolver::new(&grid, cfg(0.01, 1.0), curved).is_err());
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ChannelGrid::new(16, 17, 3.0).unwrap();
    let p = params(200.0);
    let solver = NsSolver::new(&grid, cfg(0.01, 0.03), p).unwrap();
    let s = solver.run(perturbed(&grid, &p, 0.05), &mut MemorySink::default()).unwrap();
    let path = dir.path().join("c.nspb");
    write_checkpoint(&path, &s, 0.01).unwrap();
    let (back, _) = read_checkpoint(&path).unwrap();
    assert_eq!(back.grid().lx(), 3.0);
    assert_eq!(omega_diff(&back, &s), 0.0);
    assert_eq!(back.history, s.history);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Format(_))));
    std::fs::write(&path, &b"NSPB"[..]).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Format(_))));
}
