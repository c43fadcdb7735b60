use super::*;

#[test]
fn empty_file_gives_default_single_run() {
    let plan = parse_config("", None).unwrap();
    assert_eq!(plan, ExperimentPlan::defaults(PlanKind::SingleRun));
    let echo = plan.echo();
    assert_eq!(echo.len(), PLAN_KEYS.len());
    assert_eq!(echo["kind"], "single_run");
    assert_eq!(parse_config(&plan.echo_text(), None).unwrap(), plan);
}

#[test]
fn alpha_must_exceed_four_kappa() {
    let err = parse_config("alpha=2\nkappa=1\n", None).unwrap_err();
    assert!(matches!(err, Error::ParameterDomain(_)), "{err}");
    assert!(parse_config("alpha=4.5\nkappa=1\n", None).is_ok());
}

#[test]
fn three_point_re_sweep() {
    let plan = parse_config("kind=sweep_re\nsweep_values=250,500,1000\n", None).unwrap();
    assert_eq!(plan.kind, PlanKind::SweepRe);
    assert_eq!(plan.sweep_values, vec![250.0, 500.0, 1000.0]);
    assert_eq!(plan.solver.dt, 2e-3);
}

#[test]
fn unknown_keys_and_bad_values_report_lines() {
    let err = parse_config("# comment\nre = 10\nbogus = 3\n", None).unwrap_err();
    assert!(err.to_string().contains("line 3") && err.to_string().contains("bogus"), "{err}");
    let err = parse_config("\nnx = many\n", None).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = parse_config("forcing = gale\n", None).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
    assert!(parse_config("just words\n", None).is_err());
}

#[test]
fn override_kind_wins_and_applies_its_defaults() {
    let plan = parse_config("kind=sweep_re\n", Some(PlanKind::SweepAlpha)).unwrap();
    assert_eq!(plan.kind, PlanKind::SweepAlpha);
    assert_eq!(plan.sweep_values, vec![10.0, 100.0, 1000.0]);
    assert_eq!(plan.solver_config().unwrap().forcing, Forcing::PressureGradient(0.1));
}

#[test]
fn sweep_kinds_need_values() {
    assert!(parse_config("kind=sweep_re\nsweep_values=\n", None).is_err());
    assert!(parse_config("kind=sweep_alpha\nkappa=1\nsweep_values=3,10\n", None).is_err());
}

#[test]
fn poiseuille_start_needs_pressure_gradient() {
    assert!(parse_config("initial_profile=poiseuille\n", None).is_err());
    let plan = parse_config(
        "initial_profile=poiseuille\nforcing=pressure_gradient\nforcing_amplitude=0.01\n",
        None,
    )
    .unwrap();
    assert_eq!(plan.solver_config().unwrap().forcing, Forcing::PressureGradient(0.01));
}
