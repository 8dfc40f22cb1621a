use std::time::{Duration as StdDuration, SystemTime};

use super::*;
use crate::forecast::HISTORY_DEPTH;

fn short_scenario(eval_steps: usize) -> PlantScenario {
    let s = synthetic_spring_scenario(&SyntheticConfig::default()).unwrap();
    // start the evaluation at 10:00 so PV is available
    s.slice(40, HISTORY_DEPTH + eval_steps)
}

fn quiet_scenario(steps: usize) -> PlantScenario {
    let s = short_scenario(steps);
    let zero = ScenarioStep {
        t_amb: 10.0,
        ..Default::default()
    };
    PlantScenario::new(s.times.clone(), vec![zero; s.len()]).unwrap()
}

#[test]
fn config_round_trips_through_toml_and_json() {
    let cfg = HarnessConfig::default().with_horizon(24).with_seed(3);
    let text = cfg.to_toml().unwrap();
    assert_eq!(HarnessConfig::from_toml(&text).unwrap(), cfg);
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(HarnessConfig::from_json(&json).unwrap(), cfg);
}

#[test]
fn partial_toml_takes_defaults() {
    let cfg = HarnessConfig::from_toml("mode = \"rule\"\n[tuning]\nr_hr = 100.0\n").unwrap();
    assert_eq!(cfg.mode, ControlMode::Rule);
    assert_eq!(cfg.tuning.r_hr, 100.0);
    assert_eq!(cfg.controller, ControllerConfig::default());
}

#[test]
fn inconsistent_sections_are_rejected() {
    let mut cfg = HarnessConfig::default();
    cfg.plant.eta = 0.9;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    let mut cfg = HarnessConfig::default();
    cfg.limits.hr_stages = vec![0.0, 2.0, 4.0];
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    assert!(matches!(
        HarnessConfig::from_toml("[controller]\nn = \"x\"\n"),
        Err(Error::Config(_))
    ));
}

#[test]
fn scenario_without_evaluation_rows_is_rejected() {
    let s = short_scenario(0);
    assert!(run_closed_loop(&s, &HarnessConfig::default(), None).is_err());
}

#[test]
fn quiet_plant_under_rule_control_draws_nothing() {
    let mut cfg = HarnessConfig {
        mode: ControlMode::Rule,
        ..Default::default()
    };
    // lossless and starting above every thermostat threshold
    cfg.plant.model = ModelParameters {
        alpha1: 1.0,
        alpha2: 1.0,
        alpha4: 1.0,
        nu: 0.0,
        ..Default::default()
    };
    let run = run_closed_loop(&quiet_scenario(8), &cfg, None).unwrap();
    assert_eq!(run.steps.len(), 8);
    for r in &run.telemetry {
        let flows = [
            r.p_hp_el, r.q_hr, r.p_b_ch, r.p_b_dis, r.p_g_dem, r.p_g_sup, r.p_pv,
        ];
        assert!(flows.iter().all(|f| f.abs() < 1e-9), "{r:?}");
    }
    assert!(run.steps.iter().all(|s| s.source == StepSource::Rule));
    assert_eq!(run.kpis.pv_self_consumption, 100.0);
}

#[test]
fn mpc_run_is_deterministic_and_balanced() {
    let s = short_scenario(6);
    let cfg = HarnessConfig::default();
    let a = run_closed_loop(&s, &cfg, None).unwrap();
    let b = run_closed_loop(&s, &cfg, None).unwrap();
    assert_eq!(a.telemetry, b.telemetry);
    assert_eq!(a.final_state, b.final_state);
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.applied, y.applied);
        assert_eq!(x.source, StepSource::Mpc);
        if !x.saturated {
            assert!(x.residual.abs() <= cfg.limits.eps_el, "{}", x.residual);
        }
    }
    assert_eq!(a.kpis.solve_time.unwrap().count, 6);
}

#[test]
fn pv_allocation_adds_up() {
    let run = run_closed_loop(&short_scenario(6), &HarnessConfig::default(), None).unwrap();
    let k = &run.kpis;
    assert!(k.pv_generated_kwh > 0.0);
    let parts = k.pv_direct_kwh + k.pv_to_battery_kwh + k.pv_exported_kwh;
    assert!(
        (parts - k.pv_generated_kwh).abs() < 1e-9,
        "{parts} vs {}",
        k.pv_generated_kwh
    );
}

#[test]
fn failed_solves_fall_back_to_rules() {
    let mut cfg = HarnessConfig::default();
    cfg.solver.max_iter = 1;
    let run = run_closed_loop(&short_scenario(3), &cfg, None).unwrap();
    assert!(run.steps.iter().all(|s| s.source == StepSource::Fallback));
    assert_eq!(
        run.events.iter().filter(|e| e.kind == "fallback").count(),
        3
    );
    assert!(run
        .steps
        .iter()
        .all(|s| s.saturated || s.residual.abs() <= cfg.limits.eps_el));
}

#[test]
fn estimator_matches_plant_without_noise() {
    let cfg = HarnessConfig::default();
    let mut plant = Plant::new(cfg.plant.clone()).unwrap();
    let m = plant.measure(&ScenarioStep::default());
    let est = estimate_state(&m, &cfg).unwrap();
    let truth = plant.true_state();
    assert!((est.e_sh - truth.e_sh).abs() < 1e-6);
    assert!((est.e_dhw - truth.e_dhw).abs() < 1e-6);
    assert!((est.e_b - truth.e_b).abs() < 1e-9);
}

#[test]
fn watcher_reports_each_change_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, HarnessConfig::default().to_toml().unwrap()).unwrap();
    let mut w = ConfigWatcher::new(&path);
    assert!(w.poll().is_none());

    let mut cfg = HarnessConfig::default();
    cfg.tuning.r_hr = 40.0;
    cfg.constraints.sigma_th = 0.8;
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let later = SystemTime::now() + StdDuration::from_secs(5);
    std::fs::File::options()
        .write(true)
        .open(&path)
        .unwrap()
        .set_modified(later)
        .unwrap();
    let (t, c) = w.poll().expect("change seen").unwrap();
    assert_eq!(t.r_hr, 40.0);
    assert_eq!(c.sigma_th, 0.8);
    assert!(w.poll().is_none());

    std::fs::write(&path, "[tuning]\nr_hr = -1.0\n").unwrap();
    let later = later + StdDuration::from_secs(5);
    std::fs::File::options()
        .write(true)
        .open(&path)
        .unwrap()
        .set_modified(later)
        .unwrap();
    assert!(w.poll().expect("change seen").is_err());
}

#[test]
fn watched_run_logs_the_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let mut cfg = HarnessConfig {
        mode: ControlMode::Rule,
        ..Default::default()
    };
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let mut w = ConfigWatcher::new(&path);
    cfg.constraints.sigma_th = 0.7;
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let later = SystemTime::now() + StdDuration::from_secs(5);
    std::fs::File::options()
        .write(true)
        .open(&path)
        .unwrap()
        .set_modified(later)
        .unwrap();
    let run = run_closed_loop(
        &short_scenario(2),
        &HarnessConfig {
            mode: ControlMode::Rule,
            ..Default::default()
        },
        Some(&mut w),
    )
    .unwrap();
    let reloads: Vec<_> = run
        .events
        .iter()
        .filter(|e| e.kind == "config-reload")
        .collect();
    assert_eq!(reloads.len(), 1);
    assert_eq!(reloads[0].time, run.steps[0].time);
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = HarnessConfig {
        mode: ControlMode::Rule,
        ..Default::default()
    };
    let run = run_closed_loop(&short_scenario(4), &cfg, None).unwrap();
    write_run_outputs(dir.path(), &run, &cfg).unwrap();
    for f in [
        "results.json",
        "telemetry.csv",
        "steps.csv",
        "plot_tank.csv",
        "plot_cop_runtime.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let back = crate::sim::load_telemetry(&dir.path().join("telemetry.csv")).unwrap();
    assert_eq!(back.len(), run.telemetry.len());
    let steps = std::fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 5);
}
