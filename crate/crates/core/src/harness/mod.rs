//! Closed-loop experiments: forecast, condense, solve, post-process and
//! simulate every 15 minutes, then score the run.

mod compare;
mod kpi;
mod output;
mod rule;
mod synthetic;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub use compare::{compare_pcs_vs_water, CompareConfig, CompareReport, DischargeRun};
pub use kpi::{
    compute_kpis, ConstraintViolation, CopBin, KpiReport, SolveTimeStats, AMBIENT_BIN_WIDTH,
    RUNTIME_EDGES,
};
pub use output::{write_compare_outputs, write_run_outputs};
pub use rule::{RuleConfig, RuleController};
pub use synthetic::{synthetic_spring_scenario, SyntheticConfig, TAPPING_PROFILE_M};

use crate::dispatch::{ActuatorLimits, Dispatcher, HpMode};
use crate::forecast::{format_timestamp, ForecastBundle, HistoryBuffer, LoadSample, STEP_MINUTES};
use crate::model::{
    build_matrices, node_residual, ElectricContext, EnergyFlowSetpoints, ModelParameters,
    SystemState, NX,
};
use crate::ocp::{
    build_qp, extract_first_input, ConstraintSet, ControllerConfig, Objective, TuningSchedule,
};
use crate::pcs::{stored_energy_dhw, stored_energy_sh};
use crate::qp::{solve_with, QpStatus, SolverSettings};
use crate::sim::{Measurements, Plant, PlantConfig, PlantScenario, ScenarioStep, TelemetryRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    #[default]
    Mpc,
    Rule,
}

/// Everything a run needs. Readable from TOML or JSON; missing sections
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub mode: ControlMode,
    pub controller: ControllerConfig,
    pub constraints: ConstraintSet,
    pub tuning: TuningSchedule,
    pub limits: ActuatorLimits,
    /// Linear model used by the controller.
    pub model: ModelParameters,
    pub solver: SolverSettings,
    pub plant: PlantConfig,
    pub rule: RuleConfig,
    /// Energy prices per kWh; placeholders, only relative size matters.
    pub tariff_dem: f64,
    pub tariff_sup: f64,
    /// Leading scenario rows that only seed the load history.
    pub history_steps: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            mode: ControlMode::Mpc,
            controller: ControllerConfig::default(),
            constraints: ConstraintSet::default(),
            tuning: TuningSchedule::default(),
            limits: ActuatorLimits::default(),
            model: ModelParameters::default(),
            solver: SolverSettings::default(),
            plant: PlantConfig::default(),
            rule: RuleConfig::default(),
            tariff_dem: 0.30,
            tariff_sup: 0.08,
            history_steps: crate::forecast::HISTORY_DEPTH,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.constraints.validate()?;
        self.tuning.validate()?;
        self.limits.validate(f64::from(self.controller.h_minutes))?;
        self.model.validate()?;
        self.plant.validate()?;
        self.rule.validate()?;
        if !(self.solver.tol > 0.0 && self.solver.max_iter > 0) {
            return Err(Error::config(
                "solver needs a positive tolerance and iteration limit",
            ));
        }
        if !(self.tariff_dem >= 0.0 && self.tariff_sup >= 0.0) {
            return Err(Error::config("tariffs must be non-negative"));
        }
        let c = &self.constraints;
        let l = &self.limits;
        let checks = [
            ("inverter efficiency", self.controller.eta, self.plant.eta),
            ("battery capacity", c.e_max[3], self.plant.battery_capacity),
            (
                "battery capacity",
                l.battery_capacity,
                self.plant.battery_capacity,
            ),
            ("heat-pump electric limit", c.hp_el_max, l.p_hp_el_max),
            (
                "heating-rod limit",
                c.q_hr_max,
                l.hr_stages.last().copied().unwrap_or(0.0),
            ),
            ("node tolerance", c.eps_el, l.eps_el),
        ];
        for (what, a, b) in checks {
            if !close(a, b) {
                return Err(Error::config(format!(
                    "{what} differs between sections: {a} vs {b}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Swaps in the weight preset of an objective.
    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.tuning = TuningSchedule::for_objective(objective);
        self
    }

    pub fn with_horizon(mut self, n: usize) -> Self {
        self.controller = self.controller.with_horizon(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.plant.seed = seed;
        self
    }
}

/// Watches a config file and hands out the tuning and constraint sections
/// when it changes. Other sections are fixed for the run.
#[derive(Debug, Clone)]
pub struct ConfigWatcher {
    path: PathBuf,
    stamp: Option<SystemTime>,
}

impl ConfigWatcher {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let stamp = std::fs::metadata(&path).and_then(|m| m.modified()).ok();
        Self { path, stamp }
    }

    /// `Some` once per modification; the inner result carries parse or
    /// validation errors.
    pub fn poll(&mut self) -> Option<Result<(TuningSchedule, ConstraintSet)>> {
        let stamp = std::fs::metadata(&self.path)
            .and_then(|m| m.modified())
            .ok();
        if stamp == self.stamp {
            return None;
        }
        self.stamp = stamp;
        Some(HarnessConfig::load(&self.path).map(|c| (c.tuning, c.constraints)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSource {
    Mpc,
    /// Rule controller standing in after a failed solve.
    Fallback,
    Rule,
}

/// Per-step controller log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub time: String,
    pub source: StepSource,
    pub status: Option<QpStatus>,
    pub iterations: usize,
    pub build_ms: f64,
    pub solve_ms: f64,
    /// State estimated from measurements and the plant's true state.
    pub x_est: SystemState,
    pub x_true: SystemState,
    /// Context the set points were balanced against.
    pub ctx: ElectricContext,
    pub planned: EnergyFlowSetpoints,
    pub applied: EnergyFlowSetpoints,
    /// Step means of what the plant executed.
    pub realized: EnergyFlowSetpoints,
    pub loads: ScenarioStep,
    pub mode: HpMode,
    pub residual: f64,
    pub saturated: bool,
    pub grid_guard: bool,
    pub forced_on: bool,
    pub held_off: bool,
    /// Predicted first-step state and its slack values.
    pub predicted: Option<SystemState>,
    pub slacks: [f64; NX],
    pub clamped: Vec<(String, f64)>,
    pub max_grid_residual: f64,
    pub forecast_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEvent {
    pub time: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub telemetry: Vec<TelemetryRow>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<RunEvent>,
    pub kpis: KpiReport,
    pub final_state: SystemState,
}

/// Controller-side state estimate from the sensor view.
pub fn estimate_state(m: &Measurements, cfg: &HarnessConfig) -> Result<SystemState> {
    let geom = &cfg.plant.geom;
    let props = &cfg.plant.props;
    Ok(SystemState {
        e_sh: stored_energy_sh(&m.tank, geom, props)?,
        e_dhw: stored_energy_dhw(&m.tank, geom, props)?,
        e_bld: m.e_bld,
        e_b: m.soc / 100.0 * cfg.plant.battery_capacity,
    })
}

/// Scenario row for `t`; beyond the end the same time of day from an
/// earlier day is repeated.
fn row_at(s: &PlantScenario, t: NaiveDateTime) -> ScenarioStep {
    let first = s.times[0];
    let mut idx = (t - first).num_minutes() / STEP_MINUTES;
    while idx >= s.len() as i64 {
        idx -= 96;
    }
    s.steps[idx.max(0) as usize]
}

fn forecast_bundle(
    cfg: &HarnessConfig,
    scenario: &PlantScenario,
    history: &HistoryBuffer,
    now: NaiveDateTime,
) -> ForecastBundle {
    let n = cfg.controller.n;
    let loads = history.forecast_loads(now, n);
    let p = &cfg.plant;
    let mut b = ForecastBundle {
        q_l_sh: loads
            .q_l_sh
            .iter()
            .map(|q| q.min(cfg.constraints.q_sh_max))
            .collect(),
        q_l_dhw: loads.q_l_dhw,
        p_l: loads.p_l,
        degraded: loads.degraded,
        ..Default::default()
    };
    for i in 0..n {
        let r = row_at(scenario, now + Duration::minutes(STEP_MINUTES * i as i64));
        b.p_pv
            .push(crate::model::pv_power(r.g, p.pv_peak_kw, p.pv_derate));
        b.cop_sh.push(p.cop.eval(r.t_amb, HpMode::Sh));
        b.cop_dhw.push(p.cop.eval(r.t_amb, HpMode::Dhw));
        b.tariff_dem.push(cfg.tariff_dem);
        b.tariff_sup.push(cfg.tariff_sup);
    }
    b
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the scenario in closed loop. The first `history_steps` rows seed
/// the forecaster; the remaining rows are simulated. Tuning and constraints
/// are re-read from `watch` between steps when the file changes.
pub fn run_closed_loop(
    scenario: &PlantScenario,
    cfg: &HarnessConfig,
    mut watch: Option<&mut ConfigWatcher>,
) -> Result<RunOutput> {
    cfg.validate()?;
    scenario.validate()?;
    let hist = cfg.history_steps.min(scenario.len());
    if hist == scenario.len() {
        return Err(Error::config(
            "scenario has no rows after the history prefix",
        ));
    }
    let ss = build_matrices(&cfg.model)?;
    let mut tuning = cfg.tuning.clone();
    let mut constraints = cfg.constraints.clone();
    let mut history = HistoryBuffer::default();
    for k in 0..hist {
        let s = scenario.steps[k];
        history.record(
            scenario.times[k],
            LoadSample {
                q_l_sh: s.q_l_sh,
                q_l_dhw: s.q_l_dhw,
                p_l: s.p_l,
            },
        )?;
    }
    let mut plant = Plant::new(cfg.plant.clone())?;
    let mut dispatcher = Dispatcher::new(cfg.limits.clone(), f64::from(cfg.controller.h_minutes))?;
    let mut rule = RuleController::new(cfg.rule);
    let mut telemetry = Vec::new();
    let mut steps = Vec::new();
    let mut events = Vec::new();
    let mut violations = Vec::new();
    let mut solve_times = Vec::new();
    let mut event = |time: &str, kind: &str, detail: String| {
        events.push(RunEvent {
            time: time.to_string(),
            kind: kind.to_string(),
            detail,
        });
    };

    let mut meas = plant.measure(&scenario.steps[hist]);
    for k in hist..scenario.len() {
        let now = scenario.times[k];
        let stamp = format_timestamp(now);
        if let Some(w) = watch.as_deref_mut() {
            match w.poll() {
                Some(Ok((t, c))) => {
                    tuning = t;
                    constraints = c;
                    event(
                        &stamp,
                        "config-reload",
                        "tuning and constraints replaced".into(),
                    );
                }
                Some(Err(e)) => event(&stamp, "config-reload-failed", e.to_string()),
                None => {}
            }
        }
        let x_est = estimate_state(&meas, cfg)?;
        let x_true = plant.true_state();
        let step_cfg = HarnessConfig {
            tuning: tuning.clone(),
            constraints: constraints.clone(),
            ..cfg.clone()
        };
        let forecast = forecast_bundle(&step_cfg, scenario, &history, now);
        if forecast.degraded {
            event(
                &stamp,
                "forecast-degraded",
                "no load history for part of the horizon".into(),
            );
        }
        let ctx = ElectricContext {
            p_l: forecast.p_l[0],
            p_pv: forecast.p_pv[0],
            eta: cfg.controller.eta,
            cop_sh: forecast.cop_sh[0],
            cop_dhw: forecast.cop_dhw[0],
        };

        let mut rec = StepRecord {
            time: stamp.clone(),
            source: StepSource::Rule,
            status: None,
            iterations: 0,
            build_ms: 0.0,
            solve_ms: 0.0,
            x_est,
            x_true,
            ctx,
            planned: EnergyFlowSetpoints::default(),
            applied: EnergyFlowSetpoints::default(),
            realized: EnergyFlowSetpoints::default(),
            loads: scenario.steps[k],
            mode: HpMode::Off,
            residual: 0.0,
            saturated: false,
            grid_guard: false,
            forced_on: false,
            held_off: false,
            predicted: None,
            slacks: [0.0; NX],
            clamped: Vec::new(),
            max_grid_residual: 0.0,
            forecast_degraded: forecast.degraded,
        };

        let mut planned = None;
        if cfg.mode == ControlMode::Mpc {
            let t_build = Instant::now();
            let weights = tuning.resolve(now, &forecast);
            let built = build_qp(
                &x_est,
                &forecast,
                &weights,
                &constraints,
                &cfg.controller,
                &ss,
            );
            rec.build_ms = ms(t_build);
            match built.and_then(|cp| Ok((solve_with(&cp.qp, &cfg.solver)?, cp))) {
                Ok((sol, cp)) => {
                    rec.status = Some(sol.status);
                    rec.iterations = sol.iterations;
                    rec.solve_ms = sol.solve_time_ms;
                    solve_times.push(rec.build_ms + rec.solve_ms);
                    if sol.status == QpStatus::Optimal {
                        let first = extract_first_input(&sol.x, &cp.map);
                        let x1 = cp.predicted_states(&sol.x)[1];
                        rec.predicted = Some(SystemState::from_vector(&x1));
                        rec.slacks = first.slacks;
                        for (j, s) in first.slacks.iter().enumerate() {
                            if *s > 1e-6 {
                                violations.push(ConstraintViolation {
                                    time: stamp.clone(),
                                    what: format!("{} soft bound", crate::model::state::NAMES[j]),
                                    amount: *s,
                                });
                            }
                        }
                        for (name, v) in &first.clamped {
                            event(&stamp, "clamped", format!("{name} = {v:.3e} set to 0"));
                        }
                        rec.clamped = first.clamped;
                        planned = Some(first.setpoints);
                        rec.source = StepSource::Mpc;
                    } else {
                        event(
                            &stamp,
                            "fallback",
                            format!("solver status {:?}", sol.status),
                        );
                    }
                }
                Err(e) => event(&stamp, "fallback", e.to_string()),
            }
            if planned.is_none() {
                rec.source = StepSource::Fallback;
            }
        }
        let planned = match planned {
            Some(u) => u,
            None => rule.decide(
                &x_est,
                meas.soc,
                forecast.q_l_sh[0],
                &ctx,
                &constraints,
                &cfg.limits,
            ),
        };
        let out = dispatcher.process(&planned, &ctx, meas.soc);
        if out.saturated {
            violations.push(ConstraintViolation {
                time: stamp.clone(),
                what: "node balance saturated".into(),
                amount: out.residual,
            });
            event(
                &stamp,
                "saturated",
                format!("node residual {:.4} kW", out.residual),
            );
        }
        if out.grid_guard {
            event(
                &stamp,
                "grid-guard",
                "heating rod or heat pump cut back to respect grid limit".into(),
            );
        }
        rec.planned = planned;
        rec.applied = out.setpoints;
        rec.mode = out.mode;
        rec.residual = node_residual(&out.setpoints, &ctx);
        rec.saturated = out.saturated;
        rec.grid_guard = out.grid_guard;
        rec.forced_on = out.forced_on;
        rec.held_off = out.held_off;

        let step = plant.advance(now, &out.setpoints, &scenario.steps[k])?;
        rec.realized = step.realized;
        rec.max_grid_residual = step.max_grid_residual;
        telemetry.extend(step.rows);
        meas = step.measurements;
        let l = &meas.loads;
        history.record(
            now,
            LoadSample {
                q_l_sh: l.q_l_sh(),
                q_l_dhw: l.q_l_dhw(),
                p_l: meas.p_l,
            },
        )?;
        steps.push(rec);
    }

    let mut kpis = compute_kpis(&telemetry);
    kpis.violations = violations;
    kpis.solve_time = SolveTimeStats::from_samples(&solve_times);
    Ok(RunOutput {
        telemetry,
        steps,
        events,
        kpis,
        final_state: plant.true_state(),
    })
}

#[cfg(test)]
mod tests;
