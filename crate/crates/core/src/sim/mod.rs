//! Nonlinear plant: hysteretic two-zone slurry tank, heat pump, heating rod,
//! battery and electric node, integrated on a one-minute grid.
//!
//! Set points and disturbances are held over each 15-minute step. Heat
//! flows move zone enthalpies; temperatures are recovered on the active
//! hysteresis branch, which flips when a zone's net heat flow changes sign.
//! Standing losses and the top-to-bottom coupling scale with the stored
//! energy at the identified per-step rates. The grid closes the electric
//! balance.

pub mod cop;
pub mod scenario;
pub mod telemetry;

pub use cop::{AffineCop, CopModel};
pub use scenario::{PlantScenario, ScenarioStep};
pub use telemetry::{
    load_telemetry, read_telemetry, save_telemetry, write_telemetry, TelemetryRow,
};

use chrono::{Duration, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dispatch::{ActuatorLimits, HpMode};
use crate::forecast::format_timestamp;
use crate::model::{
    load_heat, pv_power, EnergyFlowSetpoints, ModelParameters, SystemState, CP_WATER, STEP_HOURS,
};
use crate::pcs::{Band, Branch, PcsProperties, TankGeometry, TankMeasurement};
use crate::{Error, Result, GRAVITY, KJ_PER_KWH};

/// Sensor heights (m, above the tank floor), hydraulic assumptions of the
/// load circuits, and measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorLayout {
    pub z_bottom: f64,
    pub z_center: f64,
    /// Boundary between the SH zone below and the DHW zone above.
    pub z_interface: f64,
    pub z_top: f64,
    pub sigma_t: f64,
    pub sigma_p: f64,
    /// Floor-heating supply/return temperatures used to express the SH load
    /// as a flow measurement.
    pub t_sh_flow: f64,
    pub t_sh_return: f64,
    /// Hot-water draw and cold mains temperatures.
    pub t_dhw_draw: f64,
    pub t_cold: f64,
}

impl Default for SensorLayout {
    fn default() -> Self {
        Self {
            z_bottom: 0.1,
            z_center: 0.5,
            z_interface: 1.0,
            z_top: 1.5,
            sigma_t: 0.0,
            sigma_p: 0.0,
            t_sh_flow: 35.0,
            t_sh_return: 28.0,
            t_dhw_draw: 45.0,
            t_cold: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConditions {
    pub t_sh: f64,
    pub branch_sh: Branch,
    pub t_dhw: f64,
    pub soc: f64,
    pub e_bld: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            t_sh: 34.0,
            branch_sh: Branch::Freezing,
            t_dhw: 56.0,
            soc: 50.0,
            e_bld: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub props: PcsProperties,
    pub geom: TankGeometry,
    /// Loss, coupling and battery rates per 15-minute step.
    pub model: ModelParameters,
    pub cop: CopModel,
    pub limits: ActuatorLimits,
    pub battery_capacity: f64,
    pub eta: f64,
    pub pv_peak_kw: f64,
    pub pv_derate: f64,
    pub inner_minutes: i64,
    /// Zone temperatures outside this band abort the run.
    pub safety_band: Band,
    /// The SH zone cannot feed the floor heating below this temperature.
    pub sh_delivery_floor: f64,
    /// Grid power beyond this magnitude (kW) is a fault.
    pub grid_fault_kw: f64,
    pub sensors: SensorLayout,
    pub initial: InitialConditions,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            props: PcsProperties::default(),
            geom: TankGeometry::default(),
            model: ModelParameters::default(),
            cop: CopModel::default(),
            limits: ActuatorLimits::default(),
            battery_capacity: 21.0,
            eta: 0.95,
            pv_peak_kw: 6.0,
            pv_derate: 0.85,
            inner_minutes: 1,
            safety_band: Band::new(5.0, 95.0),
            sh_delivery_floor: 22.0,
            grid_fault_kw: 7.5,
            sensors: SensorLayout::default(),
            initial: InitialConditions::default(),
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.props.validate()?;
        self.geom.validate()?;
        self.model.validate()?;
        self.cop.validate()?;
        self.limits.validate(15.0)?;
        if !(self.battery_capacity > 0.0) || !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(
                "battery capacity must be positive and eta in (0, 1]",
            ));
        }
        if !(self.pv_peak_kw >= 0.0 && self.pv_derate >= 0.0) {
            return Err(Error::config(
                "PV peak power and derating must be non-negative",
            ));
        }
        if !(1..=15).contains(&self.inner_minutes) || 15 % self.inner_minutes != 0 {
            return Err(Error::config("inner step must divide 15 minutes"));
        }
        let s = &self.sensors;
        if !(s.z_bottom < s.z_center && s.z_center < s.z_interface && s.z_interface < s.z_top) {
            return Err(Error::config(
                "sensor heights must increase bottom, center, interface, top",
            ));
        }
        if !(s.sigma_t >= 0.0 && s.sigma_p >= 0.0) {
            return Err(Error::config("noise levels must be non-negative"));
        }
        if !(s.t_sh_flow > s.t_sh_return && s.t_dhw_draw > s.t_cold) {
            return Err(Error::config(
                "load circuits need a positive temperature spread",
            ));
        }
        if !(0.0..=100.0).contains(&self.initial.soc) {
            return Err(Error::config("initial SoC must lie in [0, 100]"));
        }
        Ok(())
    }

    /// Reference enthalpies (kJ/kg) at which each zone counts as empty.
    fn reference_enthalpy(&self) -> (f64, f64) {
        let p = &self.props;
        (
            p.temperature_to_enthalpy(self.geom.t_sh_ref, Branch::Melting)
                .value,
            p.temperature_to_enthalpy(self.geom.t_dhw_ref, Branch::Melting)
                .value,
        )
    }
}

/// Cumulative energy counters (kWh). All are non-decreasing except
/// `thermal_losses` and `battery_losses`, which are signed balances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Meters {
    pub pv_generated: f64,
    pub grid_import: f64,
    pub grid_export: f64,
    pub load_electric: f64,
    pub hp_electric: f64,
    pub hr_electric: f64,
    pub battery_charge: f64,
    pub battery_discharge: f64,
    pub heat_hp_sh: f64,
    pub heat_hp_dhw: f64,
    pub heat_hr: f64,
    pub heat_delivered_sh: f64,
    pub heat_delivered_dhw: f64,
    pub thermal_losses: f64,
    pub battery_losses: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub h_sh: f64,
    pub h_dhw: f64,
    pub branch_sh: Branch,
    pub branch_dhw: Branch,
    pub soc: f64,
    pub e_bld: f64,
    pub hp_mode: HpMode,
    pub meters: Meters,
}

impl PlantState {
    pub fn new(cfg: &PlantConfig, init: &InitialConditions) -> Self {
        let p = &cfg.props;
        Self {
            h_sh: p.temperature_to_enthalpy(init.t_sh, init.branch_sh).value,
            h_dhw: p.temperature_to_enthalpy(init.t_dhw, Branch::Melting).value,
            branch_sh: init.branch_sh,
            branch_dhw: Branch::Melting,
            soc: init.soc,
            e_bld: init.e_bld,
            hp_mode: HpMode::Off,
            meters: Meters::default(),
        }
    }

    pub fn t_sh(&self, p: &PcsProperties) -> f64 {
        p.enthalpy_to_temperature(self.h_sh, self.branch_sh).value
    }

    pub fn t_dhw(&self, p: &PcsProperties) -> f64 {
        p.enthalpy_to_temperature(self.h_dhw, self.branch_dhw).value
    }

    /// Total tank enthalpy above 0 °C solid (kWh).
    pub fn tank_enthalpy(&self, cfg: &PlantConfig) -> f64 {
        (cfg.geom.m_sh * self.h_sh + cfg.geom.m_dhw * self.h_dhw) / KJ_PER_KWH
    }
}

/// Flow-level view of the two heat loads, as a meter would report them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadMeasurement {
    /// Volume flows (l/s) and the temperatures across each consumer.
    pub vdot_sh: f64,
    pub t_sh_flow: f64,
    pub t_sh_return: f64,
    pub vdot_dhw: f64,
    pub t_dhw_draw: f64,
    pub t_cold: f64,
}

impl LoadMeasurement {
    pub fn q_l_sh(&self) -> f64 {
        load_heat(self.vdot_sh, self.t_sh_flow, self.t_sh_return)
    }

    pub fn q_l_dhw(&self) -> f64 {
        load_heat(self.vdot_dhw, self.t_dhw_draw, self.t_cold)
    }
}

/// Everything the controller can observe after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub tank: TankMeasurement,
    pub soc: f64,
    pub t_amb: f64,
    pub g: f64,
    pub p_pv: f64,
    pub p_l: f64,
    pub loads: LoadMeasurement,
    /// Building energy balance, reported by the room controller.
    pub e_bld: f64,
}

/// Outcome of one 15-minute step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub rows: Vec<TelemetryRow>,
    pub measurements: Measurements,
    /// Largest |realised − scheduled| net grid power in the step (kW).
    pub max_grid_residual: f64,
    /// Step means of the realised flows.
    pub realized: EnergyFlowSetpoints,
    /// Tank enthalpy change minus net injected heat over the step (kWh).
    pub energy_defect: f64,
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub config: PlantConfig,
    pub state: PlantState,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(config: PlantConfig) -> Result<Self> {
        config.validate()?;
        let state = PlantState::new(&config, &config.initial);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let plant = Self { config, state, rng };
        plant.check_band(None)?;
        Ok(plant)
    }

    pub fn t_sh(&self) -> f64 {
        self.state.t_sh(&self.config.props)
    }

    pub fn t_dhw(&self) -> f64 {
        self.state.t_dhw(&self.config.props)
    }

    /// Stored energies above each zone's empty point, building balance and
    /// battery energy (kWh).
    pub fn true_state(&self) -> SystemState {
        let (ref_sh, ref_dhw) = self.config.reference_enthalpy();
        let g = &self.config.geom;
        SystemState {
            e_sh: g.m_sh * (self.state.h_sh - ref_sh) / KJ_PER_KWH,
            e_dhw: g.m_dhw * (self.state.h_dhw - ref_dhw) / KJ_PER_KWH,
            e_bld: self.state.e_bld,
            e_b: self.state.soc / 100.0 * self.config.battery_capacity,
        }
    }

    pub fn pv_power(&self, g: f64) -> f64 {
        pv_power(g, self.config.pv_peak_kw, self.config.pv_derate)
    }

    fn check_band(&self, time: Option<NaiveDateTime>) -> Result<()> {
        let band = self.config.safety_band;
        for (zone, t) in [("SH", self.t_sh()), ("DHW", self.t_dhw())] {
            if !(t >= band.low && t <= band.high) {
                return Err(Error::SimulationFault {
                    time: time.map(format_timestamp).unwrap_or_else(|| "start".into()),
                    reason: format!("{zone} zone at {t:.2} °C left the safety band"),
                });
            }
        }
        Ok(())
    }

    /// Runs one 15-minute step starting at `time` with post-processed set
    /// points.
    pub fn advance(
        &mut self,
        time: NaiveDateTime,
        u: &EnergyFlowSetpoints,
        d: &ScenarioStep,
    ) -> Result<StepResult> {
        let cfg = &self.config;
        let n_inner = 15 / cfg.inner_minutes;
        let dt = cfg.inner_minutes as f64 / 60.0;
        let frac = dt / STEP_HOURS;
        let (m_sh, m_dhw) = (cfg.geom.m_sh, cfg.geom.m_dhw);
        let (ref_sh, ref_dhw) = cfg.reference_enthalpy();
        let p_pv = self.pv_power(d.g);
        let eta = cfg.eta;
        let lim = &cfg.limits;

        // Heat pump: one mode at a time, output within the electric range at
        // the actual COP.
        let (mode, q_req) = if u.q_hp_dhw > 0.0 {
            (HpMode::Dhw, u.q_hp_dhw)
        } else if u.q_hp_sh > 0.0 {
            (HpMode::Sh, u.q_hp_sh)
        } else {
            (HpMode::Off, 0.0)
        };
        let cop = cfg.cop.eval(d.t_amb, mode);
        let q_hp = if mode == HpMode::Off {
            0.0
        } else {
            q_req.clamp(cop * lim.p_hp_el_min, cop * lim.p_hp_el_max)
        };
        let p_hp_el = q_hp / cop;
        let (q_hp_sh, q_hp_dhw) = match mode {
            HpMode::Sh => (q_hp, 0.0),
            HpMode::Dhw => (0.0, q_hp),
            HpMode::Off => (0.0, 0.0),
        };
        let q_hr = u
            .q_hr
            .clamp(0.0, lim.hr_stages.last().copied().unwrap_or(0.0));
        let scheduled_grid = u.p_g_dem - u.p_g_sup;
        let enthalpy_before = self.state.tank_enthalpy(cfg);
        let mut injected = 0.0;

        let mut rows = Vec::with_capacity(n_inner as usize);
        let mut acc = EnergyFlowSetpoints::default();
        let mut max_res: f64 = 0.0;
        for k in 0..n_inner {
            let t = time + Duration::minutes(k * cfg.inner_minutes);
            let st = &mut self.state;
            let t_sh_now = st.t_sh(&cfg.props);
            let e_sh = m_sh * (st.h_sh - ref_sh) / KJ_PER_KWH;
            let e_dhw = m_dhw * (st.h_dhw - ref_dhw) / KJ_PER_KWH;

            let q_sh = if t_sh_now > cfg.sh_delivery_floor {
                u.q_sh.max(0.0)
            } else {
                0.0
            };
            let loss_sh = (1.0 - cfg.model.alpha1) * frac * e_sh;
            let loss_dhw = (1.0 - cfg.model.alpha2) * frac * e_dhw;
            let coupling = cfg.model.nu * frac * e_dhw;
            let net_sh = (q_hp_sh - q_sh) * dt + coupling - loss_sh;
            let net_dhw = (q_hp_dhw + q_hr - d.q_l_dhw) * dt - coupling - loss_dhw;
            if let Some(b) = Branch::for_heat_flow(net_sh) {
                st.branch_sh = b;
            }
            if let Some(b) = Branch::for_heat_flow(net_dhw) {
                st.branch_dhw = b;
            }
            st.h_sh += net_sh * KJ_PER_KWH / m_sh;
            st.h_dhw += net_dhw * KJ_PER_KWH / m_dhw;
            st.e_bld += (q_sh - d.q_l_sh) * dt;
            injected += net_sh + net_dhw;

            // Battery, limited by the energy it holds and has room for.
            let cap = cfg.battery_capacity;
            let e_b = st.soc / 100.0 * cap;
            let (g_ch, g_dis) = (cfg.model.beta7 / STEP_HOURS, cfg.model.beta8 / STEP_HOURS);
            let net_b = u.p_b_ch - u.p_b_dis;
            let self_loss = (1.0 - cfg.model.alpha4) * frac * e_b;
            let (p_ch, p_dis) = if net_b >= 0.0 {
                (
                    net_b
                        .min(lim.p_b_ch_max)
                        .min(((cap - e_b + self_loss) / (g_ch * dt)).max(0.0)),
                    0.0,
                )
            } else {
                (
                    0.0,
                    (-net_b)
                        .min(lim.p_b_dis_max)
                        .min(((e_b - self_loss) / (g_dis * dt)).max(0.0)),
                )
            };
            let e_b_new = (e_b - self_loss + (g_ch * p_ch - g_dis * p_dis) * dt).clamp(0.0, cap);
            st.soc = e_b_new / cap * 100.0;

            // The grid closes the balance.
            let net_grid = d.p_l + p_hp_el + q_hr + eta * p_ch - eta * p_dis - eta * p_pv;
            let (imp, exp) = (net_grid.max(0.0), (-net_grid).max(0.0));
            if imp > cfg.grid_fault_kw + 1e-9 || exp > cfg.grid_fault_kw + 1e-9 {
                return Err(Error::SimulationFault {
                    time: format_timestamp(t),
                    reason: format!(
                        "grid power {net_grid:.3} kW exceeds the {} kW limit",
                        cfg.grid_fault_kw
                    ),
                });
            }
            max_res = max_res.max((net_grid - scheduled_grid).abs());

            let m = &mut st.meters;
            m.pv_generated += p_pv * dt;
            m.grid_import += imp * dt;
            m.grid_export += exp * dt;
            m.load_electric += d.p_l * dt;
            m.hp_electric += p_hp_el * dt;
            m.hr_electric += q_hr * dt;
            m.battery_charge += p_ch * dt;
            m.battery_discharge += p_dis * dt;
            m.heat_hp_sh += q_hp_sh * dt;
            m.heat_hp_dhw += q_hp_dhw * dt;
            m.heat_hr += q_hr * dt;
            m.heat_delivered_sh += q_sh * dt;
            m.heat_delivered_dhw += d.q_l_dhw * dt;
            m.thermal_losses += loss_sh + loss_dhw;
            m.battery_losses += self_loss;
            st.hp_mode = mode;

            let flows = EnergyFlowSetpoints {
                q_hp_sh,
                q_hp_dhw,
                q_hr,
                q_sh,
                p_b_ch: p_ch,
                p_b_dis: p_dis,
                p_g_dem: imp,
                p_g_sup: exp,
            };
            for (a, (_, v)) in [
                &mut acc.q_hp_sh,
                &mut acc.q_hp_dhw,
                &mut acc.q_hr,
                &mut acc.q_sh,
                &mut acc.p_b_ch,
                &mut acc.p_b_dis,
                &mut acc.p_g_dem,
                &mut acc.p_g_sup,
            ]
            .into_iter()
            .zip(flows.iter())
            {
                *a += v / n_inner as f64;
            }
            let truth = self.true_state();
            let st = &self.state;
            rows.push(TelemetryRow {
                timestamp: format_timestamp(t),
                t_amb: d.t_amb,
                g: d.g,
                p_pv,
                eta,
                p_l: d.p_l,
                q_l_sh: d.q_l_sh,
                q_l_dhw: d.q_l_dhw,
                q_hp_sh,
                q_hp_dhw,
                q_hr,
                q_sh,
                p_hp_el,
                cop: if mode == HpMode::Off { 0.0 } else { cop },
                p_b_ch: p_ch,
                p_b_dis: p_dis,
                p_g_dem: imp,
                p_g_sup: exp,
                grid_residual: net_grid - scheduled_grid,
                soc: st.soc,
                t_sh: st.t_sh(&self.config.props),
                t_dhw: st.t_dhw(&self.config.props),
                branch_sh: st.branch_sh,
                branch_dhw: st.branch_dhw,
                e_sh: truth.e_sh,
                e_dhw: truth.e_dhw,
                e_bld: truth.e_bld,
            });
            self.check_band(Some(t))?;
        }
        let energy_defect = self.state.tank_enthalpy(&self.config) - enthalpy_before - injected;
        let measurements = self.measure(d);
        Ok(StepResult {
            rows,
            measurements,
            max_grid_residual: max_res,
            realized: acc,
            energy_defect,
        })
    }

    fn noise(&mut self, sigma: f64) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma)
                .map(|n| n.sample(&mut self.rng))
                .unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Sensor view of the current state, with loads of the step just run.
    pub fn measure(&mut self, d: &ScenarioStep) -> Measurements {
        let s = self.config.sensors;
        let (t_sh, t_dhw) = (self.t_sh(), self.t_dhw());
        let p = &self.config.props;
        let rho_sh = p.density(t_sh, self.state.branch_sh).value;
        let rho_dhw = p.density(t_dhw, self.state.branch_dhw).value;
        let p_interface = rho_dhw * GRAVITY * (s.z_top - s.z_interface);
        let p_center = p_interface + rho_sh * GRAVITY * (s.z_interface - s.z_center);
        let p_bottom = p_center + rho_sh * GRAVITY * (s.z_center - s.z_bottom);
        let tank = TankMeasurement {
            t_top: t_dhw + self.noise(s.sigma_t),
            t_center: t_sh + self.noise(s.sigma_t),
            t_bottom: t_sh + self.noise(s.sigma_t),
            p_center: p_center + self.noise(s.sigma_p),
            p_bottom: p_bottom + self.noise(s.sigma_p),
            z_center: s.z_center,
            z_bottom: s.z_bottom,
        };
        let flow = |q: f64, hi: f64, lo: f64| q / (CP_WATER * (hi - lo));
        let loads = LoadMeasurement {
            vdot_sh: flow(d.q_l_sh, s.t_sh_flow, s.t_sh_return),
            t_sh_flow: s.t_sh_flow,
            t_sh_return: s.t_sh_return,
            vdot_dhw: flow(d.q_l_dhw, s.t_dhw_draw, s.t_cold),
            t_dhw_draw: s.t_dhw_draw,
            t_cold: s.t_cold,
        };
        Measurements {
            tank,
            soc: self.state.soc,
            t_amb: d.t_amb,
            g: d.g,
            p_pv: self.pv_power(d.g),
            p_l: d.p_l,
            loads,
            e_bld: self.state.e_bld,
        }
    }
}
