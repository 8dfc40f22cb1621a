//! Rule layer turning the continuous QP optimum into set points the
//! actuators can realise, then restoring the electric balance.

use serde::{Deserialize, Serialize};

use crate::model::{electric_demand_hp, node_residual, ElectricContext, EnergyFlowSetpoints};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActuatorLimits {
    /// Electric heating-rod stages (kW), ascending from 0.
    pub hr_stages: Vec<f64>,
    pub p_hp_el_min: f64,
    pub p_hp_el_max: f64,
    /// Minimum on and off times (min).
    pub min_up: f64,
    pub min_dn: f64,
    /// SoC (%) above which surplus goes to the grid instead of the battery.
    pub soc_redirect_threshold: f64,
    pub p_b_ch_max: f64,
    pub p_b_dis_max: f64,
    pub p_g_dem_max: f64,
    pub p_g_sup_max: f64,
    pub eps_el: f64,
    /// Usable battery energy (kWh); caps charge and discharge so one step
    /// cannot overrun the SoC limits.
    pub battery_capacity: f64,
    /// Accumulate heat-pump requests below the minimum power and run one
    /// minimum-power step once enough has been requested.
    pub pool_sub_minimum: bool,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            hr_stages: vec![0.0, 2.0, 4.0, 6.0],
            p_hp_el_min: 1.0,
            p_hp_el_max: 3.7,
            min_up: 30.0,
            min_dn: 30.0,
            soc_redirect_threshold: 90.0,
            p_b_ch_max: 7.0,
            p_b_dis_max: 7.0,
            p_g_dem_max: 7.5,
            p_g_sup_max: 7.5,
            eps_el: 1e-4,
            battery_capacity: 21.0,
            pool_sub_minimum: true,
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self, step_minutes: f64) -> Result<()> {
        let s = &self.hr_stages;
        if s.first() != Some(&0.0) || s.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(
                "heating-rod stages must ascend strictly from 0",
            ));
        }
        if !(self.min_up >= step_minutes && self.min_dn >= step_minutes) {
            return Err(Error::config(format!(
                "minimum up/down times must be at least the {step_minutes} min sampling interval"
            )));
        }
        if !(0.0 < self.p_hp_el_min && self.p_hp_el_min <= self.p_hp_el_max) {
            return Err(Error::config(
                "heat-pump electric range must satisfy 0 < min <= max",
            ));
        }
        if !(0.0..=100.0).contains(&self.soc_redirect_threshold) {
            return Err(Error::config("SoC redirect threshold must lie in [0, 100]"));
        }
        let caps = [
            self.p_b_ch_max,
            self.p_b_dis_max,
            self.p_g_dem_max,
            self.p_g_sup_max,
        ];
        if caps.iter().any(|c| !(*c >= 0.0))
            || !(self.eps_el > 0.0)
            || !(self.battery_capacity > 0.0)
        {
            return Err(Error::config(
                "power limits must be non-negative and eps_el positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HpMode {
    Sh,
    Dhw,
    #[default]
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub hp_on: bool,
    /// Minutes spent in the current on/off state.
    pub time_in_state: f64,
    pub current_mode: HpMode,
}

impl Default for ActuatorState {
    /// Off long enough that the first switch-on is allowed.
    fn default() -> Self {
        Self {
            hp_on: false,
            time_in_state: 24.0 * 60.0,
            current_mode: HpMode::Off,
        }
    }
}

impl ActuatorState {
    /// Books one step of `minutes` in the realised state.
    pub fn advance(&mut self, on: bool, mode: HpMode, minutes: f64) {
        if on == self.hp_on {
            self.time_in_state += minutes;
        } else {
            self.hp_on = on;
            self.time_in_state = minutes;
        }
        self.current_mode = if on { mode } else { HpMode::Off };
    }
}

/// Largest stage not above the request.
pub fn quantize_heating_rod(q_hr_opt: f64, limits: &ActuatorLimits) -> f64 {
    limits
        .hr_stages
        .iter()
        .copied()
        .filter(|&s| s <= q_hr_opt)
        .fold(0.0, f64::max)
}

/// Drops requests below the minimum modulation and caps those above range.
pub fn apply_hp_min_power(q_hp_opt: f64, cop: f64, limits: &ActuatorLimits) -> f64 {
    let (lo, hi) = (cop * limits.p_hp_el_min, cop * limits.p_hp_el_max);
    if q_hp_opt < lo {
        0.0
    } else {
        q_hp_opt.min(hi)
    }
}

pub fn enforce_min_times(desired_on: bool, state: &ActuatorState, limits: &ActuatorLimits) -> bool {
    match (state.hp_on, desired_on) {
        (true, false) if state.time_in_state < limits.min_up => true,
        (false, true) if state.time_in_state < limits.min_dn => false,
        _ => desired_on,
    }
}

/// Thermal flows after quantisation and arbitration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RealizedThermal {
    pub q_hp_sh: f64,
    pub q_hp_dhw: f64,
    pub q_hr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RebalanceOutcome {
    pub setpoints: EnergyFlowSetpoints,
    /// Node residual left over (kW).
    pub residual: f64,
    /// True when bounds prevented closing the balance within eps_el.
    pub saturated: bool,
}

/// Moves `amount` (kW at the AC node) out of `v`, never below zero; returns
/// the part that could not be moved. `gain` converts node power to `v`.
fn take(v: &mut f64, amount: f64, gain: f64) -> f64 {
    if amount <= ROUNDOFF {
        return 0.0;
    }
    if amount / gain >= *v - ROUNDOFF {
        let rest = amount - *v * gain;
        *v = 0.0;
        rest.max(0.0)
    } else {
        *v -= amount / gain;
        0.0
    }
}

/// Adds up to `amount` node power into `v` below `cap`; returns the rest.
fn give(v: &mut f64, amount: f64, gain: f64, cap: f64) -> f64 {
    if amount <= ROUNDOFF {
        return 0.0;
    }
    let room = (cap - *v).max(0.0);
    if amount / gain >= room {
        *v = v.max(cap);
        (amount - room * gain).max(0.0)
    } else {
        *v += amount / gain;
        0.0
    }
}

/// Leftovers this small are rounding noise, far below eps_el.
const ROUNDOFF: f64 = 1e-12;

/// Restores the node balance after the thermal flows were altered.
///
/// The surplus to place is the node residual with the realised thermal
/// flows, which equals planned minus realised electric heat demand when the
/// plan itself was balanced. A surplus goes to the battery (below the SoC
/// threshold) or the grid when PV covers it, and otherwise first reduces
/// grid demand and battery discharge. A deficit first cuts export, then
/// raises grid demand, then cuts charging, then raises discharge.
pub fn rebalance(
    planned: &EnergyFlowSetpoints,
    realized: &RealizedThermal,
    soc: f64,
    p_pv: f64,
    ctx: &ElectricContext,
    limits: &ActuatorLimits,
) -> RebalanceOutcome {
    let mut u = EnergyFlowSetpoints {
        q_hp_sh: realized.q_hp_sh,
        q_hp_dhw: realized.q_hp_dhw,
        q_hr: realized.q_hr,
        ..*planned
    };
    // Net out simultaneous flows; both are neutral at the node.
    let bat = u.p_b_dis - u.p_b_ch;
    u.p_b_dis = bat.max(0.0).min(limits.p_b_dis_max);
    u.p_b_ch = (-bat).max(0.0).min(limits.p_b_ch_max);
    let grid = u.p_g_dem - u.p_g_sup;
    u.p_g_dem = grid.max(0.0).min(limits.p_g_dem_max);
    u.p_g_sup = (-grid).max(0.0).min(limits.p_g_sup_max);

    let eta = ctx.eta;
    let surplus = node_residual(&u, ctx);
    if surplus > 0.0 {
        let mut rest = surplus;
        if p_pv < surplus {
            rest = take(&mut u.p_g_dem, rest, 1.0);
            rest = take(&mut u.p_b_dis, rest, eta);
        }
        if soc < limits.soc_redirect_threshold && soc < 100.0 {
            rest = take(&mut u.p_b_dis, rest, eta);
            rest = give(&mut u.p_b_ch, rest, eta, limits.p_b_ch_max);
        }
        rest = take(&mut u.p_g_dem, rest, 1.0);
        rest = give(&mut u.p_g_sup, rest, 1.0, limits.p_g_sup_max);
        // export saturated: the battery takes the rest regardless of SoC
        rest = take(&mut u.p_b_dis, rest, eta);
        if soc < 100.0 {
            give(&mut u.p_b_ch, rest, eta, limits.p_b_ch_max);
        }
    } else if surplus < 0.0 {
        let mut rest = -surplus;
        rest = take(&mut u.p_g_sup, rest, 1.0);
        rest = give(&mut u.p_g_dem, rest, 1.0, limits.p_g_dem_max);
        rest = take(&mut u.p_b_ch, rest, eta);
        give(&mut u.p_b_dis, rest, eta, limits.p_b_dis_max);
    }
    let residual = node_residual(&u, ctx);
    RebalanceOutcome {
        setpoints: u,
        residual,
        saturated: residual.abs() > limits.eps_el,
    }
}

/// Result of one post-processing pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchOutcome {
    pub setpoints: EnergyFlowSetpoints,
    pub mode: HpMode,
    /// Heat pump kept on by its minimum up time against the plan.
    pub forced_on: bool,
    /// Heat pump kept off by its minimum down time against the plan.
    pub held_off: bool,
    pub residual: f64,
    pub saturated: bool,
    /// Heating rod or heat pump cut back because the grid could not cover
    /// the deficit.
    pub grid_guard: bool,
}

/// Stateful post-processor; one `process` call per control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatcher {
    pub limits: ActuatorLimits,
    pub state: ActuatorState,
    pub step_minutes: f64,
    /// Requested but undelivered sub-minimum heat (kWh) for SH and DHW.
    pub pending: [f64; 2],
}

impl Dispatcher {
    pub fn new(limits: ActuatorLimits, step_minutes: f64) -> Result<Self> {
        limits.validate(step_minutes)?;
        Ok(Self {
            limits,
            state: ActuatorState::default(),
            step_minutes,
            pending: [0.0; 2],
        })
    }

    /// Quantises, arbitrates the heat-pump mode, applies minimum times and
    /// rebalances. `soc` is the measured pre-step SoC.
    pub fn process(
        &mut self,
        planned: &EnergyFlowSetpoints,
        ctx: &ElectricContext,
        soc: f64,
    ) -> DispatchOutcome {
        let step_h = self.step_minutes / 60.0;
        let req_sh = self.pooled(0, planned.q_hp_sh, ctx.cop_sh);
        let req_dhw = self.pooled(1, planned.q_hp_dhw, ctx.cop_dhw);
        let l = &self.limits;
        let q_hr = quantize_heating_rod(planned.q_hr, l);
        let sh = apply_hp_min_power(req_sh, ctx.cop_sh, l);
        let dhw = apply_hp_min_power(req_dhw, ctx.cop_dhw, l);
        // The modes are exclusive; hot water wins.
        let (mut mode, mut sh, mut dhw) = if dhw > 0.0 {
            (HpMode::Dhw, 0.0, dhw)
        } else if sh > 0.0 {
            (HpMode::Sh, sh, 0.0)
        } else {
            (HpMode::Off, 0.0, 0.0)
        };
        let desired = mode != HpMode::Off;
        let on = enforce_min_times(desired, &self.state, l);
        let forced_on = on && !desired;
        let held_off = desired && !on;
        if forced_on {
            mode = match self.state.current_mode {
                HpMode::Dhw => HpMode::Dhw,
                _ => HpMode::Sh,
            };
            match mode {
                HpMode::Dhw => dhw = ctx.cop_dhw * l.p_hp_el_min,
                _ => sh = ctx.cop_sh * l.p_hp_el_min,
            }
        }
        if held_off {
            mode = HpMode::Off;
            sh = 0.0;
            dhw = 0.0;
        }
        // Battery power the SoC can sustain for a whole step.
        let e_b = soc.clamp(0.0, 100.0) / 100.0 * l.battery_capacity;
        let bl = ActuatorLimits {
            p_b_dis_max: l.p_b_dis_max.min(e_b / step_h),
            p_b_ch_max: l.p_b_ch_max.min((l.battery_capacity - e_b) / step_h),
            ..l.clone()
        };
        let mut realized = RealizedThermal {
            q_hp_sh: sh,
            q_hp_dhw: dhw,
            q_hr,
        };
        let mut out = rebalance(planned, &realized, soc, ctx.p_pv, ctx, &bl);
        let mut grid_guard = false;
        while out.saturated && out.residual < 0.0 {
            if realized.q_hr > 0.0 {
                let lower = bl
                    .hr_stages
                    .iter()
                    .copied()
                    .filter(|&s| s < realized.q_hr)
                    .fold(0.0, f64::max);
                realized.q_hr = lower;
            } else if mode != HpMode::Off {
                mode = HpMode::Off;
                realized.q_hp_sh = 0.0;
                realized.q_hp_dhw = 0.0;
            } else {
                break;
            }
            grid_guard = true;
            out = rebalance(planned, &realized, soc, ctx.p_pv, ctx, &bl);
        }
        for (p, q) in self
            .pending
            .iter_mut()
            .zip([realized.q_hp_sh, realized.q_hp_dhw])
        {
            *p = (*p - q * step_h).max(0.0);
        }
        self.state
            .advance(mode != HpMode::Off, mode, self.step_minutes);
        DispatchOutcome {
            setpoints: out.setpoints,
            mode,
            forced_on,
            held_off,
            residual: out.residual,
            saturated: out.saturated,
            grid_guard,
        }
    }
}

impl Dispatcher {
    /// Request after pooling: a sub-minimum plan adds to the pool and is
    /// raised to the minimum output once the pool holds a full step of it.
    fn pooled(&mut self, i: usize, q: f64, cop: f64) -> f64 {
        let q_min = cop * self.limits.p_hp_el_min;
        if !self.limits.pool_sub_minimum || q <= 0.0 || q >= q_min {
            self.pending[i] = 0.0;
            return q;
        }
        self.pending[i] += q * self.step_minutes / 60.0;
        if self.pending[i] >= q_min * self.step_minutes / 60.0 - 1e-9 {
            q_min
        } else {
            q
        }
    }
}

/// Heat-pump electric power of a set point (kW).
pub fn hp_electric(u: &EnergyFlowSetpoints, ctx: &ElectricContext) -> f64 {
    electric_demand_hp(u.q_hp_sh, u.q_hp_dhw, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn limits() -> ActuatorLimits {
        ActuatorLimits::default()
    }

    fn ctx(p_pv: f64, eta: f64) -> ElectricContext {
        ElectricContext {
            p_l: 0.5,
            p_pv,
            eta,
            cop_sh: 3.0,
            cop_dhw: 2.5,
        }
    }

    /// A plan with the heat pump at 1.2 kW electric, balanced by `fill`.
    fn plan(c: &ElectricContext, p_g_dem: f64) -> EnergyFlowSetpoints {
        let mut u = EnergyFlowSetpoints {
            q_hp_sh: 3.6,
            p_g_dem,
            ..Default::default()
        };
        let r = node_residual(&u, c);
        if r > 0.0 {
            u.p_b_ch = r / c.eta;
        } else {
            u.p_b_dis = -r / c.eta;
        }
        u
    }

    #[test]
    fn heating_rod_stages() {
        assert_eq!(quantize_heating_rod(5.1, &limits()), 4.0);
        assert_eq!(quantize_heating_rod(6.5, &limits()), 6.0);
        assert_eq!(quantize_heating_rod(1.9, &limits()), 0.0);
        assert_eq!(quantize_heating_rod(-0.3, &limits()), 0.0);
    }

    #[test]
    fn heat_pump_min_power() {
        assert_eq!(apply_hp_min_power(2.5, 3.0, &limits()), 0.0);
        assert_eq!(apply_hp_min_power(3.0, 3.0, &limits()), 3.0);
        assert_relative_eq!(
            apply_hp_min_power(12.0, 3.0, &limits()),
            11.1,
            epsilon = 1e-12
        );
        assert_eq!(apply_hp_min_power(0.0, 3.0, &limits()), 0.0);
    }

    #[test]
    fn min_times() {
        let l = limits();
        let on10 = ActuatorState {
            hp_on: true,
            time_in_state: 10.0,
            current_mode: HpMode::Sh,
        };
        assert!(enforce_min_times(false, &on10, &l));
        let off45 = ActuatorState {
            hp_on: false,
            time_in_state: 45.0,
            current_mode: HpMode::Off,
        };
        assert!(enforce_min_times(true, &off45, &l));
        let off15 = ActuatorState {
            time_in_state: 15.0,
            ..off45
        };
        assert!(!enforce_min_times(true, &off15, &l));
    }

    #[test]
    fn unchanged_plan_passes_through() {
        let c = ctx(3.0, 0.95);
        let u = plan(&c, 0.0);
        let realized = RealizedThermal {
            q_hp_sh: u.q_hp_sh,
            q_hp_dhw: u.q_hp_dhw,
            q_hr: u.q_hr,
        };
        let out = rebalance(&u, &realized, 60.0, c.p_pv, &c, &limits());
        assert_eq!(out.setpoints, u);
        assert!(!out.saturated);
    }

    #[test]
    fn freed_power_charges_battery_below_threshold() {
        let c = ctx(3.0, 1.0);
        let u = plan(&c, 0.0);
        let out = rebalance(&u, &RealizedThermal::default(), 60.0, 3.0, &c, &limits());
        assert_relative_eq!(out.setpoints.p_b_ch - u.p_b_ch, 1.2, epsilon = 1e-12);
        assert_eq!(out.setpoints.p_g_sup, 0.0);
        // with inverter losses the battery side takes P_add / eta
        let c = ctx(3.0, 0.95);
        let u = plan(&c, 0.0);
        let out = rebalance(&u, &RealizedThermal::default(), 60.0, 3.0, &c, &limits());
        assert_relative_eq!(out.setpoints.p_b_ch - u.p_b_ch, 1.2 / 0.95, epsilon = 1e-12);
        assert!(out.residual.abs() < 1e-12);
    }

    #[test]
    fn freed_power_exported_above_threshold() {
        let c = ctx(3.0, 1.0);
        let u = plan(&c, 0.0);
        let out = rebalance(&u, &RealizedThermal::default(), 95.0, 3.0, &c, &limits());
        assert_relative_eq!(out.setpoints.p_g_sup, 1.2, epsilon = 1e-12);
        assert_eq!(out.setpoints.p_b_ch, u.p_b_ch);
    }

    #[test]
    fn weak_pv_reduces_grid_then_discharge() {
        let c = ctx(0.5, 1.0);
        let u = plan(&c, 0.8);
        assert_relative_eq!(u.p_b_dis, 0.4, epsilon = 1e-12);
        let out = rebalance(&u, &RealizedThermal::default(), 60.0, 0.5, &c, &limits());
        assert_eq!(out.setpoints.p_g_dem, 0.0);
        assert_relative_eq!(u.p_b_dis - out.setpoints.p_b_dis, 0.4, epsilon = 1e-12);
        assert!(out.residual.abs() < 1e-12);
    }

    #[test]
    fn forced_on_is_covered_by_grid() {
        let c = ctx(0.0, 0.95);
        let mut d = Dispatcher::new(limits(), 15.0).unwrap();
        let mut u = EnergyFlowSetpoints {
            q_hp_sh: 6.0,
            ..Default::default()
        };
        u.p_g_dem = -node_residual(&u, &c);
        let first = d.process(&u, &c, 50.0);
        assert_eq!(first.mode, HpMode::Sh);
        let mut idle = EnergyFlowSetpoints::default();
        idle.p_g_dem = -node_residual(&idle, &c);
        let second = d.process(&idle, &c, 50.0);
        assert!(second.forced_on);
        assert_relative_eq!(second.setpoints.q_hp_sh, 3.0, epsilon = 1e-12);
        assert_relative_eq!(
            second.setpoints.p_g_dem,
            idle.p_g_dem + 1.0,
            epsilon = 1e-12
        );
        let third = d.process(&idle, &c, 50.0);
        assert!(!third.forced_on);
        assert_eq!(third.mode, HpMode::Off);
    }

    #[test]
    fn dhw_takes_priority() {
        let c = ctx(5.0, 0.95);
        let mut d = Dispatcher::new(limits(), 15.0).unwrap();
        let u = EnergyFlowSetpoints {
            q_hp_sh: 4.0,
            q_hp_dhw: 4.0,
            p_g_sup: 1.0,
            ..Default::default()
        };
        let out = d.process(&u, &c, 50.0);
        assert_eq!(out.mode, HpMode::Dhw);
        assert_eq!(out.setpoints.q_hp_sh, 0.0);
        assert_eq!(out.setpoints.q_hp_dhw, 4.0);
    }

    #[test]
    fn grid_saturation_is_reported() {
        let c = ElectricContext {
            p_l: 12.0,
            p_pv: 0.0,
            eta: 0.95,
            cop_sh: 3.0,
            cop_dhw: 2.5,
        };
        let l = ActuatorLimits {
            p_b_dis_max: 0.0,
            ..limits()
        };
        let u = EnergyFlowSetpoints::default();
        let out = rebalance(&u, &RealizedThermal::default(), 50.0, 0.0, &c, &l);
        assert!(out.saturated);
        assert_eq!(out.setpoints.p_g_dem, 7.5);
        assert_relative_eq!(out.residual, -4.5, epsilon = 1e-12);
    }

    #[test]
    fn grid_guard_steps_the_rod_down() {
        let c = ElectricContext {
            p_l: 2.0,
            p_pv: 0.0,
            eta: 0.95,
            cop_sh: 3.0,
            cop_dhw: 2.5,
        };
        let mut d = Dispatcher::new(limits(), 15.0).unwrap();
        // plan leans on a battery that is empty
        let u = EnergyFlowSetpoints {
            q_hr: 6.0,
            q_hp_dhw: 5.0,
            p_g_dem: 6.0,
            p_b_dis: 4.0 / 0.95,
            ..Default::default()
        };
        let out = d.process(&u, &c, 0.0);
        assert!(out.grid_guard);
        assert!(!out.saturated);
        assert_eq!(out.setpoints.p_b_dis, 0.0);
        assert_eq!(out.setpoints.q_hr, 2.0);
        assert_eq!(out.mode, HpMode::Dhw);
        assert!(out.setpoints.p_g_dem <= 7.5);
    }

    #[test]
    fn full_battery_is_not_charged() {
        let c = ctx(3.0, 1.0);
        let mut d = Dispatcher::new(limits(), 15.0).unwrap();
        let u = plan(&c, 0.0);
        let out = d.process(&u, &c, 100.0);
        assert_eq!(out.setpoints.p_b_ch, 0.0);
        assert!(out.residual.abs() < 1e-9);
    }

    #[test]
    fn sub_minimum_requests_pool_into_a_pulse() {
        let c = ctx(0.0, 0.95);
        let mut d = Dispatcher::new(limits(), 15.0).unwrap();
        // 1 kW thermal against a 3 kW minimum: every third step runs
        let u = EnergyFlowSetpoints {
            q_hp_sh: 1.0,
            p_g_dem: 0.5 + 1.0 / 3.0,
            ..Default::default()
        };
        let on: Vec<bool> = (0..2)
            .map(|_| d.process(&u, &c, 50.0).mode == HpMode::Sh)
            .collect();
        assert_eq!(on, [false, false]);
        let third = d.process(&u, &c, 50.0);
        assert_eq!(third.setpoints.q_hp_sh, 3.0);
        assert!(!third.saturated);
        assert_relative_eq!(d.pending[0], 0.0, epsilon = 1e-12);

        let mut plain = Dispatcher::new(
            ActuatorLimits {
                pool_sub_minimum: false,
                ..limits()
            },
            15.0,
        )
        .unwrap();
        assert!((0..4).all(|_| plain.process(&u, &c, 50.0).mode == HpMode::Off));
    }

    #[test]
    fn invalid_limits_rejected() {
        let l = ActuatorLimits {
            hr_stages: vec![2.0, 4.0],
            ..limits()
        };
        assert!(l.validate(15.0).is_err());
        let l = ActuatorLimits {
            min_up: 10.0,
            ..limits()
        };
        assert!(l.validate(15.0).is_err());
    }
}
