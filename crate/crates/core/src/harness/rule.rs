//! Rule-based controller: thermostat deadbands on the two storage zones and
//! PV-first battery charging.
//!
//! * The heat pump serves the DHW zone when its energy drops below
//!   `dhw_on` of capacity and stops once it reaches `dhw_off`; the SH zone
//!   works the same way with `sh_on`/`sh_off`. Hot water has priority and
//!   the heat pump always runs at full electric power.
//! * The heating rod supports the DHW zone on its smallest stage while the
//!   zone is below `hr_on`.
//! * SH delivery follows the SH load forecast, corrected for the building
//!   balance and kept within the tracking band.
//! * A PV surplus charges the battery up to its power and SoC limits and the
//!   rest is exported. The battery is never discharged; the grid covers
//!   every deficit.
//!
//! Used both as the comparison baseline and as the fallback whenever the
//! QP does not return an optimal solution.

use serde::{Deserialize, Serialize};

use crate::dispatch::ActuatorLimits;
use crate::model::{node_residual, ElectricContext, EnergyFlowSetpoints, SystemState};
use crate::ocp::ConstraintSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub sh_on: f64,
    pub sh_off: f64,
    pub dhw_on: f64,
    pub dhw_off: f64,
    pub hr_on: f64,
    /// Building balance (kWh) corrected per hour of SH delivery.
    pub bld_gain: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            sh_on: 0.25,
            sh_off: 0.9,
            dhw_on: 0.4,
            dhw_off: 0.95,
            hr_on: 0.1,
            bld_gain: 0.5,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |on: f64, off: f64| 0.0 <= on && on < off && off <= 1.0;
        if !ok(self.sh_on, self.sh_off) || !ok(self.dhw_on, self.dhw_off) {
            return Err(Error::config(
                "thermostat thresholds need 0 <= on < off <= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.hr_on) || !(self.bld_gain >= 0.0) {
            return Err(Error::config(
                "rule heating-rod threshold or building gain out of range",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleController {
    pub cfg: RuleConfig,
    sh_active: bool,
    dhw_active: bool,
}

impl RuleController {
    pub fn new(cfg: RuleConfig) -> Self {
        Self {
            cfg,
            sh_active: false,
            dhw_active: false,
        }
    }

    /// Balanced set points for one step. `soc` in %, `q_l_sh` the SH load
    /// expected for the step.
    pub fn decide(
        &mut self,
        x: &SystemState,
        soc: f64,
        q_l_sh: f64,
        ctx: &ElectricContext,
        c: &ConstraintSet,
        limits: &ActuatorLimits,
    ) -> EnergyFlowSetpoints {
        let r = &self.cfg;
        let (sh_cap, dhw_cap) = (c.e_max[0], c.e_max[1]);
        if x.e_dhw < r.dhw_on * dhw_cap {
            self.dhw_active = true;
        } else if x.e_dhw >= r.dhw_off * dhw_cap {
            self.dhw_active = false;
        }
        if x.e_sh < r.sh_on * sh_cap {
            self.sh_active = true;
        } else if x.e_sh >= r.sh_off * sh_cap {
            self.sh_active = false;
        }

        let p_hp = limits.p_hp_el_max.min(c.hp_el_max);
        let mut u = EnergyFlowSetpoints::default();
        if self.dhw_active {
            u.q_hp_dhw = p_hp * ctx.cop_dhw;
        } else if self.sh_active {
            u.q_hp_sh = p_hp * ctx.cop_sh;
        }
        if x.e_dhw < r.hr_on * dhw_cap {
            u.q_hr = limits
                .hr_stages
                .iter()
                .copied()
                .find(|s| *s > 0.0)
                .unwrap_or(0.0)
                .min(c.q_hr_max);
        }
        let q_l = q_l_sh.min(c.q_sh_max);
        u.q_sh = (q_l - r.bld_gain * x.e_bld)
            .clamp(q_l - c.sigma_th, q_l + c.sigma_th)
            .clamp(0.0, c.q_sh_max);

        let surplus = node_residual(&u, ctx);
        if surplus > 0.0 {
            let room = if soc < 100.0 {
                limits.p_b_ch_max.min(c.p_b_ch_max)
            } else {
                0.0
            };
            u.p_b_ch = (surplus / ctx.eta).min(room);
            u.p_g_sup = (surplus - ctx.eta * u.p_b_ch).max(0.0);
        } else {
            u.p_g_dem = -surplus;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ctx(p_pv: f64) -> ElectricContext {
        ElectricContext {
            p_l: 0.5,
            p_pv,
            eta: 0.95,
            cop_sh: 4.0,
            cop_dhw: 3.0,
        }
    }

    #[test]
    fn thermostat_has_a_deadband() {
        let c = ConstraintSet::default();
        let l = ActuatorLimits::default();
        let mut rule = RuleController::new(RuleConfig::default());
        let mut x = SystemState {
            e_sh: 1.0,
            e_dhw: 3.0,
            e_bld: 0.0,
            e_b: 10.0,
        };
        let u = rule.decide(&x, 50.0, 1.0, &ctx(0.0), &c, &l);
        assert!(u.q_hp_sh > 0.0);
        x.e_sh = 5.0;
        assert!(rule.decide(&x, 50.0, 1.0, &ctx(0.0), &c, &l).q_hp_sh > 0.0);
        x.e_sh = 8.0;
        assert_eq!(rule.decide(&x, 50.0, 1.0, &ctx(0.0), &c, &l).q_hp_sh, 0.0);
        x.e_sh = 5.0;
        assert_eq!(rule.decide(&x, 50.0, 1.0, &ctx(0.0), &c, &l).q_hp_sh, 0.0);
    }

    #[test]
    fn surplus_charges_then_exports_and_deficit_imports() {
        let c = ConstraintSet::default();
        let l = ActuatorLimits::default();
        let mut rule = RuleController::new(RuleConfig::default());
        let x = SystemState {
            e_sh: 6.0,
            e_dhw: 3.0,
            e_bld: 0.0,
            e_b: 10.0,
        };
        let u = rule.decide(&x, 50.0, 1.0, &ctx(4.0), &c, &l);
        assert!(u.p_b_ch > 0.0 && u.p_g_sup == 0.0 && u.p_b_dis == 0.0);
        assert!(node_residual(&u, &ctx(4.0)).abs() < 1e-12);
        let u = rule.decide(&x, 100.0, 1.0, &ctx(4.0), &c, &l);
        assert_eq!(u.p_b_ch, 0.0);
        assert_relative_eq!(u.p_g_sup, 0.95 * 4.0 - 0.5, epsilon = 1e-12);
        let u = rule.decide(&x, 50.0, 1.0, &ctx(0.0), &c, &l);
        assert_relative_eq!(u.p_g_dem, 0.5, epsilon = 1e-12);
        assert_eq!(u.p_b_dis, 0.0);
    }

    #[test]
    fn delivery_corrects_building_balance_within_band() {
        let c = ConstraintSet::default();
        let l = ActuatorLimits::default();
        let mut rule = RuleController::new(RuleConfig::default());
        let x = SystemState {
            e_sh: 6.0,
            e_dhw: 3.0,
            e_bld: -3.0,
            e_b: 10.0,
        };
        let u = rule.decide(&x, 50.0, 2.0, &ctx(0.0), &c, &l);
        assert_relative_eq!(u.q_sh, 2.0 + c.sigma_th, epsilon = 1e-12);
    }
}
