//! Time-varying cost weights.

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::forecast::{step_duration, ForecastBundle};
use crate::model::{input, NU, NX};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    SelfConsumption,
    Cost,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self-consumption" => Ok(Self::SelfConsumption),
            "cost" => Ok(Self::Cost),
            other => Err(Error::config(format!("unknown objective '{other}'"))),
        }
    }
}

/// Tracking weights on SH, DHW, BLD and battery energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateWeights {
    pub e_sh: f64,
    pub e_dhw: f64,
    pub e_bld: f64,
    pub e_b: f64,
}

impl StateWeights {
    pub fn to_array(self) -> [f64; NX] {
        [self.e_sh, self.e_dhw, self.e_bld, self.e_b]
    }
}

/// Weighting rules from which per-step weights are resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningSchedule {
    pub objective: Objective,
    /// Day window `[day_start_h, day_end_h)` in hours of the day.
    pub day_start_h: f64,
    pub day_end_h: f64,
    pub day: StateWeights,
    pub night: StateWeights,
    /// Heat-pump weights are these numerators divided by the step COP.
    pub hp_sh_numerator: f64,
    pub hp_dhw_numerator: f64,
    pub r_hr: f64,
    pub r_b_ch: f64,
    pub r_b_dis: f64,
    /// Grid-demand weight is `factor · tariff_dem`, with the factor picked by
    /// forecast PV power against `pv_threshold_kw`.
    pub g_dem_factor_low_pv: f64,
    pub g_dem_factor_high_pv: f64,
    pub pv_threshold_kw: f64,
    pub g_sup_factor: f64,
    pub e_sh_set: f64,
    pub e_dhw_set: f64,
    pub e_b_set: f64,
}

impl Default for TuningSchedule {
    fn default() -> Self {
        Self {
            objective: Objective::SelfConsumption,
            day_start_h: 6.0,
            day_end_h: 22.0,
            day: StateWeights {
                e_sh: 3.0,
                e_dhw: 5.0,
                e_bld: 1.0,
                e_b: 3.0,
            },
            night: StateWeights {
                e_sh: 0.01,
                e_dhw: 0.5,
                e_bld: 0.1,
                e_b: 1.0,
            },
            hp_sh_numerator: 5.0,
            hp_dhw_numerator: 20.0,
            r_hr: 250.0,
            r_b_ch: 1.0,
            r_b_dis: 1.0,
            g_dem_factor_low_pv: 1e3,
            g_dem_factor_high_pv: 1e4,
            pv_threshold_kw: 1.0,
            g_sup_factor: 10.0,
            e_sh_set: 8.4,
            e_dhw_set: 3.6,
            e_b_set: 21.0,
        }
    }
}

impl TuningSchedule {
    /// Preset for an objective. The cost preset drops the PV-dependent
    /// demand weight and the day/night battery bias, leaving tariffs to
    /// decide when to import.
    pub fn for_objective(objective: Objective) -> Self {
        match objective {
            Objective::SelfConsumption => Self::default(),
            Objective::Cost => {
                let base = Self::default();
                Self {
                    objective,
                    g_dem_factor_high_pv: base.g_dem_factor_low_pv,
                    day: StateWeights {
                        e_b: 1.0,
                        ..base.day
                    },
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.day.to_array().as_slice(),
            self.night.to_array().as_slice(),
            &[
                self.hp_sh_numerator,
                self.hp_dhw_numerator,
                self.r_hr,
                self.r_b_ch,
                self.r_b_dis,
                self.g_dem_factor_low_pv,
                self.g_dem_factor_high_pv,
                self.g_sup_factor,
            ],
        ]
        .concat();
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("tuning weights must be non-negative"));
        }
        if !(0.0..=24.0).contains(&self.day_start_h) || !(0.0..=24.0).contains(&self.day_end_h) {
            return Err(Error::config("day window must lie within 0..24 h"));
        }
        Ok(())
    }

    pub fn is_day(&self, t: NaiveDateTime) -> bool {
        let h = f64::from(t.hour()) + f64::from(t.minute()) / 60.0;
        if self.day_start_h <= self.day_end_h {
            h >= self.day_start_h && h < self.day_end_h
        } else {
            h >= self.day_start_h || h < self.day_end_h
        }
    }

    /// Per-step weights over the horizon starting at `start`.
    pub fn resolve(&self, start: NaiveDateTime, f: &ForecastBundle) -> HorizonWeights {
        let n = f.len();
        let state = (0..=n)
            .map(|i| {
                let t = start + step_duration() * i as i32;
                if self.is_day(t) { self.day } else { self.night }.to_array()
            })
            .collect();
        let input_w = (0..n)
            .map(|i| {
                let mut w = [0.0; NU];
                w[input::Q_HP_SH] = self.hp_sh_numerator / f.cop_sh[i];
                w[input::Q_HP_DHW] = self.hp_dhw_numerator / f.cop_dhw[i];
                w[input::Q_HR] = self.r_hr;
                w[input::P_B_CH] = self.r_b_ch;
                w[input::P_B_DIS] = self.r_b_dis;
                let factor = if f.p_pv[i] <= self.pv_threshold_kw {
                    self.g_dem_factor_low_pv
                } else {
                    self.g_dem_factor_high_pv
                };
                w[input::P_G_DEM] = factor * f.tariff_dem[i];
                w[input::P_G_SUP] = self.g_sup_factor * f.tariff_sup[i];
                w
            })
            .collect();
        HorizonWeights {
            state,
            input: input_w,
            set_points: [self.e_sh_set, self.e_dhw_set, 0.0, self.e_b_set],
        }
    }
}

/// Resolved weights: `state` has `N + 1` entries, `input` has `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonWeights {
    pub state: Vec<[f64; NX]>,
    pub input: Vec<[f64; NU]>,
    pub set_points: [f64; NX],
}

impl HorizonWeights {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.state.len() != n + 1 || self.input.len() != n {
            return Err(Error::Dimension(format!(
                "weights for {} states and {} inputs, horizon {n}",
                self.state.len(),
                self.input.len()
            )));
        }
        let neg = self
            .state
            .iter()
            .flatten()
            .chain(self.input.iter().flatten())
            .any(|w| !(*w >= 0.0));
        if neg {
            return Err(Error::config("weights must be non-negative"));
        }
        Ok(())
    }

    pub fn uniform(n: usize, state: [f64; NX], input: [f64; NU], set_points: [f64; NX]) -> Self {
        Self {
            state: vec![state; n + 1],
            input: vec![input; n],
            set_points,
        }
    }
}
