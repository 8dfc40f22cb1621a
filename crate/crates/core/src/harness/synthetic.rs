//! Deterministic synthetic spring scenario: a week of load history followed
//! by four evaluation days with two overcast and two sunny days.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forecast::HISTORY_DEPTH;
use crate::sim::{PlantScenario, ScenarioStep};
use crate::Result;

/// Hot-water draws of a medium household (clock time, kWh).
pub const TAPPING_PROFILE_M: [(u32, u32, f64); 23] = [
    (7, 0, 0.105),
    (7, 5, 1.4),
    (7, 30, 0.105),
    (8, 1, 0.105),
    (8, 15, 0.105),
    (8, 30, 0.105),
    (8, 45, 0.105),
    (9, 0, 0.105),
    (9, 30, 0.105),
    (10, 30, 0.105),
    (11, 30, 0.105),
    (11, 45, 0.105),
    (12, 45, 0.315),
    (14, 30, 0.105),
    (15, 30, 0.105),
    (16, 30, 0.105),
    (18, 0, 0.105),
    (18, 15, 0.105),
    (18, 30, 0.105),
    (19, 0, 0.105),
    (20, 30, 0.735),
    (21, 15, 0.105),
    (21, 30, 1.4),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// First evaluation day; the history week precedes it.
    pub start: NaiveDateTime,
    /// Daily PV energy targets on the DC side (kWh), one per evaluation day.
    pub daily_pv_kwh: Vec<f64>,
    pub pv_peak_kw: f64,
    pub pv_derate: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
    pub mean_t_amb: f64,
    pub t_amb_swing: f64,
    /// Clock hour of the daily temperature minimum.
    pub coldest_h: f64,
    /// SH load per kelvin below the heating limit (kW/K).
    pub sh_gain: f64,
    pub heating_limit: f64,
    /// Passive solar gains: SH load reduction per W/m² of irradiance (kW).
    pub solar_gain: f64,
    pub morning_boost_kw: f64,
    pub base_load_kw: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2019, 3, 19)
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .expect("valid date"),
            daily_pv_kwh: vec![10.0, 12.0, 26.0, 28.0],
            pv_peak_kw: 6.0,
            pv_derate: 0.85,
            sunrise_h: 7.0,
            sunset_h: 18.0,
            mean_t_amb: 7.2,
            t_amb_swing: 4.0,
            coldest_h: 5.0,
            sh_gain: 0.25,
            heating_limit: 21.0,
            solar_gain: 0.004,
            morning_boost_kw: 0.6,
            base_load_kw: 0.25,
            noise: 0.05,
            seed: 7,
        }
    }
}

fn hour(t: NaiveDateTime) -> f64 {
    f64::from(t.hour()) + f64::from(t.minute()) / 60.0
}

/// Household electricity: base load, breakfast, lunch and evening peaks.
fn household(h: f64, base: f64) -> f64 {
    let bump = |c: f64, w: f64, a: f64| a * (-((h - c) / w).powi(2)).exp();
    base + bump(7.5, 0.7, 0.6) + bump(12.5, 0.8, 0.7) + bump(19.0, 1.5, 0.8)
}

/// DHW demand per 15-minute step (kW) from the tapping profile.
fn dhw_load(t: NaiveDateTime) -> f64 {
    let start = t.hour() * 60 + t.minute();
    TAPPING_PROFILE_M
        .iter()
        .filter(|(h, m, _)| (start..start + 15).contains(&(h * 60 + m)))
        .map(|(_, _, e)| e / 0.25)
        .sum()
}

pub fn synthetic_spring_scenario(cfg: &SyntheticConfig) -> Result<PlantScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let history_days = (HISTORY_DEPTH / 96) as i64;
    let first = cfg.start - Duration::days(history_days);
    let days = history_days + cfg.daily_pv_kwh.len() as i64;
    let day_len = cfg.sunset_h - cfg.sunrise_h;
    // ∫ sin over the day = 2/π · peak · length
    let kwh_per_peak_wm2 = cfg.pv_peak_kw * cfg.pv_derate / 1000.0 * day_len * 2.0 / PI;
    let (mut times, mut steps) = (Vec::new(), Vec::new());
    for k in 0..days * 96 {
        let t = first + Duration::minutes(15 * k);
        // Sample mid-step so the daily sums match the targets.
        let h = hour(t) + 0.125;
        let pv_target = usize::try_from(k / 96 - history_days)
            .ok()
            .and_then(|day| cfg.daily_pv_kwh.get(day).copied())
            .unwrap_or_else(|| {
                cfg.daily_pv_kwh.iter().sum::<f64>() / cfg.daily_pv_kwh.len().max(1) as f64
            });
        let g = if h > cfg.sunrise_h && h < cfg.sunset_h {
            let shape = (PI * (h - cfg.sunrise_h) / day_len).sin();
            let peak = pv_target / kwh_per_peak_wm2;
            let cloud = if pv_target < 15.0 {
                1.0 + 0.3 * rng.random_range(-1.0..1.0)
            } else {
                1.0
            };
            (peak * shape * cloud).max(0.0)
        } else {
            0.0
        };
        let t_amb = cfg.mean_t_amb
            - cfg.t_amb_swing * (2.0 * PI * (h - cfg.coldest_h) / 24.0).cos()
            + 0.3 * rng.random_range(-1.0..1.0);
        let mut q_sh = (cfg.sh_gain * (cfg.heating_limit - t_amb) - cfg.solar_gain * g).max(0.0);
        if (5.5..8.0).contains(&h) {
            q_sh += cfg.morning_boost_kw;
        }
        let jitter = |rng: &mut ChaCha8Rng| 1.0 + cfg.noise * rng.random_range(-1.0..1.0);
        let q_l_sh = (q_sh * jitter(&mut rng)).max(0.0);
        let p_l = household(h, cfg.base_load_kw) * jitter(&mut rng);
        times.push(t);
        steps.push(ScenarioStep {
            t_amb,
            g,
            q_l_sh,
            q_l_dhw: dhw_load(t),
            p_l,
        });
    }
    PlantScenario::new(times, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pv_power;

    #[test]
    fn tapping_profile_totals_medium_household() {
        let total: f64 = TAPPING_PROFILE_M.iter().map(|e| e.2).sum();
        assert!((total - 5.845).abs() < 1e-9);
    }

    #[test]
    fn evaluation_days_hit_pv_targets_and_mean_ambient() {
        let cfg = SyntheticConfig::default();
        let s = synthetic_spring_scenario(&cfg).unwrap();
        assert_eq!(s.len(), 11 * 96);
        let eval = s.slice(HISTORY_DEPTH, 4 * 96);
        for (d, target) in cfg.daily_pv_kwh.iter().enumerate() {
            let e: f64 = eval.steps[d * 96..(d + 1) * 96]
                .iter()
                .map(|st| pv_power(st.g, cfg.pv_peak_kw, cfg.pv_derate) * 0.25)
                .sum();
            assert!((e - target).abs() / target < 0.1, "day {d}: {e}");
        }
        let mean_t = eval.steps.iter().map(|s| s.t_amb).sum::<f64>() / eval.len() as f64;
        assert!((mean_t - 7.2).abs() < 0.3, "{mean_t}");
        let dhw_day: f64 = eval.steps[..96].iter().map(|s| s.q_l_dhw * 0.25).sum();
        assert!((dhw_day - 5.845).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = synthetic_spring_scenario(&SyntheticConfig::default()).unwrap();
        let b = synthetic_spring_scenario(&SyntheticConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
