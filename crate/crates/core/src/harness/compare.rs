//! Heat-pump reactivation delay of a slurry-filled SH zone against plain
//! water.
//!
//! The SH zone starts warm on the freezing branch and is discharged by a
//! constant load with the heat pump off. The heat pump would restart once
//! the zone cools to `reactivation_temp`; the delay is how much later that
//! happens with slurry than with water of the same mass.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::model::EnergyFlowSetpoints;
use crate::pcs::Branch;
use crate::sim::{InitialConditions, Plant, PlantConfig, ScenarioStep};
use crate::{Error, Result, KJ_PER_KWH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub plant: PlantConfig,
    pub load_kw: f64,
    /// Latent capacity of the SH zone at the reference mass fraction (kWh);
    /// fixes the zone mass.
    pub latent_kwh: f64,
    pub reference_w_p: f64,
    pub start_temp: f64,
    pub reactivation_temp: f64,
    pub mass_fractions: Vec<f64>,
    pub max_hours: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            load_kw: 1.5,
            latent_kwh: 2.3,
            reference_w_p: 0.3,
            start_temp: 32.0,
            reactivation_temp: 24.0,
            mass_fractions: vec![0.0, 0.15, 0.3],
            max_hours: 24.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeRun {
    pub w_p: f64,
    pub latent_kwh: f64,
    /// Hours until the zone reached the reactivation temperature.
    pub reactivation_h: f64,
    /// Reactivation time minus the water run's (h).
    pub delay_h: f64,
    /// Zone temperature every inner step.
    pub temperatures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub m_sh: f64,
    pub load_kw: f64,
    pub inner_minutes: i64,
    pub runs: Vec<DischargeRun>,
    /// Delay of the reference mass fraction.
    pub delay_h: f64,
}

fn discharge(cfg: &CompareConfig, w_p: f64, m_sh: f64) -> Result<(f64, f64, Vec<f64>)> {
    let props = cfg.plant.props.with_mass_fraction(w_p)?;
    let latent = m_sh * props.latent_heat() / KJ_PER_KWH;
    let mut plant_cfg = PlantConfig {
        props,
        initial: InitialConditions {
            t_sh: cfg.start_temp,
            branch_sh: Branch::Freezing,
            ..cfg.plant.initial
        },
        ..cfg.plant.clone()
    };
    plant_cfg.geom.m_sh = m_sh;
    let dt_h = plant_cfg.inner_minutes as f64 / 60.0;
    let mut plant = Plant::new(plant_cfg)?;
    let u = EnergyFlowSetpoints {
        q_sh: cfg.load_kw,
        ..Default::default()
    };
    let d = ScenarioStep {
        q_l_sh: cfg.load_kw,
        t_amb: 10.0,
        ..Default::default()
    };
    let t0 = NaiveDate::from_ymd_opt(2019, 3, 20)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let mut temps = vec![plant.t_sh()];
    let steps = (cfg.max_hours * 4.0).ceil() as i64;
    for k in 0..steps {
        let r = plant.advance(t0 + Duration::minutes(15 * k), &u, &d)?;
        for row in &r.rows {
            let prev = *temps.last().expect("seeded");
            temps.push(row.t_sh);
            if row.t_sh <= cfg.reactivation_temp {
                // interpolate inside the inner step
                let i = (temps.len() - 2) as f64;
                let frac = (prev - cfg.reactivation_temp) / (prev - row.t_sh);
                return Ok(((i + frac) * dt_h, latent, temps));
            }
        }
    }
    Err(Error::config(format!(
        "zone did not cool to {} °C within {} h",
        cfg.reactivation_temp, cfg.max_hours
    )))
}

pub fn compare_pcs_vs_water(cfg: &CompareConfig) -> Result<CompareReport> {
    if !(cfg.load_kw > 0.0 && cfg.latent_kwh > 0.0 && cfg.reference_w_p > 0.0) {
        return Err(Error::config(
            "load, latent capacity and reference mass fraction must be positive",
        ));
    }
    if !(cfg.start_temp > cfg.reactivation_temp) {
        return Err(Error::config(
            "start temperature must exceed the reactivation temperature",
        ));
    }
    let reference = cfg.plant.props.with_mass_fraction(cfg.reference_w_p)?;
    let m_sh = cfg.latent_kwh * KJ_PER_KWH / reference.latent_heat();
    let (t_water, _, _) = discharge(cfg, 0.0, m_sh)?;
    let mut runs = Vec::new();
    for &w in &cfg.mass_fractions {
        let (t, latent, temperatures) = discharge(cfg, w, m_sh)?;
        runs.push(DischargeRun {
            w_p: w,
            latent_kwh: latent,
            reactivation_h: t,
            delay_h: t - t_water,
            temperatures,
        });
    }
    let (t_ref, _, _) = discharge(cfg, cfg.reference_w_p, m_sh)?;
    Ok(CompareReport {
        m_sh,
        load_kw: cfg.load_kw,
        inner_minutes: cfg.plant.inner_minutes,
        runs,
        delay_h: t_ref - t_water,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn water_against_water_has_no_delay() {
        let cfg = CompareConfig {
            reference_w_p: 0.3,
            mass_fractions: vec![0.0, 0.0],
            ..Default::default()
        };
        let r = compare_pcs_vs_water(&cfg).unwrap();
        assert!(r.runs.iter().all(|run| run.delay_h == 0.0));
    }

    #[test]
    fn delay_grows_with_paraffin_share() {
        let r = compare_pcs_vs_water(&CompareConfig::default()).unwrap();
        let d: Vec<f64> = r.runs.iter().map(|x| x.delay_h).collect();
        assert!(d[0] == 0.0 && d[1] > 0.0 && d[2] > d[1], "{d:?}");
        assert!((r.m_sh - 563.0).abs() < 1.0);
    }
}
