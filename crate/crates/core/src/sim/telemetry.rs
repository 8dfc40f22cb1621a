//! Per-minute plant log.
//!
//! Column schema (one row per inner step, powers in kW, energies in kWh,
//! temperatures in °C):
//!
//! | column | meaning |
//! |---|---|
//! | `timestamp` | start of the inner step |
//! | `t_amb`, `g` | ambient temperature, irradiance (W/m²) |
//! | `p_pv` | PV output on the DC side |
//! | `eta` | inverter efficiency applied to PV and battery |
//! | `p_l` | household electric load |
//! | `q_l_sh`, `q_l_dhw` | building and hot-water heat demand |
//! | `q_hp_sh`, `q_hp_dhw`, `q_hr` | heat delivered by heat pump and rod |
//! | `q_sh` | heat passed from the SH zone to the building |
//! | `p_hp_el`, `cop` | heat-pump electric power and active COP |
//! | `p_b_ch`, `p_b_dis` | realised battery charge/discharge |
//! | `p_g_dem`, `p_g_sup` | realised grid import/export |
//! | `grid_residual` | realised minus scheduled net grid power |
//! | `soc` | battery state of charge (%) |
//! | `t_sh`, `t_dhw`, `branch_sh`, `branch_dhw` | zone temperatures and hysteresis branches |
//! | `e_sh`, `e_dhw`, `e_bld` | true stored energies and building balance |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pcs::Branch;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub timestamp: String,
    pub t_amb: f64,
    pub g: f64,
    pub p_pv: f64,
    pub eta: f64,
    pub p_l: f64,
    pub q_l_sh: f64,
    pub q_l_dhw: f64,
    pub q_hp_sh: f64,
    pub q_hp_dhw: f64,
    pub q_hr: f64,
    pub q_sh: f64,
    pub p_hp_el: f64,
    pub cop: f64,
    pub p_b_ch: f64,
    pub p_b_dis: f64,
    pub p_g_dem: f64,
    pub p_g_sup: f64,
    pub grid_residual: f64,
    pub soc: f64,
    pub t_sh: f64,
    pub t_dhw: f64,
    pub branch_sh: Branch,
    pub branch_dhw: Branch,
    pub e_sh: f64,
    pub e_dhw: f64,
    pub e_bld: f64,
}

impl TelemetryRow {
    /// PV power on the AC side.
    pub fn pv_ac(&self) -> f64 {
        self.eta * self.p_pv
    }

    pub fn heat_generated(&self) -> f64 {
        self.q_hp_sh + self.q_hp_dhw + self.q_hr
    }

    pub fn heat_load(&self) -> f64 {
        self.q_l_sh + self.q_l_dhw
    }

    pub fn hp_on(&self) -> bool {
        self.p_hp_el > 0.0
    }
}

pub fn write_telemetry<W: Write>(rows: &[TelemetryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_telemetry<R: Read>(reader: R) -> Result<Vec<TelemetryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn save_telemetry(rows: &[TelemetryRow], path: &Path) -> Result<()> {
    write_telemetry(rows, std::fs::File::create(path)?)
}

pub fn load_telemetry(path: &Path) -> Result<Vec<TelemetryRow>> {
    read_telemetry(std::fs::File::open(path)?)
}
