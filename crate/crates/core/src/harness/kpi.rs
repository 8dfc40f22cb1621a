//! Key performance indicators computed from plant telemetry.
//!
//! PV energy is counted on the AC side. Each minute it is split into direct
//! use by the household, heat pump and rod, charging of the battery, and
//! export, in that order, so the three parts always add up to the total.

use serde::{Deserialize, Serialize};

use crate::sim::TelemetryRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopBin {
    pub lower: f64,
    /// `None` for the open-ended last bin.
    pub upper: Option<f64>,
    pub heat_kwh: f64,
    pub electric_kwh: f64,
    pub hours: f64,
    pub cop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub time: String,
    pub what: String,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl SolveTimeStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        let p95 = s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(Self {
            count: n,
            mean_ms: s.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: p95,
            max_ms: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct KpiReport {
    pub hours: f64,
    pub pv_generated_kwh: f64,
    pub pv_direct_kwh: f64,
    pub pv_to_battery_kwh: f64,
    pub pv_exported_kwh: f64,
    /// Share of PV energy used on site (%).
    pub pv_self_consumption: f64,
    pub heat_generated_kwh: f64,
    pub heat_load_kwh: f64,
    /// Shares of heat generated and heat demanded while PV produces (%).
    pub heat_generated_pv_share: f64,
    pub heat_load_pv_share: f64,
    /// Difference of the two shares (percentage points) and the heat
    /// generation it corresponds to.
    pub heat_shifted_pp: f64,
    pub heat_shifted_kwh: f64,
    pub grid_import_kwh: f64,
    pub grid_export_kwh: f64,
    /// Share of grid import drawn while PV produces (%).
    pub grid_import_pv_share: f64,
    pub hp_electric_kwh: f64,
    pub hp_starts: usize,
    pub cop_by_ambient: Vec<CopBin>,
    pub cop_by_runtime: Vec<CopBin>,
    pub hp_activation_delay_vs_water_h: Option<f64>,
    pub violations: Vec<ConstraintViolation>,
    pub solve_time: Option<SolveTimeStats>,
}

/// Width of the ambient temperature bins (K).
pub const AMBIENT_BIN_WIDTH: f64 = 5.0;
/// Runtime bin edges (min since the heat pump last switched on).
pub const RUNTIME_EDGES: [f64; 6] = [0.0, 15.0, 30.0, 60.0, 120.0, 240.0];

fn share(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        (100.0 * part / total).clamp(0.0, 100.0)
    } else {
        0.0
    }
}

fn row_hours(rows: &[TelemetryRow]) -> f64 {
    // Telemetry is written on a fixed inner grid; infer it from the first
    // two timestamps and fall back to one minute.
    rows.get(0..2)
        .and_then(|w| {
            let a = crate::forecast::parse_timestamp(&w[0].timestamp).ok()?;
            let b = crate::forecast::parse_timestamp(&w[1].timestamp).ok()?;
            let h = (b - a).num_seconds() as f64 / 3600.0;
            (h > 0.0).then_some(h)
        })
        .unwrap_or(1.0 / 60.0)
}

fn bin(lower: f64, upper: Option<f64>) -> CopBin {
    CopBin {
        lower,
        upper,
        heat_kwh: 0.0,
        electric_kwh: 0.0,
        hours: 0.0,
        cop: None,
    }
}

fn finish(bins: &mut [CopBin]) {
    for b in bins {
        b.cop = (b.electric_kwh > 0.0).then(|| b.heat_kwh / b.electric_kwh);
    }
}

pub fn compute_kpis(rows: &[TelemetryRow]) -> KpiReport {
    let dt = row_hours(rows);
    let mut k = KpiReport {
        hours: dt * rows.len() as f64,
        ..Default::default()
    };
    let (mut heat_gen_pv, mut heat_load_pv, mut import_pv) = (0.0, 0.0, 0.0);

    let t_min = rows.iter().map(|r| r.t_amb).fold(f64::INFINITY, f64::min);
    let t_max = rows
        .iter()
        .map(|r| r.t_amb)
        .fold(f64::NEG_INFINITY, f64::max);
    if t_min.is_finite() {
        let first = (t_min / AMBIENT_BIN_WIDTH).floor() as i64;
        let last = (t_max / AMBIENT_BIN_WIDTH).floor() as i64;
        k.cop_by_ambient = (first..=last)
            .map(|i| {
                bin(
                    i as f64 * AMBIENT_BIN_WIDTH,
                    Some((i + 1) as f64 * AMBIENT_BIN_WIDTH),
                )
            })
            .collect();
    }
    k.cop_by_runtime = RUNTIME_EDGES
        .iter()
        .enumerate()
        .map(|(i, &lo)| bin(lo, RUNTIME_EDGES.get(i + 1).copied()))
        .collect();

    let mut runtime = 0.0;
    let mut was_on = false;
    for r in rows {
        let pv = r.pv_ac();
        let local = r.p_l + r.p_hp_el + r.q_hr;
        let direct = pv.min(local);
        let to_battery = (pv - direct).min(r.eta * r.p_b_ch).max(0.0);
        let exported = (pv - direct - to_battery).max(0.0);
        k.pv_generated_kwh += pv * dt;
        k.pv_direct_kwh += direct * dt;
        k.pv_to_battery_kwh += to_battery * dt;
        k.pv_exported_kwh += exported * dt;

        let gen = r.heat_generated();
        let load = r.heat_load();
        k.heat_generated_kwh += gen * dt;
        k.heat_load_kwh += load * dt;
        k.grid_import_kwh += r.p_g_dem * dt;
        k.grid_export_kwh += r.p_g_sup * dt;
        if r.p_pv > 0.0 {
            heat_gen_pv += gen * dt;
            heat_load_pv += load * dt;
            import_pv += r.p_g_dem * dt;
        }

        let on = r.hp_on();
        if on {
            if !was_on {
                k.hp_starts += 1;
                runtime = 0.0;
            }
            let q = r.q_hp_sh + r.q_hp_dhw;
            k.hp_electric_kwh += r.p_hp_el * dt;
            let ai = ((r.t_amb / AMBIENT_BIN_WIDTH).floor() - (t_min / AMBIENT_BIN_WIDTH).floor())
                as usize;
            let ri = RUNTIME_EDGES
                .iter()
                .rposition(|e| runtime >= *e)
                .unwrap_or(0);
            for b in [&mut k.cop_by_ambient[ai], &mut k.cop_by_runtime[ri]] {
                b.heat_kwh += q * dt;
                b.electric_kwh += r.p_hp_el * dt;
                b.hours += dt;
            }
            runtime += dt * 60.0;
        }
        was_on = on;
    }
    finish(&mut k.cop_by_ambient);
    finish(&mut k.cop_by_runtime);

    k.pv_self_consumption = if k.pv_generated_kwh > 0.0 {
        100.0 - share(k.pv_exported_kwh, k.pv_generated_kwh)
    } else {
        100.0
    };
    k.heat_generated_pv_share = share(heat_gen_pv, k.heat_generated_kwh);
    k.heat_load_pv_share = share(heat_load_pv, k.heat_load_kwh);
    k.heat_shifted_pp = k.heat_generated_pv_share - k.heat_load_pv_share;
    k.heat_shifted_kwh = heat_gen_pv - k.heat_load_pv_share / 100.0 * k.heat_generated_kwh;
    k.grid_import_pv_share = share(import_pv, k.grid_import_kwh);
    k
}
