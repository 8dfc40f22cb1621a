//! Result files: KPI JSON, minute telemetry and 15-minute plot tables.

use std::path::Path;

use serde_json::json;

use super::{CompareReport, CopBin, HarnessConfig, RunOutput};
use crate::sim::{save_telemetry, TelemetryRow};
use crate::{Error, Result};

fn table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn mean(rows: &[TelemetryRow], f: impl Fn(&TelemetryRow) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len().max(1) as f64
}

fn cop_table(path: &Path, bins: &[CopBin]) -> Result<()> {
    table(
        path,
        &["lower", "upper", "heat_kwh", "electric_kwh", "hours", "cop"],
        bins.iter().map(|b| {
            vec![
                num(b.lower),
                b.upper.map(num).unwrap_or_default(),
                num(b.heat_kwh),
                num(b.electric_kwh),
                num(b.hours),
                b.cop.map(num).unwrap_or_default(),
            ]
        }),
    )
}

/// Writes `results.json`, `telemetry.csv`, `steps.csv` and the `plot_*.csv`
/// tables into `dir`, creating it if needed.
pub fn write_run_outputs(dir: &Path, run: &RunOutput, cfg: &HarnessConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let results = json!({
        "kpis": run.kpis,
        "events": run.events,
        "steps": run.steps.len(),
        "fallback_steps": run.steps.iter().filter(|s| s.source == super::StepSource::Fallback).count(),
        "final_state": run.final_state,
        "config": cfg,
    });
    let text =
        serde_json::to_string_pretty(&results).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(dir.join("results.json"), text)?;
    save_telemetry(&run.telemetry, &dir.join("telemetry.csv"))?;

    let per = run.telemetry.len() / run.steps.len().max(1);
    let chunks: Vec<&[TelemetryRow]> = run.telemetry.chunks(per.max(1)).collect();
    let steps = || run.steps.iter().zip(chunks.iter());

    table(
        &dir.join("steps.csv"),
        &[
            "timestamp",
            "source",
            "status",
            "iterations",
            "build_ms",
            "solve_ms",
            "residual",
            "saturated",
            "e_sh_est",
            "e_sh_true",
            "e_dhw_est",
            "e_dhw_true",
        ],
        run.steps.iter().map(|s| {
            vec![
                s.time.clone(),
                format!("{:?}", s.source).to_lowercase(),
                s.status
                    .map(|x| format!("{x:?}").to_lowercase())
                    .unwrap_or_default(),
                s.iterations.to_string(),
                num(s.build_ms),
                num(s.solve_ms),
                format!("{:.3e}", s.residual),
                s.saturated.to_string(),
                num(s.x_est.e_sh),
                num(s.x_true.e_sh),
                num(s.x_est.e_dhw),
                num(s.x_true.e_dhw),
            ]
        }),
    )?;
    table(
        &dir.join("plot_loads.csv"),
        &["timestamp", "q_l_sh", "q_l_dhw", "p_l", "p_pv", "t_amb"],
        steps().map(|(s, c)| {
            vec![
                s.time.clone(),
                num(s.loads.q_l_sh),
                num(s.loads.q_l_dhw),
                num(s.loads.p_l),
                num(mean(c, |r| r.p_pv)),
                num(s.loads.t_amb),
            ]
        }),
    )?;
    table(
        &dir.join("plot_tank.csv"),
        &[
            "timestamp",
            "t_sh",
            "t_dhw",
            "branch_sh",
            "e_sh",
            "e_dhw",
            "e_bld",
        ],
        steps().map(|(s, c)| {
            let last = c.last().expect("non-empty chunk");
            vec![
                s.time.clone(),
                num(last.t_sh),
                num(last.t_dhw),
                format!("{:?}", last.branch_sh).to_lowercase(),
                num(last.e_sh),
                num(last.e_dhw),
                num(last.e_bld),
            ]
        }),
    )?;
    table(
        &dir.join("plot_electric.csv"),
        &[
            "timestamp",
            "pv_ac",
            "p_l",
            "p_hp_el",
            "q_hr",
            "p_b_ch",
            "p_b_dis",
            "p_g_dem",
            "p_g_sup",
            "soc",
        ],
        steps().map(|(s, c)| {
            vec![
                s.time.clone(),
                num(mean(c, |r| r.pv_ac())),
                num(mean(c, |r| r.p_l)),
                num(mean(c, |r| r.p_hp_el)),
                num(mean(c, |r| r.q_hr)),
                num(mean(c, |r| r.p_b_ch)),
                num(mean(c, |r| r.p_b_dis)),
                num(mean(c, |r| r.p_g_dem)),
                num(mean(c, |r| r.p_g_sup)),
                num(c.last().map(|r| r.soc).unwrap_or_default()),
            ]
        }),
    )?;
    table(
        &dir.join("plot_heat.csv"),
        &[
            "timestamp",
            "q_hp_sh",
            "q_hp_dhw",
            "q_hr",
            "q_l_sh",
            "q_l_dhw",
            "pv_hour",
        ],
        steps().map(|(s, c)| {
            vec![
                s.time.clone(),
                num(mean(c, |r| r.q_hp_sh)),
                num(mean(c, |r| r.q_hp_dhw)),
                num(mean(c, |r| r.q_hr)),
                num(s.loads.q_l_sh),
                num(s.loads.q_l_dhw),
                (c.iter().any(|r| r.p_pv > 0.0) as u8).to_string(),
            ]
        }),
    )?;
    cop_table(&dir.join("plot_cop_ambient.csv"), &run.kpis.cop_by_ambient)?;
    cop_table(&dir.join("plot_cop_runtime.csv"), &run.kpis.cop_by_runtime)?;
    Ok(())
}

/// Writes `compare.json` and `plot_pcs_discharge.csv` (zone temperature per
/// inner step for every mass fraction).
pub fn write_compare_outputs(dir: &Path, report: &CompareReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let summary = json!({
        "m_sh": report.m_sh,
        "load_kw": report.load_kw,
        "delay_h": report.delay_h,
        "runs": report.runs.iter().map(|r| json!({
            "w_p": r.w_p,
            "latent_kwh": r.latent_kwh,
            "reactivation_h": r.reactivation_h,
            "delay_h": r.delay_h,
        })).collect::<Vec<_>>(),
    });
    let text =
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(dir.join("compare.json"), text)?;
    let longest = report
        .runs
        .iter()
        .map(|r| r.temperatures.len())
        .max()
        .unwrap_or(0);
    let mut header = vec!["hours".to_string()];
    header.extend(report.runs.iter().map(|r| format!("t_sh_w{:.2}", r.w_p)));
    let dt = report.inner_minutes as f64 / 60.0;
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &dir.join("plot_pcs_discharge.csv"),
        &header_ref,
        (0..longest).map(|i| {
            let mut row = vec![num(i as f64 * dt)];
            row.extend(
                report
                    .runs
                    .iter()
                    .map(|r| r.temperatures.get(i).map(|t| num(*t)).unwrap_or_default()),
            );
            row
        }),
    )
}
