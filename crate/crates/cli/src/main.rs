use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pcsmpc::harness::{
    compare_pcs_vs_water, compute_kpis, run_closed_loop, synthetic_spring_scenario,
    write_compare_outputs, write_run_outputs, CompareConfig, ConfigWatcher, ControlMode,
    HarnessConfig, SyntheticConfig,
};
use pcsmpc::ocp::Objective;
use pcsmpc::sim::{load_telemetry, PlantScenario};
use pcsmpc::Error;

#[derive(Parser)]
#[command(
    name = "pcsmpc",
    version,
    about = "Closed-loop MPC experiments for a PV, battery and heat-pump system with slurry storage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    SelfConsumption,
    Cost,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mpc,
    Rule,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario in closed loop and write results.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// TOML or JSON configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Re-read tuning and constraints from the config file when it changes.
        #[arg(long)]
        watch: bool,
    },
    /// Discharge the SH zone with slurry and with water and report the
    /// heat-pump reactivation delay.
    ComparePcs {
        /// Optional scenario; its mean SH load sets the discharge load.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        load_kw: Option<f64>,
    },
    /// Compute KPIs from a telemetry CSV and print them as JSON.
    Kpi {
        #[arg(long)]
        telemetry: PathBuf,
    },
    /// Write the synthetic spring scenario (history week plus four days).
    GenerateScenario {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// TOML file overriding the generator settings.
        #[arg(long)]
        settings: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SimulationFault { .. } => 3,
        Error::Config(_)
        | Error::Parse(_)
        | Error::Csv(_)
        | Error::Io(_)
        | Error::Dimension(_)
        | Error::History(_) => 2,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> Result<HarnessConfig, Error> {
    match path {
        Some(p) => HarnessConfig::load(p),
        None => Ok(HarnessConfig::default()),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!(
        "{}",
        serde_json::to_string_pretty(v).map_err(|e| Error::Internal(e.to_string()))?
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            scenario,
            config,
            out,
            seed,
            horizon,
            objective,
            mode,
            watch,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(n) = horizon {
                cfg = cfg.with_horizon(n);
            }
            if let Some(o) = objective {
                cfg = cfg.with_objective(match o {
                    ObjectiveArg::SelfConsumption => Objective::SelfConsumption,
                    ObjectiveArg::Cost => Objective::Cost,
                });
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Mpc => ControlMode::Mpc,
                    ModeArg::Rule => ControlMode::Rule,
                };
            }
            cfg.validate()?;
            let scenario = PlantScenario::from_csv(&scenario)?;
            let mut watcher = match (&config, watch) {
                (Some(p), true) => Some(ConfigWatcher::new(p)),
                (None, true) => return Err(Error::Config("--watch needs --config".into())),
                _ => None,
            };
            let run = run_closed_loop(&scenario, &cfg, watcher.as_mut())?;
            write_run_outputs(&out, &run, &cfg)?;
            let k = &run.kpis;
            println!("steps: {}", run.steps.len());
            println!("pv self-consumption: {:.1} %", k.pv_self_consumption);
            println!(
                "heat generated during PV hours: {:.1} % (load {:.1} %)",
                k.heat_generated_pv_share, k.heat_load_pv_share
            );
            println!(
                "grid import: {:.2} kWh, export: {:.2} kWh",
                k.grid_import_kwh, k.grid_export_kwh
            );
            if let Some(s) = k.solve_time {
                println!(
                    "solve time median {:.1} ms, max {:.1} ms",
                    s.median_ms, s.max_ms
                );
            }
            println!("results written to {}", out.display());
        }
        Command::ComparePcs {
            scenario,
            config,
            out,
            load_kw,
        } => {
            let base = load_config(config.as_deref())?;
            let mut cfg = CompareConfig {
                plant: base.plant,
                ..CompareConfig::default()
            };
            if let Some(path) = scenario {
                let s = PlantScenario::from_csv(&path)?;
                let mean = s.steps.iter().map(|r| r.q_l_sh).sum::<f64>() / s.len().max(1) as f64;
                if mean > 0.0 {
                    cfg.load_kw = mean;
                }
            }
            if let Some(l) = load_kw {
                cfg.load_kw = l;
            }
            let report = compare_pcs_vs_water(&cfg)?;
            for r in &report.runs {
                println!(
                    "w_P = {:.2}: reactivation after {:.2} h, delay {:.2} h",
                    r.w_p, r.reactivation_h, r.delay_h
                );
            }
            println!("delay vs water: {:.2} h", report.delay_h);
            if let Some(dir) = out {
                write_compare_outputs(&dir, &report)?;
            }
        }
        Command::Kpi { telemetry } => {
            let rows = load_telemetry(&telemetry)?;
            print_json(&compute_kpis(&rows))?;
        }
        Command::GenerateScenario {
            out,
            seed,
            settings,
        } => {
            let mut cfg = match settings {
                Some(p) => toml::from_str::<SyntheticConfig>(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Parse(e.to_string()))?,
                None => SyntheticConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            synthetic_spring_scenario(&cfg)?.to_csv(&out)?;
            println!("scenario written to {}", out.display());
        }
        Command::DefaultConfig => println!("{}", HarnessConfig::default().to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
