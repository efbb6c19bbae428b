use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use onefield::simulation::{preset, run_scenario, RunOptions, ScenarioConfig, PRESET_NAMES};
use onefield::FsiError;

#[derive(Parser)]
#[command(version, about = "One-field monolithic fluid-structure interaction solver (2D)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory receiving CSV, VTK, checkpoint and summary files.
    #[arg(long, global = true, default_value = "output")]
    output_dir: PathBuf,

    /// Write the assembled operators in MatrixMarket format before the first step.
    #[arg(long, global = true)]
    dump_matrices: bool,

    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,

    /// Stop after this many steps.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Resume from a checkpoint written by an earlier run.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a built-in scenario.
    Preset {
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// List the built-in scenarios.
    Presets,
}

fn load(cli: &Cli) -> Result<Option<ScenarioConfig>, FsiError> {
    match &cli.command {
        Command::Run { config, overrides } => Ok(Some(ScenarioConfig::from_file(config)?.with_overrides(overrides)?)),
        Command::Preset {
            name,
            overrides,
            print,
        } => {
            let cfg = preset(name)?.with_overrides(overrides)?;
            if *print {
                print!("{}", cfg.to_toml_string()?);
                return Ok(None);
            }
            Ok(Some(cfg))
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(None)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), FsiError> {
    let Some(cfg) = load(cli)? else { return Ok(()) };
    log::info!("scenario {} ({} steps of {:e})", cfg.name, cfg.n_steps(), cfg.time.dt);
    let summary = run_scenario(
        &cfg,
        &RunOptions {
            output_dir: cli.output_dir.clone(),
            dump_matrices: cli.dump_matrices,
            resume: cli.resume.clone(),
            max_steps: cli.steps,
        },
    )?;
    println!(
        "{}: {} steps, t = {}, max area drift {:.3e}",
        summary.scenario, summary.steps, summary.final_time, summary.max_area_drift
    );
    if let Some(v) = summary.max_energy_variation {
        println!("max energy variation {:.3}%", 100.0 * v);
    }
    if let Some(rm) = summary.mesh_ratio {
        println!("mesh ratio rm = {rm:.3}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aborted [{}]: {e}", e.stage_tag());
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
