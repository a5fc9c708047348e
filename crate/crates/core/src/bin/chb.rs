use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chb_core::output::write_radial_csv;
use chb_core::params::{validate_config, Severity};
use chb_core::radial::{evolve_radius, RadialStatus};
use chb_core::sim::run;
use chb_core::{Config, Error};

/// Cahn-Hilliard-Brinkman tumour growth simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write fields and diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve the radially symmetric reference model.
    Radial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration file and report warnings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config() {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, out } => {
            let cfg = Config::from_file(&config)?;
            let summary = run(&cfg.params, Some((&out, &cfg.output)))?;
            log::info!("completed {} steps, t = {:.6}", summary.steps, summary.final_state.t);
            Ok(())
        }
        Command::Radial { config, out } => {
            let cfg = Config::from_file(&config)?;
            let p = &cfg.params;
            let r0 = p.profile.radius(0.0);
            let series = evolve_radius(r0, p, p.radial_dt, p.t_end)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            write_radial_csv(&series.samples, &out.join("radial.csv"))?;
            if series.status == RadialStatus::LeftDomain {
                log::warn!("radius left the domain; series truncated");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = Config::from_file(&config)?;
            let findings = validate_config(&cfg.params);
            let mut first_error = None;
            for f in &findings {
                match f.severity {
                    Severity::Warning => println!("warning: {}", f.message),
                    Severity::Error => {
                        println!("error: {}", f.message);
                        first_error.get_or_insert_with(|| f.message.clone());
                    }
                }
            }
            match first_error {
                Some(m) => Err(Error::Config(m)),
                None => {
                    println!("ok");
                    Ok(())
                }
            }
        }
    }
}
