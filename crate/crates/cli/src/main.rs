use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noon_cli::config::RunConfig;
use noon_cli::experiments;
use noon_cli::output::Manifest;
use noon_cli::parallel::Pool;
use noon_cli::RunError;

/// Multiphoton resonance and NOON-state experiments driven by config files.
#[derive(Parser)]
#[command(name = "noon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables plus a manifest.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and validate a config, printing every resolved setting.
    Validate { config: PathBuf },
    /// Show the work a run would do without running it.
    Plan { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    Ok(RunConfig::from_path(path)?)
}

fn main_inner(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = load(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d.display().to_string();
            }
            let pool = Pool::from_env().map_err(RunError::Env)?;
            log::info!(
                "running {} ({}) with {} thread(s)",
                cfg.name,
                cfg.experiment,
                pool.threads()
            );
            let started = std::time::Instant::now();
            let out = noon_cli::execute(&cfg, Path::new("."), &pool)?;
            log::info!("finished in {:.1} s", started.elapsed().as_secs_f64());
            for t in &out.tables {
                println!("wrote {}", t.display());
            }
            println!("wrote {}", out.manifest.display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let mut m = Manifest::default();
            m.push("status", "valid");
            m.extend(cfg.describe());
            print!("{}", m.render());
        }
        Command::Plan { config } => {
            let cfg = load(&config)?;
            println!("# {} ({})", cfg.name, cfg.experiment);
            for line in experiments::plan(&cfg)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut m = Manifest::default();
            for (k, v) in e.record() {
                m.push(k, v);
            }
            eprint!("{}", m.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
