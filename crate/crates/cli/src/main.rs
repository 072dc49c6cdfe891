use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ethdyn_cli::{exit, resolve_threads, run, Command, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "ethdyn", version, about = "Eigenstate-thermalization sweeps for coupled spin-1/2 subsystems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: ETHDYN_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Key overrides of the form `--section.key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Typicality ETH reports per sweep point.
    Estimate(RunArgs),
    /// Mean energy difference over a grid of window centers.
    Equipartition(RunArgs),
    /// MOD relaxation traces for both displacement signs.
    Relax(RunArgs),
    /// Power-law fit of the slope-corrected width against d_eff.
    Scaling(RunArgs),
    /// Exact-diagonalization reports for small sweep points.
    Oracle(RunArgs),
    /// Parse and validate a configuration, then print it resolved.
    ValidateConfig {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path, overrides).map_err(|e: ConfigError| {
        eprintln!("error: {e}");
        ExitCode::from(exit::CONFIG_ERROR as u8)
    })
}

fn execute(command: Command, args: RunArgs) -> ExitCode {
    let cfg = match load(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let Some(out) = args.out.clone().or_else(|| cfg.output.directory.clone()) else {
        eprintln!("error: no output directory (use --out or output.directory)");
        return ExitCode::from(exit::CONFIG_ERROR as u8);
    };
    let threads = resolve_threads(args.threads);
    let result = run(command, &cfg, &out, threads).with_context(|| format!("writing to {}", out.display()));
    match result {
        Ok(summary) => {
            println!(
                "{}: {} records written, {} resumed, {} failed; manifest at {}",
                command.as_str(),
                summary.written,
                summary.resumed,
                summary.failed,
                out.join("manifest.json").display()
            );
            if summary.failed > 0 {
                ExitCode::from(exit::PARTIAL_FAILURE as u8)
            } else {
                ExitCode::from(exit::SUCCESS as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::INTERNAL_ERROR as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Sub::Estimate(a) => execute(Command::Estimate, a),
        Sub::Equipartition(a) => execute(Command::Equipartition, a),
        Sub::Relax(a) => execute(Command::Relax, a),
        Sub::Scaling(a) => execute(Command::Scaling, a),
        Sub::Oracle(a) => execute(Command::Oracle, a),
        Sub::ValidateConfig { config, overrides } => match load(&config, &overrides) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml_string());
                println!("# config hash {}", cfg.hash());
                ExitCode::from(exit::SUCCESS as u8)
            }
            Err(code) => code,
        },
    }
}
