use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rqbm_core::validation::{run_criterion, CriterionReport, TITLES};

mod commands;
mod config;
mod error;
mod output;
mod presets;

use config::RunConfig;
use error::{CliError, CliResult};
use output::{g17, Outputs};

/// Relativistic quantum Brownian motion solvers.
#[derive(Debug, Parser)]
#[command(name = "rqbm", version)]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the derived physical constants as CSV.
    Constants {
        /// Also write constants.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stochastic Langevin ensemble.
    Langevin(RunArgs),
    /// Klein-Kramers phase-space evolution.
    Kramers(RunArgs),
    /// Wigner phase-space evolution.
    Wigner(RunArgs),
    /// Relativistically corrected Schrodinger evolution.
    Schrodinger(RunArgs),
    /// Quantum hydrodynamics.
    Madelung(RunArgs),
    /// Overdamped (Smoluchowski) density evolution.
    Smoluchowski(RunArgs),
    /// Effective potential report; printed to stdout when --out is absent.
    Effpot(RunArgs),
    /// Run acceptance criteria.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Use a built-in configuration instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, created if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit without running.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Run all twelve criteria.
    #[arg(long, conflicts_with_all = ["criterion", "preset", "list"])]
    all: bool,
    /// Run a single criterion (1-12).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=12))]
    criterion: Option<u8>,
    /// Run the criterion a preset belongs to.
    #[arg(long)]
    preset: Option<String>,
    /// List presets and the criteria they feed.
    #[arg(long)]
    list: bool,
    /// Also write validation.csv into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rqbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let (name, args) = match cli.command {
        Command::Constants { out } => {
            let files = commands::constants();
            print!("{}", files.get("constants.csv").unwrap_or_default());
            return match out {
                Some(dir) => files.commit(&dir),
                None => Ok(()),
            };
        }
        Command::Validate(v) => return validate(v),
        Command::Langevin(a) => ("langevin", a),
        Command::Kramers(a) => ("kramers", a),
        Command::Wigner(a) => ("wigner", a),
        Command::Schrodinger(a) => ("schrodinger", a),
        Command::Madelung(a) => ("madelung", a),
        Command::Smoluchowski(a) => ("smoluchowski", a),
        Command::Effpot(a) => ("effpot", a),
    };
    let cfg = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(p)) => presets::preset(p)?,
        (None, None) => return Err(CliError::Config("either --config or --preset is required".into())),
    };
    if cfg.job.command() != name {
        return Err(CliError::Config(format!(
            "the configuration describes a `{}` job; run it with `rqbm {}`",
            cfg.job.command(),
            cfg.job.command()
        )));
    }
    if args.print_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let out_dir = match (args.out, name) {
        (Some(dir), _) => Some(dir),
        (None, "effpot") => None,
        (None, _) => return Err(CliError::Config(format!("`rqbm {name}` needs --out <dir>"))),
    };
    log::info!("running {name}");
    let files: Outputs = commands::run_job(&cfg)?;
    match out_dir {
        Some(dir) => files.commit(&dir),
        None => {
            print!("{}", files.get("report.csv").unwrap_or_default());
            Ok(())
        }
    }
}

fn validate(v: ValidateArgs) -> CliResult<()> {
    if v.list {
        println!("preset,subcommand,criterion,claim");
        for p in &presets::PRESETS {
            let cmd = presets::preset(p.name)?.job.command();
            println!("{},{},{},{}", p.name, cmd, p.criterion, p.claim);
        }
        return Ok(());
    }
    let ids: Vec<usize> = if v.all {
        (1..=TITLES.len()).collect()
    } else if let Some(c) = v.criterion {
        vec![c as usize]
    } else if let Some(p) = &v.preset {
        vec![presets::info(p)?.criterion]
    } else {
        return Err(CliError::Config("give one of --all, --criterion N, --preset NAME or --list".into()));
    };
    let reports: Vec<CriterionReport> = ids.par_iter().filter_map(|&id| run_criterion(id)).collect();
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if let Some(dir) = v.out {
        let mut text = String::from("criterion,passed,seconds,title,detail\n");
        for r in &reports {
            let detail = r.detail.replace('"', "'");
            text.push_str(&format!("{},{},{},{},\"{detail}\"\n", r.id, r.passed, g17(r.seconds), r.title));
        }
        let mut files = Outputs::default();
        files.add("validation.csv", text);
        files.commit(&dir)?;
    }
    if failed > 0 {
        return Err(CliError::Validation { failed, total: reports.len() });
    }
    Ok(())
}
