use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod table;

use config::{ModelKind, RunConfig, SchemeArg};
use error::{CliError, CliResult};

/// Simulation of stochastic Volterra equations.
#[derive(Debug, Parser)]
#[command(name = "sve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write sample paths on a uniform grid
    Simulate,
    /// Reproduce one of the numerical tables
    Table {
        /// ou_h010, ou_h025, ou_h075, mech_h03, mech_h07 or heston
        id: String,
    },
    /// Strong convergence rates, or MLMC complexity when --eps-list is given
    Rates,
    /// Multilevel Monte Carlo: adaptive with --eps, else fixed --levels/--budget
    Mlmc,
    /// Single-level Monte Carlo
    Mc,
    /// Scheme-free reference value
    Reference,
}

#[derive(Debug, clap::Args)]
struct Flags {
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    /// Grid cells
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    paths: Option<u64>,
    /// Target RMSE for adaptive MLMC
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Finest level for fixed-budget MLMC
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Total samples for fixed-budget MLMC
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    hurst: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    strike: Option<f64>,
    #[arg(long, global = true)]
    alpha_circ: Option<f64>,
    /// Grid sizes for the strong-rate experiment
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, global = true)]
    ref_factor: Option<usize>,
    /// Tolerances for the complexity experiment
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
}

impl Flags {
    fn into_config(self) -> RunConfig {
        RunConfig {
            model: self.model,
            scheme: self.scheme.map(Into::into),
            n: self.n,
            paths: self.paths,
            eps: self.eps,
            levels: self.levels,
            budget: self.budget,
            seed: self.seed,
            workers: self.workers,
            out: self.out,
            hurst: self.hurst,
            horizon: self.horizon,
            strike: self.strike,
            alpha_circ: self.alpha_circ,
            n_list: self.n_list,
            ref_factor: self.ref_factor,
            eps_list: self.eps_list,
            ..RunConfig::default()
        }
    }
}

/// CSV text plus an optional failure to report after it has been written.
pub struct Output {
    pub csv: String,
    pub failure: Option<CliError>,
}

impl Output {
    pub fn ok(csv: String) -> Self {
        Output { csv, failure: None }
    }
}

fn load_config(cli: Cli) -> CliResult<(Command, RunConfig)> {
    let file = match &cli.flags.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let mut cfg = file.overlay(cli.flags.into_config());
    let (name, table) = match &cli.command {
        Command::Simulate => ("simulate", None),
        Command::Table { id } => ("table", Some(id.clone())),
        Command::Rates => ("rates", None),
        Command::Mlmc => ("mlmc", None),
        Command::Mc => ("mc", None),
        Command::Reference => ("reference", None),
    };
    cfg.command = Some(name.into());
    if table.is_some() {
        cfg.table = table;
    }
    Ok((cli.command, cfg))
}

fn dispatch(command: &Command, cfg: &mut RunConfig) -> CliResult<Output> {
    match command {
        Command::Simulate => commands::simulate(cfg),
        Command::Table { id } => table::run(id, cfg),
        Command::Rates => commands::rates(cfg),
        Command::Mlmc => commands::mlmc(cfg),
        Command::Mc => commands::mc(cfg),
        Command::Reference => commands::reference(cfg),
    }
}

fn write_output(cfg: &RunConfig, csv: &str) -> CliResult<()> {
    let text = format!("# {}\n{csv}", cfg.echo());
    match &cfg.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
            {
                // a closed pipe (`sve ... | head`) is not an error
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, mut cfg) = load_config(cli)?;
    let pool = match cfg.workers {
        Some(0) => return Err(CliError::Validation("workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let output = pool.install(|| dispatch(&command, &mut cfg))?;
    write_output(&cfg, &output.csv)?;
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sve: {e}");
            e.exit_code()
        }
    }
}
