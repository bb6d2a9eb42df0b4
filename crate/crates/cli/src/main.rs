//! `nuphase` command-line front end.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nuphase::config::{parse_config_lines, ConfigError, RunConfig};
use nuphase::sweep;
use nuphase::{Dataset, GeneratorMode};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "nuphase", version, about = "Dissipative two-flavor neutrino evolution and mixed-state geometric phases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch trajectory of an initial electron neutrino.
    Evolve(RunArgs),
    /// Regenerate one of the five CP-phase sweeps.
    Figure(FigureArgs),
    /// Phase decomposition and product-formula convergence table.
    Phases(RunArgs),
    /// NMR simulation program for the configured parameters.
    Nmr(RunArgs),
    /// Run built-in consistency checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value file, or a dataset written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    energy_ev: Option<String>,
    #[arg(long)]
    dm2_ev2: Option<String>,
    #[arg(long)]
    theta_rad: Option<String>,
    #[arg(long)]
    phi_rad: Option<String>,
    /// Matter potential in units of the vacuum oscillation frequency.
    #[arg(long)]
    eta: Option<String>,
    /// Diagonal decay rate: absolute eV, or a multiple of V0 with suffix `v0`.
    #[arg(long)]
    c11: Option<String>,
    #[arg(long)]
    c22: Option<String>,
    #[arg(long)]
    c33: Option<String>,
    /// Off-diagonal decay rule: sqrt or zero.
    #[arg(long)]
    offdiag: Option<String>,
    /// Generator: paper, derived or flavor.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    t_max_ev_inv: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    /// Close the product chain with the initial state.
    #[arg(long)]
    closed_chain: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FigureArgs {
    /// Figure number, 1 to 5.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
    number: Option<u8>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator: paper, derived or flavor.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] nuphase::Error),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Failed(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_config(path: &PathBuf, command: &str) -> CliResult<Vec<(String, String, Option<usize>)>> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    let entries = parse_config_lines(&text)?;
    for (k, v, line) in &entries {
        if k == "command" && v != command {
            let err = ConfigError::new("command", format!("file was written by `{v}`, not `{command}`"));
            return Err(match line {
                Some(l) => err.at_line(*l),
                None => err,
            }
            .into());
        }
    }
    Ok(entries.into_iter().filter(|(k, _, _)| k != "command").collect())
}

fn resolve(args: &RunArgs, command: &str) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        for (k, v, line) in read_config(path, command)? {
            cfg.set(&k, &v).map_err(|e| match line {
                Some(l) => e.at_line(l),
                None => e,
            })?;
        }
    }
    let flags = [
        ("energy-ev", &args.energy_ev),
        ("dm2-ev2", &args.dm2_ev2),
        ("theta-rad", &args.theta_rad),
        ("phi-rad", &args.phi_rad),
        ("eta", &args.eta),
        ("c11", &args.c11),
        ("c22", &args.c22),
        ("c33", &args.c33),
        ("offdiag", &args.offdiag),
        ("mode", &args.mode),
        ("t-max-ev-inv", &args.t_max_ev_inv),
        ("nodes", &args.nodes),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    if args.closed_chain {
        cfg.closed_chain = true;
    }
    cfg.params().map_err(|e| ConfigError::new("parameters", e.to_string()))?;
    Ok(cfg)
}

fn resolve_figure(args: &FigureArgs) -> CliResult<(u8, GeneratorMode)> {
    let mut number = None;
    let mut mode = GeneratorMode::PaperLiteral;
    if let Some(path) = &args.config {
        for (k, v, line) in read_config(path, "figure")? {
            let at = |e: ConfigError| match line {
                Some(l) => e.at_line(l),
                None => e,
            };
            match k.as_str() {
                "figure" => match v.parse::<u8>() {
                    Ok(n @ 1..=5) => number = Some(n),
                    _ => return Err(at(ConfigError::new("figure", format!("expected 1..5, got {v:?}"))).into()),
                },
                "mode" => mode = parse_mode(&v).map_err(at)?,
                other => return Err(at(ConfigError::new(other, "not accepted by figure")).into()),
            }
        }
    }
    if let Some(n) = args.number {
        number = Some(n);
    }
    if let Some(m) = &args.mode {
        mode = parse_mode(m)?;
    }
    let number = number.ok_or_else(|| ConfigError::new("figure", "figure number missing"))?;
    Ok((number, mode))
}

fn parse_mode(v: &str) -> Result<GeneratorMode, ConfigError> {
    GeneratorMode::from_name(v.trim()).ok_or_else(|| ConfigError::new("mode", format!("expected paper, derived or flavor, got {v:?}")))
}

fn emit(d: &Dataset, out: &OutputArgs) -> CliResult<()> {
    let text = match out.format {
        Format::Csv => d.to_csv(),
        Format::Json => d.to_json(),
    };
    match &out.out {
        Some(path) => {
            fs::write(path, text)?;
            info!("wrote {}", path.display());
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn workers(out: &OutputArgs) -> usize {
    out.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Evolve(args) => emit(&sweep::evolve(&resolve(&args, "evolve")?)?, &args.output),
        Command::Phases(args) => emit(&sweep::phases(&resolve(&args, "phases")?)?, &args.output),
        Command::Nmr(args) => {
            let (d, err) = sweep::nmr(&resolve(&args, "nmr")?)?;
            emit(&d, &args.output)?;
            match err {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
        Command::Figure(args) => {
            let (n, mode) = resolve_figure(&args)?;
            let d = sweep::figure(n, mode, workers(&args.output))?;
            emit(&d, &args.output)
        }
        Command::Selftest => {
            let checks = sweep::selftest()?;
            let mut failed = 0;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nuphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
