use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use henon_flow_cli::commands::{cmd_compare, cmd_dynamics, cmd_normal_form, cmd_potential, cmd_spectrum, cmd_sweep};
use henon_flow_cli::config::MethodKind;
use henon_flow_cli::{CliError, RunConfig};

/// Flow-equation diagonalization of the quantum Hénon–Heiles Hamiltonian.
#[derive(Parser, Debug)]
#[command(name = "henon-flow", version)]
struct Cli {
    /// TOML run configuration; omitted fields take their defaults
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// write CSV here instead of stdout
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// override model.lambda
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// override the method
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// override the order
    #[arg(long, global = true)]
    order: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum MethodArg {
    Cutoff,
    Iter,
    Improved,
    Baseline,
}

impl From<MethodArg> for MethodKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cutoff => MethodKind::Cutoff,
            MethodArg::Iter => MethodKind::Iter,
            MethodArg::Improved => MethodKind::Improved,
            MethodArg::Baseline => MethodKind::Baseline,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// potential on a rectangular grid
    Potential,
    /// level table of the chosen method
    Spectrum,
    /// level curves across a coupling range
    Sweep,
    /// transition amplitudes and completeness residual
    Dynamics,
    /// normal form in the polynomial text form
    NormalForm,
    /// word-by-word difference of two normal-form dumps
    Compare { left: PathBuf, right: PathBuf },
    /// print the effective configuration
    Config,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(l) = cli.lambda {
        config.model.lambda = l;
    }
    if let Some(m) = cli.method {
        config.method = m.into();
    }
    if let Some(k) = cli.order {
        config.order = k;
    }
    if cli.output.is_some() {
        config.output = cli.output.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(cli)?;
    let sink: Box<dyn Write> = match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match &cli.command {
        Command::Potential => cmd_potential(&config, sink),
        Command::Spectrum => cmd_spectrum(&config, sink),
        Command::Sweep => cmd_sweep(&config, sink),
        Command::Dynamics => cmd_dynamics(&config, sink),
        Command::NormalForm => cmd_normal_form(&config, sink),
        Command::Compare { left, right } => {
            let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())));
            cmd_compare(&read(left)?, &read(right)?, sink)
        }
        Command::Config => {
            let mut sink = sink;
            sink.write_all(config.to_toml().as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("henon_flow_cli=info,warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
