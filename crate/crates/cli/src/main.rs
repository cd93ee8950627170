use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Outcome;
use config::{ConfigError, RunConfig};
use output::Header;

const EXIT_FALSIFIED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "anderson-edge", version, about = "Edge statistics of the Anderson Hamiltonian with double-exponential potential")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Scale, repeatable or comma separated.
    #[arg(long = "L", global = true, value_delimiter = ',')]
    l: Vec<u64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    /// Rerun the command recorded in the header of an output file.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    /// Print the JSON schema of the configuration and exit.
    #[arg(long, global = true)]
    print_schema: bool,
    #[arg(long, global = true, hide = true)]
    inject_fault: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Per-sample top eigenvalues, centers and rescaled heights.
    Spectrum,
    /// Randomized campaigns of the deterministic estimates.
    Verify {
        /// Instances per campaign.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Table of the variational constant over balls, with its limit.
    Chi,
    /// Centering, point clouds and Poisson statistics.
    Evt,
    /// Raw potential samples.
    Sample,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Verify { .. } => "verify",
            Command::Chi => "chi",
            Command::Evt => "evt",
            Command::Sample => "sample",
        }
    }

    fn parse(name: &str) -> Option<Command> {
        Some(match name {
            "spectrum" => Command::Spectrum,
            "verify" => Command::Verify { instances: None },
            "chi" => Command::Chi,
            "evt" => Command::Evt,
            "sample" => Command::Sample,
            _ => return None,
        })
    }
}

fn resolve(cli: &Cli) -> Result<(Command, RunConfig), ConfigError> {
    let (command, mut cfg) = if let Some(path) = &cli.replay {
        let h = Header::read(path).map_err(|e| ConfigError::Invalid(format!("{e:#}")))?;
        let command =
            Command::parse(&h.command).ok_or_else(|| ConfigError::Invalid(format!("unknown command {:?} in header", h.command)))?;
        (command, h.config)
    } else {
        let command = cli.command.ok_or_else(|| ConfigError::Invalid("a subcommand or --replay is required".into()))?;
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        (command, cfg)
    };
    if cli.replay.is_none() {
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if !cli.l.is_empty() {
            cfg.l = cli.l.clone();
        }
        if let Some(r) = cli.rho {
            cfg.rho = r;
        }
        if let Some(k) = cli.k {
            cfg.k = k;
        }
        if let Some(n) = cli.ensemble {
            cfg.ensemble = n;
        }
        if let Command::Verify { instances: Some(n) } = command {
            cfg.verify.instances = n;
        }
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.verify.inject_fault = cli.inject_fault;
    cfg.validate()?;
    Ok((command, cfg))
}

fn run(command: Command, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    match command {
        Command::Spectrum => commands::spectrum(cfg),
        Command::Verify { .. } => commands::verify(cfg),
        Command::Chi => commands::chi(cfg),
        Command::Evt => commands::evt(cfg),
        Command::Sample => commands::sample_fields(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        let schema = schemars::schema_for!(RunConfig);
        println!("{}", serde_json::to_string_pretty(&schema).expect("schema serializes"));
        return ExitCode::SUCCESS;
    }
    let (command, cfg) = match resolve(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(command, &cfg) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Falsified) => {
            eprintln!("{}: deterministic check falsified, witnesses in {}", command.name(), cfg.out_dir().join("witnesses.jsonl").display());
            ExitCode::from(EXIT_FALSIFIED)
        }
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
