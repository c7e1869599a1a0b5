//! `metldpc`: validate, analyse and optimize MET-LDPC ensembles.

mod commands;
mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use metldpc::density_evolution::{ChannelKind, DeConfig, PhiKernel};
use metldpc::ensemble::DEFAULT_TOL;

use commands::{Mode, Outcome};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "metldpc", version, about = "MET-LDPC ensemble design")]
struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the rate, transmitted-fraction and socket-count constraints.
    Validate {
        ensemble: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Decoding threshold, Shannon limit and gap.
    Threshold {
        ensemble: PathBuf,
        #[arg(long)]
        channel: ChannelKind,
        /// key=value file with de.* settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kernel: Option<PhiKernel>,
        /// Write the bisection probes as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build the concentrated check side for an ensemble's variable side.
    DesignChecks {
        /// Ensemble file; any check classes in it are ignored.
        ensemble: PathBuf,
        /// Design rate (default: the file's rate).
        #[arg(long)]
        rate: Option<f64>,
        /// Check group such as "1,2 residual" or "3,4 chain=4"; repeatable.
        #[arg(long = "group")]
        groups: Vec<String>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize coefficients (dd) or structure and coefficients (joint).
    Optimize {
        /// key=value run configuration; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        channel: Option<ChannelKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent trials with seeds seed, seed+1, ...
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Threshold landscape over two coefficients or two degrees.
    Scan {
        /// key=value scan specification.
        spec: PathBuf,
        /// Write the grid CSV here and print a summary (default: CSV to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the bundled tables and compare with the published values.
    Reproduce {
        #[arg(long)]
        table: u8,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn de_config(path: Option<&PathBuf>) -> Result<DeConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?.de,
        None => DeConfig::default(),
    })
}

fn run(cli: Cli, out: &mut String) -> Result<Outcome> {
    let mut threads = cli.threads;
    match cli.command {
        Command::Validate { ensemble, tol } => commands::validate(&ensemble, tol, out),
        Command::Threshold {
            ensemble,
            channel,
            config,
            kernel,
            trace,
        } => {
            let mut de = de_config(config.as_ref())?;
            if let Some(k) = kernel {
                de.kernel = k;
            }
            init_threads(threads)?;
            commands::threshold_cmd(&ensemble, channel, &de, trace.as_deref(), out)
        }
        Command::DesignChecks {
            ensemble,
            rate,
            groups,
            out: path,
        } => {
            let mut text = String::new();
            let outcome = commands::design_checks_cmd(&ensemble, rate, &groups, &mut text)?;
            match path {
                Some(p) => std::fs::write(&p, text)
                    .with_context(|| format!("cannot write {}", p.display()))?,
                None => out.push_str(&text),
            }
            Ok(outcome)
        }
        Command::Optimize {
            config,
            mode,
            template,
            rate,
            channel,
            seed,
            trials,
            out_dir,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(m) = mode {
                cfg.mode = Some(match m {
                    Mode::Dd => "dd",
                    Mode::Joint => "joint",
                }
                .to_string());
            }
            cfg.template = template.or(cfg.template);
            cfg.rate = rate.or(cfg.rate);
            cfg.channel = channel.or(cfg.channel);
            cfg.seed = seed.or(cfg.seed);
            cfg.trials = trials.or(cfg.trials);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            threads = threads.or(cfg.threads);
            cfg.threads = threads;
            init_threads(threads)?;
            commands::optimize(&cfg, out)
        }
        Command::Scan { spec, out: path } => {
            init_threads(threads)?;
            commands::scan_cmd(&spec, path.as_deref(), out)
        }
        Command::Reproduce { table, config } => {
            let de = de_config(config.as_ref())?;
            init_threads(threads)?;
            commands::reproduce(table, &de, out)
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let result = run(cli, &mut out);
    let _ = std::io::stdout().write_all(out.as_bytes());
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_status(&e))
        }
    }
}
