//! `relnash`: solve, simulate and verify relative-wealth equilibria from a JSON config.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 verification FAIL.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use relnash_cli::config::{Format, LoadedConfig};
use relnash_cli::error::CliError;
use relnash_cli::{commands, report};

#[derive(Parser)]
#[command(name = "relnash", version, about = "Nash and mean-field equilibria for relative-wealth investors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the n-agent equilibrium.
    Equilibrium(Common),
    /// Evaluate the equilibrium on simulated or exhaustive paths.
    Simulate(Common),
    /// Best-response check for every agent; exit code 3 on FAIL.
    Verify(Common),
    /// Mean-field equilibrium, fixed-point check and n-agent convergence.
    Meanfield(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for path-parallel work.
    #[arg(long)]
    threads: Option<usize>,
    /// Writes the generated price paths as CSV (simulate and verify).
    #[arg(long)]
    export_paths: Option<PathBuf>,
}

impl Common {
    fn format(&self, cfg: &LoadedConfig) -> Format {
        self.format.or(cfg.config.output.as_ref().map(|o| o.format)).unwrap_or_default()
    }

    fn out(&self, cfg: &LoadedConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.config.output.as_ref().and_then(|o| o.path.clone().map(PathBuf::from)))
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn export_paths(paths: &relnash_core::PathSet, target: Option<&PathBuf>) -> Result<(), CliError> {
    if let Some(p) = target {
        paths.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Equilibrium(c) | Command::Simulate(c) | Command::Verify(c) | Command::Meanfield(c)) = &cli.command;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = LoadedConfig::load(&c.config)?;
    let format = c.format(&cfg);
    let out = c.out(&cfg);
    let out = out.as_deref();
    let started = Instant::now();
    match &cli.command {
        Command::Equilibrium(_) => {
            let result = commands::equilibrium(&cfg)?;
            match format {
                Format::Json => write_json(&result, out)?,
                Format::Csv => report::equilibrium_csv(&result, sink(out)?)?,
            }
        }
        Command::Simulate(_) => {
            let sim = commands::simulate(&cfg, c.seed, c.paths)?;
            export_paths(&sim.paths, c.export_paths.as_ref())?;
            match format {
                Format::Json => write_json(&sim.output, out)?,
                Format::Csv => sim.output.report.write_csv(sink(out)?)?,
            }
        }
        Command::Verify(_) => {
            let v = commands::verify(&cfg, c.seed, c.paths)?;
            export_paths(&v.paths, c.export_paths.as_ref())?;
            match format {
                Format::Json => write_json(&v.output, out)?,
                Format::Csv => report::verify_csv(&v.output, sink(out)?)?,
            }
            for a in &v.output.agents {
                eprintln!(
                    "agent {}: {} (max gap {:.3e} ± {:.3e} at {} {}{})",
                    a.agent,
                    if a.pass { "PASS" } else { "FAIL" },
                    a.max_gap,
                    a.max_gap_std_error,
                    a.max_gap_family,
                    a.max_gap_parameter,
                    a.bound.map(|b| format!(", grid bound {b:.3e}")).unwrap_or_default(),
                );
            }
            if let Some(w) = &v.output.welfare {
                eprintln!(
                    "welfare: {} (max gap {:.3e}, bound {:.3e})",
                    if w.pass { "PASS" } else { "FAIL" },
                    w.max_gap,
                    w.bound
                );
            }
            if !v.output.pass {
                return Err(CliError::VerifyFailed("a deviation improves expected utility beyond tolerance".into()));
            }
        }
        Command::Meanfield(_) => {
            let m = commands::meanfield(&cfg, c.seed, c.paths)?;
            match format {
                Format::Json => write_json(&m, out)?,
                Format::Csv => {
                    report::meanfield_atoms_csv(&m, sink(out)?)?;
                    if let Some(curve) = &m.convergence {
                        match out {
                            Some(p) => {
                                curve.write_csv(BufWriter::new(File::create(p.with_extension("convergence.csv"))?))?
                            }
                            None => {
                                println!();
                                curve.write_csv(std::io::stdout().lock())?;
                            }
                        }
                    }
                }
            }
        }
    }
    eprintln!("elapsed {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
