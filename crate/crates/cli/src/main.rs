//! `qannulus`: verification suites and experiments for covariant
//! derivations on the quantum annulus.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Outcome;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "qannulus", version, about = "Quantum annulus derivations: checks, decay and spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults apply to missing fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed, overriding `seed` from the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Print the JSON summary on stdout instead of the text report.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads for parallel sweeps.
    #[arg(long, env = "QANNULUS_THREADS", hide = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact bound suites, roundtrips, identities, covariance and closure checks.
    Verify,
    /// Hilbert–Schmidt norms of Qₙ over a range of modes.
    Decay,
    /// Singular values and block Dirac spectra of truncated operators.
    Spectrum,
    /// Dump Qₙ kernel entries in log space.
    Kernels,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the QANNULUS_THREADS worker pool")?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = match &cli.out {
        Some(dir) => dir.clone(),
        None => cfg.out_dir(),
    };

    let outcome = match cli.command {
        Command::Verify => commands::verify(&cfg)?,
        Command::Decay => commands::decay(&cfg)?,
        Command::Spectrum => commands::spectrum(&cfg)?,
        Command::Kernels => commands::kernels(&cfg)?,
    };
    write_outputs(&outcome, &out_dir)?;
    if cli.json {
        println!("{}", outcome.summary.to_json()?);
    } else {
        print_text(&outcome, &out_dir);
    }
    Ok(outcome.summary.success())
}

fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, table) in &outcome.tables {
        let path = dir.join(name);
        std::fs::write(&path, table.to_bytes()?).with_context(|| format!("writing {}", path.display()))?;
    }
    for (name, bytes) in &outcome.raw {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let path = dir.join("summary.json");
    std::fs::write(&path, outcome.summary.to_json()? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_text(outcome: &Outcome, dir: &Path) {
    let s = &outcome.summary;
    println!(
        "{}: {} checks, {} passed, {} failed, {} flagged",
        s.command, s.counts.total, s.counts.passed, s.counts.failed, s.counts.flagged
    );
    for (name, g) in &s.checks {
        let worst = g.worst_margin.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "  {name:<28} {:>6} passed {:>5} failed {:>6} flagged  worst margin {worst}",
            g.counts.passed, g.counts.failed, g.counts.flagged
        );
    }
    if !s.flagged.is_empty() {
        println!("flagged (reported, never failing):");
        for (name, f) in &s.flagged {
            println!("  {name}: {} checks, {} violated; {}", f.count, f.violated, f.note.as_deref().unwrap_or(""));
        }
    }
    for r in s.failures.iter().take(10) {
        println!("FAILED {} {:?}: {:e} + {:e} > {:e}", r.name, r.indices, r.computed, r.error, r.majorant);
    }
    if !s.results.is_null() {
        let text = s.results.to_string();
        if text.len() <= 400 {
            println!("results: {text}");
        } else {
            println!("results: see summary.json");
        }
    }
    println!("outputs written to {}", dir.display());
}
