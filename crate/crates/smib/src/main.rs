use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use smib::{parse_config, run, write_outcome, Stage};

/// Stability analysis of a synchronous machine on an infinite bus.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON analysis config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fixed η; overrides the config and disables the interval search.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Basin sampling seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Existence indicator and steady states.
    Steady,
    /// Certificate for each steady state.
    Certify,
    /// Jacobian and eigenvalues in the rotating frame.
    Linearize,
    /// Perturbed trajectories with storage monitoring.
    Simulate,
    /// Monte Carlo check of the attraction estimate.
    Basin,
    /// Every stage.
    All,
}

impl From<Command> for Stage {
    fn from(c: Command) -> Self {
        match c {
            Command::Steady => Stage::Steady,
            Command::Certify => Stage::Certify,
            Command::Linearize => Stage::Linearize,
            Command::Simulate => Stage::Simulate,
            Command::Basin => Stage::Basin,
            Command::All => Stage::All,
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SMIB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .with_context(|| format!("SMIB_THREADS={v:?} is not a count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| path.display().to_string())?;
    if let Some(eta) = cli.eta {
        cfg.eta = Some(eta);
    }
    if let (Some(seed), Some(b)) = (cli.seed, cfg.basin.as_mut()) {
        b.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;

    let outcome = run(&cfg, cli.command.into())?;
    let report_path = write_outcome(&cfg.output_dir, &outcome)?;
    let r = &outcome.report;
    if !cli.quiet {
        println!(
            "existence indicator {:.6}, {} steady state(s)",
            r.existence.indicator,
            r.steady_states.len()
        );
        for c in r.certificates.iter().flatten() {
            match &c.certificate {
                Some(cert) => println!("ss{}: {:?} (eta = {})", c.index, cert.verdict, cert.eta),
                None => println!("ss{}: {}", c.index, c.error.as_deref().unwrap_or("")),
            }
        }
        for b in r.basins.iter().flatten() {
            if let Some(rep) = &b.report {
                println!(
                    "ss{} basin: {}/{} in sublevel converged",
                    b.index, rep.n_converged_of_in_sublevel, rep.n_in_sublevel
                );
            }
        }
        println!("wrote {}", report_path.display());
    }
    Ok(!r.soundness_violated())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: an initial condition in the certified sublevel set did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
