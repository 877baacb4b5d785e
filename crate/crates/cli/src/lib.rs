//! Command-line front end for the finite-time stabilization toolkit.
//!
//! `fintime-sctl <bounds|simulate|sweep|compare|sync> --config run.toml`
//! reads an experiment config (see [`config`]), runs it and writes
//! `<prefix>_rows.csv` plus a `<prefix>_manifest` that can be fed back in as
//! a config to reproduce the CSV byte for byte.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{CommandKind, EXIT_BLOWUP, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "fintime-sctl", version, about = "Finite-time stabilization by stochastic feedback: bounds and Monte Carlo runs")]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base noise seed, overriding `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for realizations.
    #[arg(long, env = "FINTIME_SCTL_JOBS")]
    pub jobs: Option<usize>,
    /// Suppress progress and summaries on stdout.
    #[arg(long)]
    pub quiet: bool,
}

pub fn run(cli: Cli) -> i32 {
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut raw = match config::parse(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(dir) = cli.out {
        raw.output.get_or_insert_with(Default::default).dir = Some(dir);
    }
    if let Some(seed) = cli.seed {
        raw.sim.get_or_insert_with(Default::default).seed = Some(seed);
    }
    let cfg = match raw.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return EXIT_CONFIG;
        }
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };

    let ctx = commands::Ctx { quiet: cli.quiet };
    pool.install(|| match cli.command {
        CommandKind::Bounds => commands::bounds(&cfg, &ctx),
        kind => commands::simulate(&cfg, kind, &ctx),
    })
}
