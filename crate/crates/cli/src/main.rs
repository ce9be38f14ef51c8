use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evanescent::harness::{self, ExperimentConfig, ExperimentKind, Suite};
use evanescent::Error;

/// Run one experiment of the evanescent-noise chain laboratory.
#[derive(Debug, Parser)]
#[command(name = "evanescent", version)]
struct Cli {
    /// simulate, energy-corr, volume-corr, phase-diagram, verify-lemmas, kernel or theorem-suite.
    kind: String,
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Mandatory for the stochastic kinds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ladder, e.g. 64,128,256.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    /// Comma-separated macroscopic times.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    replicas: Option<usize>,
    /// T1, T2 or Tvol.
    #[arg(long)]
    suite: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_MODULE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_GATE: u8 = 3;
const EXIT_BUDGET: u8 = 4;

fn configure(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    cfg.kind = cli.kind.parse::<ExperimentKind>()?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(n) = &cli.n {
        cfg.n = n.clone();
    }
    if let Some(t) = &cli.t {
        cfg.t = t.clone();
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = &cli.suite {
        cfg.suite = Some(s.parse::<Suite>()?);
    }
    if let Ok(v) = std::env::var("EVANESCENT_MAX_EVENTS") {
        let cap = v.parse::<u64>().map_err(|e| Error::Config {
            path: "EVANESCENT_MAX_EVENTS".into(),
            reason: e.to_string(),
        })?;
        cfg.max_events = Some(cfg.max_events.map_or(cap, |m| m.min(cap)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match harness::run(&cfg) {
        Ok(records) => {
            let mut failed = false;
            for r in &records {
                let verdict = match r.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "done",
                };
                println!("{} {verdict} ({:.2}s)", r.id, r.wall_time_s);
                failed |= r.passed == Some(false);
            }
            if failed {
                ExitCode::from(EXIT_GATE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Budget { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_MODULE)
        }
    }
}
