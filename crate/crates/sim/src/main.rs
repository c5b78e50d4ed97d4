use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ristrain::config::{ExperimentConfig, Profile};
use ristrain::experiment::{convergence_table, plot_data, results_table, summary_table};
use ristrain::table::Table;
use ristrain::validate::run_validate;
use ristrain::{run_convergence, run_design, run_sweep, summarize, SimError};

/// Training and reflection-pattern design for channel estimation with
/// non-ideal reconfigurable surfaces.
#[derive(Parser, Debug)]
#[command(name = "ristrain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// NMSE of every scheme over the SNR list, one CSV row per trial.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write per-scheme gnuplot data blocks here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Print the trial-averaged table to stderr.
        #[arg(long)]
        summary: bool,
    },
    /// Per-iteration objective of the plain and accelerated designs.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Dump designed training X and pattern V as (row, col, re, im).
    Design {
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant suite on a configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

/// Config sources. Flags override the file; names mirror the config keys.
#[derive(Args, Debug)]
struct Common {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base parameter set: desk or paper.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Comma-separated list, e.g. -5,0,5,10.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    beta_min: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Radians or a multiple of pi, e.g. 0.43pi.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long)]
    psi_ue: Option<String>,
    #[arg(long)]
    psi_ris: Option<String>,
    #[arg(long)]
    psi_bs: Option<String>,
    /// Comma-separated: proposed, ideal, ideal-projection, naive, onoff, grouped[:rho], or all.
    #[arg(long)]
    scheme: Option<String>,
    /// ls or lmmse.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    accel: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    simulate: Option<String>,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    timing: Option<String>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    output: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("k", &self.k),
            ("m", &self.m),
            ("l", &self.l),
            ("b", &self.b),
            ("tau", &self.tau),
            ("snr_db", &self.snr_db),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("beta_min", &self.beta_min),
            ("alpha", &self.alpha),
            ("delta", &self.delta),
            ("psi_ue", &self.psi_ue),
            ("psi_ris", &self.psi_ris),
            ("psi_bs", &self.psi_bs),
            ("scheme", &self.scheme),
            ("estimator", &self.estimator),
            ("accel", &self.accel),
            ("eps", &self.eps),
            ("max_iter", &self.max_iter),
            ("grid_points", &self.grid_points),
            ("rho", &self.rho),
            ("simulate", &self.simulate),
            ("timing", &self.timing),
            ("output", &self.output),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }

    fn load(&self) -> Result<ExperimentConfig, SimError> {
        let base = self.profile.as_deref().map(str::parse::<Profile>).transpose()?;
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path, base)?,
            None => ExperimentConfig::profile(base.unwrap_or(Profile::Desk)),
        };
        for (key, value) in self.overrides() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_table(table: &Table, cfg: &ExperimentConfig) -> Result<(), SimError> {
    match &cfg.output {
        Some(path) => table.write_csv(BufWriter::new(File::create(path)?))?,
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Sweep { common, plot_data: plot, summary } => {
            let cfg = common.load()?;
            let rows = run_sweep(&cfg)?;
            write_table(&results_table(&rows), &cfg)?;
            let sum = summarize(&rows);
            if let Some(path) = plot {
                std::fs::write(path, plot_data(&sum))?;
            }
            if summary {
                summary_table(&sum).write_csv(io::stderr().lock())?;
            }
        }
        Command::Converge { common } => {
            let cfg = common.load()?;
            write_table(&convergence_table(&run_convergence(&cfg)?), &cfg)?;
        }
        Command::Design { common } => {
            let cfg = common.load()?;
            write_table(&run_design(&cfg)?, &cfg)?;
        }
        Command::Validate { common } => {
            let cfg = common.load()?;
            let checks = run_validate(&cfg)?;
            let mut out = io::stdout().lock();
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(SimError::Invariants(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
