use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use excited_walk::harness::{
    cmd_couple, cmd_oracle, cmd_regen, cmd_selftest, cmd_simulate, cmd_sweep, emit_rows,
    emit_summaries, sweep_plot_script, write_file_atomically, ExperimentConfig, Format,
    SelftestHooks,
};
use excited_walk::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

/// Excited random walk experiments.
#[derive(Parser)]
#[command(name = "erw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Independent runs: per-run table plus direct and regeneration summaries.
    Simulate(Common),
    /// Regeneration blocks of every run.
    Regen(Common),
    /// Coupled excited / simple random walk runs with invariant checks.
    Couple(Common),
    /// Direct speed and variance estimates over a grid of biases.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write a plot script reading the sweep CSV.
        #[arg(long)]
        plot_script: Option<PathBuf>,
    },
    /// Exact distribution of a statistic at horizon --steps.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// x1, J, D, T0 or kappa (kappa uses --confirm-lag).
        #[arg(long, default_value = "x1")]
        statistic: String,
        /// Use f64 weights instead of exact rationals.
        #[arg(long)]
        float: bool,
    },
    /// Reduced-scale invariant suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_step_law: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "0.75")]
    p: String,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    confirm_lag: u64,
    /// Comma-separated biases for `sweep`.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Admit p = 1/2 (symmetric walk).
    #[arg(long)]
    allow_boundary_p: bool,
}

impl Common {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            p_text: self.p.clone(),
            d: self.d,
            steps: self.steps,
            runs: self.runs,
            seed: self.seed,
            confirm_lag: self.confirm_lag,
            p_grid: self.p_grid.clone(),
            output: self.output.clone(),
            format: match self.format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Jsonl => Format::Jsonl,
            },
            threads: self
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            allow_boundary_p: self.allow_boundary_p,
        }
    }
}

enum Failure {
    Usage(String),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ModelDomain(_)
            | Error::InvalidInput(_)
            | Error::InvalidPath { .. }
            | Error::OracleBudget { .. }
            | Error::InsufficientData(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            Error::Csv(_) | Error::Json(_) => Failure::Invariant(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.config();
            let (rows, summary) = cmd_simulate(&cfg)?;
            emit_rows(&rows, &cfg)?;
            emit_summaries(&summary, &cfg)?;
        }
        Command::Regen(c) => {
            let cfg = c.config();
            let (rows, summary) = cmd_regen(&cfg)?;
            emit_rows(&rows, &cfg)?;
            emit_summaries(&summary, &cfg)?;
        }
        Command::Couple(c) => {
            let cfg = c.config();
            let (rows, violations) = cmd_couple(&cfg)?;
            emit_rows(&rows, &cfg)?;
            if violations > 0 {
                return Err(Failure::Invariant(format!(
                    "{violations} coupling invariant violations"
                )));
            }
        }
        Command::Sweep {
            common,
            plot_script,
        } => {
            let cfg = common.config();
            let rows = cmd_sweep(&cfg)?;
            emit_rows(&rows, &cfg)?;
            if let Some(script) = plot_script {
                let csv = cfg
                    .output
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("sweep.csv"));
                let text = sweep_plot_script(&csv);
                write_file_atomically(&script, |f| {
                    use std::io::Write;
                    f.write_all(text.as_bytes())?;
                    Ok(())
                })?;
            }
        }
        Command::Oracle {
            common,
            statistic,
            float,
        } => {
            let cfg = common.config();
            let rows = cmd_oracle(&cfg, &statistic, !float)?;
            emit_rows(&rows, &cfg)?;
        }
        Command::Selftest {
            common,
            corrupt_step_law,
        } => {
            let cfg = common.config();
            let checks = cmd_selftest(&cfg, SelftestHooks { corrupt_step_law })?;
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("{status} {}: {}", c.check, c.detail);
            }
            emit_rows(&checks, &cfg)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure::Invariant(format!(
                    "{failed} self-test checks failed"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}
