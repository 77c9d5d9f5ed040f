//! `topkq`: run seeded experiments, plot their CSVs, and query the
//! centralized ground-truth oracle.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 when
//! `--strict` is set and any trial failed to converge.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use topkq_core::harness::{emit_plot, run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use topkq_core::scoremodel::{ground_truth, ScoreMultiset};

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "topkq", version, about = "Distributed top-k selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment and write CSV outputs.
    Run {
        /// Experiment config file (sectioned key = value format).
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count from the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory for CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with status 3 if any trial fails to converge.
        #[arg(long)]
        strict: bool,
    },
    /// Render an experiment CSV as an SVG plot.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// Which CSV schema to expect.
        #[arg(long)]
        kind: PlotKind,
        /// Output SVG path (defaults to the CSV path with .svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the centralized ground truth for a score file as JSON.
    Oracle {
        /// One decimal score per line.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Convergence,
    VsK,
    VsDelta,
    VsN,
    CommCost,
}

impl From<PlotKind> for ExperimentKind {
    fn from(k: PlotKind) -> Self {
        match k {
            PlotKind::Convergence => ExperimentKind::Convergence,
            PlotKind::VsK => ExperimentKind::VsK,
            PlotKind::VsDelta => ExperimentKind::VsDelta,
            PlotKind::VsN => ExperimentKind::VsN,
            PlotKind::CommCost => ExperimentKind::CommCost,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            trials,
            out,
            strict,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::from_toml(&text)?;
            if let Some(t) = trials {
                cfg.experiment.trials = t;
                cfg.validate()?;
            }
            let outcome = run_experiment(&cfg)?;
            write_outputs(&outcome, &out)?;
            let mut converged = 0usize;
            let mut total = 0usize;
            for tr in &outcome.trials {
                for o in &tr.outcomes {
                    total += 1;
                    converged += o.converged as usize;
                }
            }
            println!(
                "{} sweep point(s), {} trial run(s), {}/{} converged; outputs in {}",
                outcome.sweep_points.len(),
                outcome.trials.len(),
                converged,
                total,
                out.display()
            );
            if strict && !outcome.all_converged {
                eprintln!("strict mode: at least one trial did not converge");
                return Ok(ExitCode::from(EXIT_NONCONVERGED));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { csv, kind, out } => {
            let text = std::fs::read_to_string(&csv)?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            emit_plot(&text, kind.into(), &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { scores, k } => {
            let file = File::open(&scores)?;
            let ms = ScoreMultiset::from_reader(BufReader::new(file))?;
            let gt = ground_truth(&ms, k)?;
            let json = serde_json::json!({
                "theta_k": gt.theta_k,
                "Delta": gt.delta,
                "m_bar": gt.m_bar,
                "m_under": gt.m_under,
                "g_m": gt.g_m,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
