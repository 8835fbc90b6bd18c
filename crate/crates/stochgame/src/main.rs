use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stochgame::counterexample::{reproduce_counterexample, CounterexampleConfig};
use stochgame::io::{load_eval, load_game, read_json, write_json, GameFile};
use stochgame::properties::{run_property_suite_with, Fault};
use stochgame::solve::{solve, strategy_report};
use stochgame::sweep::{run_config, write_csv, Family, SweepConfig};
use stochgame_core::game::{corpus, random_game};

/// Weighted values and strategies of finite zero-sum stochastic games.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a game file: a random game, or a corpus game by name.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        p1: usize,
        #[arg(long, default_value_t = 2)]
        p2: usize,
        /// Emit this corpus game instead of a random one.
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of a game under an evaluation, as JSON.
    Solve {
        /// Game file, or a corpus name.
        #[arg(long)]
        game: String,
        /// Evaluation file, or inline JSON.
        #[arg(long)]
        eval: String,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Values along a family of evaluations, as CSV.
    Sweep {
        /// Sweep config file; replaces the other sweep flags.
        #[arg(long, conflicts_with_all = ["game", "family", "schedule"])]
        config: Option<PathBuf>,
        #[arg(long)]
        game: Option<String>,
        #[arg(long, value_enum)]
        family: Option<Family>,
        /// Comma-separated parameters.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
        /// Pieces used for the impatience column.
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discounted strategies of an evaluation and their exploitability.
    Strategy {
        #[arg(long)]
        game: String,
        #[arg(long)]
        eval: String,
        /// Initial state index.
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare n-stage and block-evaluation values on the counterexample MDP.
    Counterexample {
        #[arg(long, default_value = "configs/counterexample.json")]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized inequality checks; exits with status 1 on any failure.
    Proptest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cases per property.
        #[arg(long, default_value_t = 100)]
        budget: usize,
        /// Inject a known defect to check that it is detected.
        #[arg(long, value_enum)]
        fault: Option<Fault>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen { seed, states, p1, p2, corpus: name, out } => {
            let game = match name {
                Some(n) => corpus(&n)?,
                None => random_game(seed, states, p1, p2)?,
            };
            write_json(&GameFile::from_spec(&game), out.as_deref())?;
        }
        Command::Solve { game, eval, eps, out } => {
            let report = solve(&load_game(&game)?, &load_eval(&eval)?, eps)?;
            write_json(&report, out.as_deref())?;
        }
        Command::Sweep { config, game, family, schedule, p, eps, out } => {
            let cfg = match config {
                Some(path) => read_json::<SweepConfig>(&path)?,
                None => {
                    let (Some(game), Some(family), Some(schedule)) = (game, family, schedule) else {
                        bail!("sweep needs --config, or all of --game, --family and --schedule");
                    };
                    SweepConfig { game, family, schedule, evaluations: Vec::new(), p, eps }
                }
            };
            let game = load_game(&cfg.game)?;
            let rows = run_config(&game, &cfg)?;
            match out {
                Some(path) => write_csv(BufWriter::new(create(&path)?), &game, &rows)?,
                None => write_csv(io::stdout().lock(), &game, &rows)?,
            }
        }
        Command::Strategy { game, eval, state, eps, out } => {
            let report = strategy_report(&load_game(&game)?, &load_eval(&eval)?, state, eps)?;
            write_json(&report, out.as_deref())?;
        }
        Command::Counterexample { config, out } => {
            let cfg: CounterexampleConfig = read_json(&config)?;
            write_json(&reproduce_counterexample(&cfg)?, out.as_deref())?;
        }
        Command::Proptest { seed, budget, fault, out } => {
            let report = run_property_suite_with(seed, budget, fault);
            write_json(&report, out.as_deref())?;
            for r in report.results.iter().filter(|r| !r.passed()) {
                log::warn!("{}: {} of {} cases failed", r.name, r.failures, r.cases);
            }
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}
