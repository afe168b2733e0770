//! `qbid`: generate scenarios, train and evaluate bid/cost policies, sweep
//! the margin/efficiency tradeoff, and run the PI baseline.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use qbid::harness::{
    evaluate, generate_scenario, run_baseline, sweep_seeds, train, write_curve_csv, write_runs_csv,
    write_sweep_csv, ExperimentConfig, GeneratorSpec, Scenario,
};
use qbid::qlearning::QTable;
use qbid::simulator::{write_snapshots, EpochMetrics, Recording};

#[derive(Parser)]
#[command(
    name = "qbid",
    version,
    about = "RTB simulator and Q-learning bid/cost policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and the default experiment config.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train a Q-table for one lambda.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long)]
        episodes: Option<u32>,
    },
    /// Evaluate a trained Q-table against the PI baseline over one week.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        qtable: PathBuf,
        /// Lambda the table was trained with; only used to label the report.
        #[arg(long)]
        lambda: Option<f64>,
        /// Week to evaluate on; defaults to the scenario's evaluation seed.
        #[arg(long)]
        eval_seed: Option<u64>,
    },
    /// Train and evaluate every lambda, averaging over consecutive scenario seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])]
        lambda: Vec<f64>,
        #[arg(long)]
        episodes: Option<u32>,
        /// Scenarios generated from seeds `seed .. seed + seeds`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Run the PI baseline alone and export its ledger.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        eval_seed: Option<u64>,
        /// Also write the full event log.
        #[arg(long)]
        events: bool,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Scale {
    Desk,
    Full,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Input {
    /// Scenario file; generated from `--scale` and `--seed` when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Experiment config file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn spec(&self) -> GeneratorSpec {
        match self.scale {
            Scale::Desk => GeneratorSpec::desk(),
            Scale::Full => GeneratorSpec::full(),
        }
    }

    fn out(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        println!("{}", path.display());
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

impl Input {
    fn scenario(&self, common: &Common, seed: u64) -> Result<Scenario> {
        match &self.scenario {
            Some(path) => Ok(Scenario::read_json(open(path)?)
                .with_context(|| format!("reading {}", path.display()))?),
            None => Ok(generate_scenario(&common.spec(), seed)?),
        }
    }

    fn config(&self, episodes: Option<u32>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::read_json(open(path)?)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = episodes {
            cfg.episodes = n;
        }
        Ok(cfg)
    }
}

const EPOCHS_VERSION: u32 = 1;

fn write_epochs<W: Write>(epochs: &[EpochMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "version",
        "epoch",
        "spend",
        "cost",
        "installs",
        "margin",
        "budget_util",
        "happy",
    ])?;
    for e in epochs {
        w.write_record([
            EPOCHS_VERSION.to_string(),
            e.epoch.to_string(),
            e.spend.to_string(),
            e.cost.to_string(),
            e.installs.to_string(),
            e.margin.to_string(),
            e.budget_util.to_string(),
            e.happy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { common } => {
            let scenario = generate_scenario(&common.spec(), common.seed)?;
            scenario.write_json(common.out("scenario.json")?)?;
            ExperimentConfig::default().write_json(common.out("config.json")?)?;
        }
        Command::Train {
            common,
            input,
            lambda,
            episodes,
        } => {
            let scenario = input.scenario(&common, common.seed)?;
            let cfg = input.config(episodes)?;
            let table = train(&scenario, lambda, cfg.episodes, &cfg)?;
            table.write_csv(common.out(&format!("qtable-lambda-{lambda}.csv"))?)?;
        }
        Command::Eval {
            common,
            input,
            qtable,
            lambda,
            eval_seed,
        } => {
            let scenario = input.scenario(&common, common.seed)?;
            let cfg = input.config(None)?;
            let table = QTable::read_csv(open(&qtable)?)
                .with_context(|| format!("reading {}", qtable.display()))?;
            let seed = eval_seed.unwrap_or(scenario.sim.seed);
            let report = evaluate(&scenario, &table.extract_policy(), &cfg, seed, lambda)?;
            report.write_csv(common.out("report.csv")?)?;
            let d = report.deltas;
            info!(
                "lifts: spend {:?}, margin {:?}, budget util {:?}, happy {:?}",
                d.spend, d.margin, d.budget_util, d.happy
            );
        }
        Command::Sweep {
            common,
            input,
            lambda,
            episodes,
            seeds,
        } => {
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            if input.scenario.is_some() && seeds > 1 {
                bail!("--seeds needs generated scenarios, not --scenario");
            }
            let scenarios = (common.seed..common.seed + seeds)
                .map(|s| input.scenario(&common, s))
                .collect::<Result<Vec<_>>>()?;
            let cfg = input.config(episodes)?;
            let started = Instant::now();
            let sweep = sweep_seeds(&scenarios, &lambda, &cfg)?;
            info!(
                "sweep of {} runs took {:.1?}",
                sweep.runs.len(),
                started.elapsed()
            );
            write_sweep_csv(&sweep, common.out("sweep.csv")?)?;
            write_curve_csv(&sweep, common.out("curve.csv")?)?;
            write_runs_csv(&sweep, common.out("runs.csv")?)?;
        }
        Command::Baseline {
            common,
            input,
            eval_seed,
            events,
        } => {
            let scenario = input.scenario(&common, common.seed)?;
            let cfg = input.config(None)?;
            let seed = eval_seed.unwrap_or(scenario.sim.seed);
            let out = run_baseline(
                &scenario,
                &cfg.pi,
                seed,
                Recording {
                    events,
                    snapshots: true,
                },
            )?;
            write_epochs(&out.epochs, common.out("baseline.csv")?)?;
            write_snapshots(
                out.snapshots.as_deref().unwrap_or_default(),
                common.out("snapshots.csv")?,
            )?;
            if let Some(log) = out.events {
                log.write_ndjson(common.out("events.ndjson")?)?;
            }
        }
    }
    Ok(())
}
