//! Training, evaluation against the PI baseline, and lambda sweeps.

mod report;
mod scenario;
mod sweep;

use std::io::{Read, Write};

use log::info;
use serde::{Deserialize, Serialize};

use crate::baseline::{PiAgent, PiConfig};
use crate::error::{config_err, Error, Result};
use crate::qlearning::{ExplorationSchedule, GreedyPolicy, LearningRate, QTable};
use crate::reward::RewardConfig;
use crate::simulator::streams::{derive_seed, substream, Concern};
use crate::simulator::{
    Agent, FixedPolicy, LearningAgent, Market, PolicyAgent, Recording, RunOutput,
};

pub use report::{percent_lift, Deltas, RunReport, Totals, REPORT_VERSION};
pub use scenario::{generate_scenario, GeneratorSpec, Scenario, Uniform, SCENARIO_VERSION};
pub use sweep::{
    sweep_lambda, sweep_seeds, write_curve_csv, write_runs_csv, write_sweep_csv, Sweep, SweepRow,
    SWEEP_VERSION,
};

pub const EXPERIMENT_VERSION: u32 = 1;

/// Learning and baseline knobs shared by every run of an experiment.
///
/// The default is the configuration used for lambda sweeps. Exploration
/// is effectively uniform: the temperature dwarfs any Q-value, so the
/// behaviour policy is the same for every lambda and, with common random
/// numbers, so are the training trajectories. With `gamma = 0` and a
/// sample-mean learning rate each learned value is then exactly a
/// lambda-weighted mix of a margin value and an efficiency value, which
/// makes the extracted policies move monotonically along the tradeoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Simulated training weeks per lambda.
    pub episodes: u32,
    pub gamma: f64,
    pub learning_rate: LearningRate,
    pub exploration: ExplorationSchedule,
    pub pi: PiConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: EXPERIMENT_VERSION,
            episodes: 200,
            gamma: 0.0,
            learning_rate: LearningRate::Adaptive {
                initial: 1.0,
                decay: 1.0,
            },
            exploration: ExplorationSchedule {
                theta_initial: 1e9,
                decay: 1.0,
                theta_min: 1e9,
            },
            pi: PiConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != EXPERIMENT_VERSION {
            return Err(Error::Version {
                what: "experiment config",
                found: self.version,
                expected: EXPERIMENT_VERSION,
            });
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(config_err(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        self.learning_rate.validate()?;
        self.exploration.validate()?;
        self.pi.validate()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_reader(input)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Seed of training week `k`; never the evaluation seed in practice.
pub fn episode_seed(scenario: &Scenario, k: u32) -> u64 {
    derive_seed(scenario.seed, Concern::Episode, k)
}

/// Runs `episodes` exploring training weeks and returns the learned table.
/// Exploration randomness does not depend on lambda, so tables trained
/// with different lambdas see the same weeks and the same uniforms.
pub fn train(
    scenario: &Scenario,
    lambda: f64,
    episodes: u32,
    cfg: &ExperimentConfig,
) -> Result<QTable> {
    scenario.validate()?;
    cfg.validate()?;
    let reward = RewardConfig::new(lambda)?;
    let mut table = QTable::new(
        scenario.state_count(),
        scenario.action_count(),
        cfg.gamma,
        cfg.learning_rate,
    )?;
    let rng = substream(scenario.seed, Concern::Exploration, 0);
    let mut agent = LearningAgent::new(&mut table, cfg.exploration, reward, rng);
    for k in 0..episodes {
        Market::new(scenario, episode_seed(scenario, k))?.run(&mut agent)?;
    }
    info!(
        "trained lambda={lambda} over {episodes} episodes ({} epochs)",
        agent.epochs_seen()
    );
    Ok(table)
}

/// Runs the PI baseline alone.
pub fn run_baseline(
    scenario: &Scenario,
    cfg: &PiConfig,
    seed: u64,
    recording: Recording,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut agent = PiAgent::new(cfg.clone(), scenario.publishers.len());
    Market::with_recording(scenario, seed, recording)?.run(&mut agent)
}

/// Runs two agents over the same week and reports the first against the second.
pub fn compare(
    scenario: &Scenario,
    seed: u64,
    lambda: Option<f64>,
    policy: &mut dyn Agent,
    baseline: &mut dyn Agent,
) -> Result<RunReport> {
    let p = Market::new(scenario, seed)?.run(policy)?;
    let b = Market::new(scenario, seed)?.run(baseline)?;
    Ok(RunReport::new(lambda, seed, p.epochs, b.epochs))
}

/// Evaluates a frozen greedy policy against the PI baseline.
pub fn evaluate(
    scenario: &Scenario,
    policy: &GreedyPolicy,
    cfg: &ExperimentConfig,
    seed: u64,
    lambda: Option<f64>,
) -> Result<RunReport> {
    if policy.state_count() != scenario.state_count()
        || policy.action_count() != scenario.action_count()
    {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, scenario needs {}x{}",
            policy.state_count(),
            policy.action_count(),
            scenario.state_count(),
            scenario.action_count()
        )));
    }
    evaluate_fixed(
        scenario,
        FixedPolicy::Greedy(policy.clone()),
        cfg,
        seed,
        lambda,
    )
}

pub fn evaluate_fixed(
    scenario: &Scenario,
    policy: FixedPolicy,
    cfg: &ExperimentConfig,
    seed: u64,
    lambda: Option<f64>,
) -> Result<RunReport> {
    cfg.validate()?;
    let mut agent = PolicyAgent::new(policy);
    let mut pi = PiAgent::new(cfg.pi.clone(), scenario.publishers.len());
    compare(scenario, seed, lambda, &mut agent, &mut pi)
}
