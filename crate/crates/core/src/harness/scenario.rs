//! Scenario files and the synthetic scenario generator.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{base_quote, ActionSpace};
use crate::baseline::{PiAgent, PiConfig};
use crate::domain::{Campaign, CampaignId, Micros, Minute, Publisher, PublisherId};
use crate::error::{config_err, Error, Result};
use crate::quantizer::QuantizerConfig;
use crate::simulator::streams::{derive_seed, substream, Concern};
use crate::simulator::{Market, SimConfig, WinModel, WEEK_MINUTES};

pub const SCENARIO_VERSION: u32 = 1;

/// Everything a simulation run needs besides the agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub seed: u64,
    /// How the scenario was generated, if it was.
    pub generator: Option<GeneratorSpec>,
    pub quantizer: QuantizerConfig,
    pub action_space: ActionSpace,
    pub sim: SimConfig,
    pub publishers: Vec<Publisher>,
    pub campaigns: Vec<Campaign>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Version {
                what: "scenario",
                found: self.version,
                expected: SCENARIO_VERSION,
            });
        }
        self.quantizer.validate()?;
        self.action_space.validate()?;
        self.sim.validate()?;
        for (k, p) in self.publishers.iter().enumerate() {
            if p.id.index() != k {
                return Err(config_err(format!(
                    "publisher at position {k} has id {}",
                    p.id.0
                )));
            }
            p.validate()?;
            if let Some(c) = p.pctr.keys().find(|c| c.index() >= self.campaigns.len()) {
                return Err(config_err(format!(
                    "publisher {} lists unknown campaign {}",
                    p.id.0, c.0
                )));
            }
        }
        for (k, c) in self.campaigns.iter().enumerate() {
            if c.id.index() != k {
                return Err(config_err(format!(
                    "campaign at position {k} has id {}",
                    c.id.0
                )));
            }
            c.validate()?;
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.quantizer.state_count()
    }

    pub fn action_count(&self) -> usize {
        self.action_space.len()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Scenario> {
        let s: Scenario = serde_json::from_reader(input)?;
        s.validate()?;
        Ok(s)
    }
}

/// Uniform distribution on `[low, high]`; `low == high` is a constant.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename = "uniform")]
pub struct Uniform {
    pub low: f64,
    pub high: f64,
}

impl Uniform {
    pub const fn new(low: f64, high: f64) -> Uniform {
        Uniform { low, high }
    }

    fn check(&self, name: &str, min: f64, max: f64) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(config_err(format!(
                "{name}: degenerate range [{}, {}]",
                self.low, self.high
            )));
        }
        if self.low < min || self.high > max {
            return Err(config_err(format!(
                "{name}: range [{}, {}] outside [{min}, {max}]",
                self.low, self.high
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        // Always consume one draw so equal and unequal bounds use the stream alike.
        let u: f64 = rng.random();
        self.low + u * (self.high - self.low)
    }
}

/// Parameters of the synthetic scenario generator.
///
/// Budgets and historical install counts are not sampled directly: a
/// warm-up week priced by the default PI controller, standing in for the
/// incumbent system, is simulated with the nominal budgets and its
/// advertiser cost and installs become the scenario's budgets and
/// baseline installs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub publishers: usize,
    pub campaigns: usize,
    pub horizon_minutes: Minute,
    pub target_cpi: Uniform,
    pub pcvr: Uniform,
    pub pctr: Uniform,
    /// Probability that a campaign can run on a given publisher.
    pub coverage: f64,
    /// Floor price as a multiple of the publisher's mean eCPM bid.
    pub floor_ratio: Uniform,
    pub landscape_a: Uniform,
    /// Mean opportunities per minute.
    pub request_rate: Uniform,
    /// Nominal warm-up budget as a multiple of a campaign's fair share of
    /// the expected eCPM cost of all publishers.
    pub budget_share: Uniform,
    /// Lower bound on generated budgets, in currency units.
    pub min_budget: f64,
}

impl GeneratorSpec {
    pub fn desk() -> GeneratorSpec {
        GeneratorSpec {
            publishers: 10,
            campaigns: 25,
            horizon_minutes: WEEK_MINUTES,
            target_cpi: Uniform::new(200.0, 800.0),
            pcvr: Uniform::new(0.05, 0.2),
            pctr: Uniform::new(0.02, 0.08),
            coverage: 0.6,
            floor_ratio: Uniform::new(0.4, 0.9),
            landscape_a: Uniform::new(0.5, 2.0),
            request_rate: Uniform::new(2.0, 20.0),
            budget_share: Uniform::new(1.0, 3.0),
            min_budget: 1.0,
        }
    }

    pub fn full() -> GeneratorSpec {
        GeneratorSpec {
            publishers: 183,
            campaigns: 400,
            ..GeneratorSpec::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.publishers == 0 || self.campaigns == 0 {
            return Err(config_err(
                "generator needs at least one publisher and one campaign",
            ));
        }
        if self.horizon_minutes == 0 {
            return Err(config_err("generator horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(config_err("coverage outside [0, 1]"));
        }
        if !(self.min_budget > 0.0) {
            return Err(config_err("min_budget must be positive"));
        }
        self.target_cpi
            .check("target_cpi", f64::MIN_POSITIVE, f64::MAX)?;
        self.pcvr.check("pcvr", 0.0, 1.0)?;
        self.pctr.check("pctr", 0.0, 1.0)?;
        self.floor_ratio.check("floor_ratio", 0.0, f64::MAX)?;
        self.landscape_a
            .check("landscape_a", f64::MIN_POSITIVE, f64::MAX)?;
        self.request_rate.check("request_rate", 0.0, f64::MAX)?;
        self.budget_share.check("budget_share", 0.0, f64::MAX)?;
        Ok(())
    }
}

/// Samples a scenario and sizes its budgets with a warm-up week.
pub fn generate_scenario(spec: &GeneratorSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = substream(seed, Concern::Scenario, 0);

    let mut campaigns: Vec<Campaign> = (0..spec.campaigns)
        .map(|i| Campaign {
            id: CampaignId(i as u32),
            target_cpi: spec.target_cpi.sample(&mut rng),
            budget: Micros::from_units(spec.min_budget),
            pcvr: spec.pcvr.sample(&mut rng),
            baseline_installs: 0,
        })
        .collect();

    let mut publishers = Vec::with_capacity(spec.publishers);
    for j in 0..spec.publishers {
        let mut pctr = BTreeMap::new();
        for c in &campaigns {
            let covered = rng.random::<f64>() < spec.coverage;
            let ctr = spec.pctr.sample(&mut rng);
            if covered {
                pctr.insert(c.id, ctr);
            }
        }
        let ratio = spec.floor_ratio.sample(&mut rng);
        let landscape_a = spec.landscape_a.sample(&mut rng);
        let request_rate = spec.request_rate.sample(&mut rng);
        let ecpm: Vec<f64> = pctr
            .iter()
            .map(|(c, ctr)| campaigns[c.index()].target_cpi * campaigns[c.index()].pcvr * ctr)
            .collect();
        let mean_ecpm = if ecpm.is_empty() {
            0.0
        } else {
            ecpm.iter().sum::<f64>() / ecpm.len() as f64
        };
        publishers.push(Publisher {
            id: PublisherId(j as u32),
            floor_price: ratio * mean_ecpm,
            landscape_a,
            request_rate,
            pctr,
        });
    }

    // Expected eCPM cost each publisher could absorb in a horizon.
    let mut capacity = 0.0;
    for p in &publishers {
        let model = WinModel {
            a: p.landscape_a,
            floor_price: p.floor_price,
        };
        let per_opportunity: Vec<f64> = p
            .pctr
            .keys()
            .map(|c| {
                let q = base_quote(&campaigns[c.index()], p).expect("pctr present");
                q.bid * model.win_probability(q.bid)
            })
            .collect();
        if !per_opportunity.is_empty() {
            let mean = per_opportunity.iter().sum::<f64>() / per_opportunity.len() as f64;
            capacity += mean * p.request_rate * spec.horizon_minutes as f64;
        }
    }
    let fair_share = capacity / spec.campaigns as f64;
    for c in &mut campaigns {
        let nominal = (spec.budget_share.sample(&mut rng) * fair_share).max(spec.min_budget);
        c.budget = Micros::from_units(nominal);
    }

    let sim = SimConfig {
        horizon_minutes: spec.horizon_minutes,
        seed: derive_seed(seed, Concern::Scenario, 2),
        ..SimConfig::default()
    };
    let mut scenario = Scenario {
        version: SCENARIO_VERSION,
        seed,
        generator: Some(spec.clone()),
        quantizer: QuantizerConfig::default(),
        action_space: ActionSpace::default(),
        sim: SimConfig {
            min_baseline_installs: 0,
            ..sim.clone()
        },
        publishers,
        campaigns,
    };

    let mut incumbent = PiAgent::new(PiConfig::default(), scenario.publishers.len());
    let warmup =
        Market::new(&scenario, derive_seed(seed, Concern::Scenario, 1))?.run(&mut incumbent)?;
    let min_budget = Micros::from_units(spec.min_budget);
    for c in &mut scenario.campaigns {
        let totals = warmup.ledger.campaign(c.id);
        c.budget = if totals.cost > min_budget {
            totals.cost
        } else {
            min_budget
        };
        c.baseline_installs = totals.installs;
    }
    scenario.sim = sim;
    scenario.validate()?;
    Ok(scenario)
}
