//! Minute-level auction simulator with hourly decision epochs.
//!
//! Every minute each publisher locks in the eligible campaign with the
//! highest current bid and serves it on all of that minute's opportunities.
//! Impressions are paid to the exchange, clicks are charged to the
//! advertiser, and installs surface later through a delay queue. Every
//! sixty minutes an [`Agent`] gets to re-price the (publisher, campaign)
//! pairs that won at least one auction during the hour.

mod agents;
mod delay;
mod events;
pub mod streams;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::action::{base_quote, PriceQuote};
use crate::domain::{
    is_happy_reading, CampaignId, Ledger, LedgerEvent, Micros, Minute, PendingInstall, PublisherId,
};
use crate::error::{config_err, Result};
use crate::harness::Scenario;

pub use agents::{FixedPolicy, LearningAgent, PolicyAgent};
pub use delay::{DelayModel, MINUTES_PER_DAY};
pub use events::{
    write_snapshots, AuctionRecord, EntityKind, EventLog, Record, SnapshotRow, EVENT_LOG_VERSION,
    SNAPSHOT_VERSION,
};
use streams::{OpportunityDraws, PublisherStreams};

pub const AUCTION_TICK_MINUTES: Minute = 1;
pub const ACTION_EPOCH_MINUTES: Minute = 60;
pub const WEEK_MINUTES: Minute = 7 * MINUTES_PER_DAY;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon_minutes: Minute,
    pub delay: DelayModel,
    /// Share of `bid - floor` paid on top of the floor for a won impression.
    pub clearing_fraction: f64,
    /// Campaigns with fewer historical installs never enter an auction.
    pub min_baseline_installs: u64,
    /// Seed of the evaluation week.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon_minutes: WEEK_MINUTES,
            delay: DelayModel::default(),
            clearing_fraction: 0.5,
            min_baseline_installs: 10,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_minutes == 0 || self.horizon_minutes % ACTION_EPOCH_MINUTES != 0 {
            return Err(config_err(
                "horizon must be a positive multiple of the 60 minute epoch",
            ));
        }
        if !(0.0..=1.0).contains(&self.clearing_fraction) {
            return Err(config_err("clearing_fraction outside [0, 1]"));
        }
        self.delay.validate()
    }

    pub fn epochs(&self) -> u32 {
        self.horizon_minutes / ACTION_EPOCH_MINUTES
    }
}

/// Sigmoid bid landscape of one publisher.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WinModel {
    pub a: f64,
    pub floor_price: f64,
}

impl WinModel {
    /// Zero below the floor, `1 / (1 + a exp(floor - bid))` otherwise.
    pub fn win_probability(&self, bid: f64) -> f64 {
        if bid < self.floor_price {
            0.0
        } else {
            1.0 / (1.0 + self.a * (self.floor_price - bid).exp())
        }
    }

    pub fn clearing_price(&self, bid: f64, fraction: f64) -> f64 {
        self.floor_price + fraction * (bid - self.floor_price).max(0.0)
    }
}

/// Highest bid wins; ties go to the lowest campaign id.
pub fn select_campaign(options: impl IntoIterator<Item = (CampaignId, f64)>) -> Option<CampaignId> {
    let mut best: Option<(CampaignId, f64)> = None;
    for (id, bid) in options {
        best = match best {
            Some((bid_id, b)) if b > bid || (b == bid && bid_id < id) => Some((bid_id, b)),
            _ => Some((id, bid)),
        };
    }
    best.map(|(id, _)| id)
}

/// Something that re-prices pairs at epoch boundaries.
pub trait Agent {
    fn on_epoch(&mut self, market: &mut Market<'_>) -> Result<()>;

    /// Called once after the last epoch.
    fn on_finish(&mut self, _market: &Market<'_>) -> Result<()> {
        Ok(())
    }
}

/// Aggregates recorded at the end of every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub spend: f64,
    pub cost: f64,
    pub installs: u64,
    /// Sum of publisher margins; 0 while nothing has been spent.
    pub margin: f64,
    pub budget_util: f64,
    pub happy: u32,
}

impl EpochMetrics {
    pub fn from_ledger(epoch: u32, ledger: &Ledger, scenario: &Scenario) -> EpochMetrics {
        let epsilon = scenario.quantizer.epsilon;
        let happy = scenario
            .campaigns
            .iter()
            .filter(|c| is_happy_reading(ledger.efficiency(c), epsilon))
            .count() as u32;
        EpochMetrics {
            epoch,
            spend: ledger.total_spend().units(),
            cost: ledger.total_cost().units(),
            installs: ledger.campaigns().iter().map(|c| c.installs).sum(),
            margin: ledger.overall_margin().unwrap_or(0.0),
            budget_util: ledger.total_cost().0 as f64 / ledger.total_budget().0 as f64,
            happy,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Recording {
    pub events: bool,
    pub snapshots: bool,
}

/// Outcome of a finished run.
#[derive(Debug)]
pub struct RunOutput {
    pub ledger: Ledger,
    pub epochs: Vec<EpochMetrics>,
    pub events: Option<EventLog>,
    pub snapshots: Option<Vec<SnapshotRow>>,
}

pub struct Market<'a> {
    scenario: &'a Scenario,
    ledger: Ledger,
    campaigns: usize,
    base: Vec<Option<PriceQuote>>,
    quotes: Vec<PriceQuote>,
    charge: Vec<Micros>,
    pctr: Vec<f64>,
    candidates: Vec<Vec<CampaignId>>,
    win_models: Vec<WinModel>,
    epoch_wins: Vec<u32>,
    pending: BinaryHeap<Reverse<(Minute, u64, PendingInstall)>>,
    seq: u64,
    streams: Vec<PublisherStreams>,
    log: Option<EventLog>,
    snapshots: Option<Vec<SnapshotRow>>,
    epochs: Vec<EpochMetrics>,
}

impl<'a> Market<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Result<Market<'a>> {
        Self::with_recording(scenario, seed, Recording::default())
    }

    pub fn with_recording(
        scenario: &'a Scenario,
        seed: u64,
        recording: Recording,
    ) -> Result<Market<'a>> {
        scenario.validate()?;
        let nc = scenario.campaigns.len();
        let np = scenario.publishers.len();
        let mut base = vec![None; np * nc];
        let mut pctr = vec![0.0; np * nc];
        let mut candidates = vec![Vec::new(); np];
        for (j, p) in scenario.publishers.iter().enumerate() {
            for (i, c) in scenario.campaigns.iter().enumerate() {
                if let Some(&ctr) = p.pctr.get(&c.id) {
                    base[j * nc + i] = Some(base_quote(c, p)?);
                    pctr[j * nc + i] = ctr;
                    if c.baseline_installs >= scenario.sim.min_baseline_installs {
                        candidates[j].push(c.id);
                    }
                }
            }
        }
        let quotes: Vec<PriceQuote> = base
            .iter()
            .map(|q| {
                q.unwrap_or(PriceQuote {
                    bid: 0.0,
                    cost: 0.0,
                })
            })
            .collect();
        let charge = quotes.iter().map(|q| Micros::from_units(q.cost)).collect();
        Ok(Market {
            scenario,
            ledger: Ledger::new(
                scenario.sim.horizon_minutes,
                np,
                scenario.campaigns.iter().map(|c| c.budget).collect(),
            ),
            campaigns: nc,
            base,
            quotes,
            charge,
            pctr,
            candidates,
            win_models: scenario
                .publishers
                .iter()
                .map(|p| WinModel {
                    a: p.landscape_a,
                    floor_price: p.floor_price,
                })
                .collect(),
            epoch_wins: vec![0; np * nc],
            pending: BinaryHeap::new(),
            seq: 0,
            streams: scenario
                .publishers
                .iter()
                .map(|p| PublisherStreams::new(seed, p.id.0, p.request_rate))
                .collect(),
            log: recording.events.then(EventLog::default),
            snapshots: recording.snapshots.then(Vec::new),
            epochs: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn clock(&self) -> Minute {
        self.ledger.clock
    }

    pub fn is_done(&self) -> bool {
        self.ledger.clock >= self.ledger.horizon
    }

    fn slot(&self, publisher: PublisherId, campaign: CampaignId) -> usize {
        publisher.index() * self.campaigns + campaign.index()
    }

    /// Unadjusted eCPM quote; `None` when the campaign cannot run on the publisher.
    pub fn base_quote(&self, publisher: PublisherId, campaign: CampaignId) -> Option<PriceQuote> {
        self.base[self.slot(publisher, campaign)]
    }

    pub fn quote(&self, publisher: PublisherId, campaign: CampaignId) -> PriceQuote {
        self.quotes[self.slot(publisher, campaign)]
    }

    pub fn set_quote(&mut self, publisher: PublisherId, campaign: CampaignId, quote: PriceQuote) {
        let k = self.slot(publisher, campaign);
        self.quotes[k] = quote;
        self.charge[k] = Micros::from_units(quote.cost);
    }

    /// Campaigns that may bid on `publisher`.
    pub fn candidates(&self, publisher: PublisherId) -> &[CampaignId] {
        &self.candidates[publisher.index()]
    }

    /// Wins of a pair during the epoch that just ended.
    pub fn epoch_wins(&self, publisher: PublisherId, campaign: CampaignId) -> u32 {
        self.epoch_wins[self.slot(publisher, campaign)]
    }

    /// Pairs that won at least one auction during the last epoch, publisher-major.
    pub fn active_pairs(&self) -> Vec<(PublisherId, CampaignId)> {
        let nc = self.campaigns;
        self.epoch_wins
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(k, _)| (PublisherId((k / nc) as u32), CampaignId((k % nc) as u32)))
            .collect()
    }

    pub fn pending_installs(&self) -> usize {
        self.pending.len()
    }

    fn select(&self, j: usize) -> Option<CampaignId> {
        let nc = self.campaigns;
        select_campaign(self.candidates[j].iter().filter_map(|&c| {
            let k = j * nc + c.index();
            (self.ledger.budget_remaining(c) > self.charge[k]).then(|| (c, self.quotes[k].bid))
        }))
    }

    fn record(&mut self, event: LedgerEvent) {
        self.ledger.apply(&event);
        if let Some(log) = &mut self.log {
            log.push(Record::Ledger(event));
        }
    }

    /// Returns false once the campaign can no longer pay for anything.
    fn serve(&mut self, t: Minute, j: usize, campaign: CampaignId, d: OpportunityDraws) -> bool {
        let remaining = self.ledger.budget_remaining(campaign);
        if remaining.0 <= 0 {
            return false;
        }
        let k = j * self.campaigns + campaign.index();
        let publisher = PublisherId(j as u32);
        let bid = self.quotes[k].bid;
        let model = self.win_models[j];
        let won = d.win < model.win_probability(bid);
        if let Some(log) = &mut self.log {
            log.push(Record::Auction(AuctionRecord {
                t,
                publisher,
                campaign,
                bid,
                won,
            }));
        }
        if !won {
            return true;
        }
        let price =
            Micros::from_units(model.clearing_price(bid, self.scenario.sim.clearing_fraction));
        self.record(LedgerEvent::Impression {
            t,
            publisher,
            campaign,
            price,
        });
        self.epoch_wins[k] += 1;

        if d.click >= self.pctr[k] {
            return true;
        }
        let charge = self.charge[k].min(remaining);
        self.record(LedgerEvent::Click {
            t,
            publisher,
            campaign,
            charge,
        });

        if d.install >= self.scenario.campaigns[campaign.index()].pcvr {
            return true;
        }
        let notify_time = t + self.scenario.sim.delay.from_uniform(d.delay);
        let install = PendingInstall {
            notify_time,
            click_time: t,
            campaign,
            publisher,
        };
        self.pending.push(Reverse((notify_time, self.seq, install)));
        self.seq += 1;
        true
    }

    fn deliver(&mut self, t: Minute) {
        while let Some(Reverse((notify, _, _))) = self.pending.peek() {
            if *notify > t {
                break;
            }
            let Reverse((_, _, p)) = self.pending.pop().expect("peeked");
            self.record(LedgerEvent::Install {
                t: p.notify_time,
                publisher: p.publisher,
                campaign: p.campaign,
                click_time: p.click_time,
            });
        }
    }

    /// Runs the auctions of one minute and delivers due installs.
    pub fn run_minute(&mut self) {
        let t = self.ledger.clock;
        assert!(t < self.ledger.horizon, "simulation already finished");
        for j in 0..self.streams.len() {
            let mut selected = self.select(j);
            let n = self.streams[j].arrivals();
            for _ in 0..n {
                let draws = self.streams[j].opportunity();
                if let Some(c) = selected {
                    if !self.serve(t, j, c, draws) {
                        selected = None;
                    }
                }
            }
        }
        self.deliver(t);
        self.ledger.clock = t + AUCTION_TICK_MINUTES;
    }

    /// Lets the agent re-price, then runs one hour of auctions.
    pub fn run_epoch(&mut self, agent: &mut dyn Agent) -> Result<()> {
        assert_eq!(
            self.ledger.clock % ACTION_EPOCH_MINUTES,
            0,
            "not at an epoch boundary"
        );
        agent.on_epoch(self)?;
        self.epoch_wins.iter_mut().for_each(|w| *w = 0);
        for _ in 0..ACTION_EPOCH_MINUTES {
            self.run_minute();
        }
        for c in &self.scenario.campaigns {
            assert!(
                self.ledger.campaign(c.id).cost <= c.budget,
                "campaign {} over budget",
                c.id.0
            );
        }
        let epoch = self.ledger.clock / ACTION_EPOCH_MINUTES;
        self.epochs.push(EpochMetrics::from_ledger(
            epoch,
            &self.ledger,
            self.scenario,
        ));
        self.snapshot(epoch);
        Ok(())
    }

    fn snapshot(&mut self, epoch: u32) {
        let Some(rows) = &mut self.snapshots else {
            return;
        };
        let l = &self.ledger;
        for p in &self.scenario.publishers {
            let totals = l.publisher(p.id);
            rows.push(SnapshotRow {
                epoch,
                kind: EntityKind::Publisher,
                id: p.id.0,
                spend: totals.spend.0,
                cost: totals.cost.0,
                installs: 0,
                margin: l.margin(p.id),
                eta: None,
            });
        }
        for c in &self.scenario.campaigns {
            let totals = l.campaign(c.id);
            rows.push(SnapshotRow {
                epoch,
                kind: EntityKind::Campaign,
                id: c.id.0,
                spend: 0,
                cost: totals.cost.0,
                installs: totals.installs,
                margin: None,
                eta: l.efficiency(c).measured(),
            });
        }
    }

    /// Runs to the horizon.
    pub fn run(mut self, agent: &mut dyn Agent) -> Result<RunOutput> {
        while !self.is_done() {
            self.run_epoch(agent)?;
        }
        agent.on_finish(&self)?;
        Ok(RunOutput {
            ledger: self.ledger,
            epochs: self.epochs,
            events: self.log,
            snapshots: self.snapshots,
        })
    }
}
