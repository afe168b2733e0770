use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::{Agent, Market};
use crate::action::ActionIndex;
use crate::domain::{CampaignId, PublisherId};
use crate::error::Result;
use crate::qlearning::{ExplorationSchedule, GreedyPolicy, QTable};
use crate::quantizer::StateIndex;
use crate::reward::{reward, RewardConfig, RewardSnapshot};

/// Policies that never learn.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedPolicy {
    /// Keep bidding the eCPM base prices.
    NoOp,
    /// Hand-written rule of thumb.
    Intuitive,
    /// The same action in every state.
    Constant(ActionIndex),
    Greedy(GreedyPolicy),
}

pub struct PolicyAgent {
    pub policy: FixedPolicy,
}

impl PolicyAgent {
    pub fn new(policy: FixedPolicy) -> PolicyAgent {
        PolicyAgent { policy }
    }
}

fn reprice(
    market: &mut Market<'_>,
    publisher: PublisherId,
    campaign: CampaignId,
    state: StateIndex,
    action: ActionIndex,
) {
    let scenario = market.scenario();
    let Some(base) = market.base_quote(publisher, campaign) else {
        return;
    };
    let beta_hat = scenario.quantizer.budget_representative(state.budget_bin);
    let quote = scenario.action_space.apply(base, action, beta_hat);
    market.set_quote(publisher, campaign, quote);
}

fn state_at(
    market: &Market<'_>,
    publisher: PublisherId,
    campaign: CampaignId,
) -> Result<StateIndex> {
    let scenario = market.scenario();
    scenario.quantizer.state_of(
        market.ledger(),
        &scenario.campaigns[campaign.index()],
        publisher,
    )
}

impl Agent for PolicyAgent {
    fn on_epoch(&mut self, market: &mut Market<'_>) -> Result<()> {
        if self.policy == FixedPolicy::NoOp {
            return Ok(());
        }
        let scenario = market.scenario();
        for (j, i) in market.active_pairs() {
            let s = state_at(market, j, i)?;
            let action = match &self.policy {
                FixedPolicy::NoOp => unreachable!(),
                FixedPolicy::Intuitive => scenario.action_space.intuitive(s, &scenario.quantizer),
                FixedPolicy::Constant(a) => *a,
                FixedPolicy::Greedy(p) => scenario
                    .action_space
                    .decode(p.action(scenario.quantizer.flat(s)))?,
            };
            reprice(market, j, i, s, action);
        }
        Ok(())
    }
}

/// What the reward of a pending step is measured against.
#[derive(Copy, Clone, Debug)]
struct Pending {
    state: usize,
    action: usize,
    margin: f64,
    eta: f64,
}

/// Boltzmann-exploring Q-learner. One table is shared by all pairs; a step
/// lasts exactly one epoch.
pub struct LearningAgent<'t> {
    table: &'t mut QTable,
    schedule: ExplorationSchedule,
    reward: RewardConfig,
    rng: ChaCha8Rng,
    epoch: u64,
    pending: BTreeMap<(PublisherId, CampaignId), Pending>,
}

impl<'t> LearningAgent<'t> {
    pub fn new(
        table: &'t mut QTable,
        schedule: ExplorationSchedule,
        reward: RewardConfig,
        rng: ChaCha8Rng,
    ) -> Self {
        LearningAgent {
            table,
            schedule,
            reward,
            rng,
            epoch: 0,
            pending: BTreeMap::new(),
        }
    }

    /// Decision epochs seen so far; drives the temperature.
    pub fn epochs_seen(&self) -> u64 {
        self.epoch
    }

    fn observe(market: &Market<'_>, j: PublisherId, i: CampaignId) -> (f64, f64) {
        let scenario = market.scenario();
        let ledger = market.ledger();
        let margin = ledger.margin(j).unwrap_or(0.0);
        let eta = ledger
            .efficiency(&scenario.campaigns[i.index()])
            .for_reward(scenario.quantizer.eta_upper);
        (margin, eta)
    }

    /// Closes every step taken at the previous epoch, whether or not the
    /// pair won anything since.
    fn flush(&mut self, market: &Market<'_>) -> Result<()> {
        let scenario = market.scenario();
        for ((j, i), p) in std::mem::take(&mut self.pending) {
            let next = scenario.quantizer.flat(state_at(market, j, i)?);
            self.close(market, j, i, p, next)?;
        }
        Ok(())
    }

    fn close(
        &mut self,
        market: &Market<'_>,
        j: PublisherId,
        i: CampaignId,
        p: Pending,
        next: usize,
    ) -> Result<()> {
        let ledger = market.ledger();
        let (m_now, eta_now) = Self::observe(market, j, i);
        let snap = RewardSnapshot {
            m_prev: p.margin,
            m_now,
            eta_prev: p.eta,
            eta_now,
            budget_i_remaining: ledger.budget_remaining(i).units(),
            total_budget_remaining: ledger.total_budget_remaining().units(),
            spend_j: ledger.publisher(j).spend.units(),
            total_spend: ledger.total_spend().units(),
        };
        let r = reward(&snap, &self.reward);
        self.table.update(p.state, p.action, r, next)
    }
}

impl Agent for LearningAgent<'_> {
    fn on_epoch(&mut self, market: &mut Market<'_>) -> Result<()> {
        let scenario = market.scenario();
        self.flush(market)?;
        let theta = self.schedule.temperature(self.epoch);
        for (j, i) in market.active_pairs() {
            let s = state_at(market, j, i)?;
            let flat = scenario.quantizer.flat(s);
            let a = self.table.boltzmann_sample(flat, theta, &mut self.rng);
            reprice(market, j, i, s, scenario.action_space.decode(a)?);
            let (margin, eta) = Self::observe(market, j, i);
            self.pending.insert(
                (j, i),
                Pending {
                    state: flat,
                    action: a,
                    margin,
                    eta,
                },
            );
        }
        self.epoch += 1;
        Ok(())
    }

    fn on_finish(&mut self, market: &Market<'_>) -> Result<()> {
        self.flush(market)
    }
}
