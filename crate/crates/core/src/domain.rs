//! Campaigns, publishers and the running ledger of spend, cost and installs.
//!
//! Money that flows through the ledger is kept as integer micro-units so that
//! two runs over the same event stream agree to the last unit. Ratios such as
//! margin and efficiency are evaluated in floating point only when read.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Money in millionths of a currency unit.
#[derive(
    Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);
    pub const PER_UNIT: i64 = 1_000_000;

    /// Rounds a currency amount to the nearest micro-unit.
    pub fn from_units(units: f64) -> Micros {
        Micros((units * Self::PER_UNIT as f64).round() as i64)
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / Self::PER_UNIT as f64
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        Micros(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.units())
    }
}

/// Campaign identifier; equal to the campaign's position in its scenario.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CampaignId(pub u32);

/// Publisher identifier; equal to the publisher's position in its scenario.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublisherId(pub u32);

impl CampaignId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PublisherId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Minutes since the start of a simulation.
pub type Minute = u32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: CampaignId,
    /// Advertiser's target cost per install.
    pub target_cpi: f64,
    pub budget: Micros,
    /// Probability of an install given a click.
    pub pcvr: f64,
    /// Installs seen for this campaign in historical data.
    pub baseline_installs: u64,
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_cpi > 0.0) {
            return Err(config_err(format!(
                "campaign {}: target_cpi must be > 0",
                self.id.0
            )));
        }
        if self.budget.0 <= 0 {
            return Err(config_err(format!(
                "campaign {}: budget must be > 0",
                self.id.0
            )));
        }
        if !(0.0..=1.0).contains(&self.pcvr) {
            return Err(config_err(format!(
                "campaign {}: pcvr outside [0, 1]",
                self.id.0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Publisher {
    pub id: PublisherId,
    pub floor_price: f64,
    /// Scale parameter `a` of the win-rate sigmoid.
    pub landscape_a: f64,
    /// Expected ad opportunities per minute.
    pub request_rate: f64,
    /// Click probability per campaign; a missing entry means the campaign
    /// cannot be shown on this publisher.
    pub pctr: BTreeMap<CampaignId, f64>,
}

impl Publisher {
    pub fn validate(&self) -> Result<()> {
        let id = self.id.0;
        if !(self.floor_price >= 0.0) {
            return Err(config_err(format!(
                "publisher {id}: floor_price must be >= 0"
            )));
        }
        if !(self.landscape_a > 0.0) {
            return Err(config_err(format!(
                "publisher {id}: landscape_a must be > 0"
            )));
        }
        if !(self.request_rate >= 0.0) || !self.request_rate.is_finite() {
            return Err(config_err(format!(
                "publisher {id}: request_rate must be finite and >= 0"
            )));
        }
        if let Some((c, p)) = self.pctr.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(config_err(format!(
                "publisher {id}: pctr for campaign {} is {p}",
                c.0
            )));
        }
        Ok(())
    }
}

/// Per-campaign efficiency as observed so far.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Efficiency {
    /// Actual CPI over target CPI.
    Measured(f64),
    /// No cost and no installs yet.
    Untouched,
    /// Cost has been charged but no install has been reported.
    NoInstalls,
}

impl Efficiency {
    pub fn measured(self) -> Option<f64> {
        match self {
            Efficiency::Measured(eta) => Some(eta),
            _ => None,
        }
    }

    /// Finite stand-in for reward arithmetic: undefined readings become
    /// `eta_upper`, and measured values are capped there as well.
    pub fn for_reward(self, eta_upper: f64) -> f64 {
        match self {
            Efficiency::Measured(eta) => eta.min(eta_upper),
            Efficiency::Untouched | Efficiency::NoInstalls => eta_upper,
        }
    }
}

/// Strict `eta < 1 + epsilon`.
pub fn is_happy(eta: f64, epsilon: f64) -> bool {
    eta < 1.0 + epsilon
}

/// Happiness of a campaign reading. A campaign that was never charged is
/// happy; one that paid without a single install is not.
pub fn is_happy_reading(eff: Efficiency, epsilon: f64) -> bool {
    match eff {
        Efficiency::Measured(eta) => is_happy(eta, epsilon),
        Efficiency::Untouched => true,
        Efficiency::NoInstalls => false,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherTotals {
    /// Paid to the exchange for impressions.
    pub spend: Micros,
    /// Charged to advertisers for clicks on this publisher.
    pub cost: Micros,
    pub impressions: u64,
    pub clicks: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignTotals {
    pub cost: Micros,
    pub impressions: u64,
    pub clicks: u64,
    /// Installs whose notification has arrived.
    pub installs: u64,
}

/// An install still in flight between click and notification.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PendingInstall {
    pub notify_time: Minute,
    pub click_time: Minute,
    pub campaign: CampaignId,
    pub publisher: PublisherId,
}

/// Everything that moves money or installs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LedgerEvent {
    Impression {
        t: Minute,
        publisher: PublisherId,
        campaign: CampaignId,
        price: Micros,
    },
    Click {
        t: Minute,
        publisher: PublisherId,
        campaign: CampaignId,
        charge: Micros,
    },
    Install {
        t: Minute,
        publisher: PublisherId,
        campaign: CampaignId,
        click_time: Minute,
    },
}

/// Running aggregates for one simulation run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub clock: Minute,
    pub horizon: Minute,
    publishers: Vec<PublisherTotals>,
    campaigns: Vec<CampaignTotals>,
    budgets: Vec<Micros>,
}

impl Ledger {
    pub fn new(horizon: Minute, publishers: usize, budgets: Vec<Micros>) -> Ledger {
        Ledger {
            clock: 0,
            horizon,
            publishers: vec![PublisherTotals::default(); publishers],
            campaigns: vec![CampaignTotals::default(); budgets.len()],
            budgets,
        }
    }

    pub fn publisher_count(&self) -> usize {
        self.publishers.len()
    }

    pub fn campaign_count(&self) -> usize {
        self.campaigns.len()
    }

    pub fn publisher(&self, id: PublisherId) -> &PublisherTotals {
        &self.publishers[id.index()]
    }

    pub fn campaign(&self, id: CampaignId) -> &CampaignTotals {
        &self.campaigns[id.index()]
    }

    pub fn budget(&self, id: CampaignId) -> Micros {
        self.budgets[id.index()]
    }

    pub fn publishers(&self) -> &[PublisherTotals] {
        &self.publishers
    }

    pub fn campaigns(&self) -> &[CampaignTotals] {
        &self.campaigns
    }

    pub fn total_spend(&self) -> Micros {
        self.publishers.iter().map(|p| p.spend).sum()
    }

    pub fn total_cost(&self) -> Micros {
        self.campaigns.iter().map(|c| c.cost).sum()
    }

    pub fn total_budget(&self) -> Micros {
        self.budgets.iter().copied().sum()
    }

    pub fn budget_remaining(&self, id: CampaignId) -> Micros {
        self.budgets[id.index()] - self.campaigns[id.index()].cost
    }

    pub fn total_budget_remaining(&self) -> Micros {
        self.total_budget() - self.total_cost()
    }

    /// Leftover budget fraction `(B - cost) / B`.
    pub fn budget_fraction(&self, id: CampaignId) -> f64 {
        let b = self.budgets[id.index()];
        self.budget_remaining(id).0 as f64 / b.0 as f64
    }

    /// `(cost_j - spend_j) / sum_j spend_j`, or `None` while nothing has been spent.
    pub fn margin(&self, id: PublisherId) -> Option<f64> {
        let total = self.total_spend();
        if total.0 == 0 {
            return None;
        }
        let p = &self.publishers[id.index()];
        Some((p.cost.0 - p.spend.0) as f64 / total.0 as f64)
    }

    /// Sum of all publisher margins, which shares the common denominator.
    pub fn overall_margin(&self) -> Option<f64> {
        let total = self.total_spend();
        if total.0 == 0 {
            return None;
        }
        Some((self.total_cost().0 - total.0) as f64 / total.0 as f64)
    }

    /// Margin measured against the publisher's own spend.
    pub fn local_margin(&self, id: PublisherId) -> Option<f64> {
        let p = &self.publishers[id.index()];
        if p.spend.0 == 0 {
            return None;
        }
        Some((p.cost.0 - p.spend.0) as f64 / p.spend.0 as f64)
    }

    pub fn efficiency(&self, campaign: &Campaign) -> Efficiency {
        let c = &self.campaigns[campaign.id.index()];
        match (c.installs, c.cost.0) {
            (0, 0) => Efficiency::Untouched,
            (0, _) => Efficiency::NoInstalls,
            (n, cost) => Efficiency::Measured((cost as f64 / 1e6 / n as f64) / campaign.target_cpi),
        }
    }

    /// Applies one event. Click charges must already respect the budget;
    /// the ledger asserts rather than clamps.
    pub fn apply(&mut self, event: &LedgerEvent) {
        match *event {
            LedgerEvent::Impression {
                publisher,
                campaign,
                price,
                ..
            } => {
                let p = &mut self.publishers[publisher.index()];
                p.spend += price;
                p.impressions += 1;
                self.campaigns[campaign.index()].impressions += 1;
            }
            LedgerEvent::Click {
                publisher,
                campaign,
                charge,
                ..
            } => {
                let p = &mut self.publishers[publisher.index()];
                p.cost += charge;
                p.clicks += 1;
                let c = &mut self.campaigns[campaign.index()];
                c.cost += charge;
                c.clicks += 1;
                assert!(
                    c.cost <= self.budgets[campaign.index()],
                    "campaign {} over budget",
                    campaign.0
                );
            }
            LedgerEvent::Install { campaign, .. } => {
                self.campaigns[campaign.index()].installs += 1;
            }
        }
    }

    /// Fold a sequence of events into a fresh ledger.
    pub fn replay<'a>(
        horizon: Minute,
        publishers: usize,
        budgets: Vec<Micros>,
        events: impl IntoIterator<Item = &'a LedgerEvent>,
    ) -> Ledger {
        let mut ledger = Ledger::new(horizon, publishers, budgets);
        for e in events {
            ledger.apply(e);
        }
        ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P0: PublisherId = PublisherId(0);
    const P1: PublisherId = PublisherId(1);
    const C0: CampaignId = CampaignId(0);

    fn campaign(target_cpi: f64) -> Campaign {
        Campaign {
            id: C0,
            target_cpi,
            budget: Micros::from_units(1000.0),
            pcvr: 0.1,
            baseline_installs: 10,
        }
    }

    fn impression(publisher: PublisherId, units: f64) -> LedgerEvent {
        LedgerEvent::Impression {
            t: 0,
            publisher,
            campaign: C0,
            price: Micros::from_units(units),
        }
    }

    fn click(publisher: PublisherId, units: f64) -> LedgerEvent {
        LedgerEvent::Click {
            t: 0,
            publisher,
            campaign: C0,
            charge: Micros::from_units(units),
        }
    }

    fn install() -> LedgerEvent {
        LedgerEvent::Install {
            t: 0,
            publisher: P0,
            campaign: C0,
            click_time: 0,
        }
    }

    fn two_publisher_ledger(cost0: f64, spend0: f64, cost1: f64, spend1: f64) -> Ledger {
        let events = [
            impression(P0, spend0),
            click(P0, cost0),
            impression(P1, spend1),
            click(P1, cost1),
        ];
        Ledger::replay(60, 2, vec![Micros::from_units(1000.0)], events.iter())
    }

    #[test]
    fn margin_examples() {
        let l = two_publisher_ledger(12.0, 10.0, 10.0, 10.0);
        assert!((l.margin(P0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(l.margin(P1), Some(0.0));

        let l = two_publisher_ledger(0.0, 5.0, 0.0, 0.0);
        assert_eq!(l.margin(P0), Some(-1.0));
    }

    #[test]
    fn margin_undefined_without_spend() {
        let l = Ledger::new(60, 2, vec![Micros(1)]);
        assert_eq!(l.margin(P0), None);
        assert_eq!(l.overall_margin(), None);
    }

    #[test]
    fn efficiency_examples() {
        let c = campaign(5.0);
        let mut l = Ledger::new(60, 1, vec![c.budget]);
        assert_eq!(l.efficiency(&c), Efficiency::Untouched);
        l.apply(&click(P0, 30.0));
        assert_eq!(l.efficiency(&c), Efficiency::NoInstalls);
        for _ in 0..3 {
            l.apply(&install());
        }
        assert_eq!(l.efficiency(&c), Efficiency::Measured(2.0));

        let mut l = Ledger::new(60, 1, vec![c.budget]);
        l.apply(&click(P0, 10.0));
        l.apply(&install());
        l.apply(&install());
        assert_eq!(l.efficiency(&c), Efficiency::Measured(1.0));
    }

    #[test]
    fn happy_examples() {
        assert!(is_happy(1.19, 0.2));
        assert!(!is_happy(1.2, 0.2));
        assert!(is_happy(0.5, 0.2));
        assert!(is_happy_reading(Efficiency::Untouched, 0.2));
        assert!(!is_happy_reading(Efficiency::NoInstalls, 0.2));
    }

    #[test]
    #[should_panic(expected = "over budget")]
    fn ledger_rejects_overspend() {
        let mut l = Ledger::new(60, 1, vec![Micros(10)]);
        l.apply(&LedgerEvent::Click {
            t: 0,
            publisher: P0,
            campaign: C0,
            charge: Micros(11),
        });
    }

    proptest! {
        #[test]
        fn margins_share_denominator(
            amounts in prop::collection::vec((1i64..1_000_000, 0i64..1_000_000), 1..6)
        ) {
            let n = amounts.len();
            let mut events = Vec::new();
            for (j, (spend, cost)) in amounts.iter().enumerate() {
                let publisher = PublisherId(j as u32);
                events.push(LedgerEvent::Impression { t: 0, publisher, campaign: C0, price: Micros(*spend) });
                events.push(LedgerEvent::Click { t: 0, publisher, campaign: C0, charge: Micros(*cost) });
            }
            let l = Ledger::replay(60, n, vec![Micros(i64::MAX / 2)], events.iter());
            let sum: f64 = (0..n).map(|j| l.margin(PublisherId(j as u32)).unwrap()).sum();
            let whole = l.overall_margin().unwrap();
            prop_assert!((sum - whole).abs() <= 1e-9 * (1.0 + whole.abs()));

            // Uniform scaling of every amount leaves each margin unchanged.
            let scaled: Vec<_> = events.iter().map(|e| match *e {
                LedgerEvent::Impression { t, publisher, campaign, price } =>
                    LedgerEvent::Impression { t, publisher, campaign, price: Micros(price.0 * 3) },
                LedgerEvent::Click { t, publisher, campaign, charge } =>
                    LedgerEvent::Click { t, publisher, campaign, charge: Micros(charge.0 * 3) },
                other => other,
            }).collect();
            let l3 = Ledger::replay(60, n, vec![Micros(i64::MAX / 2)], scaled.iter());
            for j in 0..n {
                let id = PublisherId(j as u32);
                prop_assert!((l.margin(id).unwrap() - l3.margin(id).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn efficiency_is_homogeneous(cost in 1i64..10_000_000, installs in 1u64..50, cpi in 0.1f64..100.0, k in 1i64..20) {
            let eta = |cost: i64, cpi: f64| {
                let c = Campaign { target_cpi: cpi, ..campaign(cpi) };
                let mut l = Ledger::new(60, 1, vec![Micros(i64::MAX / 2)]);
                l.apply(&LedgerEvent::Click { t: 0, publisher: P0, campaign: C0, charge: Micros(cost) });
                for _ in 0..installs { l.apply(&install()); }
                l.efficiency(&c).measured().unwrap()
            };
            let a = eta(cost, cpi);
            let b = eta(cost * k, cpi * k as f64);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn replay_is_a_pure_fold(spends in prop::collection::vec(0i64..1000, 0..40)) {
            let events: Vec<_> = spends.iter().enumerate().map(|(k, s)| LedgerEvent::Impression {
                t: k as u32, publisher: PublisherId((k % 3) as u32), campaign: C0, price: Micros(*s),
            }).collect();
            let a = Ledger::replay(60, 3, vec![Micros(1)], events.iter());
            let b = Ledger::replay(60, 3, vec![Micros(1)], events.iter());
            prop_assert_eq!(a, b);
        }
    }
}
