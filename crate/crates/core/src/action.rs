//! Compound bid/cost actions applied on top of eCPM base prices.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::domain::{Campaign, Publisher};
use crate::error::{config_err, Error, Result};
use crate::quantizer::{QuantizerConfig, StateIndex};

/// Finite grid of bid and cost adjustments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    /// Possible outputs of the margin-driven bid adjustment, ascending.
    pub f_m: Vec<f64>,
    /// Possible outputs of the efficiency-driven cost adjustment, ascending.
    pub f_eta: Vec<f64>,
    pub kappa_bid: f64,
    pub kappa_beta: f64,
    pub kappa_eta: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionIndex {
    pub m_idx: usize,
    pub eta_idx: usize,
}

/// Bid per impression at the exchange and cost per click to the advertiser.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub bid: f64,
    pub cost: f64,
}

impl Default for ActionSpace {
    /// 8 bid values x 14 cost values.
    fn default() -> Self {
        let f_m = vec![-1.0, -0.66, -0.33, -0.15, 0.0, 0.33, 0.66, 1.0];
        let mut f_eta: Vec<f64> = (-6..=6).map(|k| k as f64 / 6.0).collect();
        f_eta.push(1.0 / 12.0);
        f_eta.sort_by(f64::total_cmp);
        ActionSpace {
            f_m,
            f_eta,
            kappa_bid: 0.2,
            kappa_beta: 0.5,
            kappa_eta: 0.2,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(config_err(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(config_err(format!("{name} grid has non-finite values")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!(
            "{name} grid must be strictly ascending"
        )));
    }
    if !grid.contains(&0.0) {
        return Err(config_err(format!("{name} grid must contain 0")));
    }
    Ok(())
}

impl ActionSpace {
    pub fn validate(&self) -> Result<()> {
        check_grid("f_m", &self.f_m)?;
        check_grid("f_eta", &self.f_eta)?;
        if ![self.kappa_bid, self.kappa_beta, self.kappa_eta]
            .iter()
            .all(|k| k.is_finite())
        {
            return Err(config_err("kappa constants must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.f_m.len() * self.f_eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encode(&self, a: ActionIndex) -> usize {
        a.m_idx * self.f_eta.len() + a.eta_idx
    }

    pub fn decode(&self, flat: usize) -> Result<ActionIndex> {
        if flat >= self.len() {
            return Err(Error::OutOfRange {
                kind: "action",
                index: flat,
                size: self.len(),
            });
        }
        Ok(ActionIndex {
            m_idx: flat / self.f_eta.len(),
            eta_idx: flat % self.f_eta.len(),
        })
    }

    fn zero_idx(grid: &[f64]) -> usize {
        grid.iter()
            .position(|&v| v == 0.0)
            .expect("validated grid contains 0")
    }

    /// The action that leaves both prices unchanged.
    pub fn noop(&self) -> ActionIndex {
        ActionIndex {
            m_idx: Self::zero_idx(&self.f_m),
            eta_idx: Self::zero_idx(&self.f_eta),
        }
    }

    /// Applies one bid/cost update. `beta_hat` is the leftover budget
    /// fraction the cost update is scaled by.
    pub fn apply(&self, quote: PriceQuote, action: ActionIndex, beta_hat: f64) -> PriceQuote {
        let f_m = self.f_m[action.m_idx];
        let f_eta = self.f_eta[action.eta_idx];
        let bid = quote.bid * (1.0 + self.kappa_bid * f_m);
        let cost = quote.cost * (1.0 + (1.0 + self.kappa_beta * beta_hat) * self.kappa_eta * f_eta);
        if !(bid >= 0.0) || !(cost >= 0.0) {
            warn!("degenerate action parameters: bid {bid}, cost {cost} (f_m {f_m}, f_eta {f_eta}, beta {beta_hat})");
        }
        PriceQuote {
            bid: floor_zero(bid),
            cost: floor_zero(cost),
        }
    }

    /// Fixed rule of thumb: cut the bid when margin is negative, raise it when
    /// positive; cut cost when efficiency is bad, raise it when efficiency is
    /// good and margin negative, otherwise leave it.
    pub fn intuitive(&self, state: StateIndex, quantizer: &QuantizerConfig) -> ActionIndex {
        let neutral = quantizer.neutral_margin_bin();
        let lowest = 0;
        let m_hi = self.f_m.len() - 1;
        let e_hi = self.f_eta.len() - 1;
        let zero = self.noop();
        let good = quantizer.is_good_eta(state.eta_bin);
        let m_idx = match state.margin_bin.cmp(&neutral) {
            std::cmp::Ordering::Less => lowest,
            std::cmp::Ordering::Equal => zero.m_idx,
            std::cmp::Ordering::Greater => m_hi,
        };
        let eta_idx = match (good, state.margin_bin < neutral) {
            (false, _) => lowest,
            (true, true) => e_hi,
            (true, false) => zero.eta_idx,
        };
        ActionIndex { m_idx, eta_idx }
    }
}

fn floor_zero(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// eCPM bid and per-click cost before any adjustment.
pub fn base_quote(campaign: &Campaign, publisher: &Publisher) -> Result<PriceQuote> {
    let pctr = *publisher.pctr.get(&campaign.id).ok_or(Error::MissingPctr {
        publisher: publisher.id.0,
        campaign: campaign.id.0,
    })?;
    let cost = campaign.target_cpi * campaign.pcvr;
    Ok(PriceQuote {
        bid: cost * pctr,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CampaignId, Micros, PublisherId};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn space(kappa_bid: f64, kappa_beta: f64, kappa_eta: f64) -> ActionSpace {
        ActionSpace {
            f_m: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            f_eta: vec![-1.0, 0.0, 1.0],
            kappa_bid,
            kappa_beta,
            kappa_eta,
        }
    }

    fn campaign(target_cpi: f64, pcvr: f64) -> Campaign {
        Campaign {
            id: CampaignId(0),
            target_cpi,
            budget: Micros(1),
            pcvr,
            baseline_installs: 10,
        }
    }

    fn publisher(pctr: Option<f64>) -> Publisher {
        let mut map = BTreeMap::new();
        if let Some(p) = pctr {
            map.insert(CampaignId(0), p);
        }
        Publisher {
            id: PublisherId(0),
            floor_price: 0.0,
            landscape_a: 1.0,
            request_rate: 1.0,
            pctr: map,
        }
    }

    #[test]
    fn base_quote_examples() {
        let q = base_quote(&campaign(10.0, 0.1), &publisher(Some(0.02))).unwrap();
        assert!((q.bid - 0.02).abs() < 1e-15 && (q.cost - 1.0).abs() < 1e-15);

        let q = base_quote(&campaign(10.0, 0.1), &publisher(Some(0.0))).unwrap();
        assert_eq!(q.bid, 0.0);
        assert!((q.cost - 1.0).abs() < 1e-15);

        let q = base_quote(&campaign(10.0, 0.0), &publisher(Some(0.02))).unwrap();
        assert_eq!((q.bid, q.cost), (0.0, 0.0));

        assert!(matches!(
            base_quote(&campaign(10.0, 0.1), &publisher(None)),
            Err(Error::MissingPctr { .. })
        ));
    }

    #[test]
    fn apply_examples() {
        let s = space(0.1, 0.0, 0.1);
        let q = PriceQuote {
            bid: 2.0,
            cost: 1.0,
        };
        let down = s.apply(
            q,
            ActionIndex {
                m_idx: 0,
                eta_idx: 1,
            },
            0.5,
        );
        assert!((down.bid - 1.8).abs() < 1e-15);
        assert_eq!(down.cost, 1.0);

        assert_eq!(s.apply(q, s.noop(), 0.3), q);

        let up = s.apply(
            q,
            ActionIndex {
                m_idx: 2,
                eta_idx: 2,
            },
            0.7,
        );
        assert!((up.cost - 1.1).abs() < 1e-15);
    }

    #[test]
    fn apply_floors_at_zero() {
        let s = space(2.0, 0.0, 2.0);
        let q = s.apply(
            PriceQuote {
                bid: 1.0,
                cost: 1.0,
            },
            ActionIndex {
                m_idx: 0,
                eta_idx: 0,
            },
            0.0,
        );
        assert_eq!((q.bid, q.cost), (0.0, 0.0));
    }

    #[test]
    fn default_space_shape() {
        let s = ActionSpace::default();
        s.validate().unwrap();
        assert_eq!((s.f_m.len(), s.f_eta.len(), s.len()), (8, 14, 112));
        // A single update never moves a price by more than 40%.
        let max_bid = s.kappa_bid * s.f_m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let max_cost =
            (1.0 + s.kappa_beta) * s.kappa_eta * s.f_eta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max_bid <= 0.4 && max_cost <= 0.4);
    }

    #[test]
    fn grid_validation() {
        let mut s = space(0.1, 0.1, 0.1);
        s.f_m = vec![-1.0, 1.0];
        assert!(s.validate().is_err());
        s.f_m = vec![0.0, -1.0];
        assert!(s.validate().is_err());
        s.f_m = vec![];
        assert!(s.validate().is_err());
    }

    #[test]
    fn intuitive_examples() {
        let q = QuantizerConfig::default();
        let s = ActionSpace::default();
        let min_m = 0;
        let max_m = s.f_m.len() - 1;
        let min_e = 0;
        for budget_bin in 0..4 {
            // negative margin, bad efficiency: both down
            let a = s.intuitive(
                StateIndex {
                    margin_bin: 0,
                    eta_bin: 3,
                    budget_bin,
                },
                &q,
            );
            assert_eq!(
                a,
                ActionIndex {
                    m_idx: min_m,
                    eta_idx: min_e
                }
            );
            // positive margin, good efficiency: bid up, cost unchanged
            let a = s.intuitive(
                StateIndex {
                    margin_bin: 2,
                    eta_bin: 0,
                    budget_bin,
                },
                &q,
            );
            assert_eq!(
                a,
                ActionIndex {
                    m_idx: max_m,
                    eta_idx: s.noop().eta_idx
                }
            );
            // positive margin, bad efficiency: bid up, cost down
            let a = s.intuitive(
                StateIndex {
                    margin_bin: 2,
                    eta_bin: 2,
                    budget_bin,
                },
                &q,
            );
            assert_eq!(
                a,
                ActionIndex {
                    m_idx: max_m,
                    eta_idx: min_e
                }
            );
            // negative margin, good efficiency: bid down, cost up
            let a = s.intuitive(
                StateIndex {
                    margin_bin: 0,
                    eta_bin: 1,
                    budget_bin,
                },
                &q,
            );
            assert_eq!(
                a,
                ActionIndex {
                    m_idx: min_m,
                    eta_idx: s.f_eta.len() - 1
                }
            );
            for eta_bin in 0..4 {
                let a = s.intuitive(
                    StateIndex {
                        margin_bin: 1,
                        eta_bin,
                        budget_bin,
                    },
                    &q,
                );
                assert_eq!(s.f_m[a.m_idx], 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn apply_is_positively_homogeneous(
            bid in 0.0f64..10.0, cost in 0.0f64..10.0, c in 0.01f64..100.0,
            flat in 0usize..112, beta in 0.0f64..=1.0,
        ) {
            let s = ActionSpace::default();
            let a = s.decode(flat).unwrap();
            let q = s.apply(PriceQuote { bid, cost }, a, beta);
            let qc = s.apply(PriceQuote { bid: bid * c, cost: cost * c }, a, beta);
            prop_assert!((qc.bid - q.bid * c).abs() <= 1e-12 * (1.0 + qc.bid));
            prop_assert!((qc.cost - q.cost * c).abs() <= 1e-12 * (1.0 + qc.cost));
            prop_assert_eq!(s.encode(a), flat);
        }

        #[test]
        fn cost_grows_with_leftover_budget(cost in 0.0f64..10.0, b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0, eta_idx in 0usize..14) {
            let s = ActionSpace::default();
            let a = ActionIndex { m_idx: 0, eta_idx };
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let q = PriceQuote { bid: 1.0, cost };
            let (c_lo, c_hi) = (s.apply(q, a, lo).cost, s.apply(q, a, hi).cost);
            if s.f_eta[eta_idx] > 0.0 {
                prop_assert!(c_lo <= c_hi);
            }
        }
    }
}
