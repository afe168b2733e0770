//! Attribution-weighted reward for one (publisher, campaign) action.
//!
//! The margin change of a publisher is credited to a pair in proportion to
//! the campaign's share of unspent budget; the efficiency change of a
//! campaign in proportion to the publisher's share of total spend.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// 0 rewards margin only, 1 rewards efficiency only.
    pub lambda: f64,
}

impl RewardConfig {
    pub fn new(lambda: f64) -> Result<RewardConfig> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(config_err(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(RewardConfig { lambda })
    }
}

/// Inputs to one reward evaluation. Money fields are in currency units.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSnapshot {
    pub m_prev: f64,
    pub m_now: f64,
    pub eta_prev: f64,
    pub eta_now: f64,
    pub budget_i_remaining: f64,
    pub total_budget_remaining: f64,
    pub spend_j: f64,
    pub total_spend: f64,
}

/// `(kappa_rm, kappa_reta)`; a weight whose denominator is zero is 0.
pub fn attribution_weights(snap: &RewardSnapshot) -> (f64, f64) {
    let kappa_rm = if snap.total_budget_remaining > 0.0 {
        snap.budget_i_remaining / snap.total_budget_remaining
    } else {
        0.0
    };
    let kappa_reta = if snap.total_spend > 0.0 {
        snap.spend_j / snap.total_spend
    } else {
        0.0
    };
    (kappa_rm, kappa_reta)
}

pub fn reward(snap: &RewardSnapshot, cfg: &RewardConfig) -> f64 {
    let (kappa_rm, kappa_reta) = attribution_weights(snap);
    let lambda = cfg.lambda;
    (1.0 - lambda) * kappa_rm * (snap.m_now - snap.m_prev)
        + lambda * kappa_reta * (snap.eta_prev - snap.eta_now)
}
