//! Margin-tracking PI controller used as the comparison baseline.
//!
//! One controller per publisher scales the eCPM bids of every campaign on
//! that publisher. Advertiser cost stays at its base value.

use serde::{Deserialize, Serialize};

use crate::action::PriceQuote;
use crate::domain::PublisherId;
use crate::error::{config_err, Result};
use crate::simulator::{Agent, Market, ACTION_EPOCH_MINUTES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiConfig {
    pub kp: f64,
    pub ki: f64,
    /// Margin the controller steers each publisher towards.
    pub margin_target: f64,
    /// Bound on the accumulated error.
    pub integral_clamp: f64,
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    pub update_epoch: u32,
}

impl Default for PiConfig {
    fn default() -> Self {
        PiConfig {
            kp: 1.0,
            ki: 0.1,
            margin_target: 0.05,
            integral_clamp: 2.0,
            min_multiplier: 0.5,
            max_multiplier: 2.0,
            update_epoch: ACTION_EPOCH_MINUTES,
        }
    }
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.integral_clamp >= 0.0)
            || !(self.min_multiplier <= self.max_multiplier)
            || self.min_multiplier < 0.0
        {
            return Err(config_err(format!("bad PI configuration {self:?}")));
        }
        if self.update_epoch == 0 || self.update_epoch % ACTION_EPOCH_MINUTES != 0 {
            return Err(config_err(
                "PI update epoch must be a multiple of 60 minutes",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PiController {
    pub integral: f64,
}

impl PiController {
    /// Bid multiplier after observing `margin`. The error is
    /// `margin - target`: surplus margin buys volume with higher bids and a
    /// shortfall pulls bids down.
    pub fn update(&mut self, cfg: &PiConfig, margin: f64) -> f64 {
        let e = margin - cfg.margin_target;
        self.integral = (self.integral + e).clamp(-cfg.integral_clamp, cfg.integral_clamp);
        (1.0 + cfg.kp * e + cfg.ki * self.integral).clamp(cfg.min_multiplier, cfg.max_multiplier)
    }
}

/// Runs one [`PiController`] per publisher. Each controller sees the
/// publisher's margin relative to its own spend.
pub struct PiAgent {
    cfg: PiConfig,
    controllers: Vec<PiController>,
    multipliers: Vec<f64>,
}

impl PiAgent {
    pub fn new(cfg: PiConfig, publishers: usize) -> PiAgent {
        PiAgent {
            cfg,
            controllers: vec![PiController::default(); publishers],
            multipliers: vec![1.0; publishers],
        }
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }
}

impl Agent for PiAgent {
    fn on_epoch(&mut self, market: &mut Market<'_>) -> Result<()> {
        if market.clock() % self.cfg.update_epoch != 0 {
            return Ok(());
        }
        for j in 0..self.controllers.len() {
            let publisher = PublisherId(j as u32);
            let Some(margin) = market.ledger().local_margin(publisher) else {
                continue;
            };
            let mult = self.controllers[j].update(&self.cfg, margin);
            self.multipliers[j] = mult;
            for c in market.candidates(publisher).to_vec() {
                if let Some(base) = market.base_quote(publisher, c) {
                    market.set_quote(
                        publisher,
                        c,
                        PriceQuote {
                            bid: base.bid * mult,
                            cost: base.cost,
                        },
                    );
                }
            }
        }
        Ok(())
    }
}
