//! Discretization of (margin, efficiency, leftover budget) into table states.
//!
//! Every bin is half-open `(lo, hi]` except the lowest efficiency and budget
//! bins, which are closed at zero. Margin bins beyond the outermost edges
//! absorb everything further out.

use serde::{Deserialize, Serialize};

use crate::domain::{Campaign, Efficiency, Ledger, PublisherId};
use crate::error::{config_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Half-width of the neutral margin bin.
    pub delta_m: f64,
    /// Margin bins on each side of the neutral one.
    pub l_m: u32,
    /// Efficiency tolerance; campaigns below `1 + epsilon` are happy.
    pub epsilon: f64,
    pub eta_upper: f64,
    /// Efficiency bins on each side of `1 + epsilon`.
    pub l_eta: u32,
    /// Half the number of leftover-budget bins.
    pub l_b: u32,
}

impl Default for QuantizerConfig {
    /// 3 margin x 4 efficiency x 4 budget bins.
    fn default() -> Self {
        QuantizerConfig {
            delta_m: 0.05,
            l_m: 1,
            epsilon: 0.2,
            eta_upper: 5.0,
            l_eta: 2,
            l_b: 2,
        }
    }
}

/// Quantized state of one (publisher, campaign) pair.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateIndex {
    pub margin_bin: usize,
    pub eta_bin: usize,
    pub budget_bin: usize,
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_m > 0.0) || !self.delta_m.is_finite() {
            return Err(config_err("delta_m must be finite and > 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(config_err("epsilon must be > 0"));
        }
        if !(self.eta_upper > 1.0 + self.epsilon) || !self.eta_upper.is_finite() {
            return Err(config_err("eta_upper must be finite and > 1 + epsilon"));
        }
        if self.l_m == 0 || self.l_eta == 0 || self.l_b == 0 {
            return Err(config_err("l_m, l_eta and l_b must be positive"));
        }
        Ok(())
    }

    pub fn margin_bins(&self) -> usize {
        2 * self.l_m as usize + 1
    }

    pub fn eta_bins(&self) -> usize {
        2 * self.l_eta as usize
    }

    pub fn budget_bins(&self) -> usize {
        2 * self.l_b as usize
    }

    pub fn state_count(&self) -> usize {
        self.margin_bins() * self.eta_bins() * self.budget_bins()
    }

    pub fn neutral_margin_bin(&self) -> usize {
        self.l_m as usize
    }

    pub fn quantize_margin(&self, m: f64) -> Result<usize> {
        if m.is_nan() {
            return Err(Error::NanMargin);
        }
        let d = self.delta_m;
        let l = self.l_m as usize;
        let bin = if m > d {
            let k = ((m - d) / (2.0 * d)).ceil().max(1.0);
            l + (k as usize).min(l)
        } else if m <= -d {
            let k = ((-d - m) / (2.0 * d)).floor() + 1.0;
            l - (k as usize).min(l)
        } else {
            l
        };
        Ok(bin)
    }

    fn good_width(&self) -> f64 {
        (1.0 + self.epsilon) / self.l_eta as f64
    }

    fn bad_width(&self) -> f64 {
        (self.eta_upper - 1.0 - self.epsilon) / self.l_eta as f64
    }

    pub fn quantize_eta(&self, eta: f64) -> Result<usize> {
        if eta.is_nan() || eta < 0.0 {
            return Err(Error::NegativeEfficiency(eta));
        }
        let l = self.l_eta as usize;
        let threshold = 1.0 + self.epsilon;
        let bin = if eta <= threshold {
            let k = (eta / self.good_width()).ceil() as usize;
            k.saturating_sub(1).min(l - 1)
        } else {
            let k = ((eta - threshold) / self.bad_width()).ceil() as usize;
            (l + k.saturating_sub(1)).min(2 * l - 1)
        };
        Ok(bin)
    }

    /// Bin for an efficiency reading. A campaign that has not spent sits in
    /// the bin of an on-target campaign; one that spent without installs is
    /// put in the worst bin.
    pub fn quantize_efficiency(&self, eff: Efficiency) -> Result<usize> {
        match eff {
            Efficiency::Measured(eta) => self.quantize_eta(eta),
            Efficiency::Untouched => self.quantize_eta(1.0),
            Efficiency::NoInstalls => Ok(self.eta_bins() - 1),
        }
    }

    pub fn quantize_budget(&self, beta: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::BudgetFraction(beta));
        }
        let n = self.budget_bins();
        let k = (beta * n as f64).ceil() as usize;
        Ok(k.saturating_sub(1).min(n - 1))
    }

    /// Midpoint of a margin bin (outermost bins use their nominal width).
    pub fn margin_representative(&self, bin: usize) -> f64 {
        let offset = bin as f64 - self.l_m as f64;
        2.0 * self.delta_m * offset
    }

    pub fn eta_representative(&self, bin: usize) -> f64 {
        let l = self.l_eta as usize;
        if bin < l {
            (bin as f64 + 0.5) * self.good_width()
        } else {
            1.0 + self.epsilon + ((bin - l) as f64 + 0.5) * self.bad_width()
        }
    }

    /// Midpoint of a leftover-budget bin; used as the leftover fraction
    /// when scaling cost updates.
    pub fn budget_representative(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) / self.budget_bins() as f64
    }

    pub fn is_good_eta(&self, bin: usize) -> bool {
        bin < self.l_eta as usize
    }

    pub fn flat(&self, s: StateIndex) -> usize {
        (s.margin_bin * self.eta_bins() + s.eta_bin) * self.budget_bins() + s.budget_bin
    }

    pub fn unflat(&self, flat: usize) -> Result<StateIndex> {
        if flat >= self.state_count() {
            return Err(Error::OutOfRange {
                kind: "state",
                index: flat,
                size: self.state_count(),
            });
        }
        let b = self.budget_bins();
        let e = self.eta_bins();
        Ok(StateIndex {
            margin_bin: flat / (e * b),
            eta_bin: (flat / b) % e,
            budget_bin: flat % b,
        })
    }

    /// State of the (publisher, campaign) pair given current aggregates.
    pub fn state_of(
        &self,
        ledger: &Ledger,
        campaign: &Campaign,
        publisher: PublisherId,
    ) -> Result<StateIndex> {
        let margin_bin = match ledger.margin(publisher) {
            Some(m) => self.quantize_margin(m)?,
            None => self.neutral_margin_bin(),
        };
        let eta_bin = self.quantize_efficiency(ledger.efficiency(campaign))?;
        let budget_bin = self.quantize_budget(ledger.budget_fraction(campaign.id))?;
        Ok(StateIndex {
            margin_bin,
            eta_bin,
            budget_bin,
        })
    }
}
