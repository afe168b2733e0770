//! Real-time bidding simulator and a tabular Q-learning engine that sets
//! per-publisher bids and per-campaign costs, trading publisher margin
//! against advertiser efficiency.
//!
//! The pieces, bottom up:
//!
//! * [`domain`]: campaigns, publishers, the money ledger and its metrics.
//! * [`quantizer`]: maps ledger readings to the 48 discrete states.
//! * [`action`]: the compound bid/cost action grid.
//! * [`reward`]: attribution-weighted margin/efficiency reward.
//! * [`qlearning`]: the Q-table, Boltzmann exploration, greedy policies.
//! * [`simulator`]: minute-level auctions, delayed installs, hourly epochs.
//! * [`baseline`]: the PI margin controller used for comparison.
//! * [`harness`]: scenario generation, training, evaluation and sweeps.

pub mod action;
pub mod baseline;
pub mod domain;
pub mod error;
pub mod harness;
pub mod qlearning;
pub mod quantizer;
pub mod reward;
pub mod simulator;

pub use error::{Error, Result};
