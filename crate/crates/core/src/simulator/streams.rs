//! Per-publisher, per-concern random substreams.
//!
//! Each ad opportunity consumes exactly one draw from every concern whether
//! or not the draw ends up mattering, so two runs that differ only in their
//! bidding decisions see the same arrivals and the same uniforms for every
//! opportunity.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Concern {
    Arrivals = 1,
    Wins = 2,
    Clicks = 3,
    Installs = 4,
    Delays = 5,
    Exploration = 6,
    Scenario = 7,
    Episode = 8,
}

/// Generator for `(seed, concern, index)`; distinct triples give
/// independent ChaCha streams.
pub fn substream(seed: u64, concern: Concern, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((concern as u64) << 32) | index as u64);
    rng
}

/// A fresh seed derived from `seed`, for nesting runs inside runs.
pub fn derive_seed(seed: u64, concern: Concern, index: u32) -> u64 {
    substream(seed, concern, index).next_u64()
}

/// Uniforms for one ad opportunity.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct OpportunityDraws {
    pub win: f64,
    pub click: f64,
    pub install: f64,
    pub delay: f64,
}

pub struct PublisherStreams {
    arrivals: ChaCha8Rng,
    arrival_dist: Option<Poisson<f64>>,
    wins: ChaCha8Rng,
    clicks: ChaCha8Rng,
    installs: ChaCha8Rng,
    delays: ChaCha8Rng,
}

impl PublisherStreams {
    pub fn new(seed: u64, publisher: u32, request_rate: f64) -> PublisherStreams {
        PublisherStreams {
            arrivals: substream(seed, Concern::Arrivals, publisher),
            arrival_dist: (request_rate > 0.0)
                .then(|| Poisson::new(request_rate).expect("finite positive rate")),
            wins: substream(seed, Concern::Wins, publisher),
            clicks: substream(seed, Concern::Clicks, publisher),
            installs: substream(seed, Concern::Installs, publisher),
            delays: substream(seed, Concern::Delays, publisher),
        }
    }

    /// Number of opportunities in the next minute.
    pub fn arrivals(&mut self) -> u64 {
        match &self.arrival_dist {
            Some(d) => d.sample(&mut self.arrivals) as u64,
            None => 0,
        }
    }

    pub fn opportunity(&mut self) -> OpportunityDraws {
        OpportunityDraws {
            win: self.wins.random(),
            click: self.clicks.random(),
            install: self.installs.random(),
            delay: self.delays.random(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(substream(9, Concern::Wins, 3), |r, _| Some(r.next_u64()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(substream(9, Concern::Wins, 3), |r, _| Some(r.next_u64()))
            .collect();
        let c: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(substream(9, Concern::Clicks, 3), |r, _| Some(r.next_u64()))
            .collect();
        let d: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(substream(9, Concern::Wins, 4), |r, _| Some(r.next_u64()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(
            derive_seed(1, Concern::Episode, 0),
            derive_seed(1, Concern::Episode, 1)
        );
    }

    #[test]
    fn zero_rate_has_no_arrivals() {
        let mut s = PublisherStreams::new(1, 0, 0.0);
        assert!((0..100).all(|_| s.arrivals() == 0));
    }
}
