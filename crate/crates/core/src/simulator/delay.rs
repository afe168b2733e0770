use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Minute;
use crate::error::{config_err, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

/// Lag between a click and the install notification.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Fixed {
        minutes: Minute,
    },
    /// Exponential with the given median, truncated at `max_minutes`.
    Exponential {
        median_minutes: f64,
        max_minutes: Minute,
    },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Exponential {
            median_minutes: MINUTES_PER_DAY as f64,
            max_minutes: 7 * MINUTES_PER_DAY,
        }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DelayModel::Fixed { .. } => Ok(()),
            DelayModel::Exponential {
                median_minutes,
                max_minutes,
            } => {
                if median_minutes > 0.0 && median_minutes.is_finite() && max_minutes > 0 {
                    Ok(())
                } else {
                    Err(config_err(format!("bad delay model {self:?}")))
                }
            }
        }
    }

    /// Delay for a uniform draw `u` in `[0, 1)` by inverting the (truncated)
    /// distribution function, rounded down to whole minutes.
    pub fn from_uniform(&self, u: f64) -> Minute {
        match *self {
            DelayModel::Fixed { minutes } => minutes,
            DelayModel::Exponential {
                median_minutes,
                max_minutes,
            } => {
                let rate = std::f64::consts::LN_2 / median_minutes;
                let mass = -(-rate * max_minutes as f64).exp_m1();
                let x = -(-u * mass).ln_1p() / rate;
                (x.floor() as Minute).min(max_minutes)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Minute {
        self.from_uniform(rng.random())
    }

    pub fn max_delay(&self) -> Minute {
        match *self {
            DelayModel::Fixed { minutes } => minutes,
            DelayModel::Exponential { max_minutes, .. } => max_minutes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass() {
        let m = DelayModel::Fixed { minutes: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| m.sample(&mut rng) == 0));
    }

    #[test]
    fn truncation_holds() {
        let m = DelayModel::Exponential {
            median_minutes: 5000.0,
            max_minutes: 600,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| m.sample(&mut rng) <= 600));
        assert!((599..=600).contains(&m.from_uniform(1.0 - f64::EPSILON)));
    }

    #[test]
    fn median_of_untruncated_part() {
        // Far-away truncation leaves the median at roughly one day.
        let m = DelayModel::Exponential {
            median_minutes: 1440.0,
            max_minutes: 1_000_000,
        };
        let d = m.from_uniform(0.5);
        assert!((1439..=1440).contains(&d), "{d}");
        assert_eq!(m.from_uniform(0.0), 0);
    }

    #[test]
    fn validation() {
        assert!(DelayModel::Exponential {
            median_minutes: 0.0,
            max_minutes: 10
        }
        .validate()
        .is_err());
        assert!(DelayModel::default().validate().is_ok());
    }
}
