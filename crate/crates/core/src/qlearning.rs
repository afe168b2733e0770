//! Tabular Q-learning with Boltzmann exploration.
//!
//! States and actions are addressed by flat indices; the quantizer and
//! action space own the mapping to structured indices.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub const QTABLE_VERSION: u32 = 1;

/// Step size used for an update of a cell visited `n` times before.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LearningRate {
    Constant {
        alpha: f64,
    },
    /// `initial / (1 + decay * visits)`
    Adaptive {
        initial: f64,
        decay: f64,
    },
}

impl LearningRate {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearningRate::Constant { alpha } => (0.0..=1.0).contains(&alpha),
            LearningRate::Adaptive { initial, decay } => {
                (0.0..=1.0).contains(&initial) && decay >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(config_err(format!("bad learning rate {self:?}")))
        }
    }

    pub fn rate(&self, visits: u64) -> f64 {
        match *self {
            LearningRate::Constant { alpha } => alpha,
            LearningRate::Adaptive { initial, decay } => initial / (1.0 + decay * visits as f64),
        }
    }
}

/// Boltzmann temperature decayed once per decision epoch.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub theta_initial: f64,
    pub decay: f64,
    pub theta_min: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            theta_initial: 1.0,
            decay: 0.999,
            theta_min: 0.01,
        }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_initial > 0.0
            && self.theta_min > 0.0
            && self.decay > 0.0
            && self.decay <= 1.0)
        {
            return Err(config_err(format!("bad exploration schedule {self:?}")));
        }
        Ok(())
    }

    pub fn temperature(&self, epoch: u64) -> f64 {
        let t = self.theta_initial * self.decay.powf(epoch as f64);
        t.max(self.theta_min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
    pub gamma: f64,
    pub learning_rate: LearningRate,
}

impl QTable {
    pub fn new(
        states: usize,
        actions: usize,
        gamma: f64,
        learning_rate: LearningRate,
    ) -> Result<QTable> {
        if states == 0 || actions == 0 {
            return Err(config_err(
                "q-table needs at least one state and one action",
            ));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(config_err(format!("gamma {gamma} outside [0, 1]")));
        }
        learning_rate.validate()?;
        Ok(QTable {
            states,
            actions,
            values: vec![0.0; states * actions],
            visits: vec![0; states * actions],
            gamma,
            learning_rate,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.states {
            return Err(Error::OutOfRange {
                kind: "state",
                index: s,
                size: self.states,
            });
        }
        if a >= self.actions {
            return Err(Error::OutOfRange {
                kind: "action",
                index: a,
                size: self.actions,
            });
        }
        Ok(())
    }

    pub fn value(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn set_value(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.actions + a] = v;
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-step update
    /// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a'))`.
    pub fn update(&mut self, s: usize, a: usize, r: f64, s_next: usize) -> Result<()> {
        self.check(s, a)?;
        self.check(s_next, 0)?;
        if !r.is_finite() {
            return Err(config_err(format!("non-finite reward {r}")));
        }
        let target = r + self.gamma * self.max_value(s_next);
        self.apply_target(s, a, target);
        Ok(())
    }

    /// Update for a transition into a terminal state.
    pub fn update_terminal(&mut self, s: usize, a: usize, r: f64) -> Result<()> {
        self.check(s, a)?;
        self.apply_target(s, a, r);
        Ok(())
    }

    fn apply_target(&mut self, s: usize, a: usize, target: f64) {
        let k = s * self.actions + a;
        let alpha = self.learning_rate.rate(self.visits[k]);
        self.values[k] = (1.0 - alpha) * self.values[k] + alpha * target;
        self.visits[k] += 1;
    }

    /// Softmax of `Q(s, .) / theta`.
    pub fn boltzmann_probabilities(&self, s: usize, theta: f64) -> Vec<f64> {
        let row = self.row(s);
        let max = self.max_value(s);
        let mut p: Vec<f64> = row.iter().map(|q| ((q - max) / theta).exp()).collect();
        let z: f64 = p.iter().sum();
        for x in &mut p {
            *x /= z;
        }
        p
    }

    pub fn boltzmann_sample<R: Rng + ?Sized>(&self, s: usize, theta: f64, rng: &mut R) -> usize {
        let p = self.boltzmann_probabilities(s, theta);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return a;
            }
        }
        // u landed in the rounding slack above the cumulative sum
        p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    }

    /// Best action in `s`; ties go to the lowest index.
    pub fn greedy(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn extract_policy(&self) -> GreedyPolicy {
        GreedyPolicy {
            actions: (0..self.states).map(|s| self.greedy(s)).collect(),
            action_count: self.actions,
        }
    }

    /// Writes the table as CSV: a header record carrying the format version
    /// and dimensions, then one row per (state, action) cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record([
            "qtable_version",
            "states",
            "actions",
            "gamma",
            "learning_rate",
        ])?;
        w.write_record([
            QTABLE_VERSION.to_string(),
            self.states.to_string(),
            self.actions.to_string(),
            self.gamma.to_string(),
            serde_json::to_string(&self.learning_rate)?,
        ])?;
        w.write_record(["state", "action", "value", "visits"])?;
        for s in 0..self.states {
            for a in 0..self.actions {
                let k = s * self.actions + a;
                w.serialize((s, a, self.values[k], self.visits[k]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<QTable> {
        let malformed = |detail: String| Error::Malformed {
            what: "q-table file",
            detail,
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = r.records();
        let mut next = || records.next().transpose().map_err(Error::from);

        let head = next()?.ok_or_else(|| malformed("empty file".into()))?;
        if head.get(0) != Some("qtable_version") {
            return Err(malformed("missing version header".into()));
        }
        let meta = next()?.ok_or_else(|| malformed("missing metadata".into()))?;
        let field = |i: usize| {
            meta.get(i)
                .ok_or_else(|| malformed(format!("missing metadata field {i}")))
        };
        let version: u32 = field(0)?
            .parse()
            .map_err(|e| malformed(format!("version: {e}")))?;
        if version != QTABLE_VERSION {
            return Err(Error::Version {
                what: "q-table",
                found: version,
                expected: QTABLE_VERSION,
            });
        }
        let states: usize = field(1)?
            .parse()
            .map_err(|e| malformed(format!("states: {e}")))?;
        let actions: usize = field(2)?
            .parse()
            .map_err(|e| malformed(format!("actions: {e}")))?;
        let gamma: f64 = field(3)?
            .parse()
            .map_err(|e| malformed(format!("gamma: {e}")))?;
        let learning_rate: LearningRate = serde_json::from_str(field(4)?)?;
        let mut table = QTable::new(states, actions, gamma, learning_rate)?;
        next()?.ok_or_else(|| malformed("missing column header".into()))?;

        let mut seen = 0usize;
        while let Some(rec) = next()? {
            let (s, a, v, n): (usize, usize, f64, u64) = rec.deserialize(None)?;
            table.check(s, a)?;
            let k = s * actions + a;
            table.values[k] = v;
            table.visits[k] = n;
            seen += 1;
        }
        if seen != states * actions {
            return Err(malformed(format!(
                "expected {} cells, found {seen}",
                states * actions
            )));
        }
        Ok(table)
    }
}

/// Deterministic state -> action map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    actions: Vec<usize>,
    action_count: usize,
}

impl GreedyPolicy {
    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }

    pub fn state_count(&self) -> usize {
        self.actions.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}
