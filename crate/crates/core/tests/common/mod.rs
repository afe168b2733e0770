//! Small random MDPs with known dynamics and their value-iteration optimum.

#![allow(dead_code)]

use qbid::qlearning::{LearningRate, QTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 3;
pub const GAMMA: f64 = 0.9;

pub struct Mdp {
    /// `p[s][a][s']`
    pub p: [[[f64; N]; N]; N],
    pub r: [[f64; N]; N],
}

pub fn random_mdp(seed: u64) -> Mdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = [[[0.0; N]; N]; N];
    let mut r = [[0.0; N]; N];
    for s in 0..N {
        for a in 0..N {
            let w: Vec<f64> = (0..N).map(|_| rng.random::<f64>() + 0.05).collect();
            let z: f64 = w.iter().sum();
            for t in 0..N {
                p[s][a][t] = w[t] / z;
            }
            r[s][a] = rng.random::<f64>();
        }
    }
    Mdp { p, r }
}

/// Q* by value iteration to a fixed point.
pub fn value_iteration(m: &Mdp, gamma: f64) -> [[f64; N]; N] {
    let mut q = [[0.0; N]; N];
    loop {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::MIN, f64::max))
            .collect();
        let mut next = [[0.0; N]; N];
        let mut delta: f64 = 0.0;
        for s in 0..N {
            for a in 0..N {
                next[s][a] = m.r[s][a] + gamma * (0..N).map(|t| m.p[s][a][t] * v[t]).sum::<f64>();
                delta = delta.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if delta < 1e-13 {
            return q;
        }
    }
}

pub fn argmax(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
}

/// Q-learning along one long trajectory with hot Boltzmann exploration.
pub fn learn(m: &Mdp, gamma: f64, steps: u64, rate: LearningRate, seed: u64) -> QTable {
    let mut table = QTable::new(N, N, gamma, rate).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = 0;
    for _ in 0..steps {
        let a = table.boltzmann_sample(s, 1e6, &mut rng);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = N - 1;
        for t in 0..N {
            acc += m.p[s][a][t];
            if u < acc {
                next = t;
                break;
            }
        }
        table.update(s, a, m.r[s][a], next).unwrap();
        s = next;
    }
    table
}

pub fn sup_norm(table: &QTable, q: &[[f64; N]; N]) -> f64 {
    let mut err: f64 = 0.0;
    for s in 0..N {
        for a in 0..N {
            err = err.max((table.value(s, a) - q[s][a]).abs());
        }
    }
    err
}
