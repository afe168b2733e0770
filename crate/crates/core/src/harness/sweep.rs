//! Lambda sweeps over one or more scenarios.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, train, ExperimentConfig, RunReport, Scenario};
use crate::error::{config_err, Result};

pub const SWEEP_VERSION: u32 = 1;

/// Mean and standard error of the lifts at one lambda across scenarios.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub version: u32,
    pub lambda: f64,
    pub runs: usize,
    pub d_spend: Option<f64>,
    pub d_spend_se: Option<f64>,
    pub d_margin: Option<f64>,
    pub d_margin_se: Option<f64>,
    pub d_budget_util: Option<f64>,
    pub d_budget_util_se: Option<f64>,
    pub d_happy: Option<f64>,
    pub d_happy_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    /// One report per (lambda, scenario), lambda-major.
    pub runs: Vec<RunReport>,
    pub rows: Vec<SweepRow>,
}

/// Mean and standard error; `None` if any value is missing.
fn mean_se(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let Some(xs) = values.iter().copied().collect::<Option<Vec<f64>>>() else {
        return (None, None);
    };
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = if xs.len() < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    (Some(mean), Some(se))
}

fn summarize(lambda: f64, runs: &[RunReport]) -> SweepRow {
    let col = |f: fn(&RunReport) -> Option<f64>| mean_se(&runs.iter().map(f).collect::<Vec<_>>());
    let (d_spend, d_spend_se) = col(|r| r.deltas.spend);
    let (d_margin, d_margin_se) = col(|r| r.deltas.margin);
    let (d_budget_util, d_budget_util_se) = col(|r| r.deltas.budget_util);
    let (d_happy, d_happy_se) = col(|r| r.deltas.happy);
    SweepRow {
        version: SWEEP_VERSION,
        lambda,
        runs: runs.len(),
        d_spend,
        d_spend_se,
        d_margin,
        d_margin_se,
        d_budget_util,
        d_budget_util_se,
        d_happy,
        d_happy_se,
    }
}

/// Trains and evaluates every lambda on every scenario. Runs are
/// independent and execute in parallel; results are merged in input order
/// so the output does not depend on scheduling.
pub fn sweep_seeds(
    scenarios: &[Scenario],
    lambdas: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Sweep> {
    if lambdas.is_empty() || scenarios.is_empty() {
        return Err(config_err(
            "sweep needs at least one lambda and one scenario",
        ));
    }
    cfg.validate()?;
    let jobs: Vec<(f64, &Scenario)> = lambdas
        .iter()
        .flat_map(|&l| scenarios.iter().map(move |s| (l, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(lambda, scenario)| {
            let table = train(scenario, lambda, cfg.episodes, cfg)?;
            evaluate(
                scenario,
                &table.extract_policy(),
                cfg,
                scenario.sim.seed,
                Some(lambda),
            )
        })
        .collect::<Result<Vec<RunReport>>>()?;
    let rows = lambdas
        .iter()
        .zip(runs.chunks(scenarios.len()))
        .map(|(&lambda, chunk)| summarize(lambda, chunk))
        .collect();
    Ok(Sweep { runs, rows })
}

pub fn sweep_lambda(scenario: &Scenario, lambdas: &[f64], cfg: &ExperimentConfig) -> Result<Sweep> {
    sweep_seeds(std::slice::from_ref(scenario), lambdas, cfg)
}

pub fn write_sweep_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &sweep.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunRow {
    version: u32,
    lambda: Option<f64>,
    seed: u64,
    policy_spend: f64,
    policy_margin: f64,
    policy_budget_util: f64,
    policy_happy: f64,
    baseline_spend: f64,
    baseline_margin: f64,
    baseline_budget_util: f64,
    baseline_happy: f64,
    d_spend: Option<f64>,
    d_margin: Option<f64>,
    d_budget_util: Option<f64>,
    d_happy: Option<f64>,
}

/// One row per individual run.
pub fn write_runs_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &sweep.runs {
        w.serialize(RunRow {
            version: SWEEP_VERSION,
            lambda: r.lambda,
            seed: r.seed,
            policy_spend: r.policy.spend,
            policy_margin: r.policy.margin,
            policy_budget_util: r.policy.budget_util,
            policy_happy: r.policy.happy,
            baseline_spend: r.baseline.spend,
            baseline_margin: r.baseline.margin,
            baseline_budget_util: r.baseline.budget_util,
            baseline_happy: r.baseline.happy,
            d_spend: r.deltas.spend,
            d_margin: r.deltas.margin,
            d_budget_util: r.deltas.budget_util,
            d_happy: r.deltas.happy,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CurvePoint {
    version: u32,
    lambda: f64,
    d_happy: Option<f64>,
    d_margin: Option<f64>,
}

/// The (happy lift, margin lift) tradeoff curve.
pub fn write_curve_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &sweep.rows {
        w.serialize(CurvePoint {
            version: SWEEP_VERSION,
            lambda: row.lambda,
            d_happy: row.d_happy,
            d_margin: row.d_margin,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[Some(1.0), Some(2.0), Some(3.0), Some(6.0)]);
        assert_eq!(m, Some(3.0));
        // sample variance (4 + 1 + 0 + 9) / 3
        assert!((se.unwrap() - (14.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[Some(2.0)]), (Some(2.0), Some(0.0)));
        assert_eq!(mean_se(&[Some(2.0), None]), (None, None));
    }
}
