//! Policy-vs-baseline reports and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::EpochMetrics;

pub const REPORT_VERSION: u32 = 1;

/// End-of-horizon figures of one arm.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub spend: f64,
    pub margin: f64,
    pub budget_util: f64,
    pub happy: f64,
}

impl Totals {
    pub fn from_epochs(epochs: &[EpochMetrics]) -> Totals {
        epochs
            .last()
            .map(|e| Totals {
                spend: e.spend,
                margin: e.margin,
                budget_util: e.budget_util,
                happy: e.happy as f64,
            })
            .unwrap_or_default()
    }
}

/// Percent lifts over the baseline. `None` where the baseline value is 0.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub spend: Option<f64>,
    pub margin: Option<f64>,
    pub budget_util: Option<f64>,
    pub happy: Option<f64>,
}

pub fn percent_lift(policy: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (policy - baseline) / baseline.abs())
}

impl Deltas {
    pub fn between(policy: &Totals, baseline: &Totals) -> Deltas {
        Deltas {
            spend: percent_lift(policy.spend, baseline.spend),
            margin: percent_lift(policy.margin, baseline.margin),
            budget_util: percent_lift(policy.budget_util, baseline.budget_util),
            happy: percent_lift(policy.happy, baseline.happy),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub lambda: Option<f64>,
    pub seed: u64,
    pub policy_epochs: Vec<EpochMetrics>,
    pub baseline_epochs: Vec<EpochMetrics>,
    pub policy: Totals,
    pub baseline: Totals,
    pub deltas: Deltas,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    report_version: u32,
    lambda: Option<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct MetricRow {
    metric: String,
    policy: f64,
    baseline: f64,
    delta_pct: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct EpochRow {
    arm: String,
    epoch: u32,
    spend: f64,
    cost: f64,
    installs: u64,
    margin: f64,
    budget_util: f64,
    happy: u32,
}

const METRICS: [&str; 4] = ["spend", "margin", "budget_util", "happy"];
const META_HEADER: [&str; 3] = ["report_version", "lambda", "seed"];
const METRIC_HEADER: [&str; 4] = ["metric", "policy", "baseline", "delta_pct"];
const EPOCH_HEADER: [&str; 8] = [
    "arm",
    "epoch",
    "spend",
    "cost",
    "installs",
    "margin",
    "budget_util",
    "happy",
];

fn malformed(detail: impl Into<String>) -> Error {
    Error::Malformed {
        what: "report",
        detail: detail.into(),
    }
}

impl RunReport {
    pub fn new(
        lambda: Option<f64>,
        seed: u64,
        policy_epochs: Vec<EpochMetrics>,
        baseline_epochs: Vec<EpochMetrics>,
    ) -> Self {
        let policy = Totals::from_epochs(&policy_epochs);
        let baseline = Totals::from_epochs(&baseline_epochs);
        RunReport {
            lambda,
            seed,
            policy_epochs,
            baseline_epochs,
            deltas: Deltas::between(&policy, &baseline),
            policy,
            baseline,
        }
    }

    fn metric_rows(&self) -> [(f64, f64, Option<f64>); 4] {
        let (p, b, d) = (&self.policy, &self.baseline, &self.deltas);
        [
            (p.spend, b.spend, d.spend),
            (p.margin, b.margin, d.margin),
            (p.budget_util, b.budget_util, d.budget_util),
            (p.happy, b.happy, d.happy),
        ]
    }

    /// Three stacked tables: run metadata, end-of-horizon metrics with
    /// lifts, and per-epoch rows of both arms.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_writer(out);
        w.write_record(META_HEADER)?;
        w.serialize(Meta {
            report_version: REPORT_VERSION,
            lambda: self.lambda,
            seed: self.seed,
        })?;
        w.write_record(METRIC_HEADER)?;
        for (name, (policy, baseline, delta_pct)) in METRICS.iter().zip(self.metric_rows()) {
            w.serialize(MetricRow {
                metric: name.to_string(),
                policy,
                baseline,
                delta_pct,
            })?;
        }
        w.write_record(EPOCH_HEADER)?;
        for (arm, rows) in [
            ("policy", &self.policy_epochs),
            ("baseline", &self.baseline_epochs),
        ] {
            for e in rows {
                w.serialize(EpochRow {
                    arm: arm.into(),
                    epoch: e.epoch,
                    spend: e.spend,
                    cost: e.cost,
                    installs: e.installs,
                    margin: e.margin,
                    budget_util: e.budget_util,
                    happy: e.happy,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<RunReport> {
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_reader(input);
        let mut records = r.records();
        let mut next = |expect: &str| -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| malformed(format!("missing {expect}")))?
                .map_err(Error::from)
        };
        let expect_header = |rec: &csv::StringRecord, header: &[&str]| {
            if rec.iter().eq(header.iter().copied()) {
                Ok(())
            } else {
                Err(malformed(format!(
                    "expected header {header:?}, found {rec:?}"
                )))
            }
        };

        expect_header(&next("metadata header")?, &META_HEADER)?;
        let meta: Meta = next("metadata")?.deserialize(None)?;
        if meta.report_version != REPORT_VERSION {
            return Err(Error::Version {
                what: "report",
                found: meta.report_version,
                expected: REPORT_VERSION,
            });
        }
        expect_header(&next("metric header")?, &METRIC_HEADER)?;
        let mut metrics = Vec::new();
        for name in METRICS {
            let row: MetricRow = next("metric row")?.deserialize(None)?;
            if row.metric != name {
                return Err(malformed(format!(
                    "expected metric {name}, found {}",
                    row.metric
                )));
            }
            metrics.push(row);
        }
        expect_header(&next("epoch header")?, &EPOCH_HEADER)?;
        let mut policy_epochs = Vec::new();
        let mut baseline_epochs = Vec::new();
        for rec in records {
            let row: EpochRow = rec?.deserialize(None)?;
            let e = EpochMetrics {
                epoch: row.epoch,
                spend: row.spend,
                cost: row.cost,
                installs: row.installs,
                margin: row.margin,
                budget_util: row.budget_util,
                happy: row.happy,
            };
            match row.arm.as_str() {
                "policy" => policy_epochs.push(e),
                "baseline" => baseline_epochs.push(e),
                other => return Err(malformed(format!("unknown arm {other}"))),
            }
        }
        let report = RunReport::new(meta.lambda, meta.seed, policy_epochs, baseline_epochs);
        for (row, (policy, baseline, delta)) in metrics.iter().zip(report.metric_rows()) {
            if row.policy != policy || row.baseline != baseline || row.delta_pct != delta {
                return Err(malformed(format!(
                    "metric {} disagrees with the epoch rows",
                    row.metric
                )));
            }
        }
        Ok(report)
    }
}
