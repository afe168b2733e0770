//! Append-only trace of a simulation run, stored as newline-delimited JSON.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{CampaignId, LedgerEvent, Micros, Minute, PublisherId};
use crate::error::{Error, Result};

pub const EVENT_LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "auction")]
pub struct AuctionRecord {
    pub t: Minute,
    pub publisher: PublisherId,
    pub campaign: CampaignId,
    pub bid: f64,
    pub won: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Auction(AuctionRecord),
    Ledger(LedgerEvent),
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

const SCHEMA: &str = "qbid-events";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<Record>,
}

impl EventLog {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn ledger_events(&self) -> impl Iterator<Item = &LedgerEvent> {
        self.records.iter().filter_map(|r| match r {
            Record::Ledger(e) => Some(e),
            Record::Auction(_) => None,
        })
    }

    pub fn total_spend(&self) -> Micros {
        self.ledger_events()
            .map(|e| match e {
                LedgerEvent::Impression { price, .. } => *price,
                _ => Micros::ZERO,
            })
            .sum()
    }

    pub fn total_charged(&self) -> Micros {
        self.ledger_events()
            .map(|e| match e {
                LedgerEvent::Click { charge, .. } => *charge,
                _ => Micros::ZERO,
            })
            .sum()
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(
            &mut out,
            &Header {
                schema: SCHEMA.into(),
                version: EVENT_LOG_VERSION,
            },
        )?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<EventLog> {
        let mut lines = input.lines();
        let head = lines.next().ok_or(Error::Malformed {
            what: "event log",
            detail: "empty".into(),
        })??;
        let head: Header = serde_json::from_str(&head)?;
        if head.schema != SCHEMA {
            return Err(Error::Malformed {
                what: "event log",
                detail: format!("schema {}", head.schema),
            });
        }
        if head.version != EVENT_LOG_VERSION {
            return Err(Error::Version {
                what: "event log",
                found: head.version,
                expected: EVENT_LOG_VERSION,
            });
        }
        let mut log = EventLog::default();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            log.push(serde_json::from_str(&line)?);
        }
        Ok(log)
    }
}

/// Per-epoch ledger view of one publisher or campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub epoch: u32,
    pub kind: EntityKind,
    pub id: u32,
    pub spend: i64,
    pub cost: i64,
    pub installs: u64,
    pub margin: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Publisher,
    Campaign,
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// CSV with a leading version column.
pub fn write_snapshots<W: Write>(rows: &[SnapshotRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "version", "epoch", "kind", "id", "spend", "cost", "installs", "margin", "eta",
    ])?;
    for r in rows {
        w.serialize((SNAPSHOT_VERSION, r))?;
    }
    w.flush()?;
    Ok(())
}
