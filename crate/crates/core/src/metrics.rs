//! Per-decision metrics, smoothing, CSV persistence and run summaries.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "tick,decision,reward,p_explore,collision,v,loss,collisions_cum,reward_smoothed";
/// Written in place of values that are not defined yet.
pub const SENTINEL: &str = "NaN";

/// One completed transition as seen by the agent loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    /// Simulator tick at which the transition completed.
    pub tick: u64,
    /// Index of the decision whose transition this is.
    pub decision: u64,
    pub reward: f64,
    pub p_explore: f64,
    pub collision: bool,
    pub v: f64,
    /// `None` while the replay buffer is warming up (or when not training).
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub record: DecisionRecord,
    pub collisions_cum: u64,
    /// Trailing mean reward, defined once the window is full.
    pub reward_smoothed: Option<f64>,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let r = &self.record;
        let opt = |x: Option<f64>| x.map_or_else(|| SENTINEL.to_string(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.decision,
            r.reward,
            r.p_explore,
            u8::from(r.collision),
            r.v,
            opt(r.loss),
            self.collisions_cum,
            opt(self.reward_smoothed)
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let bad = || Error::config("metrics", format!("malformed row `{line}`"));
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let opt = |s: &str| if s == SENTINEL { Ok(None) } else { num(s).map(Some) };
        Ok(Self {
            record: DecisionRecord {
                tick: int(f[0])?,
                decision: int(f[1])?,
                reward: num(f[2])?,
                p_explore: num(f[3])?,
                collision: match f[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
                v: num(f[5])?,
                loss: opt(f[6])?,
            },
            collisions_cum: int(f[7])?,
            reward_smoothed: opt(f[8])?,
        })
    }
}

/// Accumulates collision counts and the trailing reward mean.
#[derive(Debug, Clone)]
pub struct MetricsTracker {
    window: usize,
    rewards: VecDeque<f64>,
    collisions: u64,
}

impl MetricsTracker {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "smoothing window must be positive");
        Self {
            window,
            rewards: VecDeque::with_capacity(window),
            collisions: 0,
        }
    }

    pub fn observe(&mut self, record: DecisionRecord) -> MetricsRow {
        if self.rewards.len() == self.window {
            self.rewards.pop_front();
        }
        self.rewards.push_back(record.reward);
        self.collisions += u64::from(record.collision);
        let reward_smoothed = (self.rewards.len() == self.window)
            .then(|| self.rewards.iter().sum::<f64>() / self.window as f64);
        MetricsRow {
            record,
            collisions_cum: self.collisions,
            reward_smoothed,
        }
    }
}

/// Writes the metrics CSV, flushing after every row so a killed run leaves
/// only whole rows behind.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        let mut line = row.to_csv();
        line.push('\n');
        self.out.write_all(line.as_bytes())?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses a metrics CSV, ignoring a trailing partial line.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::config("metrics", "missing header")),
    }
    lines
        .filter(|l| l.ends_with('\n'))
        .map(MetricsRow::from_csv)
        .collect()
}

/// Aggregate over a run, as reported by evaluation commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub decisions: u64,
    pub collisions: u64,
    pub collisions_per_1000: f64,
    pub mean_reward: f64,
    pub mean_speed_error: f64,
}

impl Summary {
    pub fn from_records(records: &[DecisionRecord], v_bar: f64) -> Self {
        let n = records.len() as u64;
        let collisions = records.iter().filter(|r| r.collision).count() as u64;
        let mean = |f: &dyn Fn(&DecisionRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            decisions: n,
            collisions,
            collisions_per_1000: if n == 0 { 0.0 } else { 1000.0 * collisions as f64 / n as f64 },
            mean_reward: mean(&|r| r.reward),
            mean_speed_error: mean(&|r| (r.v - v_bar).abs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64, reward: f64, collision: bool) -> DecisionRecord {
        DecisionRecord {
            tick: 10 * (i + 1),
            decision: i,
            reward,
            p_explore: 1.0,
            collision,
            v: 3.5,
            loss: if i < 2 { None } else { Some(0.25) },
        }
    }

    #[test]
    fn smoothing_waits_for_full_window() {
        let mut t = MetricsTracker::new(3);
        let rows: Vec<MetricsRow> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| t.observe(rec(i as u64, r, i == 1)))
            .collect();
        assert_eq!(rows[1].reward_smoothed, None);
        assert_eq!(rows[2].reward_smoothed, Some(2.0));
        assert_eq!(rows[3].reward_smoothed, Some(3.0));
        assert_eq!(rows[3].collisions_cum, 1);
    }

    #[test]
    fn csv_rows_round_trip_and_survive_truncation() {
        let mut t = MetricsTracker::new(2);
        let mut w = CsvWriter::new(Vec::new()).unwrap();
        let rows: Vec<MetricsRow> = (0..4).map(|i| t.observe(rec(i, -0.5 * i as f64, false))).collect();
        for r in &rows {
            w.write(r).unwrap();
        }
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",NaN,"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
        let cut = &text[..text.len() - 5];
        assert_eq!(parse_csv(cut).unwrap(), rows[..3].to_vec());
    }

    #[test]
    fn summary_rates() {
        let recs: Vec<DecisionRecord> = (0..10).map(|i| rec(i, -1.0, i % 5 == 0)).collect();
        let s = Summary::from_records(&recs, 8.0);
        assert_eq!(s.collisions, 2);
        assert_eq!(s.collisions_per_1000, 200.0);
        assert_eq!(s.mean_reward, -1.0);
        assert_eq!(s.mean_speed_error, 4.5);
    }
}
