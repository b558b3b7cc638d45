//! Append-only record of every optimizer evaluation.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::HpAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Genome,
    HpPoint,
}

/// One evaluated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub kind: TrialKind,
    /// Genome bits as a compact 0/1 string (genome trials).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub genome: Option<String>,
    /// Hyperparameter point (hp trials).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hp: Option<HpAssignment>,
    /// Per-fold normed MCC values.
    pub fold_scores: Vec<f64>,
    pub penalty: f64,
    pub total_loss: f64,
    /// Trial failed (non-finite objective); `total_loss` holds the sentinel.
    #[serde(default)]
    pub failed: bool,
    pub wall_time_ms: f64,
}

/// Finite sentinel recorded for failed trials (JSON cannot carry infinity).
pub const FAILED_TRIAL_LOSS: f64 = 1e300;

/// Append-only trial history, ordered by trial index.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrialLedger {
    pub records: Vec<TrialRecord>,
}

impl TrialLedger {
    pub fn new() -> TrialLedger {
        TrialLedger::default()
    }

    pub fn push(&mut self, mut record: TrialRecord) {
        record.index = self.records.len();
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The lowest-loss successful record so far.
    pub fn best(&self) -> Option<&TrialRecord> {
        self.records
            .iter()
            .filter(|r| !r.failed && r.total_loss.is_finite())
            .min_by(|a, b| a.total_loss.partial_cmp(&b.total_loss).unwrap())
    }

    /// Running minimum of the loss, per trial index.
    pub fn running_minimum(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.records.len());
        let mut best = f64::INFINITY;
        for r in &self.records {
            best = best.min(r.total_loss);
            out.push(best);
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<TrialLedger> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<TrialRecord>(&line)?);
        }
        Ok(TrialLedger { records })
    }
}

/// Encodes genome bits compactly for the ledger.
pub fn genome_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(loss: f64) -> TrialRecord {
        TrialRecord {
            index: 0,
            kind: TrialKind::Genome,
            genome: Some("0101".into()),
            hp: None,
            fold_scores: vec![0.6, 0.7],
            penalty: 0.002,
            total_loss: loss,
            failed: false,
            wall_time_ms: 1.5,
        }
    }

    #[test]
    fn running_minimum_is_non_increasing() {
        let mut ledger = TrialLedger::new();
        for loss in [0.9, 0.5, 0.7, 0.4, 0.8] {
            ledger.push(rec(loss));
        }
        let mins = ledger.running_minimum();
        assert_eq!(mins, vec![0.9, 0.5, 0.5, 0.4, 0.4]);
        assert!((ledger.best().unwrap().total_loss - 0.4).abs() < 1e-15);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut ledger = TrialLedger::new();
        ledger.push(rec(0.5));
        let mut failure = rec(FAILED_TRIAL_LOSS);
        failure.failed = true;
        ledger.push(failure);
        let dir = std::env::temp_dir().join("discardbench_ledger_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("ledger.jsonl");
        ledger.write_jsonl(&p).unwrap();
        let back = TrialLedger::read_jsonl(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.records[0].total_loss, 0.5);
        // Failed trials carry the sentinel and are skipped by best().
        assert!(back.records[1].failed);
        assert_eq!(back.best().unwrap().index, 0);
    }
}
