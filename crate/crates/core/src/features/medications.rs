//! Medication encoding: first-token vocabulary and binary indicators.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::DonorRecord;

/// Train-fitted medication vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedicationVocabulary {
    /// Retained tokens, sorted lexicographically.
    pub tokens: Vec<String>,
}

/// First whitespace-delimited token of a raw medication entry.
pub fn medication_token(raw: &str) -> Option<&str> {
    raw.split_whitespace().next()
}

/// Builds the top-k vocabulary by train-donor frequency; ties at the cut
/// rank keep the lexicographically smaller token.
pub fn fit_medication_vocabulary(
    train_records: &[&DonorRecord],
    top_k: usize,
) -> MedicationVocabulary {
    let mut donor_counts: BTreeMap<String, usize> = BTreeMap::new();
    for rec in train_records {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for med in &rec.medications {
            if let Some(tok) = medication_token(med) {
                seen.insert(tok);
            }
        }
        for tok in seen {
            *donor_counts.entry(tok.to_string()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = donor_counts.into_iter().collect();
    // Descending count, then lexicographic token order for ties.
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens: Vec<String> = ranked.into_iter().take(top_k).map(|(t, _)| t).collect();
    tokens.sort();
    MedicationVocabulary { tokens }
}

impl MedicationVocabulary {
    pub fn feature_names(&self) -> Vec<String> {
        self.tokens
            .iter()
            .map(|t| format!("medication {t}"))
            .collect()
    }

    /// Encodes a donor against the vocabulary; unknown tokens are ignored.
    pub fn encode(&self, record: &DonorRecord) -> Vec<f64> {
        let present: BTreeSet<&str> = record
            .medications
            .iter()
            .filter_map(|m| medication_token(m))
            .collect();
        self.tokens
            .iter()
            .map(|t| {
                if present.contains(t.as_str()) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}
