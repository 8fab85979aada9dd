//! Sparse weighted vectors for questions and sentences, compared by cosine.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::translation::ProbabilisticQuery;

/// Weights at or below this are not stored.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedVector {
    entries: BTreeMap<String, f64>,
}

impl WeightedVector {
    pub fn from_weights(weights: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (w, x) in weights {
            if !(x.is_finite() && x >= 0.0) {
                return Err(invalid(format!("weight of '{w}' must be finite and nonnegative, got {x}")));
            }
            if x > MIN_WEIGHT {
                *entries.entry(w).or_insert(0.0) += x;
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, word: &str) -> f64 {
        self.entries.get(word).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(w, &x)| (w.as_str(), x))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn l2(&self) -> f64 {
        self.entries.values().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(w, x)| (w.clone(), x * factor))
                .filter(|(_, x)| *x > MIN_WEIGHT)
                .collect(),
        }
    }

    /// `word \t weight` lines, heaviest first.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(&str, f64)> = self.iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows.iter().map(|(w, x)| format!("{w}\t{x:.4}\n")).collect()
    }
}

/// Averages each word's probability across all question terms; terms whose
/// distribution lacks the word contribute zero.
pub fn question_vector(pq: &ProbabilisticQuery) -> Result<WeightedVector> {
    if pq.is_empty() {
        return Err(invalid("probabilistic query has no terms"));
    }
    let mut acc: BTreeMap<String, f64> = BTreeMap::new();
    for d in &pq.distributions {
        for (w, p) in d.iter() {
            *acc.entry(w.to_string()).or_insert(0.0) += p;
        }
    }
    let t = pq.len() as f64;
    Ok(WeightedVector {
        entries: acc.into_iter().map(|(w, x)| (w, x / t)).filter(|(_, x)| *x > MIN_WEIGHT).collect(),
    })
}

/// Normalized term frequencies.
pub fn sentence_vector<S: AsRef<str>>(tokens: &[S]) -> Result<WeightedVector> {
    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_string()).or_insert(0.0) += 1.0;
    }
    let n = tokens.len() as f64;
    Ok(WeightedVector {
        entries: counts.into_iter().map(|(w, c)| (w, c / n)).collect(),
    })
}

/// Cosine similarity; 0 when either vector is empty.
pub fn cosine(u: &WeightedVector, v: &WeightedVector) -> f64 {
    if u.is_empty() || v.is_empty() {
        return 0.0;
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let dot: f64 = small.iter().map(|(w, x)| x * large.get(w)).sum();
    if dot == 0.0 {
        return 0.0;
    }
    (dot / (u.l2() * v.l2())).clamp(0.0, 1.0)
}
