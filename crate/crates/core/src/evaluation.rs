//! AP-k / MAP, question-level k-fold splits and a paired sign-flip
//! permutation test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Default AP cutoff.
pub const DEFAULT_K: usize = 20;

/// Average precision accumulated over the first `min(k, total_relevant)`
/// relevant hits, divided by that count. Relevant answers that are never
/// retrieved contribute zero; with no relevant answers the value is 0.
pub fn ap_k(ranked_relevance: &[bool], k: usize, total_relevant: usize) -> f64 {
    let target = k.min(total_relevant);
    if target == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
            if hits == target {
                break;
            }
        }
    }
    sum / target as f64
}

pub fn mean_average_precision(ap_values: &[f64]) -> Result<f64> {
    if ap_values.is_empty() {
        return Err(invalid("MAP of an empty question set"));
    }
    Ok(ap_values.iter().sum::<f64>() / ap_values.len() as f64)
}

/// Shuffles question ids with `seed` and deals them into `k` test folds whose
/// sizes differ by at most one. Returns `(train, test)` per fold.
pub fn kfold_split(question_ids: &[String], k: usize, seed: u64) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    if k < 2 {
        return Err(invalid(format!("fold count must be at least 2, got {k}")));
    }
    let mut ids = question_ids.to_vec();
    ids.sort();
    ids.dedup();
    if k > ids.len() {
        return Err(invalid(format!("{k} folds requested for {} questions", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut test = ids[start..start + size].to_vec();
        let mut train: Vec<String> = ids[..start].iter().chain(&ids[start + size..]).cloned().collect();
        test.sort();
        train.sort();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

fn paired_differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(invalid(format!("paired lists differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(invalid("permutation test needs at least two paired values"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

const TIE_EPS: f64 = 1e-12;

/// Exact two-sided p-value over all `2^n` sign patterns.
pub fn exact_permutation_p(differences: &[f64]) -> f64 {
    let n = differences.len();
    let observed = differences.iter().sum::<f64>().abs();
    let mut extreme = 0u64;
    for mask in 0..(1u64 << n) {
        let s: f64 = differences
            .iter()
            .enumerate()
            .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
            .sum();
        if s.abs() >= observed - TIE_EPS {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Monte Carlo two-sided p-value, `(1 + extreme) / (1 + iterations)`.
pub fn monte_carlo_permutation_p(differences: &[f64], iterations: usize, seed: u64) -> f64 {
    let observed = differences.iter().sum::<f64>().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..iterations {
        let s: f64 = differences.iter().map(|d| if rng.gen::<bool>() { -d } else { *d }).sum();
        if s.abs() >= observed - TIE_EPS {
            extreme += 1;
        }
    }
    (1 + extreme) as f64 / (1 + iterations) as f64
}

/// Paired two-sided sign-flip permutation test on per-question differences.
/// Enumerates all sign patterns when there are at most `iterations` of them
/// (and at most 2^20); otherwise samples `iterations` patterns.
pub fn paired_permutation_test(ap_a: &[f64], ap_b: &[f64], iterations: usize, seed: u64) -> Result<f64> {
    let d = paired_differences(ap_a, ap_b)?;
    if d.len() <= 20 && (1usize << d.len()) <= iterations.max(1) {
        Ok(exact_permutation_p(&d))
    } else {
        Ok(monte_carlo_permutation_p(&d, iterations.max(1), seed))
    }
}

/// Per-question AP-k values with their mean and optional extras.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub ap: BTreeMap<String, f64>,
    pub map: f64,
    /// Share of answers per language as (en, ch, ar) percentages.
    pub language_ratio: Option<(f64, f64, f64)>,
    pub p_value: Option<f64>,
}

impl EvalReport {
    pub fn new(k: usize, ap: BTreeMap<String, f64>) -> Result<Self> {
        let values: Vec<f64> = ap.values().copied().collect();
        let map = mean_average_precision(&values)?;
        Ok(Self {
            k,
            ap,
            map,
            language_ratio: None,
            p_value: None,
        })
    }

    pub fn ap_values(&self) -> Vec<f64> {
        self.ap.values().copied().collect()
    }

    /// Attaches the permutation-test p-value against `baseline`, pairing
    /// questions by id.
    pub fn compare(&mut self, baseline: &EvalReport, iterations: usize, seed: u64) -> Result<f64> {
        if self.ap.keys().ne(baseline.ap.keys()) {
            return Err(invalid("reports cover different question sets"));
        }
        let p = paired_permutation_test(&self.ap_values(), &baseline.ap_values(), iterations, seed)?;
        self.p_value = Some(p);
        Ok(p)
    }

    /// Tab-separated table.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("question_id\tap@{}\n", self.k);
        for (q, ap) in &self.ap {
            let _ = writeln!(out, "{q}\t{ap:.6}");
        }
        let _ = writeln!(out, "MAP\t{:.6}", self.map);
        if let Some((en, ch, ar)) = self.language_ratio {
            let _ = writeln!(out, "ratio_en_ch_ar\t{en:.2}\t{ch:.2}\t{ar:.2}");
        }
        if let Some(p) = self.p_value {
            let _ = writeln!(out, "p_value\t{p:.6}");
        }
        out
    }
}
