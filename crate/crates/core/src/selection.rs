//! Training-subset criteria over doubly annotated judgments, and
//! cross-validated choice between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::classifier::{train_ensemble, TrainConfig, TrainingExample};
use crate::corpus::{Corpus, Judgment, Language};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{ap_k, kfold_split, mean_average_precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubsetCriterion {
    En,
    Ar,
    Ch,
    Consist,
    SrcPlus,
    EnPlus,
    All,
}

impl SubsetCriterion {
    pub const ALL: [SubsetCriterion; 7] = [
        SubsetCriterion::En,
        SubsetCriterion::Ar,
        SubsetCriterion::Ch,
        SubsetCriterion::Consist,
        SubsetCriterion::SrcPlus,
        SubsetCriterion::EnPlus,
        SubsetCriterion::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetCriterion::En => "en",
            SubsetCriterion::Ar => "ar",
            SubsetCriterion::Ch => "ch",
            SubsetCriterion::Consist => "consist",
            SubsetCriterion::SrcPlus => "src+",
            SubsetCriterion::EnPlus => "en+",
            SubsetCriterion::All => "all",
        }
    }

    /// Training label of a pair under this criterion, or `None` when the
    /// pair is filtered out.
    pub fn label(self, j: &Judgment, language: Language) -> Option<bool> {
        let src = j.source_label();
        let en = j.en_label();
        let default = || src.or(en);
        match self {
            SubsetCriterion::En => (language == Language::En).then(default).flatten(),
            SubsetCriterion::Ar => (language == Language::Ar).then(default).flatten(),
            SubsetCriterion::Ch => (language == Language::Ch).then(default).flatten(),
            SubsetCriterion::Consist => (!j.is_inconsistent()).then(default).flatten(),
            SubsetCriterion::SrcPlus => src.filter(|_| !j.is_inconsistent()),
            SubsetCriterion::EnPlus => en.filter(|_| !j.is_inconsistent()),
            SubsetCriterion::All => default(),
        }
    }
}

impl fmt::Display for SubsetCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(SubsetCriterion::En),
            "ar" => Ok(SubsetCriterion::Ar),
            "ch" | "zh" => Ok(SubsetCriterion::Ch),
            "consist" => Ok(SubsetCriterion::Consist),
            "src+" | "src_plus" => Ok(SubsetCriterion::SrcPlus),
            "en+" | "en_plus" | "en+consist" => Ok(SubsetCriterion::EnPlus),
            "all" => Ok(SubsetCriterion::All),
            other => Err(invalid(format!("unknown subset criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedPair {
    pub question_id: String,
    pub candidate_id: String,
    pub label: bool,
}

/// Pairs retained by `criterion`, in judgment order.
pub fn filter_subset(judgments: &[Judgment], corpus: &Corpus, criterion: SubsetCriterion) -> Result<Vec<SelectedPair>> {
    let mut out = Vec::new();
    for j in judgments {
        let c = corpus.get(&j.candidate_id).ok_or_else(|| {
            invalid(format!("judgment references unknown candidate '{}'", j.candidate_id))
        })?;
        if let Some(label) = criterion.label(j, c.language) {
            out.push(SelectedPair {
                question_id: j.question_id.clone(),
                candidate_id: j.candidate_id.clone(),
                label,
            });
        }
    }
    Ok(out)
}

/// A judged pair with its feature values, used for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionExample {
    pub judgment: Judgment,
    pub language: Language,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    /// Ranked-list length.
    pub n: usize,
    pub k: usize,
    pub train: TrainConfig,
}

/// Cross-validated MAP of training on `criterion`-filtered fold-train data
/// and ranking the unfiltered test pool of each held-out question. `None`
/// when some training fold lacks a positive or a negative example.
pub fn cross_validated_map(
    examples: &[SelectionExample],
    feature_names: &[String],
    criterion: SubsetCriterion,
    cv: &CvConfig,
) -> Result<Option<f64>> {
    let mut by_question: BTreeMap<&str, Vec<&SelectionExample>> = BTreeMap::new();
    for ex in examples {
        by_question.entry(ex.judgment.question_id.as_str()).or_default().push(ex);
    }
    let ids: Vec<String> = by_question.keys().map(|s| s.to_string()).collect();
    let mut ap = Vec::with_capacity(ids.len());
    for (train_ids, test_ids) in kfold_split(&ids, cv.folds, cv.seed)? {
        let train: Vec<TrainingExample> = train_ids
            .iter()
            .flat_map(|q| &by_question[q.as_str()])
            .filter_map(|ex| {
                criterion
                    .label(&ex.judgment, ex.language)
                    .map(|l| TrainingExample::new(ex.features.clone(), l))
            })
            .collect();
        if !(train.iter().any(|e| e.label) && train.iter().any(|e| !e.label)) {
            return Ok(None);
        }
        let model = train_ensemble(&train, feature_names, &cv.train)?;
        for q in &test_ids {
            let pool = &by_question[q.as_str()];
            let mut scored = pool
                .iter()
                .map(|ex| Ok((model.score(&ex.features)?, ex.judgment.candidate_id.as_str(), ex.judgment.evaluation_label())))
                .collect::<Result<Vec<_>>>()?;
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            let total = scored.iter().filter(|s| s.2).count();
            let rel: Vec<bool> = scored.iter().take(cv.n).map(|s| s.2).collect();
            ap.push(ap_k(&rel, cv.k, total));
        }
    }
    mean_average_precision(&ap).map(Some)
}

/// Per-criterion CV MAP (`None` = unevaluable) and the winner. Ties go to the
/// earlier criterion in `criteria`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub best: SubsetCriterion,
    pub scores: Vec<(SubsetCriterion, Option<f64>)>,
}

pub fn select_best_subset(
    criteria: &[SubsetCriterion],
    examples: &[SelectionExample],
    feature_names: &[String],
    cv: &CvConfig,
) -> Result<SelectionOutcome> {
    let unique: BTreeSet<_> = criteria.iter().collect();
    if unique.len() != criteria.len() {
        return Err(invalid("criteria list contains duplicates"));
    }
    let mut scores = Vec::with_capacity(criteria.len());
    let mut best: Option<(SubsetCriterion, f64)> = None;
    for &c in criteria {
        let map = cross_validated_map(examples, feature_names, c, cv)?;
        if let Some(m) = map {
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((c, m));
            }
        }
        scores.push((c, map));
    }
    let (best, _) = best.ok_or_else(|| invalid("no criterion could be evaluated"))?;
    Ok(SelectionOutcome { best, scores })
}
