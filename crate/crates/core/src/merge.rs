//! Ranked answer lists and heuristics for merging per-language lists into a
//! single mixed-language list.
//!
//! Ranked-list file: `question_id \t rank \t candidate_id \t language \t raw_score \t normalized_score`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::classifier::EnsembleModel;
use crate::corpus::Language;
use crate::error::{invalid, parse_error, Error, Result};
use crate::evaluation::ap_k;
use crate::features::FeatureVector;

/// Weights tried by the weighted merge grid search by default.
pub const DEFAULT_WEIGHT_GRID: [f64; 3] = [2.0, 5.0, 10.0];

/// Default English-first confidence threshold.
pub const DEFAULT_ENGLISH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ListLanguage {
    Single(Language),
    Mixed,
}

impl fmt::Display for ListLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListLanguage::Single(l) => l.fmt(f),
            ListLanguage::Mixed => f.write_str("mixed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub candidate_id: String,
    pub language: Language,
    pub raw_score: f64,
    pub normalized_score: f64,
}

/// A ranked answer list for one question. Lists produced by [`rank`] are
/// sorted by descending raw score; merged lists keep each entry's original
/// scores and are ordered by the merge policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub question_id: String,
    pub language: ListLanguage,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidate_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.candidate_id.as_str())
    }
}

/// Sorts scored candidates by descending score (ties by candidate id) and
/// keeps the top `n`. Normalized scores start as the raw score clamped to [0, 1].
pub fn rank_scored(
    question_id: &str,
    language: ListLanguage,
    mut scored: Vec<(String, Language, f64)>,
    n: usize,
) -> Result<RankedList> {
    if n == 0 {
        return Err(invalid("list size n must be at least 1"));
    }
    if let Some((id, _, s)) = scored.iter().find(|(_, _, s)| !s.is_finite()) {
        return Err(invalid(format!("non-finite score {s} for candidate '{id}'")));
    }
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    scored.dedup_by(|a, b| a.0 == b.0);
    scored.truncate(n);
    Ok(RankedList {
        question_id: question_id.to_string(),
        language,
        entries: scored
            .into_iter()
            .map(|(candidate_id, language, raw)| RankedEntry {
                candidate_id,
                language,
                raw_score: raw,
                normalized_score: raw.clamp(0.0, 1.0),
            })
            .collect(),
    })
}

/// Scores every candidate with `model` and keeps the best `n`.
pub fn rank(
    model: &EnsembleModel,
    question_id: &str,
    language: ListLanguage,
    candidates: &[(&str, Language, &FeatureVector)],
    n: usize,
) -> Result<RankedList> {
    let scored = candidates
        .iter()
        .map(|(id, lang, fv)| Ok((id.to_string(), *lang, model.score_features(fv)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_scored(question_id, language, scored, n)
}

/// Min-max normalization of raw scores; a constant list maps to 1.0.
pub fn normalize_scores(list: &RankedList) -> Result<RankedList> {
    if list.is_empty() {
        return Err(invalid(format!("cannot normalize empty list for question '{}'", list.question_id)));
    }
    let (lo, hi) = list
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.raw_score), hi.max(e.raw_score)));
    let mut out = list.clone();
    for e in &mut out.entries {
        e.normalized_score = if hi > lo { (e.raw_score - lo) / (hi - lo) } else { 1.0 };
    }
    Ok(out)
}

fn language_rank(l: Language) -> usize {
    Language::ALL.iter().position(|&x| x == l).unwrap_or(usize::MAX)
}

/// Lists in en, ar, ch order (stable for equal languages).
fn ordered(lists: &[RankedList]) -> Vec<&RankedList> {
    let mut out: Vec<&RankedList> = lists.iter().collect();
    out.sort_by_key(|l| match l.language {
        ListLanguage::Single(lang) => language_rank(lang),
        ListLanguage::Mixed => usize::MAX,
    });
    out
}

fn mixed(lists: &[RankedList], entries: Vec<RankedEntry>) -> RankedList {
    RankedList {
        question_id: lists.first().map(|l| l.question_id.clone()).unwrap_or_default(),
        language: ListLanguage::Mixed,
        entries,
    }
}

/// Global sort by `key`, ties broken by language order then list position.
fn merge_by_key(lists: &[&RankedList], n: usize, key: impl Fn(&RankedEntry) -> f64) -> Vec<RankedEntry> {
    let mut pool: Vec<(f64, usize, usize, usize, &RankedEntry)> = Vec::new();
    for (li, list) in lists.iter().enumerate() {
        for (pos, e) in list.entries.iter().enumerate() {
            pool.push((key(e), language_rank(e.language), li, pos, e));
        }
    }
    pool.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut seen = BTreeSet::new();
    pool.into_iter()
        .filter(|(.., e)| seen.insert(e.candidate_id.as_str()))
        .take(n)
        .map(|(.., e)| e.clone())
        .collect()
}

/// Sorts all answers by normalized score across languages.
pub fn merge_uniform(lists: &[RankedList], n: usize) -> RankedList {
    mixed(lists, merge_by_key(&ordered(lists), n, |e| e.normalized_score))
}

/// Round-robin over the en, ar, ch lists, skipping exhausted ones.
pub fn merge_alternate(lists: &[RankedList], n: usize) -> RankedList {
    let lists = ordered(lists);
    let mut cursors = vec![0usize; lists.len()];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let mut progressed = false;
        for (list, cursor) in lists.iter().zip(cursors.iter_mut()) {
            if out.len() == n {
                break;
            }
            while *cursor < list.entries.len() {
                let e = &list.entries[*cursor];
                *cursor += 1;
                if seen.insert(e.candidate_id.clone()) {
                    out.push(e.clone());
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    RankedList {
        question_id: lists.first().map(|l| l.question_id.clone()).unwrap_or_default(),
        language: ListLanguage::Mixed,
        entries: out,
    }
}

/// English answers with normalized score strictly above `threshold` come
/// first in list order; the remaining slots are filled by a uniform merge of
/// the other languages and the remaining English answers.
pub fn merge_english_first(lists: &[RankedList], n: usize, threshold: f64) -> RankedList {
    let mut head = Vec::new();
    let mut rest: Vec<RankedList> = Vec::new();
    for list in lists {
        let (confident, other): (Vec<RankedEntry>, Vec<RankedEntry>) = list
            .entries
            .iter()
            .cloned()
            .partition(|e| e.language == Language::En && e.normalized_score > threshold);
        head.extend(confident);
        rest.push(RankedList {
            entries: other,
            ..list.clone()
        });
    }
    let mut seen = BTreeSet::new();
    head.retain(|e| seen.insert(e.candidate_id.clone()));
    head.truncate(n);
    let remaining = n - head.len();
    let rest: Vec<RankedList> = rest
        .into_iter()
        .map(|mut l| {
            l.entries.retain(|e| !seen.contains(&e.candidate_id));
            l
        })
        .collect();
    head.extend(merge_uniform(&rest, remaining).entries);
    mixed(lists, head)
}

/// Uniform merge after multiplying English normalized scores by `english_weight`.
pub fn merge_weighted(lists: &[RankedList], n: usize, english_weight: f64) -> RankedList {
    mixed(
        lists,
        merge_by_key(&ordered(lists), n, |e| {
            if e.language == Language::En {
                e.normalized_score * english_weight
            } else {
                e.normalized_score
            }
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeStrategy {
    Uniform,
    Alternate,
    EnglishFirst { threshold: f64 },
    Weighted { english_weight: f64 },
}

impl fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeStrategy::Uniform => f.write_str("uniform"),
            MergeStrategy::Alternate => f.write_str("alternate"),
            MergeStrategy::EnglishFirst { threshold } => write!(f, "english-first(threshold={threshold})"),
            MergeStrategy::Weighted { english_weight } => write!(f, "weighted(weight={english_weight})"),
        }
    }
}

impl FromStr for MergeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MergeStrategy::Uniform),
            "alternate" => Ok(MergeStrategy::Alternate),
            "english-first" => Ok(MergeStrategy::EnglishFirst {
                threshold: DEFAULT_ENGLISH_THRESHOLD,
            }),
            "weighted" => Ok(MergeStrategy::Weighted {
                english_weight: DEFAULT_WEIGHT_GRID[0],
            }),
            other => Err(invalid(format!("unknown merge strategy '{other}'"))),
        }
    }
}

/// Normalizes each nonempty list and merges with `strategy`.
pub fn merge(lists: &[RankedList], n: usize, strategy: MergeStrategy) -> Result<RankedList> {
    if let MergeStrategy::Weighted { english_weight } = strategy {
        if !(english_weight > 0.0 && english_weight.is_finite()) {
            return Err(invalid(format!("English weight must be positive, got {english_weight}")));
        }
    }
    let normalized = lists
        .iter()
        .filter(|l| !l.is_empty())
        .map(normalize_scores)
        .collect::<Result<Vec<_>>>()?;
    Ok(match strategy {
        MergeStrategy::Uniform => merge_uniform(&normalized, n),
        MergeStrategy::Alternate => merge_alternate(&normalized, n),
        MergeStrategy::EnglishFirst { threshold } => merge_english_first(&normalized, n, threshold),
        MergeStrategy::Weighted { english_weight } => merge_weighted(&normalized, n, english_weight),
    })
}

/// Per-language lists of one question with its relevance information.
#[derive(Debug, Clone)]
pub struct MergeQuestion {
    pub lists: Vec<RankedList>,
    pub relevant: BTreeSet<String>,
    pub total_relevant: usize,
}

impl MergeQuestion {
    pub fn ap_with_weight(&self, english_weight: f64, n: usize, k: usize) -> Result<f64> {
        let merged = merge(&self.lists, n, MergeStrategy::Weighted { english_weight })?;
        let rel: Vec<bool> = merged.candidate_ids().map(|id| self.relevant.contains(id)).collect();
        Ok(ap_k(&rel, k, self.total_relevant))
    }
}

/// Picks, for every question, the candidate weight with the best mean AP-k on
/// all other questions (leave one question out). Ties go to the smaller weight.
pub fn learn_merge_weights(questions: &[MergeQuestion], candidate_weights: &[f64], n: usize, k: usize) -> Result<Vec<f64>> {
    if questions.len() < 2 {
        return Err(invalid("weight learning needs at least two questions"));
    }
    if candidate_weights.is_empty() {
        return Err(invalid("no candidate weights"));
    }
    let mut weights = candidate_weights.to_vec();
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    // ap[w][q]
    let ap: Vec<Vec<f64>> = weights
        .iter()
        .map(|&w| questions.iter().map(|q| q.ap_with_weight(w, n, k)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = ap.iter().map(|row| row.iter().sum()).collect();
    let others = (questions.len() - 1) as f64;
    Ok((0..questions.len())
        .map(|qi| {
            let mut best = 0;
            let mut best_map = f64::NEG_INFINITY;
            for (wi, row) in ap.iter().enumerate() {
                let held_out = (totals[wi] - row[qi]) / others;
                if held_out > best_map + 1e-12 {
                    best = wi;
                    best_map = held_out;
                }
            }
            weights[best]
        })
        .collect())
}

/// Percentages of (en, ch, ar) answers in the list.
pub fn language_ratio(list: &RankedList) -> Result<(f64, f64, f64)> {
    language_ratio_of(list.entries.iter().map(|e| e.language))
}

pub fn language_ratio_of(languages: impl IntoIterator<Item = Language>) -> Result<(f64, f64, f64)> {
    let mut counts = [0usize; 3];
    let mut total = 0usize;
    for l in languages {
        counts[language_rank(l)] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(invalid("language ratio of an empty list"));
    }
    let pct = |c: usize| 100.0 * c as f64 / total as f64;
    Ok((pct(counts[0]), pct(counts[2]), pct(counts[1])))
}

pub fn write_ranked_lists(lists: &[RankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        for (i, e) in list.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.9}\t{:.9}\n",
                list.question_id,
                i + 1,
                e.candidate_id,
                e.language,
                e.raw_score,
                e.normalized_score
            ));
        }
    }
    out
}

/// Parses ranked lists, grouping lines by question id in file order. A list
/// whose entries share one language is tagged with it, otherwise mixed.
pub fn parse_ranked_lists(text: &str, source_name: &str) -> Result<Vec<RankedList>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, RankedEntry)>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(parse_error(source_name, line_no, format!("expected 6 fields, found {}", f.len())));
        }
        let err = |m: &str| parse_error(source_name, line_no, m.to_string());
        let rank: usize = f[1].parse().map_err(|_| err("bad rank"))?;
        let language: Language = f[3].parse().map_err(|e: Error| err(&e.to_string()))?;
        let raw: f64 = f[4].parse().map_err(|_| err("bad raw score"))?;
        let norm: f64 = f[5].parse().map_err(|_| err("bad normalized score"))?;
        if !(0.0..=1.0).contains(&norm) {
            return Err(err("normalized score outside [0, 1]"));
        }
        if !rows.contains_key(f[0]) {
            order.push(f[0].to_string());
        }
        let list = rows.entry(f[0].to_string()).or_default();
        if list.iter().any(|(_, e)| e.candidate_id == f[2]) {
            return Err(err("duplicate candidate in list"));
        }
        list.push((
            rank,
            RankedEntry {
                candidate_id: f[2].to_string(),
                language,
                raw_score: raw,
                normalized_score: norm,
            },
        ));
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let mut entries = rows.remove(&qid).unwrap_or_default();
            entries.sort_by_key(|(r, _)| *r);
            let entries: Vec<RankedEntry> = entries.into_iter().map(|(_, e)| e).collect();
            let langs: BTreeSet<Language> = entries.iter().map(|e| e.language).collect();
            let language = match langs.len() {
                1 => ListLanguage::Single(*langs.iter().next().expect("one language")),
                _ => ListLanguage::Mixed,
            };
            RankedList {
                question_id: qid,
                language,
                entries,
            }
        })
        .collect())
}

pub fn load_ranked_lists(path: &Path) -> Result<Vec<RankedList>> {
    parse_ranked_lists(&fs::read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(lang: Language, items: &[(&str, f64)]) -> RankedList {
        RankedList {
            question_id: "q".into(),
            language: ListLanguage::Single(lang),
            entries: items
                .iter()
                .map(|(id, s)| RankedEntry {
                    candidate_id: id.to_string(),
                    language: lang,
                    raw_score: *s,
                    normalized_score: *s,
                })
                .collect(),
        }
    }

    fn ids(l: &RankedList) -> Vec<&str> {
        l.candidate_ids().collect()
    }

    #[test]
    fn rank_top_n_with_tie_break() {
        let scored = vec![
            ("c".to_string(), Language::En, 0.1),
            ("a".to_string(), Language::En, 0.9),
            ("b".to_string(), Language::En, 0.5),
        ];
        let l = rank_scored("q", ListLanguage::Single(Language::En), scored.clone(), 2).unwrap();
        assert_eq!(ids(&l), ["a", "b"]);
        assert_eq!(rank_scored("q", ListLanguage::Mixed, scored, 10).unwrap().len(), 3);
        let tied = vec![("z".to_string(), Language::Ar, 0.5), ("m".to_string(), Language::Ar, 0.5)];
        assert_eq!(ids(&rank_scored("q", ListLanguage::Mixed, tied, 5).unwrap()), ["m", "z"]);
        assert!(rank_scored("q", ListLanguage::Mixed, vec![], 0).is_err());
    }

    #[test]
    fn normalization() {
        let l = normalize_scores(&list(Language::En, &[("a", 0.8), ("b", 0.5), ("c", 0.2)])).unwrap();
        let norm: Vec<f64> = l.entries.iter().map(|e| e.normalized_score).collect();
        assert!((norm[0] - 1.0).abs() < 1e-12 && (norm[1] - 0.5).abs() < 1e-12 && norm[2] == 0.0);
        let single = normalize_scores(&list(Language::En, &[("a", 0.3)])).unwrap();
        assert_eq!(single.entries[0].normalized_score, 1.0);
        let unit = normalize_scores(&list(Language::En, &[("a", 1.0), ("b", 0.0)])).unwrap();
        assert_eq!(unit.entries[0].normalized_score, 1.0);
        assert_eq!(unit.entries[1].normalized_score, 0.0);
        assert!(normalize_scores(&list(Language::En, &[])).is_err());
    }

    #[test]
    fn uniform_tie_prefers_english() {
        let a = list(Language::En, &[("a1", 1.0), ("a2", 0.0)]);
        let b = list(Language::Ar, &[("b1", 1.0)]);
        assert_eq!(ids(&merge_uniform(&[b.clone(), a.clone()], 3)), ["a1", "b1", "a2"]);
        assert_eq!(ids(&merge_uniform(&[a], 1)), ["a1"]);
    }

    #[test]
    fn uniform_invariant_to_affine_rescaling() {
        let en = list(Language::En, &[("e1", 0.9), ("e2", 0.4), ("e3", 0.1)]);
        let ar = list(Language::Ar, &[("a1", 0.7), ("a2", 0.6), ("a3", 0.2)]);
        let mut scaled = ar.clone();
        for e in &mut scaled.entries {
            e.raw_score = 3.0 * e.raw_score + 7.0;
        }
        let x = merge(&[en.clone(), ar], 6, MergeStrategy::Uniform).unwrap();
        let y = merge(&[en, scaled], 6, MergeStrategy::Uniform).unwrap();
        assert_eq!(ids(&x), ids(&y));
    }

    #[test]
    fn alternate_round_robin() {
        let en = list(Language::En, &[("e1", 0.9), ("e2", 0.8)]);
        let ar = list(Language::Ar, &[("a1", 0.5)]);
        let ch = list(Language::Ch, &[("c1", 0.4)]);
        let lists = [ch, ar, en];
        assert_eq!(ids(&merge_alternate(&lists, 4)), ["e1", "a1", "c1", "e2"]);
        assert_eq!(ids(&merge_alternate(&lists, 2)), ["e1", "a1"]);
        assert_eq!(ids(&merge_alternate(&lists[2..], 1)), ["e1"]);
    }

    #[test]
    fn english_first_threshold() {
        let en = list(Language::En, &[("e1", 0.9), ("e2", 0.6), ("e3", 0.2)]);
        let ar = list(Language::Ar, &[("a1", 0.95)]);
        let merged = merge_english_first(&[en.clone(), ar.clone()], 4, 0.5);
        assert_eq!(ids(&merged), ["e1", "e2", "a1", "e3"]);
        let strict = merge_english_first(&[en.clone(), ar.clone()], 4, 1.0);
        assert_eq!(ids(&strict), ids(&merge_uniform(&[en, ar.clone()], 4)));
        let no_en = merge_english_first(&[list(Language::En, &[]), ar.clone()], 4, 0.5);
        assert_eq!(ids(&no_en), ["a1"]);
    }

    #[test]
    fn weighted_arithmetic() {
        let en = list(Language::En, &[("e", 0.4)]);
        let ar = list(Language::Ar, &[("a", 0.9)]);
        let lists = [en, ar];
        assert_eq!(ids(&merge_weighted(&lists, 2, 2.0)), ["a", "e"]);
        assert_eq!(ids(&merge_weighted(&lists, 2, 5.0)), ["e", "a"]);
        assert_eq!(merge_weighted(&lists, 2, 1.0), merge_uniform(&lists, 2));
    }

    #[test]
    fn weighted_rejects_nonpositive_weight() {
        let lists = [list(Language::En, &[("e", 0.4)])];
        assert!(merge(&lists, 1, MergeStrategy::Weighted { english_weight: 0.0 }).is_err());
    }

    fn merge_question(en_relevant: bool) -> MergeQuestion {
        let en = list(Language::En, &[("e1", 0.6), ("e2", 0.5), ("e3", 0.4)]);
        let ar = list(Language::Ar, &[("a1", 0.9), ("a2", 0.8), ("a3", 0.4)]);
        let relevant = if en_relevant { "e2" } else { "a1" };
        MergeQuestion {
            lists: vec![en, ar],
            relevant: BTreeSet::from([relevant.to_string()]),
            total_relevant: 1,
        }
    }

    #[test]
    fn learned_weight_prefers_english_when_english_is_better() {
        let qs = vec![merge_question(true), merge_question(true), merge_question(true)];
        let w = learn_merge_weights(&qs, &[1.0, 2.0, 5.0, 10.0], 6, 20).unwrap();
        // Normalized: e2 0.5, a1 1.0, a2 0.8. Weight 1 puts e2 fourth; every
        // larger weight puts it second, so 2, 5 and 10 tie and 2 wins.
        assert_eq!(w, [2.0, 2.0, 2.0]);
        let single = learn_merge_weights(&qs, &[5.0], 6, 20).unwrap();
        assert_eq!(single, [5.0, 5.0, 5.0]);
        assert!(learn_merge_weights(&qs[..1], &[1.0], 6, 20).is_err());
    }

    #[test]
    fn learned_weight_ties_choose_smaller() {
        let qs = vec![merge_question(false), merge_question(false)];
        // a1 is relevant and sits second under every weight.
        let w = learn_merge_weights(&qs, &[10.0, 1.0, 2.0], 6, 20).unwrap();
        assert_eq!(w, [1.0, 1.0]);
    }

    #[test]
    fn ratios() {
        let mut l = list(Language::En, &[("e1", 0.9), ("e2", 0.8)]);
        l.entries.push(list(Language::Ar, &[("a", 0.5)]).entries[0].clone());
        l.entries.push(list(Language::Ch, &[("c", 0.5)]).entries[0].clone());
        assert_eq!(language_ratio(&l).unwrap(), (50.0, 25.0, 25.0));
        assert_eq!(language_ratio(&list(Language::En, &[("e", 1.0)])).unwrap(), (100.0, 0.0, 0.0));
        assert!(language_ratio(&list(Language::En, &[])).is_err());
    }

    #[test]
    fn ranked_list_file_round_trip() {
        let l = list(Language::Ar, &[("a1", 0.75), ("a2", 0.25)]);
        let parsed = parse_ranked_lists(&write_ranked_lists(&[l.clone()]), "t").unwrap();
        assert_eq!(parsed, vec![l]);
    }

    fn arb_lists() -> impl Strategy<Value = Vec<RankedList>> {
        let langs = [Language::En, Language::Ar, Language::Ch];
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 0..8), 3).prop_map(move |scores| {
            scores
                .into_iter()
                .zip(langs)
                .map(|(s, lang)| {
                    let scored = s
                        .into_iter()
                        .enumerate()
                        .map(|(i, x)| (format!("{lang}{i}"), lang, x))
                        .collect();
                    rank_scored("q", ListLanguage::Single(lang), scored, 100).unwrap()
                })
                .filter(|l| !l.is_empty())
                .collect()
        })
    }

    fn strategies() -> [MergeStrategy; 4] {
        [
            MergeStrategy::Uniform,
            MergeStrategy::Alternate,
            MergeStrategy::EnglishFirst { threshold: 0.5 },
            MergeStrategy::Weighted { english_weight: 5.0 },
        ]
    }

    proptest! {
        #[test]
        fn merged_length_and_uniqueness(lists in arb_lists(), n in 1usize..30) {
            let total: usize = lists.iter().map(RankedList::len).sum();
            for s in strategies() {
                let merged = merge(&lists, n, s).unwrap();
                prop_assert_eq!(merged.len(), n.min(total));
                let unique: BTreeSet<&str> = merged.candidate_ids().collect();
                prop_assert_eq!(unique.len(), merged.len());
            }
        }

        #[test]
        fn merge_keeps_within_language_order(lists in arb_lists(), n in 1usize..30) {
            for s in strategies() {
                let merged = merge(&lists, n, s).unwrap();
                for list in &lists {
                    let original: Vec<&str> = list.candidate_ids().collect();
                    let kept: Vec<&str> = merged
                        .entries
                        .iter()
                        .filter(|e| ListLanguage::Single(e.language) == list.language)
                        .map(|e| e.candidate_id.as_str())
                        .collect();
                    prop_assert_eq!(&original[..kept.len()], &kept[..]);
                }
            }
        }

        #[test]
        fn normalized_scores_in_unit_interval(raw in proptest::collection::vec(-50.0f64..50.0, 1..20)) {
            let scored = raw.iter().enumerate().map(|(i, x)| (format!("c{i}"), Language::En, *x)).collect();
            let l = normalize_scores(&rank_scored("q", ListLanguage::Single(Language::En), scored, 100).unwrap()).unwrap();
            prop_assert!(l.entries.iter().all(|e| (0.0..=1.0).contains(&e.normalized_score)));
            prop_assert_eq!(l.entries[0].normalized_score, 1.0);
            prop_assert!(l.entries.windows(2).all(|w| w[0].raw_score >= w[1].raw_score));
        }
    }
}
