//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export takes and returns plain strings so the page needs no glue
//! beyond the generated bindings. Errors come back as `error: ...` text.

use std::collections::BTreeMap;

use wasm_bindgen::prelude::*;

use mlqa::evaluation::ap_k;
use mlqa::merge::{language_ratio, merge, rank_scored, ListLanguage, MergeStrategy};
use mlqa::representation::{cosine, question_vector, sentence_vector};
use mlqa::translation::{Distribution, ProbabilisticQuery};
use mlqa::Language;

fn report<T>(r: mlqa::Result<T>, f: impl FnOnce(T) -> String) -> String {
    match r {
        Ok(v) => f(v),
        Err(e) => format!("error: {e}"),
    }
}

/// Parses one line per question term: `term target:prob target:prob ...`.
fn parse_query(table: &str) -> mlqa::Result<ProbabilisticQuery> {
    let mut terms = Vec::new();
    let mut dists = Vec::new();
    for line in table.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut parts = line.split_whitespace();
        let term = parts.next().unwrap_or_default().to_string();
        let mut entries = BTreeMap::new();
        for item in parts {
            let (t, p) = item
                .rsplit_once(':')
                .ok_or_else(|| mlqa::Error::Invalid(format!("expected target:prob, got '{item}'")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| mlqa::Error::Invalid(format!("bad probability in '{item}'")))?;
            *entries.entry(t.to_string()).or_insert(0.0) += p;
        }
        terms.push(term);
        dists.push(Distribution::new(entries)?);
    }
    ProbabilisticQuery::new(terms, dists)
}

/// Question vector for a translation table and its cosine with `sentence`.
#[wasm_bindgen]
pub fn explore_similarity(table: &str, sentence: &str) -> String {
    let result = parse_query(table).and_then(|pq| {
        let q = question_vector(&pq)?;
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        let s = sentence_vector(&tokens)?;
        let c = cosine(&q, &s);
        Ok((q, c))
    });
    report(result, |(q, c)| {
        let mut out = String::from("question vector\n");
        for (w, x) in q.iter() {
            out.push_str(&format!("  {w}\t{x:.4}\n"));
        }
        out.push_str(&format!("cosine\t{c:.4}\n"));
        out
    })
}

/// Parses `lang id score` lines into per-language ranked lists.
fn parse_scored(lines: &str) -> mlqa::Result<Vec<mlqa::merge::RankedList>> {
    let mut by_lang: BTreeMap<Language, Vec<(String, Language, f64)>> = BTreeMap::new();
    for line in lines.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [lang, id, score] = f[..] else {
            return Err(mlqa::Error::Invalid(format!("expected 'lang id score', got '{line}'")));
        };
        let lang: Language = lang.parse()?;
        let score: f64 = score
            .parse()
            .map_err(|_| mlqa::Error::Invalid(format!("bad score '{score}'")))?;
        by_lang.entry(lang).or_default().push((id.to_string(), lang, score));
    }
    by_lang
        .into_iter()
        .map(|(l, s)| {
            let n = s.len();
            rank_scored("q", ListLanguage::Single(l), s, n)
        })
        .collect()
}

/// Merges scored candidates with the named strategy (`uniform`, `alternate`,
/// `english-first`, `weighted`) and reports the order and language ratio.
#[wasm_bindgen]
pub fn explore_merge(scored: &str, strategy: &str, parameter: f64, n: usize) -> String {
    let result = parse_scored(scored).and_then(|lists| {
        let s = match strategy {
            "english-first" => MergeStrategy::EnglishFirst { threshold: parameter },
            "weighted" => MergeStrategy::Weighted { english_weight: parameter },
            other => other.parse()?,
        };
        let m = merge(&lists, n, s)?;
        let ratio = language_ratio(&m)?;
        Ok((m, ratio))
    });
    report(result, |(m, (en, ch, ar))| {
        let mut out = String::new();
        for (i, e) in m.entries.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t{:.3}\n", i + 1, e.candidate_id, e.language, e.normalized_score));
        }
        out.push_str(&format!("ratio en/ch/ar\t{en:.1}\t{ch:.1}\t{ar:.1}\n"));
        out
    })
}

/// AP-k of a ranking given as a string of `1`/`0` (or `+`/`-`) marks.
#[wasm_bindgen]
pub fn average_precision(marks: &str, k: usize, total_relevant: usize) -> f64 {
    let rel: Vec<bool> = marks
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| matches!(c, '1' | '+' | 'y' | 'Y'))
        .collect();
    ap_k(&rel, k, total_relevant)
}
