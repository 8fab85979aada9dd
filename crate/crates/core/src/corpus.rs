//! Questions, candidate sentences and relevance judgments, plus their
//! line-oriented tab-separated file formats.
//!
//! Corpus line: `id  doc_id  language  position  tokens  onebest_en_tokens  prev_id|-`
//! Judgment line: `question_id  candidate_id  source_score|-  en_score|-`
//! Question line: `id  raw_text`
//!
//! Tokens inside a field are separated by single spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, parse_error, Error, Result};
use crate::simplify::Simplifier;
use crate::translation::{Method, ProbabilisticQuery};

/// Lowest annotator score that counts as relevant.
pub const RELEVANCE_THRESHOLD: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    En,
    Ar,
    Ch,
}

impl Language {
    /// Fixed order used for tie-breaking and round-robin merging.
    pub const ALL: [Language; 3] = [Language::En, Language::Ar, Language::Ch];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ar => "ar",
            Language::Ch => "ch",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "ar" => Ok(Language::Ar),
            "ch" | "zh" => Ok(Language::Ch),
            other => Err(invalid(format!("unknown language '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: String,
    pub raw_text: String,
    /// Simplified, lowercased question terms.
    pub terms: Vec<String>,
    /// Probabilistic translations of `terms`, keyed by target language and method.
    pub translations: BTreeMap<(Language, Method), ProbabilisticQuery>,
}

impl Question {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, simplifier: &Simplifier) -> Result<Self> {
        let raw_text = raw_text.into();
        let terms = simplifier.simplify(&raw_text)?;
        Ok(Self {
            id: id.into(),
            raw_text,
            terms,
            translations: BTreeMap::new(),
        })
    }

    /// Builds a question from already-simplified terms.
    pub fn from_terms(id: impl Into<String>, terms: Vec<String>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        Ok(Self {
            id: id.into(),
            raw_text: terms.join(" "),
            terms,
            translations: BTreeMap::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub id: String,
    pub doc_id: String,
    pub language: Language,
    pub position: u32,
    pub tokens: Vec<String>,
    /// One-best English translation; equal to `tokens` for English sentences.
    pub onebest_en_tokens: Vec<String>,
    pub prev_candidate_id: Option<String>,
}

/// A validated candidate collection with id lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    candidates: Vec<Candidate>,
    index: BTreeMap<String, usize>,
}

impl Corpus {
    /// Validates candidate invariants and resolves preceding-sentence links.
    pub fn new(candidates: Vec<Candidate>) -> Result<Self> {
        let lines: Vec<usize> = (1..=candidates.len()).collect();
        Self::validated(candidates, &lines, "<memory>")
    }

    fn validated(candidates: Vec<Candidate>, lines: &[usize], source_name: &str) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, c) in candidates.iter().enumerate() {
            if c.tokens.is_empty() {
                return Err(parse_error(source_name, lines[i], "empty token list"));
            }
            if c.onebest_en_tokens.is_empty() {
                return Err(parse_error(source_name, lines[i], "empty one-best translation"));
            }
            if c.language == Language::En && c.onebest_en_tokens != c.tokens {
                return Err(parse_error(
                    source_name,
                    lines[i],
                    "English candidate must carry its own tokens as one-best translation",
                ));
            }
            if index.insert(c.id.clone(), i).is_some() {
                return Err(parse_error(source_name, lines[i], format!("duplicate candidate id '{}'", c.id)));
            }
        }
        for (i, c) in candidates.iter().enumerate() {
            let Some(prev_id) = &c.prev_candidate_id else { continue };
            let Some(&j) = index.get(prev_id) else {
                return Err(parse_error(source_name, lines[i], format!("dangling prev link '{prev_id}'")));
            };
            let prev = &candidates[j];
            if prev.doc_id != c.doc_id || prev.position + 1 != c.position {
                return Err(parse_error(
                    source_name,
                    lines[i],
                    format!("prev link '{prev_id}' is not the preceding sentence of the same document"),
                ));
            }
        }
        Ok(Self { candidates, index })
    }

    pub fn get(&self, id: &str) -> Option<&Candidate> {
        self.index.get(id).map(|&i| &self.candidates[i])
    }

    pub fn previous(&self, c: &Candidate) -> Option<&Candidate> {
        c.prev_candidate_id.as_deref().and_then(|id| self.get(id))
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn languages(&self) -> BTreeSet<Language> {
        self.candidates.iter().map(|c| c.language).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Judgment {
    pub question_id: String,
    pub candidate_id: String,
    pub source_score: Option<u8>,
    pub en_score: Option<u8>,
}

impl Judgment {
    pub fn new(
        question_id: impl Into<String>,
        candidate_id: impl Into<String>,
        source_score: Option<u8>,
        en_score: Option<u8>,
    ) -> Result<Self> {
        if source_score.is_none() && en_score.is_none() {
            return Err(invalid("no score present"));
        }
        for s in [source_score, en_score].into_iter().flatten() {
            if !(1..=5).contains(&s) {
                return Err(invalid(format!("score {s} outside 1-5")));
            }
        }
        Ok(Self {
            question_id: question_id.into(),
            candidate_id: candidate_id.into(),
            source_score,
            en_score,
        })
    }

    pub fn source_label(&self) -> Option<bool> {
        self.source_score.map(|s| s >= RELEVANCE_THRESHOLD)
    }

    pub fn en_label(&self) -> Option<bool> {
        self.en_score.map(|s| s >= RELEVANCE_THRESHOLD)
    }

    /// True when both annotations exist and their binary labels disagree.
    pub fn is_inconsistent(&self) -> bool {
        matches!((self.source_label(), self.en_label()), (Some(a), Some(b)) if a != b)
    }

    /// Relevance used for evaluation: the English annotation when present,
    /// otherwise the source-language one.
    pub fn evaluation_label(&self) -> bool {
        self.en_label().or(self.source_label()).unwrap_or(false)
    }
}

fn split_tokens(field: &str) -> Vec<String> {
    field.split_whitespace().map(str::to_string).collect()
}

pub fn parse_corpus(text: &str, source_name: &str) -> Result<Corpus> {
    let mut candidates = Vec::new();
    let mut lines = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(parse_error(
                source_name,
                line_no,
                format!("expected 7 tab-separated fields (id, doc_id, language, position, tokens, onebest_en_tokens, prev_id), found {}", fields.len()),
            ));
        }
        let language = fields[2]
            .parse::<Language>()
            .map_err(|e| parse_error(source_name, line_no, e.to_string()))?;
        let position = fields[3]
            .parse::<u32>()
            .map_err(|_| parse_error(source_name, line_no, format!("bad position '{}'", fields[3])))?;
        let prev = match fields[6].trim() {
            "-" => None,
            id => Some(id.to_string()),
        };
        candidates.push(Candidate {
            id: fields[0].trim().to_string(),
            doc_id: fields[1].trim().to_string(),
            language,
            position,
            tokens: split_tokens(fields[4]),
            onebest_en_tokens: split_tokens(fields[5]),
            prev_candidate_id: prev,
        });
        lines.push(line_no);
    }
    Corpus::validated(candidates, &lines, source_name)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for c in corpus.candidates() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            c.id,
            c.doc_id,
            c.language,
            c.position,
            c.tokens.join(" "),
            c.onebest_en_tokens.join(" "),
            c.prev_candidate_id.as_deref().unwrap_or("-")
        ));
    }
    out
}

fn parse_score(field: &str) -> std::result::Result<Option<u8>, String> {
    if field == "-" {
        return Ok(None);
    }
    match field.parse::<u8>() {
        Ok(s) if (1..=5).contains(&s) => Ok(Some(s)),
        _ => Err(format!("bad score '{field}' (expected 1-5 or '-')")),
    }
}

/// Parses judgments. Fields may be separated by tabs or spaces.
pub fn parse_judgments(text: &str, source_name: &str) -> Result<Vec<Judgment>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_error(
                source_name,
                line_no,
                format!("expected 4 fields (question_id, candidate_id, source_score, en_score), found {}", fields.len()),
            ));
        }
        let source = parse_score(fields[2]).map_err(|m| parse_error(source_name, line_no, m))?;
        let en = parse_score(fields[3]).map_err(|m| parse_error(source_name, line_no, m))?;
        if source.is_none() && en.is_none() {
            return Err(parse_error(source_name, line_no, "no score present"));
        }
        if !seen.insert((fields[0].to_string(), fields[1].to_string())) {
            return Err(parse_error(
                source_name,
                line_no,
                format!("duplicate judgment for ({}, {})", fields[0], fields[1]),
            ));
        }
        out.push(Judgment {
            question_id: fields[0].to_string(),
            candidate_id: fields[1].to_string(),
            source_score: source,
            en_score: en,
        });
    }
    Ok(out)
}

pub fn load_judgments(path: &Path) -> Result<Vec<Judgment>> {
    parse_judgments(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_judgments(judgments: &[Judgment]) -> String {
    let score = |s: Option<u8>| s.map_or_else(|| "-".to_string(), |s| s.to_string());
    judgments
        .iter()
        .map(|j| format!("{}\t{}\t{}\t{}\n", j.question_id, j.candidate_id, score(j.source_score), score(j.en_score)))
        .collect()
}

pub fn parse_questions(text: &str, source_name: &str, simplifier: &Simplifier) -> Result<Vec<Question>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, raw)) = line.split_once('\t') else {
            return Err(parse_error(source_name, line_no, "expected 'id<TAB>raw_text'"));
        };
        let id = id.trim();
        if !seen.insert(id.to_string()) {
            return Err(parse_error(source_name, line_no, format!("duplicate question id '{id}'")));
        }
        let q = Question::new(id, raw.trim(), simplifier)
            .map_err(|e| parse_error(source_name, line_no, e.to_string()))?;
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions(path: &Path, simplifier: &Simplifier) -> Result<Vec<Question>> {
    parse_questions(&fs::read_to_string(path)?, &path.display().to_string(), simplifier)
}

pub fn write_questions(questions: &[Question]) -> String {
    questions.iter().map(|q| format!("{}\t{}\n", q.id, q.raw_text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = "c1\td1\tar\t0\tx y\tchild work\t-\n\
                         c2\td1\tar\t1\tz\tafrica\tc1\n\
                         e1\td2\ten\t0\tchild labor\tchild labor\t-\n";

    #[test]
    fn loads_well_formed_lines() {
        let corpus = parse_corpus(THREE, "t").unwrap();
        assert_eq!(corpus.len(), 3);
        let c2 = corpus.get("c2").unwrap();
        assert_eq!(corpus.previous(c2).unwrap().id, "c1");
        assert_eq!(c2.onebest_en_tokens, vec!["africa"]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("", "t").unwrap().is_empty());
    }

    #[test]
    fn missing_field_names_line() {
        let text = "c1\td1\tar\t0\tx\tchild\t-\nc2\td1\t1\tz\tafrica\tc1\n";
        let err = parse_corpus(text, "corpus.tsv").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn dangling_prev_link_rejected() {
        let text = "c2\td1\tar\t1\tz\tafrica\tc9\n";
        let err = parse_corpus(text, "t").unwrap_err().to_string();
        assert!(err.contains("dangling"), "{err}");
    }

    #[test]
    fn prev_link_must_be_adjacent() {
        let text = "c1\td1\tar\t0\tx\ta\t-\nc2\td1\tar\t2\tz\tb\tc1\n";
        assert!(parse_corpus(text, "t").is_err());
    }

    #[test]
    fn english_onebest_must_match() {
        let text = "e1\td2\ten\t0\tchild labor\tchild work\t-\n";
        assert!(parse_corpus(text, "t").is_err());
    }

    #[test]
    fn judgment_with_single_score() {
        let js = parse_judgments("q1 c1 4 -\n", "t").unwrap();
        assert_eq!(js[0].source_score, Some(4));
        assert_eq!(js[0].en_score, None);
        assert_eq!(js[0].source_label(), Some(true));
    }

    #[test]
    fn judgment_without_score_rejected() {
        let err = parse_judgments("q1 c1 - -\n", "t").unwrap_err().to_string();
        assert!(err.contains("no score present"), "{err}");
    }

    #[test]
    fn duplicate_judgment_rejected() {
        let err = parse_judgments("q1\tc1\t4\t-\nq1\tc1\t-\t2\n", "t").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn out_of_range_score_rejected() {
        assert!(parse_judgments("q1 c1 6 -\n", "t").is_err());
        assert!(Judgment::new("q", "c", Some(0), None).is_err());
    }

    #[test]
    fn binary_relevance_threshold() {
        let j = Judgment::new("q", "c", Some(3), Some(2)).unwrap();
        assert_eq!(j.source_label(), Some(true));
        assert_eq!(j.en_label(), Some(false));
        assert!(j.is_inconsistent());
        assert!(!j.evaluation_label());
    }

    #[test]
    fn corpus_round_trip() {
        let corpus = parse_corpus(THREE, "t").unwrap();
        let again = parse_corpus(&write_corpus(&corpus), "t").unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn questions_are_simplified() {
        let qs = parse_questions("q1\tTell me about child labor in Africa\n", "t", &Simplifier::default()).unwrap();
        assert_eq!(qs[0].terms, vec!["child", "labor", "africa"]);
    }
}
