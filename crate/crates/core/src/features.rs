//! Lexical similarity features for a (question, candidate) pair.
//!
//! Five values are computed for the candidate itself and five more for the
//! sentence preceding it in the same document:
//!
//! | name            | question side                      | sentence side        |
//! |-----------------|------------------------------------|----------------------|
//! | `lexcl_word`    | question vector, word translation  | sentence vector      |
//! | `lexcl_10best`  | question vector, 10-best           | sentence vector      |
//! | `lexcl_context` | question vector, context model     | sentence vector      |
//! | `lexcl_grammar` | question vector, grammar           | sentence vector      |
//! | `lexql`         | question terms                     | one-best translation |
//!
//! English candidates use the identity translation in the collection-language
//! view, which makes their `lexcl_*` values equal to `lexql`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Candidate, Corpus, Language, Question};
use crate::error::{invalid, parse_error, Error, Result};
use crate::representation::{cosine, question_vector, sentence_vector, WeightedVector};
use crate::translation::{Method, ProbabilisticQuery};

pub const FEATURE_COUNT: usize = 10;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "lexcl_word",
    "lexcl_10best",
    "lexcl_context",
    "lexcl_grammar",
    "lexql",
    "prev_lexcl_word",
    "prev_lexcl_10best",
    "prev_lexcl_context",
    "prev_lexcl_grammar",
    "prev_lexql",
];

const LEXQL: usize = 4;
const PREV: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureSet {
    LexCl,
    LexQl,
    Both,
}

impl FeatureSet {
    pub fn uses_cl(self) -> bool {
        matches!(self, FeatureSet::LexCl | FeatureSet::Both)
    }

    pub fn uses_ql(self) -> bool {
        matches!(self, FeatureSet::LexQl | FeatureSet::Both)
    }

    pub fn mask(self) -> [bool; FEATURE_COUNT] {
        let mut mask = [false; FEATURE_COUNT];
        for base in [0, PREV] {
            for i in 0..4 {
                mask[base + i] = self.uses_cl();
            }
            mask[base + LEXQL] = self.uses_ql();
        }
        mask
    }

    /// Names of the features this set keeps, in canonical order.
    pub fn active_names(self) -> Vec<String> {
        FEATURE_NAMES
            .iter()
            .zip(self.mask())
            .filter(|(_, on)| *on)
            .map(|(n, _)| n.to_string())
            .collect()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::LexCl => "lexcl",
            FeatureSet::LexQl => "lexql",
            FeatureSet::Both => "both",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lexcl" | "cl" => Ok(FeatureSet::LexCl),
            "lexql" | "ql" => Ok(FeatureSet::LexQl),
            "both" | "all" => Ok(FeatureSet::Both),
            other => Err(invalid(format!("unknown feature set '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    /// Inactive features hold exactly 0.
    pub active: [bool; FEATURE_COUNT],
    pub label: Option<bool>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }

    /// Values of the named features, in the given order.
    pub fn project(&self, names: &[String]) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| self.get(n).ok_or_else(|| invalid(format!("unknown feature '{n}'"))))
            .collect()
    }
}

/// Per-question vectors reused across all of its candidates.
#[derive(Debug, Clone)]
pub struct QuestionProfile {
    cl: BTreeMap<(Language, Method), WeightedVector>,
    identity: WeightedVector,
    ql: WeightedVector,
}

impl QuestionProfile {
    pub fn new(question: &Question) -> Result<Self> {
        let cl = question
            .translations
            .iter()
            .map(|(key, pq)| Ok((*key, question_vector(pq)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            cl,
            identity: question_vector(&ProbabilisticQuery::identity(&question.terms))?,
            ql: sentence_vector(&question.terms)?,
        })
    }

    fn cl_vector(&self, language: Language, method: Method) -> Result<&WeightedVector> {
        if language == Language::En {
            return Ok(&self.identity);
        }
        self.cl
            .get(&(language, method))
            .ok_or_else(|| Error::MissingResource(format!("{method} translation for {language}")))
    }

    fn block(&self, c: &Candidate, set: FeatureSet) -> Result<[f64; 5]> {
        let mut out = [0.0; 5];
        if set.uses_cl() {
            let v_s = sentence_vector(&c.tokens)?;
            for (i, method) in Method::ALL.into_iter().enumerate() {
                out[i] = cosine(self.cl_vector(c.language, method)?, &v_s);
            }
        }
        if set.uses_ql() {
            out[LEXQL] = cosine(&self.ql, &sentence_vector(&c.onebest_en_tokens)?);
        }
        Ok(out)
    }

    pub fn featurize(&self, c: &Candidate, prev: Option<&Candidate>, set: FeatureSet) -> Result<FeatureVector> {
        let mut values = [0.0; FEATURE_COUNT];
        values[..PREV].copy_from_slice(&self.block(c, set)?);
        if let Some(p) = prev {
            values[PREV..].copy_from_slice(&self.block(p, set)?);
        }
        Ok(FeatureVector {
            values,
            active: set.mask(),
            label: None,
        })
    }
}

/// Computes the feature vector of one pair. `prev` is the sentence preceding
/// `candidate`; when absent its features are 0.
pub fn featurize_pair(
    question: &Question,
    candidate: &Candidate,
    prev: Option<&Candidate>,
    set: FeatureSet,
) -> Result<FeatureVector> {
    QuestionProfile::new(question)?.featurize(candidate, prev, set)
}

/// Featurizes a candidate looked up in `corpus`, following its prev link.
pub fn featurize_in_corpus(
    profile: &QuestionProfile,
    corpus: &Corpus,
    candidate_id: &str,
    set: FeatureSet,
) -> Result<FeatureVector> {
    let c = corpus
        .get(candidate_id)
        .ok_or_else(|| invalid(format!("unknown candidate '{candidate_id}'")))?;
    profile.featurize(c, corpus.previous(c), set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub question_id: String,
    pub candidate_id: String,
    pub features: FeatureVector,
}

pub fn write_features(rows: &[FeatureRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let label = match r.features.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "-",
        };
        out.push_str(&format!("{}\t{}\t{label}", r.question_id, r.candidate_id));
        for v in r.features.values {
            out.push_str(&format!("\t{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features(text: &str, source_name: &str) -> Result<Vec<FeatureRow>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 + FEATURE_COUNT {
            return Err(parse_error(
                source_name,
                line_no,
                format!("expected {} fields, found {}", 3 + FEATURE_COUNT, fields.len()),
            ));
        }
        let label = match fields[2] {
            "1" => Some(true),
            "0" => Some(false),
            "-" => None,
            other => return Err(parse_error(source_name, line_no, format!("bad label '{other}'"))),
        };
        let mut values = [0.0; FEATURE_COUNT];
        for (slot, f) in values.iter_mut().zip(&fields[3..]) {
            *slot = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_error(source_name, line_no, format!("bad feature value '{f}'")))?;
        }
        rows.push(FeatureRow {
            question_id: fields[0].to_string(),
            candidate_id: fields[1].to_string(),
            features: FeatureVector {
                values,
                active: [true; FEATURE_COUNT],
                label,
            },
        });
    }
    Ok(rows)
}

pub fn load_features(path: &Path) -> Result<Vec<FeatureRow>> {
    parse_features(&fs::read_to_string(path)?, &path.display().to_string())
}
