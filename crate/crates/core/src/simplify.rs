//! Question simplification: lowercase, tokenize, drop template prefixes
//! ("tell me about ...") and stopwords.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "being", "but", "by",
    "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "how", "i", "if", "in", "into", "is",
    "it", "its", "me", "my", "of", "on", "or", "our", "should", "so", "some", "than", "that", "the", "their",
    "them", "there", "these", "they", "this", "those", "to", "was", "we", "were", "what", "when", "where",
    "which", "who", "whom", "why", "will", "with", "would", "you", "your",
];

const DEFAULT_TEMPLATES: &[&str] = &[
    "tell me about",
    "tell me",
    "give me information about",
    "give me information on",
    "i want to know about",
    "what do people think about",
    "what are the reasons for",
    "find information about",
    "find information on",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simplifier {
    stopwords: BTreeSet<String>,
    /// Tokenized template prefixes, longest first.
    templates: Vec<Vec<String>>,
}

impl Default for Simplifier {
    fn default() -> Self {
        Self::new(
            DEFAULT_STOPWORDS.iter().map(|s| s.to_string()),
            DEFAULT_TEMPLATES.iter().map(|s| s.to_string()),
        )
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Simplifier {
    pub fn new(stopwords: impl IntoIterator<Item = String>, templates: impl IntoIterator<Item = String>) -> Self {
        let stopwords = stopwords.into_iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        let mut templates: Vec<Vec<String>> = templates
            .into_iter()
            .map(|t| tokenize(&t))
            .filter(|t| !t.is_empty())
            .collect();
        templates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        templates.dedup();
        Self { stopwords, templates }
    }

    /// Reads a stopword file (one word per line) and a template file (one
    /// pattern per line). `#` starts a comment line.
    pub fn from_files(stopwords: &Path, templates: &Path) -> Result<Self> {
        let read = |p: &Path| -> Result<Vec<String>> {
            Ok(fs::read_to_string(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect())
        };
        Ok(Self::new(read(stopwords)?, read(templates)?))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Simplifies `raw_text` to its content terms, preserving order.
    ///
    /// Template stripping and stopword removal are repeated until neither
    /// changes the sequence, so the result is a fixed point.
    pub fn simplify(&self, raw_text: &str) -> Result<Vec<String>> {
        let mut tokens = tokenize(raw_text);
        loop {
            let before = tokens.len();
            if let Some(t) = self.templates.iter().find(|t| tokens.starts_with(t)) {
                tokens.drain(..t.len());
            }
            tokens.retain(|t| !self.stopwords.contains(t));
            if tokens.len() == before {
                break;
            }
        }
        if tokens.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_template_and_stopwords() {
        let s = Simplifier::default();
        assert_eq!(s.simplify("Tell me about child labor in Africa").unwrap(), ["child", "labor", "africa"]);
    }

    #[test]
    fn single_content_word() {
        assert_eq!(Simplifier::default().simplify("africa").unwrap(), ["africa"]);
    }

    #[test]
    fn all_removed_is_empty_question() {
        let err = Simplifier::default().simplify("Tell me about the the the").unwrap_err();
        assert_eq!(err.to_string(), "empty question");
        assert!(Simplifier::default().simplify("").is_err());
    }

    #[test]
    fn custom_lists() {
        let s = Simplifier::new(vec!["la".to_string()], vec!["dime sobre".to_string()]);
        assert_eq!(s.simplify("Dime sobre la guerra").unwrap(), ["guerra"]);
    }

    #[test]
    fn template_exposed_after_stopword_removal() {
        let s = Simplifier::new(vec!["the".to_string()], vec!["tell me".to_string(), "give info".to_string()]);
        assert_eq!(s.simplify("tell me the give info war").unwrap(), ["war"]);
    }

    proptest! {
        #[test]
        fn idempotent(words in proptest::collection::vec(
            prop_oneof![Just("tell"), Just("me"), Just("about"), Just("the"), Just("child"), Just("labor"), Just("Africa"), Just("war"), Just("information"), Just("on")],
            1..12,
        )) {
            let s = Simplifier::default();
            if let Ok(once) = s.simplify(&words.join(" ")) {
                let twice = s.simplify(&once.join(" ")).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
