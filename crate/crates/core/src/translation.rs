//! Probabilistic question translation.
//!
//! Every method turns each question term into a [`Distribution`] over
//! collection-language words:
//!
//! * word: link counts from a word-aligned parallel corpus, `Pr(t|w) = k/m`;
//! * grammar: likelihoods of translation rules that apply to the question,
//!   accumulated over each rule's alignment links and normalized per term;
//! * 10-best: alignment links of the rules used by the n-best derivations of
//!   the question, counted uniformly and normalized per term;
//! * context: ingested directly as a table (the model producing it is trained
//!   elsewhere); [`mask_contexts`] prepares that model's training inputs.
//!
//! File formats:
//!
//! * table: `source \t target \t prob`
//! * grammar: `src tokens ||| tgt tokens ||| i-j i-j ||| likelihood`
//! * n-best: a `question_id \t rank` header line followed by the grammar
//!   lines of the rules that derivation used
//! * aligned corpus: `src tokens \t tgt tokens \t i-j i-j`

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, parse_error, Error, Result};

/// Slack allowed on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Mask symbol substituted for context words.
pub const FILLER: &str = "<F>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Word,
    TenBest,
    Context,
    Grammar,
}

impl Method {
    /// Canonical feature order.
    pub const ALL: [Method; 4] = [Method::Word, Method::TenBest, Method::Context, Method::Grammar];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Word => "word",
            Method::TenBest => "10best",
            Method::Context => "context",
            Method::Grammar => "grammar",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(Method::Word),
            "10best" | "nbest" | "tenbest" => Ok(Method::TenBest),
            "context" => Ok(Method::Context),
            "grammar" => Ok(Method::Grammar),
            other => Err(invalid(format!("unknown translation method '{other}'"))),
        }
    }
}

/// Sparse probability distribution over target words. Entries are strictly
/// positive and the total mass never exceeds one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distribution {
    entries: BTreeMap<String, f64>,
}

impl Distribution {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates explicit probabilities.
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self> {
        let mut total = 0.0;
        for (t, &p) in &entries {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid(format!("probability of '{t}' must be positive and finite, got {p}")));
            }
            total += p;
        }
        if total > 1.0 + MASS_TOLERANCE {
            return Err(invalid(format!("distribution mass {total} exceeds 1")));
        }
        Ok(Self { entries })
    }

    /// Normalizes nonnegative weights to sum to one. Zero weights are dropped;
    /// all-zero input yields the empty distribution.
    pub fn normalized(weights: BTreeMap<String, f64>) -> Self {
        let total: f64 = weights.values().sum();
        if total <= 0.0 {
            return Self::empty();
        }
        let entries = weights
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(t, w)| (t, w / total))
            .collect();
        Self { entries }
    }

    pub fn get(&self, target: &str) -> f64 {
        self.entries.get(target).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn point(target: impl Into<String>) -> Self {
        Self {
            entries: BTreeMap::from([(target.into(), 1.0)]),
        }
    }
}

/// One distribution per question term, in term order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbabilisticQuery {
    pub terms: Vec<String>,
    pub distributions: Vec<Distribution>,
}

impl ProbabilisticQuery {
    pub fn new(terms: Vec<String>, distributions: Vec<Distribution>) -> Result<Self> {
        if terms.len() != distributions.len() {
            return Err(invalid(format!(
                "{} terms but {} distributions",
                terms.len(),
                distributions.len()
            )));
        }
        Ok(Self { terms, distributions })
    }

    /// Each term translates to itself with probability one.
    pub fn identity(terms: &[String]) -> Self {
        Self {
            terms: terms.to_vec(),
            distributions: terms.iter().map(|t| Distribution::point(t.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distributions.is_empty()
    }
}

/// Word-level translation table (source word -> distribution), used for the
/// word and context methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationTable {
    entries: BTreeMap<String, Distribution>,
}

impl TranslationTable {
    pub fn new(entries: BTreeMap<String, Distribution>) -> Self {
        Self { entries }
    }

    pub fn term_distribution(&self, term: &str) -> Distribution {
        self.entries.get(term).cloned().unwrap_or_default()
    }

    /// Looks up every term; out-of-vocabulary terms keep an empty slot.
    pub fn query(&self, terms: &[String]) -> ProbabilisticQuery {
        ProbabilisticQuery {
            terms: terms.to_vec(),
            distributions: terms.iter().map(|t| self.term_distribution(t)).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Distribution)> {
        self.entries.iter().map(|(s, d)| (s.as_str(), d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Convenience wrapper matching the table-lookup operation.
pub fn term_distribution(table: &TranslationTable, term: &str) -> Distribution {
    table.term_distribution(term)
}

pub fn parse_table(text: &str, source_name: &str) -> Result<TranslationTable> {
    let mut raw: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_error(source_name, line_no, "expected 'source<TAB>target<TAB>prob'"));
        }
        let p: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_error(source_name, line_no, format!("bad probability '{}'", fields[2])))?;
        if !(p.is_finite() && p > 0.0 && p <= 1.0 + MASS_TOLERANCE) {
            return Err(parse_error(source_name, line_no, format!("probability {p} outside (0, 1]")));
        }
        let source = fields[0].trim().to_string();
        first_line.entry(source.clone()).or_insert(line_no);
        let prev = raw.entry(source).or_default().insert(fields[1].trim().to_string(), p);
        if prev.is_some() {
            return Err(parse_error(source_name, line_no, "duplicate (source, target) entry"));
        }
    }
    let mut entries = BTreeMap::new();
    for (source, targets) in raw {
        let d = Distribution::new(targets).map_err(|e| parse_error(source_name, first_line[&source], e.to_string()))?;
        entries.insert(source, d);
    }
    Ok(TranslationTable { entries })
}

pub fn load_table(path: &Path) -> Result<TranslationTable> {
    parse_table(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_table(table: &TranslationTable) -> String {
    let mut out = String::new();
    for (source, d) in table.iter() {
        for (target, p) in d.iter() {
            out.push_str(&format!("{source}\t{target}\t{p}\n"));
        }
    }
    out
}

/// Debug dump of a probabilistic query: `question_id \t term \t target \t prob`.
pub fn write_query_table(question_id: &str, pq: &ProbabilisticQuery) -> String {
    let mut out = String::new();
    for (term, d) in pq.terms.iter().zip(&pq.distributions) {
        for (target, p) in d.iter() {
            out.push_str(&format!("{question_id}\t{term}\t{target}\t{p}\n"));
        }
    }
    out
}

fn parse_links(field: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let mut links = BTreeSet::new();
    for pair in field.split_whitespace() {
        let (i, j) = pair.split_once('-').ok_or_else(|| format!("bad alignment link '{pair}'"))?;
        let i = i.parse().map_err(|_| format!("bad alignment link '{pair}'"))?;
        let j = j.parse().map_err(|_| format!("bad alignment link '{pair}'"))?;
        links.insert((i, j));
    }
    Ok(links.into_iter().collect())
}

fn format_links(links: &[(usize, usize)]) -> String {
    links.iter().map(|(i, j)| format!("{i}-{j}")).collect::<Vec<_>>().join(" ")
}

/// Nonterminal symbols such as `[X]` or `[X,1]`.
pub fn is_nonterminal(token: &str) -> bool {
    token.len() >= 2 && token.starts_with('[') && token.ends_with(']')
}

/// A synchronous grammar rule: source side, target side, word alignments
/// between them, and the rule likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GrammarRule {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub alignments: Vec<(usize, usize)>,
    pub likelihood: f64,
}

impl GrammarRule {
    pub fn new(source: Vec<String>, target: Vec<String>, alignments: Vec<(usize, usize)>, likelihood: f64) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(invalid("rule sides must be nonempty"));
        }
        if !(likelihood.is_finite() && likelihood >= 0.0) {
            return Err(invalid(format!("rule likelihood must be finite and nonnegative, got {likelihood}")));
        }
        for &(i, j) in &alignments {
            if i >= source.len() || j >= target.len() {
                return Err(invalid(format!("alignment {i}-{j} out of range")));
            }
        }
        Ok(Self {
            source,
            target,
            alignments,
            likelihood,
        })
    }

    /// A rule applies when each of its source-side terminals is a question term.
    pub fn applies_to(&self, terms: &BTreeSet<&str>) -> bool {
        self.source
            .iter()
            .filter(|t| !is_nonterminal(t))
            .all(|t| terms.contains(t.as_str()))
    }

    /// Terminal-to-terminal alignment links as (source word, target word).
    pub fn lexical_links(&self) -> impl Iterator<Item = (&str, &str)> {
        self.alignments.iter().filter_map(|&(i, j)| {
            let (s, t) = (&self.source[i], &self.target[j]);
            (!is_nonterminal(s) && !is_nonterminal(t)).then_some((s.as_str(), t.as_str()))
        })
    }
}

impl fmt::Display for GrammarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ||| {} ||| {} ||| {}",
            self.source.join(" "),
            self.target.join(" "),
            format_links(&self.alignments),
            self.likelihood
        )
    }
}

impl FromStr for GrammarRule {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split("|||").collect();
        if parts.len() != 4 {
            return Err(invalid("expected 'source ||| target ||| alignments ||| likelihood'"));
        }
        let tokens = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let links = parse_links(parts[2]).map_err(invalid)?;
        let likelihood: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad likelihood '{}'", parts[3].trim())))?;
        GrammarRule::new(tokens(parts[0]), tokens(parts[1]), links, likelihood)
    }
}

pub fn parse_grammar(text: &str, source_name: &str) -> Result<Vec<GrammarRule>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, l)| l.parse().map_err(|e: Error| parse_error(source_name, n + 1, e.to_string())))
        .collect()
}

pub fn load_grammar(path: &Path) -> Result<Vec<GrammarRule>> {
    parse_grammar(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_grammar(rules: &[GrammarRule]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}

/// Accumulates rule likelihoods over alignment links and normalizes per term.
///
/// For each term, every link of every applicable rule whose source word is the
/// term adds the rule likelihood to the linked target word.
pub fn build_grammar_table(rules: &[GrammarRule], terms: &[String]) -> ProbabilisticQuery {
    let term_set: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let applicable: Vec<&GrammarRule> = rules.iter().filter(|r| r.applies_to(&term_set)).collect();
    let distributions = terms
        .iter()
        .map(|term| {
            let mut acc: BTreeMap<String, f64> = BTreeMap::new();
            for rule in &applicable {
                for (s, t) in rule.lexical_links() {
                    if s == term {
                        *acc.entry(t.to_string()).or_insert(0.0) += rule.likelihood;
                    }
                }
            }
            Distribution::normalized(acc)
        })
        .collect();
    ProbabilisticQuery {
        terms: terms.to_vec(),
        distributions,
    }
}

/// One of the top-n translations of a question, given by the rules it used.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestDerivation {
    pub rank: u32,
    pub rules: Vec<GrammarRule>,
}

/// Counts aligned target words over all derivations, each derivation and each
/// link weighted equally, then normalizes per term.
pub fn build_nbest_table(derivations: &[NBestDerivation], terms: &[String]) -> ProbabilisticQuery {
    let distributions = terms
        .iter()
        .map(|term| {
            let mut acc: BTreeMap<String, f64> = BTreeMap::new();
            for d in derivations {
                for rule in &d.rules {
                    for (s, t) in rule.lexical_links() {
                        if s == term {
                            *acc.entry(t.to_string()).or_insert(0.0) += 1.0;
                        }
                    }
                }
            }
            Distribution::normalized(acc)
        })
        .collect();
    ProbabilisticQuery {
        terms: terms.to_vec(),
        distributions,
    }
}

/// Parses an n-best file into derivations grouped by question id.
pub fn parse_nbest(text: &str, source_name: &str) -> Result<BTreeMap<String, Vec<NBestDerivation>>> {
    let mut out: BTreeMap<String, Vec<NBestDerivation>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if line.contains("|||") {
            let qid = current
                .as_ref()
                .ok_or_else(|| parse_error(source_name, line_no, "rule line before any 'question_id<TAB>rank' header"))?;
            let rule: GrammarRule = line.parse().map_err(|e: Error| parse_error(source_name, line_no, e.to_string()))?;
            out.get_mut(qid).and_then(|v| v.last_mut()).expect("header inserted").rules.push(rule);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_error(source_name, line_no, "expected 'question_id<TAB>rank' header"));
        }
        let rank: u32 = fields[1]
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| parse_error(source_name, line_no, format!("bad rank '{}'", fields[1])))?;
        let list = out.entry(fields[0].to_string()).or_default();
        if list.iter().any(|d| d.rank == rank) {
            return Err(parse_error(source_name, line_no, format!("duplicate rank {rank} for question {}", fields[0])));
        }
        list.push(NBestDerivation { rank, rules: Vec::new() });
        current = Some(fields[0].to_string());
    }
    for list in out.values_mut() {
        list.sort_by_key(|d| d.rank);
    }
    Ok(out)
}

pub fn load_nbest(path: &Path) -> Result<BTreeMap<String, Vec<NBestDerivation>>> {
    parse_nbest(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_nbest(lists: &BTreeMap<String, Vec<NBestDerivation>>) -> String {
    let mut out = String::new();
    for (qid, derivations) in lists {
        for d in derivations {
            out.push_str(&format!("{qid}\t{}\n", d.rank));
            for r in &d.rules {
                out.push_str(&format!("{r}\n"));
            }
        }
    }
    out
}

/// A sentence pair with many-to-many word alignment links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub links: Vec<(usize, usize)>,
}

impl AlignedPair {
    pub fn new(source: Vec<String>, target: Vec<String>, links: Vec<(usize, usize)>) -> Result<Self> {
        for &(i, j) in &links {
            if i >= source.len() || j >= target.len() {
                return Err(invalid(format!("alignment {i}-{j} out of range")));
            }
        }
        let links: BTreeSet<_> = links.into_iter().collect();
        Ok(Self {
            source,
            target,
            links: links.into_iter().collect(),
        })
    }
}

pub fn parse_aligned_corpus(text: &str, source_name: &str) -> Result<Vec<AlignedPair>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_error(source_name, line_no, "expected 'source<TAB>target<TAB>links'"));
        }
        let tokens = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let links = parse_links(fields[2]).map_err(|m| parse_error(source_name, line_no, m))?;
        let pair = AlignedPair::new(tokens(fields[0]), tokens(fields[1]), links)
            .map_err(|e| parse_error(source_name, line_no, e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

pub fn load_aligned_corpus(path: &Path) -> Result<Vec<AlignedPair>> {
    parse_aligned_corpus(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_aligned_corpus(pairs: &[AlignedPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\t{}\n", p.source.join(" "), p.target.join(" "), format_links(&p.links)))
        .collect()
}

/// Word translation probabilities from alignment links: a source word seen
/// `m` times whose occurrences are linked `k` times to `t` gets `Pr(t) = k/m`.
///
/// An occurrence linked to several targets splits its unit count evenly among
/// those links, so each distribution's mass is the fraction of linked
/// occurrences. Words that are never linked get an empty distribution.
pub fn build_word_table(corpus: &[AlignedPair]) -> Result<TranslationTable> {
    if corpus.is_empty() {
        return Err(invalid("aligned corpus is empty"));
    }
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counts: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for pair in corpus {
        let mut degree = vec![0usize; pair.source.len()];
        for &(i, _) in &pair.links {
            degree[i] += 1;
        }
        for w in &pair.source {
            *occurrences.entry(w.as_str()).or_insert(0) += 1;
        }
        for &(i, j) in &pair.links {
            let share = 1.0 / degree[i] as f64;
            *counts
                .entry(pair.source[i].as_str())
                .or_default()
                .entry(pair.target[j].as_str())
                .or_insert(0.0) += share;
        }
    }
    let entries = occurrences
        .into_iter()
        .map(|(w, m)| {
            let entries = counts
                .get(w)
                .map(|targets| targets.iter().map(|(t, k)| (t.to_string(), k / m as f64)).collect())
                .unwrap_or_default();
            (w.to_string(), Distribution { entries })
        })
        .collect();
    Ok(TranslationTable { entries })
}

/// Generates masked copies of `tokens` for training a context-sensitive
/// translation model.
///
/// The context positions are those within `window` of `focus_index`,
/// excluding the focus itself. Each sample replaces a distinct nonempty subset
/// of them with [`FILLER`]. When `sample_count` covers all `2^c - 1` subsets
/// they are enumerated in order; otherwise a seeded sample is drawn.
pub fn mask_contexts(
    tokens: &[String],
    focus_index: usize,
    window: usize,
    sample_count: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    if focus_index >= tokens.len() {
        return Err(invalid(format!(
            "focus index {focus_index} out of range for {} tokens",
            tokens.len()
        )));
    }
    let lo = focus_index.saturating_sub(window);
    let hi = (focus_index + window).min(tokens.len() - 1);
    let positions: Vec<usize> = (lo..=hi).filter(|&p| p != focus_index).collect();
    let c = positions.len();
    if c == 0 || sample_count == 0 {
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let from_bits = |bits: u64| (0..c).map(|b| bits >> b & 1 == 1).collect::<Vec<bool>>();
    let masks: Vec<Vec<bool>> = if c < 63 && (1u64 << c) - 1 <= sample_count as u64 {
        (1..(1u64 << c)).map(from_bits).collect()
    } else if c <= 24 {
        let space = (1usize << c) - 1;
        index::sample(&mut rng, space, sample_count)
            .into_iter()
            .map(|i| from_bits(i as u64 + 1))
            .collect()
    } else {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(sample_count);
        while out.len() < sample_count {
            let mask: Vec<bool> = (0..c).map(|_| rng.gen::<bool>()).collect();
            if mask.iter().any(|&b| b) && seen.insert(mask.clone()) {
                out.push(mask);
            }
        }
        out
    };

    Ok(masks
        .into_iter()
        .map(|mask| {
            let mut sample = tokens.to_vec();
            for (&pos, masked) in positions.iter().zip(mask) {
                if masked {
                    sample[pos] = FILLER.to_string();
                }
            }
            sample
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn rule(line: &str) -> GrammarRule {
        line.parse().unwrap()
    }

    #[test]
    fn word_table_k_over_m() {
        let mut pairs = Vec::new();
        for t in ["t1", "t1", "t1", "t2"] {
            pairs.push(AlignedPair::new(toks("dog"), toks(t), vec![(0, 0)]).unwrap());
        }
        pairs.push(AlignedPair::new(toks("cat"), toks("x"), vec![]).unwrap());
        pairs.push(AlignedPair::new(toks("cat"), toks("y"), vec![]).unwrap());
        let table = build_word_table(&pairs).unwrap();
        let dog = table.term_distribution("dog");
        assert_eq!(dog.get("t1"), 0.75);
        assert_eq!(dog.get("t2"), 0.25);
        assert!(table.term_distribution("cat").is_empty());
    }

    #[test]
    fn word_table_partial_links_mass() {
        let pairs = vec![
            AlignedPair::new(toks("a b"), toks("x y"), vec![(0, 0), (0, 1)]).unwrap(),
            AlignedPair::new(toks("a"), toks("z"), vec![]).unwrap(),
        ];
        let table = build_word_table(&pairs).unwrap();
        let a = table.term_distribution("a");
        assert!((a.total() - 0.5).abs() < 1e-12);
        assert_eq!(a.get("x"), 0.25);
    }

    #[test]
    fn word_table_rejects_empty_corpus() {
        assert!(build_word_table(&[]).is_err());
    }

    #[test]
    fn grammar_single_rule_normalizes() {
        let pq = build_grammar_table(&[rule("child ||| X ||| 0-0 ||| 0.5")], &toks("child"));
        assert_eq!(pq.distributions[0].get("X"), 1.0);
    }

    #[test]
    fn grammar_two_rules() {
        let rules = [rule("child ||| X ||| 0-0 ||| 0.3"), rule("child ||| Y ||| 0-0 ||| 0.1")];
        let pq = build_grammar_table(&rules, &toks("child labor"));
        let d = &pq.distributions[0];
        assert!((d.get("X") - 0.75).abs() < 1e-12);
        assert!((d.get("Y") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grammar_rule_must_apply() {
        let rules = [rule("child care ||| Z ||| 0-0 1-0 ||| 1"), rule("child ||| X ||| 0-0 ||| 1")];
        let pq = build_grammar_table(&rules, &toks("child labor"));
        assert_eq!(pq.distributions[0].get("X"), 1.0);
        assert!(pq.distributions[1].is_empty());
    }

    #[test]
    fn grammar_nonterminals_ignored() {
        let rules = [rule("[X,1] labor ||| [X,1] B ||| 0-0 1-1 ||| 0.4")];
        let pq = build_grammar_table(&rules, &toks("child labor"));
        assert_eq!(pq.distributions[1].get("B"), 1.0);
        assert!(pq.distributions[0].is_empty());
    }

    #[test]
    fn grammar_zero_likelihood_gives_empty() {
        let pq = build_grammar_table(&[rule("a ||| x ||| 0-0 ||| 0")], &toks("a"));
        assert!(pq.distributions[0].is_empty());
    }

    #[test]
    fn rule_validation() {
        assert!("a ||| x ||| 0-1 ||| 1".parse::<GrammarRule>().is_err());
        assert!("a ||| x ||| 0-0 ||| -1".parse::<GrammarRule>().is_err());
        assert!("a ||| x ||| 0-0".parse::<GrammarRule>().is_err());
        let r = rule("child labor ||| A B ||| 0-0 1-1 ||| 0.2");
        assert_eq!(r.to_string().parse::<GrammarRule>().unwrap(), r);
    }

    #[test]
    fn nbest_uniform_counts() {
        let mut derivations = Vec::new();
        for rank in 1..=10 {
            let target = if rank <= 6 { "A" } else { "B" };
            derivations.push(NBestDerivation {
                rank,
                rules: vec![
                    rule(&format!("labor ||| {target} ||| 0-0 ||| 0.1")),
                    rule("africa ||| F ||| 0-0 ||| 0.9"),
                ],
            });
        }
        let pq = build_nbest_table(&derivations, &toks("labor africa"));
        assert!((pq.distributions[0].get("A") - 0.6).abs() < 1e-12);
        assert!((pq.distributions[0].get("B") - 0.4).abs() < 1e-12);
        assert_eq!(pq.distributions[1].get("F"), 1.0);
    }

    #[test]
    fn nbest_file_round_trip() {
        let text = "q1\t1\nchild labor ||| A B ||| 0-0 1-1 ||| 0.2\nq1\t2\nchild ||| C ||| 0-0 ||| 0.5\n\nq2\t1\nx ||| y ||| 0-0 ||| 1\n";
        let parsed = parse_nbest(text, "t").unwrap();
        assert_eq!(parsed["q1"].len(), 2);
        assert_eq!(parsed["q1"][0].rules.len(), 1);
        assert_eq!(parse_nbest(&write_nbest(&parsed), "t").unwrap(), parsed);
    }

    #[test]
    fn nbest_duplicate_rank_rejected() {
        let text = "q1\t1\na ||| b ||| 0-0 ||| 1\nq1\t1\na ||| c ||| 0-0 ||| 1\n";
        assert!(parse_nbest(text, "t").is_err());
        assert!(parse_nbest("a ||| b ||| 0-0 ||| 1\n", "t").is_err());
    }

    #[test]
    fn table_lookup_and_oov() {
        let table = parse_table("child\tX\t0.6\nchild\tY\t0.4\n", "t").unwrap();
        assert_eq!(table.term_distribution("child").len(), 2);
        assert!(term_distribution(&table, "zebra").is_empty());
        let empty = TranslationTable::default();
        let pq = empty.query(&toks("a b"));
        assert_eq!(pq.len(), 2);
        assert!(pq.distributions.iter().all(Distribution::is_empty));
    }

    #[test]
    fn table_rejects_excess_mass() {
        assert!(parse_table("a\tx\t0.7\na\ty\t0.7\n", "t").is_err());
        assert!(parse_table("a\tx\t0\n", "t").is_err());
        assert!(parse_table("a\tx\n", "t").is_err());
    }

    #[test]
    fn masks_include_single_context_pattern() {
        let tokens = toks("fue un placer conocerte y");
        let samples = mask_contexts(&tokens, 2, 2, 100, 7).unwrap();
        assert_eq!(samples.len(), 15);
        let joined: Vec<String> = samples.iter().map(|s| s.join(" ")).collect();
        assert!(joined.contains(&"fue un placer <F> y".to_string()));
        assert!(joined.contains(&"<F> <F> placer conocerte y".to_string()));
        assert!(samples.iter().all(|s| s[2] == "placer"));
    }

    #[test]
    fn masks_window_zero_empty() {
        assert!(mask_contexts(&toks("a b c"), 1, 0, 10, 1).unwrap().is_empty());
    }

    #[test]
    fn masks_two_positions_all_subsets() {
        let samples = mask_contexts(&toks("a b c"), 1, 1, 10, 1).unwrap();
        assert_eq!(samples.len(), 3);
    }

    #[test]
    fn masks_sampled_are_distinct_and_seeded() {
        let tokens = toks("w0 w1 w2 w3 w4 w5 w6 w7 w8 w9 w10");
        let a = mask_contexts(&tokens, 5, 5, 20, 3).unwrap();
        let b = mask_contexts(&tokens, 5, 5, 20, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        let unique: BTreeSet<_> = a.iter().collect();
        assert_eq!(unique.len(), 20);
        assert!(a.iter().all(|s| s[5] == "w5" && s.contains(&FILLER.to_string())));
    }

    #[test]
    fn masks_wide_window_rejection_path() {
        let tokens: Vec<String> = (0..61).map(|i| format!("w{i}")).collect();
        let a = mask_contexts(&tokens, 30, 30, 8, 11).unwrap();
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|s| s[30] == "w30"));
    }

    #[test]
    fn masks_focus_out_of_range() {
        assert!(mask_contexts(&toks("a"), 3, 1, 1, 0).is_err());
    }
}
