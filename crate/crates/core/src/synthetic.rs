//! Deterministic synthetic collections in which relevant foreign answers
//! often use a secondary synonym of a question term. The probabilistic tables
//! know every synonym, while the one-best translation of a sentence only
//! recovers the primary one.
//!
//! Vocabulary: English topic words `t017`, English fillers `f042`, foreign
//! synonyms `art017s1` (synonym 0 is primary), foreign fillers `arf042`, and
//! mistranslations `x017s1` of secondary synonyms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_corpus, write_judgments, write_questions, Candidate, Corpus, Judgment, Language, Question};
use crate::error::{invalid, Result};
use crate::simplify::Simplifier;
use crate::translation::{
    write_aligned_corpus, write_grammar, write_nbest, write_table, AlignedPair, Distribution, GrammarRule,
    NBestDerivation, TranslationTable,
};

pub const FOREIGN: [Language; 2] = [Language::Ar, Language::Ch];

const NBEST_SIZE: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub questions: usize,
    pub terms_per_question: usize,
    pub topic_vocabulary: usize,
    pub filler_vocabulary: usize,
    /// Synonyms per topic word in each foreign language.
    pub fanout: usize,
    /// Share of relevant foreign answers written with secondary synonyms.
    pub synonym_fraction: f64,
    /// Share of doubly annotated pairs whose source annotation is flipped.
    pub noise_rate: f64,
    /// Share of foreign pairs that also carry an English-side annotation.
    pub double_annotation: f64,
    pub relevant_per_language: usize,
    pub irrelevant_per_language: usize,
    pub sentence_length: usize,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            questions: 24,
            terms_per_question: 3,
            topic_vocabulary: 120,
            filler_vocabulary: 300,
            fanout: 3,
            synonym_fraction: 0.5,
            noise_rate: 0.0,
            double_annotation: 0.5,
            relevant_per_language: 3,
            irrelevant_per_language: 12,
            sentence_length: 8,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("synonym fraction", self.synonym_fraction),
            ("noise rate", self.noise_rate),
            ("double annotation", self.double_annotation),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {x}")));
            }
        }
        if self.fanout == 0 {
            return Err(invalid("fanout must be at least 1"));
        }
        if self.questions == 0 || self.terms_per_question == 0 {
            return Err(invalid("need at least one question and one term per question"));
        }
        if self.terms_per_question > self.topic_vocabulary {
            return Err(invalid("more terms per question than topic words"));
        }
        if self.filler_vocabulary == 0 || self.relevant_per_language == 0 || self.irrelevant_per_language == 0 {
            return Err(invalid("filler vocabulary and per-language answer counts must be positive"));
        }
        if self.sentence_length < self.terms_per_question + 1 {
            return Err(invalid("sentences must be longer than the question"));
        }
        Ok(())
    }

    /// Probability of synonym `j` under the reference translation model:
    /// half the mass on the primary, the rest spread evenly.
    fn synonym_weight(&self, j: usize) -> f64 {
        match (self.fanout, j) {
            (1, _) => 1.0,
            (_, 0) => 0.5,
            (f, _) => 0.5 / (f - 1) as f64,
        }
    }
}

/// Translation resources of one foreign language.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageResources {
    pub aligned: Vec<AlignedPair>,
    pub grammar: Vec<GrammarRule>,
    pub nbest: BTreeMap<String, Vec<NBestDerivation>>,
    pub context: TranslationTable,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub questions: Vec<Question>,
    pub corpus: Corpus,
    pub judgments: Vec<Judgment>,
    pub resources: BTreeMap<Language, LanguageResources>,
}

fn topic(i: usize) -> String {
    format!("t{i:03}")
}

fn filler(i: usize) -> String {
    format!("f{i:03}")
}

fn synonym(lang: Language, i: usize, j: usize) -> String {
    format!("{lang}t{i:03}s{j}")
}

fn foreign_filler(lang: Language, i: usize) -> String {
    format!("{lang}f{i:03}")
}

/// One-best English rendering of a secondary synonym.
fn mistranslation(i: usize, j: usize) -> String {
    format!("x{i:03}s{j}")
}

/// A sentence token before rendering into a particular language.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Topic { word: usize, synonym: usize },
    Filler(usize),
}

fn render(slots: &[Slot], lang: Language) -> (Vec<String>, Vec<String>) {
    slots
        .iter()
        .map(|s| match (*s, lang) {
            (Slot::Topic { word, .. }, Language::En) => (topic(word), topic(word)),
            (Slot::Filler(i), Language::En) => (filler(i), filler(i)),
            (Slot::Topic { word, synonym: j }, l) => {
                let onebest = if j == 0 { topic(word) } else { mistranslation(word, j) };
                (synonym(l, word, j), onebest)
            }
            (Slot::Filler(i), l) => (foreign_filler(l, i), filler(i)),
        })
        .unzip()
}

struct Generator<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn secondary(&mut self) -> usize {
        if self.spec.fanout == 1 {
            0
        } else {
            self.rng.gen_range(1..self.spec.fanout)
        }
    }

    fn any_synonym(&mut self) -> usize {
        let x: f64 = self.rng.gen();
        let mut acc = 0.0;
        for j in 0..self.spec.fanout {
            acc += self.spec.synonym_weight(j);
            if x < acc {
                return j;
            }
        }
        self.spec.fanout - 1
    }

    fn fill(&mut self, mut slots: Vec<Slot>) -> Vec<Slot> {
        // Length varies in sentence_length ± 2, always with at least one filler.
        let len = (self.spec.sentence_length + self.rng.gen_range(0..=4)).saturating_sub(2).max(slots.len() + 1);
        while slots.len() < len {
            slots.push(Slot::Filler(self.rng.gen_range(0..self.spec.filler_vocabulary)));
        }
        slots.shuffle(&mut self.rng);
        slots
    }

    fn relevant_answer(&mut self, terms: &[usize], foreign: bool) -> Vec<Slot> {
        let x: f64 = self.rng.gen();
        let keep = if x < 0.2 {
            1
        } else if x < 0.6 {
            terms.len().saturating_sub(1).max(1)
        } else {
            terms.len()
        };
        let mut chosen = terms.to_vec();
        chosen.shuffle(&mut self.rng);
        chosen.truncate(keep);
        let use_secondary = foreign && self.rng.gen_bool(self.spec.synonym_fraction);
        let slots = chosen
            .into_iter()
            .map(|word| Slot::Topic {
                word,
                synonym: if use_secondary { self.secondary() } else { 0 },
            })
            .collect();
        self.fill(slots)
    }

    /// Irrelevant answers may still mention up to two question terms and
    /// some off-topic words.
    fn irrelevant_answer(&mut self, terms: &[usize], foreign: bool) -> Vec<Slot> {
        let x: f64 = self.rng.gen();
        let mentioned = if x < 0.35 {
            0
        } else if x < 0.8 {
            1
        } else {
            2.min(terms.len())
        };
        let mut slots: Vec<Slot> = terms
            .choose_multiple(&mut self.rng, mentioned)
            .copied()
            .collect::<Vec<_>>()
            .into_iter()
            .map(|word| Slot::Topic {
                word,
                synonym: if foreign { self.any_synonym() } else { 0 },
            })
            .collect();
        for _ in 0..self.rng.gen_range(0..=2) {
            let word = self.rng.gen_range(0..self.spec.topic_vocabulary);
            if !terms.contains(&word) {
                let synonym = if foreign { self.any_synonym() } else { 0 };
                slots.push(Slot::Topic { word, synonym });
            }
        }
        self.fill(slots)
    }

    /// Lead sentence of a document; for relevant documents it sometimes
    /// mentions a question term.
    fn lead(&mut self, terms: &[usize], relevant: bool, foreign: bool) -> Vec<Slot> {
        let p = if relevant { 0.5 } else { 0.15 };
        let mut slots = Vec::new();
        if self.rng.gen_bool(p) {
            let word = *terms.choose(&mut self.rng).expect("terms nonempty");
            let synonym = if foreign { self.any_synonym() } else { 0 };
            slots.push(Slot::Topic { word, synonym });
        }
        self.fill(slots)
    }

    fn score(&mut self, relevant: bool) -> u8 {
        if relevant {
            self.rng.gen_range(3..=5)
        } else {
            self.rng.gen_range(1..=2)
        }
    }

    fn resources(&mut self, lang: Language, question_terms: &[(String, Vec<usize>)]) -> Result<LanguageResources> {
        let spec = self.spec;
        let mut aligned = Vec::new();
        let mut grammar = Vec::new();
        let mut context = BTreeMap::new();
        for word in 0..spec.topic_vocabulary {
            let mut ctx = BTreeMap::new();
            for j in 0..spec.fanout {
                let copies = if j == 0 { 2 * spec.fanout.saturating_sub(1).max(1) } else { 2 };
                for _ in 0..copies {
                    let f = self.rng.gen_range(0..spec.filler_vocabulary);
                    aligned.push(AlignedPair::new(
                        vec![topic(word), filler(f)],
                        vec![synonym(lang, word, j), foreign_filler(lang, f)],
                        vec![(0, 0), (1, 1)],
                    )?);
                }
                let w = spec.synonym_weight(j);
                grammar.push(GrammarRule::new(
                    vec![topic(word)],
                    vec![synonym(lang, word, j)],
                    vec![(0, 0)],
                    w * self.rng.gen_range(0.8..1.2),
                )?);
                ctx.insert(synonym(lang, word, j), w * self.rng.gen_range(0.8..1.2));
            }
            context.insert(topic(word), Distribution::normalized(ctx));
        }
        let mut nbest = BTreeMap::new();
        for (qid, terms) in question_terms {
            if terms.len() >= 2 {
                grammar.push(GrammarRule::new(
                    vec![topic(terms[0]), topic(terms[1])],
                    vec![synonym(lang, terms[0], 0), synonym(lang, terms[1], 0)],
                    vec![(0, 0), (1, 1)],
                    0.2,
                )?);
            }
            let derivations = (1..=NBEST_SIZE)
                .map(|rank| {
                    let rules = terms
                        .iter()
                        .map(|&word| {
                            let j = self.any_synonym();
                            GrammarRule::new(
                                vec![topic(word)],
                                vec![synonym(lang, word, j)],
                                vec![(0, 0)],
                                spec.synonym_weight(j),
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(NBestDerivation { rank, rules })
                })
                .collect::<Result<Vec<_>>>()?;
            nbest.insert(qid.clone(), derivations);
        }
        Ok(LanguageResources {
            aligned,
            grammar,
            nbest,
            context: TranslationTable::new(context),
        })
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut g = Generator {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let simplifier = Simplifier::default();
    let width = spec.questions.to_string().len().max(2);
    let mut questions = Vec::new();
    let mut question_terms = Vec::new();
    for q in 0..spec.questions {
        let qid = format!("q{q:0width$}");
        let terms: Vec<usize> =
            rand::seq::index::sample(&mut g.rng, spec.topic_vocabulary, spec.terms_per_question).into_vec();
        let raw = format!(
            "Tell me about {}",
            terms.iter().map(|&t| topic(t)).collect::<Vec<_>>().join(" ")
        );
        questions.push(Question::new(qid.clone(), raw, &simplifier)?);
        question_terms.push((qid, terms));
    }

    let mut candidates = Vec::new();
    let mut judgments = Vec::new();
    for (qid, terms) in &question_terms {
        for lang in Language::ALL {
            let foreign = lang != Language::En;
            let mut relevance: Vec<bool> = std::iter::repeat(true)
                .take(spec.relevant_per_language)
                .chain(std::iter::repeat(false).take(spec.irrelevant_per_language))
                .collect();
            relevance.shuffle(&mut g.rng);
            for (k, relevant) in relevance.into_iter().enumerate() {
                let doc = format!("{qid}-{lang}-d{k:02}");
                let lead_slots = g.lead(terms, relevant, foreign);
                let answer_slots = if relevant {
                    g.relevant_answer(terms, foreign)
                } else {
                    g.irrelevant_answer(terms, foreign)
                };
                let lead_id = format!("{doc}.0");
                let answer_id = format!("{doc}.1");
                for (pos, slots, prev) in [(0u32, lead_slots, None), (1, answer_slots, Some(lead_id.clone()))] {
                    let (tokens, onebest) = render(&slots, lang);
                    candidates.push(Candidate {
                        id: format!("{doc}.{pos}"),
                        doc_id: doc.clone(),
                        language: lang,
                        position: pos,
                        tokens,
                        onebest_en_tokens: onebest,
                        prev_candidate_id: prev,
                    });
                }
                let truth = g.score(relevant);
                let (source, en) = if !foreign {
                    (None, Some(truth))
                } else if g.rng.gen_bool(spec.double_annotation) {
                    let en = g.score(relevant);
                    let src = if g.rng.gen_bool(spec.noise_rate) { g.score(!relevant) } else { truth };
                    (Some(src), Some(en))
                } else {
                    (Some(truth), None)
                };
                judgments.push(Judgment::new(qid.clone(), answer_id, source, en)?);
            }
        }
    }

    let mut resources = BTreeMap::new();
    for lang in FOREIGN {
        resources.insert(lang, g.resources(lang, &question_terms)?);
    }
    Ok(Fixture {
        questions,
        corpus: Corpus::new(candidates)?,
        judgments,
        resources,
    })
}

/// File names inside a fixture directory.
pub mod files {
    pub const QUESTIONS: &str = "questions.tsv";
    pub const CORPUS: &str = "corpus.tsv";
    pub const JUDGMENTS: &str = "judgments.tsv";
    pub const TABLES: &str = "tables";

    pub fn aligned(lang: &str) -> String {
        format!("{lang}.aligned.tsv")
    }
    pub fn word(lang: &str) -> String {
        format!("{lang}.word.tsv")
    }
    pub fn grammar(lang: &str) -> String {
        format!("{lang}.grammar")
    }
    pub fn nbest(lang: &str) -> String {
        format!("{lang}.nbest")
    }
    pub fn context(lang: &str) -> String {
        format!("{lang}.context.tsv")
    }
}

impl Fixture {
    /// Writes questions, corpus, judgments and `tables/<lang>.*` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join(files::TABLES))?;
        fs::write(dir.join(files::QUESTIONS), write_questions(&self.questions))?;
        fs::write(dir.join(files::CORPUS), write_corpus(&self.corpus))?;
        fs::write(dir.join(files::JUDGMENTS), write_judgments(&self.judgments))?;
        for (lang, r) in &self.resources {
            let t = dir.join(files::TABLES);
            let l = lang.as_str();
            fs::write(t.join(files::aligned(l)), write_aligned_corpus(&r.aligned))?;
            fs::write(t.join(files::grammar(l)), write_grammar(&r.grammar))?;
            fs::write(t.join(files::nbest(l)), write_nbest(&r.nbest))?;
            fs::write(t.join(files::context(l)), write_table(&r.context))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSet, QuestionProfile};
    use crate::translation::{build_grammar_table, build_nbest_table, build_word_table, Method};

    fn attach(fixture: &mut Fixture) {
        for (lang, r) in &fixture.resources {
            let word = build_word_table(&r.aligned).unwrap();
            for q in &mut fixture.questions {
                let terms = q.terms.clone();
                q.translations.insert((*lang, Method::Word), word.query(&terms));
                q.translations.insert((*lang, Method::Grammar), build_grammar_table(&r.grammar, &terms));
                q.translations.insert((*lang, Method::TenBest), build_nbest_table(&r.nbest[&q.id], &terms));
                q.translations.insert((*lang, Method::Context), r.context.query(&terms));
            }
        }
    }

    fn small(fanout: usize, synonym_fraction: f64) -> GeneratorSpec {
        GeneratorSpec {
            questions: 4,
            fanout,
            synonym_fraction,
            topic_vocabulary: 30,
            filler_vocabulary: 50,
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn fanout_one_makes_views_coincide() {
        let mut f = generate(&small(1, 0.0)).unwrap();
        attach(&mut f);
        for q in &f.questions {
            let profile = QuestionProfile::new(q).unwrap();
            for j in f.judgments.iter().filter(|j| j.question_id == q.id) {
                let c = f.corpus.get(&j.candidate_id).unwrap();
                let fv = profile.featurize(c, f.corpus.previous(c), FeatureSet::Both).unwrap();
                for name in ["lexcl_word", "lexcl_10best", "lexcl_context", "lexcl_grammar"] {
                    assert!((fv.get(name).unwrap() - fv.get("lexql").unwrap()).abs() < 1e-12, "{name} {}", c.id);
                    let prev = format!("prev_{name}");
                    assert!((fv.get(&prev).unwrap() - fv.get("prev_lexql").unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn secondary_synonyms_hide_relevant_answers_from_one_best() {
        let mut f = generate(&small(3, 0.5)).unwrap();
        attach(&mut f);
        let mut found = false;
        for q in &f.questions {
            let profile = QuestionProfile::new(q).unwrap();
            for j in f.judgments.iter().filter(|j| j.question_id == q.id && j.evaluation_label()) {
                let c = f.corpus.get(&j.candidate_id).unwrap();
                let fv = profile.featurize(c, None, FeatureSet::Both).unwrap();
                if fv.get("lexql").unwrap() == 0.0 && fv.get("lexcl_word").unwrap() > 0.0 {
                    found = true;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn same_seed_same_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&small(3, 0.5)).unwrap().write_to(a.path()).unwrap();
        generate(&small(3, 0.5)).unwrap().write_to(b.path()).unwrap();
        for name in [files::QUESTIONS, files::CORPUS, files::JUDGMENTS] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        for l in ["ar", "ch"] {
            for name in [files::aligned(l), files::grammar(l), files::nbest(l), files::context(l)] {
                let p = Path::new(files::TABLES).join(name);
                assert_eq!(fs::read(a.path().join(&p)).unwrap(), fs::read(b.path().join(&p)).unwrap());
            }
        }
    }

    #[test]
    fn noise_only_on_doubly_annotated_pairs() {
        let spec = GeneratorSpec {
            noise_rate: 0.5,
            ..small(2, 0.5)
        };
        let f = generate(&spec).unwrap();
        assert!(f.judgments.iter().any(Judgment::is_inconsistent));
        for j in &f.judgments {
            let lang = f.corpus.get(&j.candidate_id).unwrap().language;
            if lang == Language::En {
                assert!(j.source_score.is_none() && j.en_score.is_some());
            } else {
                assert!(j.source_score.is_some());
            }
        }
        let clean = generate(&small(2, 0.5)).unwrap();
        assert!(!clean.judgments.iter().any(Judgment::is_inconsistent));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&GeneratorSpec { noise_rate: 1.5, ..GeneratorSpec::default() }).is_err());
        assert!(generate(&GeneratorSpec { fanout: 0, ..GeneratorSpec::default() }).is_err());
    }

    #[test]
    fn generated_tables_are_distributions() {
        let f = generate(&small(3, 0.5)).unwrap();
        for r in f.resources.values() {
            for (_, d) in build_word_table(&r.aligned).unwrap().iter() {
                assert!(d.is_empty() || (d.total() - 1.0).abs() < 1e-9);
            }
            for (_, d) in r.context.iter() {
                assert!((d.total() - 1.0).abs() < 1e-9);
            }
        }
    }
}
