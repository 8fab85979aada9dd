//! End-to-end driver: load data, attach translation tables, featurize,
//! cross-validate the ranker and evaluate the resulting lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::classifier::{train_ensemble, EnsembleModel, TrainConfig, TrainingExample};
use crate::corpus::{load_corpus, load_judgments, load_questions, Corpus, Judgment, Language, Question};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{ap_k, kfold_split, EvalReport, DEFAULT_K};
use crate::features::{FeatureRow, FeatureSet, FeatureVector, QuestionProfile};
use crate::merge::{
    learn_merge_weights, merge, rank_scored, write_ranked_lists, ListLanguage, MergeQuestion, MergeStrategy,
    RankedList, DEFAULT_WEIGHT_GRID,
};
use crate::selection::SubsetCriterion;
use crate::simplify::Simplifier;
use crate::synthetic::files;
use crate::translation::{
    build_grammar_table, build_nbest_table, build_word_table, load_aligned_corpus, load_grammar, load_nbest,
    load_table, Method, TranslationTable,
};

/// How candidates of different languages end up in one list.
#[derive(Debug, Clone, PartialEq)]
pub enum Ranking {
    /// One model over all languages.
    Single,
    /// One model per language, lists merged with a fixed strategy.
    PerLanguage(MergeStrategy),
    /// One model per language, English weight chosen per question from
    /// `grid` by leave-one-question-out search.
    LearnedWeight { grid: Vec<f64> },
}

impl Ranking {
    pub fn learned_default() -> Self {
        Ranking::LearnedWeight {
            grid: DEFAULT_WEIGHT_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub feature_set: FeatureSet,
    pub criterion: SubsetCriterion,
    pub seed: u64,
    pub k: usize,
    /// Length of every ranked list.
    pub n: usize,
    pub folds: usize,
    pub ranking: Ranking,
    pub l2: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSet::Both,
            criterion: SubsetCriterion::All,
            seed: 0,
            k: DEFAULT_K,
            n: 100,
            folds: 10,
            ranking: Ranking::Single,
            l2: TrainConfig::default().l2,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.n == 0 {
            return Err(invalid("list size n must be at least 1"));
        }
        if self.folds < 2 {
            return Err(invalid("fold count must be at least 2"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(invalid("l2 must be finite and nonnegative"));
        }
        if let Ranking::LearnedWeight { grid } = &self.ranking {
            if grid.is_empty() || grid.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(invalid("weight grid must be nonempty and positive"));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            l2: self.l2,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Input files. `tables` holds `<lang>.word.tsv` (or `<lang>.aligned.tsv`),
/// `<lang>.grammar`, `<lang>.nbest` and `<lang>.context.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePaths {
    pub questions: PathBuf,
    pub corpus: PathBuf,
    pub judgments: PathBuf,
    pub tables: PathBuf,
}

impl PipelinePaths {
    /// The layout written by the synthetic generator.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            questions: dir.join(files::QUESTIONS),
            corpus: dir.join(files::CORPUS),
            judgments: dir.join(files::JUDGMENTS),
            tables: dir.join(files::TABLES),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub questions: Vec<Question>,
    pub corpus: Corpus,
    pub judgments: Vec<Judgment>,
}

fn require(path: PathBuf, what: &str, lang: Language) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingResource(format!("{what} table for {lang} ({})", path.display())))
    }
}

/// Word table from `<lang>.word.tsv`, else built from `<lang>.aligned.tsv`.
pub fn load_word_table(tables: &Path, lang: Language) -> Result<TranslationTable> {
    let table = tables.join(files::word(lang.as_str()));
    if table.is_file() {
        return load_table(&table);
    }
    let aligned = require(tables.join(files::aligned(lang.as_str())), "word", lang)?;
    build_word_table(&load_aligned_corpus(&aligned)?)
}

/// Attaches all four translation methods for `lang` to every question.
pub fn attach_translations(questions: &mut [Question], tables: &Path, lang: Language) -> Result<()> {
    let l = lang.as_str();
    let word = load_word_table(tables, lang)?;
    let grammar = load_grammar(&require(tables.join(files::grammar(l)), "grammar", lang)?)?;
    let nbest = load_nbest(&require(tables.join(files::nbest(l)), "10best", lang)?)?;
    let context = load_table(&require(tables.join(files::context(l)), "context", lang)?)?;
    for q in questions {
        let derivations = nbest
            .get(&q.id)
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::MissingResource(format!("10best derivations of question '{}' for {lang}", q.id)))?;
        let terms = q.terms.clone();
        q.translations.insert((lang, Method::Word), word.query(&terms));
        q.translations.insert((lang, Method::TenBest), build_nbest_table(derivations, &terms));
        q.translations.insert((lang, Method::Context), context.query(&terms));
        q.translations.insert((lang, Method::Grammar), build_grammar_table(&grammar, &terms));
    }
    Ok(())
}

/// Loads questions, corpus and judgments. Translation tables are read only
/// when `feature_set` uses the collection-language view, and only for the
/// non-English languages that occur among judged candidates.
pub fn load_inputs(paths: &PipelinePaths, feature_set: FeatureSet) -> Result<PipelineInputs> {
    let mut questions = load_questions(&paths.questions, &Simplifier::default())?;
    let corpus = load_corpus(&paths.corpus)?;
    let judgments = load_judgments(&paths.judgments)?;
    let known: BTreeSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    let mut languages = BTreeSet::new();
    for j in &judgments {
        if !known.contains(j.question_id.as_str()) {
            return Err(invalid(format!("judgment references unknown question '{}'", j.question_id)));
        }
        let c = corpus
            .get(&j.candidate_id)
            .ok_or_else(|| invalid(format!("judgment references unknown candidate '{}'", j.candidate_id)))?;
        languages.insert(c.language);
    }
    if feature_set.uses_cl() {
        for lang in languages.into_iter().filter(|&l| l != Language::En) {
            attach_translations(&mut questions, &paths.tables, lang)?;
        }
    }
    Ok(PipelineInputs {
        questions,
        corpus,
        judgments,
    })
}

/// A judged pair with its features.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgedPair {
    pub judgment: Judgment,
    pub language: Language,
    pub features: FeatureVector,
}

/// Featurizes every judged pair, in judgment order.
pub fn featurize_judged(inputs: &PipelineInputs, feature_set: FeatureSet) -> Result<Vec<JudgedPair>> {
    let mut profiles = BTreeMap::new();
    for q in &inputs.questions {
        profiles.insert(q.id.as_str(), q);
    }
    let mut cache: BTreeMap<&str, QuestionProfile> = BTreeMap::new();
    let mut out = Vec::with_capacity(inputs.judgments.len());
    for j in &inputs.judgments {
        let q = profiles
            .get(j.question_id.as_str())
            .ok_or_else(|| invalid(format!("unknown question '{}'", j.question_id)))?;
        if !cache.contains_key(q.id.as_str()) {
            cache.insert(q.id.as_str(), QuestionProfile::new(q)?);
        }
        let c = inputs
            .corpus
            .get(&j.candidate_id)
            .ok_or_else(|| invalid(format!("unknown candidate '{}'", j.candidate_id)))?;
        let features = cache[q.id.as_str()].featurize(c, inputs.corpus.previous(c), feature_set)?;
        out.push(JudgedPair {
            judgment: j.clone(),
            language: c.language,
            features,
        });
    }
    Ok(out)
}

/// Feature rows labelled by `criterion`; excluded pairs get no label.
pub fn feature_rows(pairs: &[JudgedPair], criterion: SubsetCriterion) -> Vec<FeatureRow> {
    pairs
        .iter()
        .map(|p| {
            let mut features = p.features.clone();
            features.label = criterion.label(&p.judgment, p.language);
            FeatureRow {
                question_id: p.judgment.question_id.clone(),
                candidate_id: p.judgment.candidate_id.clone(),
                features,
            }
        })
        .collect()
}

/// AP-k per question of `lists`, judged against `judgments`. A question's
/// relevant count covers all of its judged pairs.
pub fn evaluate_lists(lists: &[RankedList], judgments: &[Judgment], k: usize) -> Result<EvalReport> {
    let mut relevant: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for j in judgments {
        let set = relevant.entry(j.question_id.as_str()).or_default();
        if j.evaluation_label() {
            set.insert(j.candidate_id.as_str());
        }
    }
    let mut ap = BTreeMap::new();
    for list in lists {
        let rel = relevant
            .get(list.question_id.as_str())
            .ok_or_else(|| invalid(format!("no judgments for question '{}'", list.question_id)))?;
        let flags: Vec<bool> = list.candidate_ids().map(|c| rel.contains(c)).collect();
        if ap.insert(list.question_id.clone(), ap_k(&flags, k, rel.len())).is_some() {
            return Err(invalid(format!("two lists for question '{}'", list.question_id)));
        }
    }
    let mut report = EvalReport::new(k, ap)?;
    let top: Vec<Language> = lists.iter().flat_map(|l| l.entries.iter().take(k).map(|e| e.language)).collect();
    if !top.is_empty() {
        report.language_ratio = Some(crate::merge::language_ratio_of(top)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: EvalReport,
    /// Final list per question.
    pub lists: Vec<RankedList>,
    /// Per-language lists before merging (empty for a single model).
    pub language_lists: Vec<RankedList>,
    /// English weight used per question when weights were learned.
    pub weights: BTreeMap<String, f64>,
}

fn train_on(pairs: &[&JudgedPair], names: &[String], config: &RunConfig, what: &str) -> Result<EnsembleModel> {
    let examples = pairs
        .iter()
        .filter_map(|p| {
            config
                .criterion
                .label(&p.judgment, p.language)
                .map(|label| p.features.project(names).map(|x| TrainingExample::new(x, label)))
        })
        .collect::<Result<Vec<_>>>()?;
    if !(examples.iter().any(|e| e.label) && examples.iter().any(|e| !e.label)) {
        return Err(invalid(format!(
            "training data for {what} under criterion {} lacks a positive or a negative example",
            config.criterion
        )));
    }
    train_ensemble(&examples, names, &config.train_config())
}

fn rank_pool(model: &EnsembleModel, qid: &str, language: ListLanguage, pool: &[&JudgedPair], n: usize) -> Result<RankedList> {
    let scored = pool
        .iter()
        .map(|p| Ok((p.judgment.candidate_id.clone(), p.language, model.score_features(&p.features)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_scored(qid, language, scored, n)
}

/// Cross-validated ranking and evaluation on already loaded inputs.
pub fn run_on(inputs: &PipelineInputs, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let pairs = featurize_judged(inputs, config.feature_set)?;
    let names = config.feature_set.active_names();
    let mut by_question: BTreeMap<&str, Vec<&JudgedPair>> = BTreeMap::new();
    for p in &pairs {
        by_question.entry(p.judgment.question_id.as_str()).or_default().push(p);
    }
    let ids: Vec<String> = by_question.keys().map(|s| s.to_string()).collect();
    let languages: BTreeSet<Language> = pairs.iter().map(|p| p.language).collect();

    let mut lists = Vec::new();
    let mut language_lists = Vec::new();
    for (train_ids, test_ids) in kfold_split(&ids, config.folds, config.seed)? {
        let train: Vec<&JudgedPair> = train_ids.iter().flat_map(|q| by_question[q.as_str()].iter().copied()).collect();
        match config.ranking {
            Ranking::Single => {
                let model = train_on(&train, &names, config, "all languages")?;
                for q in &test_ids {
                    lists.push(rank_pool(&model, q, ListLanguage::Mixed, &by_question[q.as_str()], config.n)?);
                }
            }
            _ => {
                let mut models = BTreeMap::new();
                for &lang in &languages {
                    let part: Vec<&JudgedPair> = train.iter().copied().filter(|p| p.language == lang).collect();
                    models.insert(lang, train_on(&part, &names, config, lang.as_str())?);
                }
                for q in &test_ids {
                    for (&lang, model) in &models {
                        let pool: Vec<&JudgedPair> =
                            by_question[q.as_str()].iter().copied().filter(|p| p.language == lang).collect();
                        if !pool.is_empty() {
                            language_lists.push(rank_pool(model, q, ListLanguage::Single(lang), &pool, config.n)?);
                        }
                    }
                }
            }
        }
    }

    let mut weights = BTreeMap::new();
    if config.ranking != Ranking::Single {
        let mut grouped: BTreeMap<String, Vec<RankedList>> = BTreeMap::new();
        for l in &language_lists {
            grouped.entry(l.question_id.clone()).or_default().push(l.clone());
        }
        match &config.ranking {
            Ranking::PerLanguage(strategy) => {
                for group in grouped.values() {
                    lists.push(merge(group, config.n, *strategy)?);
                }
            }
            Ranking::LearnedWeight { grid } => {
                let questions: Vec<MergeQuestion> = grouped
                    .iter()
                    .map(|(q, group)| {
                        let relevant: BTreeSet<String> = by_question[q.as_str()]
                            .iter()
                            .filter(|p| p.judgment.evaluation_label())
                            .map(|p| p.judgment.candidate_id.clone())
                            .collect();
                        MergeQuestion {
                            lists: group.clone(),
                            total_relevant: relevant.len(),
                            relevant,
                        }
                    })
                    .collect();
                let learned = learn_merge_weights(&questions, grid, config.n, config.k)?;
                for ((q, group), w) in grouped.iter().zip(learned) {
                    lists.push(merge(group, config.n, MergeStrategy::Weighted { english_weight: w })?);
                    weights.insert(q.clone(), w);
                }
            }
            Ranking::Single => unreachable!(),
        }
    }
    lists.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    language_lists.sort_by(|a, b| a.question_id.cmp(&b.question_id).then(a.language.cmp(&b.language)));
    let report = evaluate_lists(&lists, &inputs.judgments, config.k)?;
    Ok(PipelineOutput {
        report,
        lists,
        language_lists,
        weights,
    })
}

pub fn run_pipeline(config: &RunConfig, paths: &PipelinePaths) -> Result<PipelineOutput> {
    config.validate()?;
    let inputs = load_inputs(paths, config.feature_set)?;
    run_on(&inputs, config)
}

impl PipelineOutput {
    /// Writes `report.tsv`, `ranked.tsv` and, for per-language runs,
    /// `ranked.languages.tsv` (plus `weights.tsv` when weights were learned).
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.tsv"), self.report.to_tsv())?;
        fs::write(dir.join("ranked.tsv"), write_ranked_lists(&self.lists))?;
        if !self.language_lists.is_empty() {
            fs::write(dir.join("ranked.languages.tsv"), write_ranked_lists(&self.language_lists))?;
        }
        if !self.weights.is_empty() {
            let text: String = self.weights.iter().map(|(q, w)| format!("{q}\t{w}\n")).collect();
            fs::write(dir.join("weights.tsv"), text)?;
        }
        Ok(())
    }
}
