use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mlqa::classifier::{load_model, train_ensemble, write_model, TrainConfig, TrainingExample};
use mlqa::corpus::{load_corpus, load_judgments, load_questions, Language};
use mlqa::evaluation::{EvalReport, DEFAULT_K};
use mlqa::features::{load_features, write_features, FeatureSet};
use mlqa::merge::{
    load_ranked_lists, merge, rank_scored, write_ranked_lists, ListLanguage, MergeStrategy, RankedList,
    DEFAULT_ENGLISH_THRESHOLD, DEFAULT_WEIGHT_GRID,
};
use mlqa::pipeline::{
    evaluate_lists, feature_rows, featurize_judged, load_inputs, load_word_table, run_on, PipelinePaths, Ranking,
    RunConfig,
};
use mlqa::selection::{filter_subset, select_best_subset, CvConfig, SelectionExample, SubsetCriterion};
use mlqa::simplify::Simplifier;
use mlqa::synthetic::{files, generate, GeneratorSpec};
use mlqa::translation::{
    build_grammar_table, build_nbest_table, load_grammar, load_nbest, load_table, mask_contexts, write_query_table,
    write_table, Method,
};

#[derive(Parser)]
#[command(name = "mlqa", version, about = "Cross-lingual answer ranking with probabilistic translation features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the word table from an aligned corpus and dump per-question
    /// translation tables for every method.
    BuildTables(BuildTables),
    /// Compute feature vectors for every judged pair.
    Featurize(Featurize),
    /// Train a max-ent ensemble from a labelled feature file.
    Train(Train),
    /// Score and rank candidates with a trained model.
    Rank(Rank),
    /// Merge per-language ranked lists.
    Merge(Merge),
    /// Compute AP-k / MAP of ranked lists.
    Evaluate(Evaluate),
    /// Compare training subsets by cross-validated MAP.
    SelectData(SelectData),
    /// Produce masked context samples for a context translation model.
    MaskContexts(MaskContexts),
    /// Write a synthetic fixture directory.
    Generate(Generate),
    /// Cross-validated end-to-end run: featurize, train, rank, merge, evaluate.
    Run(Run),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Directory with questions.tsv, corpus.tsv, judgments.tsv and tables/.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    judgments: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
}

impl DataArgs {
    fn paths(&self) -> Result<PipelinePaths> {
        let base = self.data.as_deref().map(PipelinePaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_base: Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or(from_base)
                .with_context(|| format!("--{name} (or --data) is required"))
        };
        Ok(PipelinePaths {
            questions: pick(&self.questions, base.as_ref().map(|b| b.questions.clone()), "questions")?,
            corpus: pick(&self.corpus, base.as_ref().map(|b| b.corpus.clone()), "corpus")?,
            judgments: pick(&self.judgments, base.as_ref().map(|b| b.judgments.clone()), "judgments")?,
            tables: self
                .tables
                .clone()
                .or(base.map(|b| b.tables))
                .unwrap_or_else(|| PathBuf::from(files::TABLES)),
        })
    }
}

#[derive(Args)]
struct BuildTables {
    /// Directory holding `<lang>.aligned.tsv`, `.grammar`, `.nbest`, `.context.tsv`.
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    lang: Language,
    /// Where to write the word table (default `<tables>/<lang>.word.tsv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump per-question tables for all four methods.
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long, requires = "questions")]
    queries_out: Option<PathBuf>,
}

#[derive(Args)]
struct Featurize {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "both")]
    feature_set: FeatureSet,
    /// Criterion that decides each row's label ("-" when excluded).
    #[arg(long, default_value = "all")]
    criterion: SubsetCriterion,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "both")]
    feature_set: FeatureSet,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Rank {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Corpus file, for candidate languages.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// One list per question and language instead of one mixed list.
    #[arg(long)]
    by_language: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Uniform,
    Alternate,
    EnglishFirst,
    Weighted,
}

#[derive(Args)]
struct Merge {
    /// Ranked-list file with per-language lists.
    #[arg(long)]
    lists: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// English-first confidence threshold.
    #[arg(long, default_value_t = DEFAULT_ENGLISH_THRESHOLD)]
    threshold: f64,
    /// Weighted merge English weight.
    #[arg(long, default_value_t = DEFAULT_WEIGHT_GRID[0])]
    weight: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Evaluate {
    #[arg(long)]
    lists: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Baseline ranked lists for a paired permutation test.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 10000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectData {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated criteria, in tie-break order.
    #[arg(long, default_value = "en,ar,ch,consist,src+,en+,all", value_delimiter = ',')]
    criteria: Vec<SubsetCriterion>,
    #[arg(long, default_value = "both")]
    feature_set: FeatureSet,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaskContexts {
    /// Space-separated sentence.
    #[arg(long)]
    sentence: String,
    /// Index of the focus token.
    #[arg(long)]
    focus: usize,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Generate {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = GeneratorSpec::default().questions)]
    questions: usize,
    #[arg(long, default_value_t = GeneratorSpec::default().terms_per_question)]
    terms: usize,
    #[arg(long, default_value_t = GeneratorSpec::default().fanout)]
    fanout: usize,
    #[arg(long, default_value_t = GeneratorSpec::default().synonym_fraction)]
    synonym_fraction: f64,
    #[arg(long, default_value_t = GeneratorSpec::default().noise_rate)]
    noise_rate: f64,
    #[arg(long, default_value_t = GeneratorSpec::default().double_annotation)]
    double_annotation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingArg {
    /// One model over all languages.
    Single,
    Uniform,
    Alternate,
    EnglishFirst,
    Weighted,
    /// Per-question English weight learned from the other questions.
    Learned,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "both")]
    feature_set: FeatureSet,
    #[arg(long, default_value = "all")]
    criterion: SubsetCriterion,
    #[arg(long, value_enum, default_value = "single")]
    ranking: RankingArg,
    #[arg(long, default_value_t = DEFAULT_ENGLISH_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_WEIGHT_GRID[0])]
    weight: f64,
    /// Weight grid for `--ranking learned`.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_WEIGHT_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report.tsv and ranked lists.
    #[arg(long)]
    out: PathBuf,
}

fn strategy(arg: StrategyArg, threshold: f64, weight: f64) -> MergeStrategy {
    match arg {
        StrategyArg::Uniform => MergeStrategy::Uniform,
        StrategyArg::Alternate => MergeStrategy::Alternate,
        StrategyArg::EnglishFirst => MergeStrategy::EnglishFirst { threshold },
        StrategyArg::Weighted => MergeStrategy::Weighted { english_weight: weight },
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_tables(a: BuildTables) -> Result<()> {
    let l = a.lang.as_str();
    let word = load_word_table(&a.tables, a.lang)?;
    let out = a.out.unwrap_or_else(|| a.tables.join(files::word(l)));
    fs::write(&out, write_table(&word))?;
    eprintln!("wrote {} ({} source words)", out.display(), word.len());
    if let (Some(qpath), Some(qout)) = (a.questions, a.queries_out) {
        let questions = load_questions(&qpath, &Simplifier::default())?;
        let grammar = load_grammar(&a.tables.join(files::grammar(l)))?;
        let nbest = load_nbest(&a.tables.join(files::nbest(l)))?;
        let context = load_table(&a.tables.join(files::context(l)))?;
        let mut text = String::new();
        for q in &questions {
            let derivations = nbest
                .get(&q.id)
                .with_context(|| format!("no 10best derivations for question '{}'", q.id))?;
            for (method, pq) in [
                (Method::Word, word.query(&q.terms)),
                (Method::TenBest, build_nbest_table(derivations, &q.terms)),
                (Method::Context, context.query(&q.terms)),
                (Method::Grammar, build_grammar_table(&grammar, &q.terms)),
            ] {
                for line in write_query_table(&q.id, &pq).lines() {
                    text.push_str(&format!("{method}\t{line}\n"));
                }
            }
        }
        fs::write(&qout, text)?;
    }
    Ok(())
}

fn featurize(a: Featurize) -> Result<()> {
    let inputs = load_inputs(&a.data.paths()?, a.feature_set)?;
    let pairs = featurize_judged(&inputs, a.feature_set)?;
    fs::write(&a.out, write_features(&feature_rows(&pairs, a.criterion)))?;
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let names = a.feature_set.active_names();
    let examples = load_features(&a.features)?
        .into_iter()
        .filter_map(|row| {
            row.features
                .label
                .map(|label| row.features.project(&names).map(|x| TrainingExample::new(x, label)))
        })
        .collect::<mlqa::Result<Vec<_>>>()?;
    let config = TrainConfig {
        l2: a.l2,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let model = train_ensemble(&examples, &names, &config)?;
    fs::write(&a.out, write_model(&model))?;
    eprintln!("trained {} members on {} examples", model.members.len(), examples.len());
    Ok(())
}

fn rank(a: Rank) -> Result<()> {
    let model = load_model(&a.model)?;
    let corpus = load_corpus(&a.corpus)?;
    let mut groups: BTreeMap<(String, ListLanguage), Vec<(String, Language, f64)>> = BTreeMap::new();
    for row in load_features(&a.features)? {
        let language = corpus
            .get(&row.candidate_id)
            .with_context(|| format!("candidate '{}' not in corpus", row.candidate_id))?
            .language;
        let key = if a.by_language { ListLanguage::Single(language) } else { ListLanguage::Mixed };
        let score = model.score_features(&row.features)?;
        groups
            .entry((row.question_id, key))
            .or_default()
            .push((row.candidate_id, language, score));
    }
    let lists = groups
        .into_iter()
        .map(|((q, lang), scored)| rank_scored(&q, lang, scored, a.n))
        .collect::<mlqa::Result<Vec<RankedList>>>()?;
    fs::write(&a.out, write_ranked_lists(&lists))?;
    Ok(())
}

fn merge_lists(a: Merge) -> Result<()> {
    let mut by_question: BTreeMap<String, Vec<RankedList>> = BTreeMap::new();
    for list in load_ranked_lists(&a.lists)? {
        // A file holds one block per question; split each block by language.
        let mut per_lang: BTreeMap<Language, RankedList> = BTreeMap::new();
        for e in list.entries {
            per_lang
                .entry(e.language)
                .or_insert_with(|| RankedList {
                    question_id: list.question_id.clone(),
                    language: ListLanguage::Single(e.language),
                    entries: Vec::new(),
                })
                .entries
                .push(e);
        }
        by_question.entry(list.question_id).or_default().extend(per_lang.into_values());
    }
    let s = strategy(a.strategy, a.threshold, a.weight);
    let merged = by_question
        .values()
        .map(|lists| merge(lists, a.n, s))
        .collect::<mlqa::Result<Vec<_>>>()?;
    fs::write(&a.out, write_ranked_lists(&merged))?;
    Ok(())
}

fn evaluate(a: Evaluate) -> Result<()> {
    let judgments = load_judgments(&a.judgments)?;
    let mut report = evaluate_lists(&load_ranked_lists(&a.lists)?, &judgments, a.k)?;
    if let Some(b) = &a.baseline {
        let baseline: EvalReport = evaluate_lists(&load_ranked_lists(b)?, &judgments, a.k)?;
        report.compare(&baseline, a.iterations, a.seed)?;
    }
    emit(a.out.as_deref(), &report.to_tsv())
}

fn select_data(a: SelectData) -> Result<()> {
    let paths = a.data.paths()?;
    let inputs = load_inputs(&paths, a.feature_set)?;
    let pairs = featurize_judged(&inputs, a.feature_set)?;
    let names = a.feature_set.active_names();
    let examples = pairs
        .iter()
        .map(|p| {
            Ok(SelectionExample {
                judgment: p.judgment.clone(),
                language: p.language,
                features: p.features.project(&names)?,
            })
        })
        .collect::<mlqa::Result<Vec<_>>>()?;
    let cv = CvConfig {
        folds: a.folds,
        seed: a.seed,
        n: a.n,
        k: a.k,
        train: TrainConfig {
            l2: a.l2,
            seed: a.seed,
            ..TrainConfig::default()
        },
    };
    let outcome = select_best_subset(&a.criteria, &examples, &names, &cv)?;
    let mut text = String::from("criterion\tpairs\tcv_map\n");
    for (c, map) in &outcome.scores {
        let count = filter_subset(&inputs.judgments, &inputs.corpus, *c)?.len();
        let map = map.map_or_else(|| "-".to_string(), |m| format!("{m:.6}"));
        text.push_str(&format!("{c}\t{count}\t{map}\n"));
    }
    text.push_str(&format!("best\t{}\n", outcome.best));
    emit(a.out.as_deref(), &text)
}

fn mask(a: MaskContexts) -> Result<()> {
    let tokens: Vec<String> = a.sentence.split_whitespace().map(str::to_string).collect();
    let samples = mask_contexts(&tokens, a.focus, a.window, a.samples, a.seed)?;
    let text: String = samples.iter().map(|s| s.join(" ") + "\n").collect();
    emit(a.out.as_deref(), &text)
}

fn generate_fixture(a: Generate) -> Result<()> {
    let spec = GeneratorSpec {
        questions: a.questions,
        terms_per_question: a.terms,
        fanout: a.fanout,
        synonym_fraction: a.synonym_fraction,
        noise_rate: a.noise_rate,
        double_annotation: a.double_annotation,
        seed: a.seed,
        ..GeneratorSpec::default()
    };
    generate(&spec)?.write_to(&a.out)?;
    Ok(())
}

fn run(a: Run) -> Result<()> {
    let ranking = match a.ranking {
        RankingArg::Single => Ranking::Single,
        RankingArg::Uniform => Ranking::PerLanguage(MergeStrategy::Uniform),
        RankingArg::Alternate => Ranking::PerLanguage(MergeStrategy::Alternate),
        RankingArg::EnglishFirst => Ranking::PerLanguage(MergeStrategy::EnglishFirst { threshold: a.threshold }),
        RankingArg::Weighted => Ranking::PerLanguage(MergeStrategy::Weighted { english_weight: a.weight }),
        RankingArg::Learned => Ranking::LearnedWeight { grid: a.grid.clone() },
    };
    let config = RunConfig {
        feature_set: a.feature_set,
        criterion: a.criterion,
        seed: a.seed,
        k: a.k,
        n: a.n,
        folds: a.folds,
        ranking,
        l2: a.l2,
    };
    let inputs = load_inputs(&a.data.paths()?, config.feature_set)?;
    let output = run_on(&inputs, &config)?;
    output.write_to(&a.out)?;
    println!("MAP\t{:.6}", output.report.map);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::BuildTables(a) => build_tables(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Rank(a) => rank(a),
        Command::Merge(a) => merge_lists(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SelectData(a) => select_data(a),
        Command::MaskContexts(a) => mask(a),
        Command::Generate(a) => generate_fixture(a),
        Command::Run(a) => run(a),
    }
}

