//! Command-line shell over the pipeline.
//!
//! Settings come from defaults, then `--config <file>`, then one flag per
//! configuration key (`n_retrieve` is `--n-retrieve`). Data goes to files
//! and stdout, logs to stderr. Exit codes: 0 success, 1 usage error,
//! 2 runtime error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::corpus::{
    read_corpus, read_dataset, split_passages, write_corpus, write_dataset, Document, Index,
    INDEX_VERSION,
};
use crate::error::{Error, Result};
use crate::features::{read_feature_file, write_feature_file, FeatureExtractor, FEATURE_NAMES};
use crate::pipeline::config::KEYS;
use crate::pipeline::{
    assemble_dataset, compare_systems, evaluate, label, make_synthetic, read_predictions,
    run_inference, train_reranker, write_predictions, write_trec_run, PipelineConfig,
    Prediction, RankerKind, Ranking, SyntheticConfig, K_SHOT, LAMBDAMART, LINEAR_PAIRWISE,
    ZERO_SHOT,
};
use crate::reranker::{feature_importance, RankerModel, RankingDataset, MODEL_VERSION};
use crate::topics::{train_lda, TopicModel, TOPIC_VERSION};
use crate::utility::{read_utility_records, write_utility_records};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

fn version_string() -> String {
    format!(
        "{} (index format v{INDEX_VERSION}, topic model format v{TOPIC_VERSION}, model format v{MODEL_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut cmd = Command::new("utilrank")
        .about("Utility-trained reranking for retrieval-augmented generation")
        .version(version_string())
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key = value configuration file"),
        )
        .arg(
            Arg::new("verbose")
                .short('v')
                .long("verbose")
                .action(ArgAction::Count)
                .global(true)
                .help("more log output on stderr (-v info, -vv debug)"),
        );
    for (key, help) in KEYS {
        let mut arg = Arg::new(*key)
            .long(flag_name(key))
            .value_name("VALUE")
            .global(true)
            .help(*help)
            .help_heading("Settings");
        match *key {
            "num_topics" => arg = arg.visible_alias("topics"),
            "lda_iterations" => arg = arg.visible_alias("iters"),
            _ => {}
        }
        cmd = cmd.arg(arg);
    }
    let ranker = || {
        Arg::new("kind")
            .value_parser(["lambdamart", "linear"])
            .help("which reranker")
    };
    cmd.subcommand(Command::new("index").about("build the BM25 index from the corpus"))
        .subcommand(Command::new("train-lda").about("train the topic model on the corpus"))
        .subcommand(
            Command::new("label-utility")
                .about("label retrieved documents of the training questions with their utility"),
        )
        .subcommand(
            Command::new("build-features").about("write the ranking file from the utility labels"),
        )
        .subcommand(
            Command::new("train-reranker")
                .about("train a reranker on the ranking file")
                .arg(ranker().required(true)),
        )
        .subcommand(
            Command::new("rerank")
                .about("write a TREC run of reranked candidates for the test questions")
                .arg(ranker().default_value("lambdamart")),
        )
        .subcommand(
            Command::new("infer")
                .about("answer the test questions with one system")
                .arg(
                    Arg::new("system")
                        .value_parser([ZERO_SHOT, K_SHOT, LAMBDAMART, LINEAR_PAIRWISE])
                        .default_value(LAMBDAMART),
                ),
        )
        .subcommand(
            Command::new("evaluate")
                .about("score prediction files against the test answers")
                .arg(
                    Arg::new("runs")
                        .num_args(0..)
                        .value_name("NAME=PATH")
                        .help("prediction files to compare (default: the configured predictions)"),
                ),
        )
        .subcommand(Command::new("compare").about("run and evaluate all four systems"))
        .subcommand(
            Command::new("feature-importance").about("gain share per feature of the LambdaMART model"),
        )
        .subcommand(
            Command::new("make-synthetic")
                .about("write a fact-planted corpus with training and test questions")
                .arg(num_arg("train-queries", "200"))
                .arg(num_arg("test-queries", "100"))
                .arg(num_arg("docs-per-query", "10"))
                .arg(
                    Arg::new("hard-fraction")
                        .long("hard-fraction")
                        .value_parser(clap::value_parser!(f64))
                        .default_value("0.5"),
                ),
        )
        .subcommand(
            Command::new("split-passages")
                .about("split a corpus into fixed-length word passages")
                .arg(
                    Arg::new("input")
                        .long("input")
                        .required(true)
                        .value_parser(clap::value_parser!(PathBuf)),
                )
                .arg(num_arg("words", "100")),
        )
}

fn num_arg(name: &'static str, default: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_parser(clap::value_parser!(usize))
        .default_value(default)
}

/// A parsed, validated command line.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: String,
    pub config: PipelineConfig,
    pub config_path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub verbosity: u8,
    args: ArgMatches,
}

#[derive(Debug)]
pub enum ParseError {
    /// Help or version text; not a failure.
    Display(String),
    Usage(String),
}

pub fn parse_args<I, T>(argv: I) -> std::result::Result<Invocation, ParseError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                ParseError::Display(e.render().to_string())
            }
            _ => ParseError::Usage(e.render().to_string()),
        }
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let usage = |e: Error| ParseError::Usage(format!("error: {e}\n"));

    let config_path = sub.get_one::<String>("config").map(PathBuf::from);
    let mut config = match &config_path {
        Some(p) => PipelineConfig::load(p).map_err(usage)?,
        None => PipelineConfig::default(),
    };
    let mut overrides = Vec::new();
    for (key, _) in KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            config
                .set(key, v)
                .map_err(|e| ParseError::Usage(format!("error: --{}: {e}\n", flag_name(key))))?;
            overrides.push((key.to_string(), v.clone()));
        }
    }
    config.validate().map_err(usage)?;
    Ok(Invocation {
        command: name.to_string(),
        config,
        config_path,
        overrides,
        verbosity: sub.get_count("verbose"),
        args: sub.clone(),
    })
}

fn load_index(cfg: &PipelineConfig) -> Result<Index> {
    Index::load(&cfg.index)
}

fn load_topics(cfg: &PipelineConfig) -> Result<TopicModel> {
    TopicModel::load(&cfg.topic_model)
}

fn model_path(cfg: &PipelineConfig, kind: RankerKind) -> &Path {
    match kind {
        RankerKind::LambdaMart => &cfg.model,
        RankerKind::Linear => &cfg.linear_model,
    }
}

fn load_ranker(cfg: &PipelineConfig, kind: RankerKind) -> Result<RankerModel> {
    RankerModel::load(model_path(cfg, kind))
}

fn kind_arg(args: &ArgMatches) -> RankerKind {
    args.get_one::<String>("kind")
        .map(|s| s.parse().expect("restricted by clap"))
        .unwrap_or(RankerKind::LambdaMart)
}

/// Executes the command and returns the text for stdout.
pub fn run(inv: &Invocation) -> Result<String> {
    let cfg = &inv.config;
    let args = &inv.args;
    match inv.command.as_str() {
        "index" => {
            let docs = read_corpus(&cfg.corpus)?;
            let index = Index::build_with(docs, cfg.bm25())?;
            index.save(&cfg.index)?;
            Ok(format!(
                "indexed {} documents ({} terms) -> {}\n",
                index.num_docs(),
                index.vocabulary_size(),
                cfg.index.display()
            ))
        }
        "train-lda" => {
            let docs = read_corpus(&cfg.corpus)?;
            let model = train_lda(&docs, &cfg.lda())?;
            model.save(&cfg.topic_model)?;
            Ok(format!(
                "trained {} topics over {} terms -> {}\n",
                model.num_topics(),
                model.vocab().len(),
                cfg.topic_model.display()
            ))
        }
        "label-utility" => {
            let index = load_index(cfg)?;
            let queries = read_dataset(&cfg.dataset)?;
            let generator = cfg.generator_client()?;
            let outcome = label(&generator, &queries, &index, cfg)?;
            write_utility_records(&cfg.utilities, &outcome.records)?;
            Ok(format!(
                "labeled {} pairs, {} queries skipped -> {}\n",
                outcome.records.len(),
                outcome.skipped.len(),
                cfg.utilities.display()
            ))
        }
        "build-features" => {
            let index = load_index(cfg)?;
            let topics = load_topics(cfg)?;
            let queries = read_dataset(&cfg.dataset)?;
            let records = read_utility_records(&cfg.utilities)?;
            let extractor = FeatureExtractor::new(&index, &topics, cfg.feature_config())?;
            let data = assemble_dataset(&records, &queries, &extractor, cfg)?;
            write_feature_file(&cfg.features, &data.to_feature_rows())?;
            Ok(format!(
                "{} rows over {} queries -> {}\n",
                data.num_rows(),
                data.groups.len(),
                cfg.features.display()
            ))
        }
        "train-reranker" => {
            let kind = kind_arg(args);
            let rows = read_feature_file(&cfg.features)?;
            let records = if cfg.utilities.exists() {
                Some(read_utility_records(&cfg.utilities)?)
            } else {
                None
            };
            let data = RankingDataset::from_feature_rows(rows, records.as_deref(), cfg.g_max)?;
            let (model, warnings) = train_reranker(&data, kind, cfg)?;
            for w in warnings {
                log::warn!("{w}");
            }
            let path = model_path(cfg, kind);
            model.save(path)?;
            Ok(format!("trained {} -> {}\n", model.kind(), path.display()))
        }
        "rerank" => {
            let kind = kind_arg(args);
            let index = load_index(cfg)?;
            let topics = load_topics(cfg)?;
            let model = load_ranker(cfg, kind)?;
            let queries = read_dataset(&cfg.test_dataset)?;
            let extractor = FeatureExtractor::new(&index, &topics, cfg.feature_config())?;
            // k = 0: rank only, no generation
            let mut rank_cfg = cfg.clone();
            rank_cfg.context_size = 0;
            let ranking = Ranking::Model {
                scorer: &model,
                features: &extractor,
            };
            let entries = run_inference(&NoGenerator, &queries, &index, ranking, &rank_cfg)?;
            write_trec_run(&cfg.run, &entries, &cfg.run_tag)?;
            Ok(format!("reranked {} queries -> {}\n", entries.len(), cfg.run.display()))
        }
        "infer" => {
            let system = args.get_one::<String>("system").expect("has default");
            let index = load_index(cfg)?;
            let queries = read_dataset(&cfg.test_dataset)?;
            let generator = cfg.generator_client()?;
            let entries = match system.as_str() {
                ZERO_SHOT => run_inference(&generator, &queries, &index, Ranking::Empty, cfg)?,
                K_SHOT => run_inference(&generator, &queries, &index, Ranking::FirstStage, cfg)?,
                other => {
                    let kind = if other == LAMBDAMART {
                        RankerKind::LambdaMart
                    } else {
                        RankerKind::Linear
                    };
                    let topics = load_topics(cfg)?;
                    let model = load_ranker(cfg, kind)?;
                    let extractor = FeatureExtractor::new(&index, &topics, cfg.feature_config())?;
                    let ranking = Ranking::Model {
                        scorer: &model,
                        features: &extractor,
                    };
                    run_inference(&generator, &queries, &index, ranking, cfg)?
                }
            };
            write_predictions(&cfg.predictions, &entries)?;
            write_trec_run(&cfg.run, &entries, &cfg.run_tag)?;
            let failed = entries.iter().filter(|e| e.prediction.error.is_some()).count();
            Ok(format!(
                "{system}: {} answers ({failed} failed) -> {}, {}\n",
                entries.len(),
                cfg.predictions.display(),
                cfg.run.display()
            ))
        }
        "evaluate" => {
            let golds = read_dataset(&cfg.test_dataset)?;
            let specs: Vec<(String, PathBuf)> = match args.get_many::<String>("runs") {
                Some(vals) => vals
                    .map(|s| {
                        s.split_once('=')
                            .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
                            .ok_or_else(|| {
                                Error::InvalidArgument(format!("expected NAME=PATH, got `{s}`"))
                            })
                    })
                    .collect::<Result<_>>()?,
                None => vec![("predictions".to_string(), cfg.predictions.clone())],
            };
            let preds: Vec<(String, Vec<Prediction>)> = specs
                .into_iter()
                .map(|(n, p)| Ok((n, read_predictions(&p)?)))
                .collect::<Result<_>>()?;
            let refs: Vec<(&str, &[Prediction])> =
                preds.iter().map(|(n, p)| (n.as_str(), p.as_slice())).collect();
            let report = evaluate(&refs, &golds)?;
            report.save(&cfg.report)?;
            Ok(format!("{}report -> {}\n", report.to_table(), cfg.report.display()))
        }
        "compare" => {
            let index = load_index(cfg)?;
            let topics = load_topics(cfg)?;
            let lambdamart = load_ranker(cfg, RankerKind::LambdaMart)?;
            let linear = load_ranker(cfg, RankerKind::Linear)?;
            let queries = read_dataset(&cfg.test_dataset)?;
            let generator = cfg.generator_client()?;
            let extractor = FeatureExtractor::new(&index, &topics, cfg.feature_config())?;
            let cmp = compare_systems(&generator, &queries, &extractor, &lambdamart, &linear, cfg)?;
            cmp.report.save(&cfg.report)?;
            Ok(format!("{}report -> {}\n", cmp.report.to_table(), cfg.report.display()))
        }
        "feature-importance" => {
            let model = match RankerModel::load(&cfg.model)? {
                RankerModel::LambdaMart(m) => m,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "{} holds a {} model; feature importance needs lambdamart",
                        cfg.model.display(),
                        other.kind()
                    )))
                }
            };
            let mut s = format!("{:<8}  {:<22}  {:>8}\n", "feature", "name", "share");
            for (f, share) in feature_importance(&model) {
                let _ = writeln!(s, "{:<8}  {:<22}  {share:>8.4}", format!("f{f}"), FEATURE_NAMES[f - 1]);
            }
            Ok(s)
        }
        "make-synthetic" => {
            let sc = SyntheticConfig {
                train_queries: *args.get_one("train-queries").expect("default"),
                test_queries: *args.get_one("test-queries").expect("default"),
                docs_per_query: *args.get_one("docs-per-query").expect("default"),
                hard_fraction: *args.get_one("hard-fraction").expect("default"),
                seed: cfg.seed,
                ..SyntheticConfig::default()
            };
            let data = make_synthetic(&sc)?;
            write_corpus(&cfg.corpus, &data.corpus)?;
            write_dataset(&cfg.dataset, &data.train)?;
            write_dataset(&cfg.test_dataset, &data.test)?;
            Ok(format!(
                "{} documents, {} train / {} test questions -> {}, {}, {}\n",
                data.corpus.len(),
                data.train.len(),
                data.test.len(),
                cfg.corpus.display(),
                cfg.dataset.display(),
                cfg.test_dataset.display()
            ))
        }
        "split-passages" => {
            let input: &PathBuf = args.get_one("input").expect("required");
            let words: usize = *args.get_one("words").expect("default");
            if words == 0 {
                return Err(Error::InvalidArgument("--words must be at least 1".into()));
            }
            let mut out = Vec::new();
            for d in read_corpus(input)? {
                for (i, p) in split_passages(&d.text, words).into_iter().enumerate() {
                    out.push(Document::new(format!("{}#{i}", d.doc_id), p));
                }
            }
            write_corpus(&cfg.corpus, &out)?;
            Ok(format!("{} passages -> {}\n", out.len(), cfg.corpus.display()))
        }
        other => Err(Error::InvalidArgument(format!("unknown command `{other}`"))),
    }
}

/// Stand-in for rank-only runs, where no prompt is ever generated from.
struct NoGenerator;

impl crate::utility::Generator for NoGenerator {
    fn generate(&self, _: &str) -> std::result::Result<String, crate::utility::GenerateError> {
        Ok(String::new())
    }
}

/// Parses, runs, and reports; returns the process exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let inv = match parse_args(argv) {
        Ok(inv) => inv,
        Err(ParseError::Display(text)) => {
            let _ = write!(out, "{text}");
            return EXIT_OK;
        }
        Err(ParseError::Usage(text)) => {
            let _ = write!(err, "{text}");
            return EXIT_USAGE;
        }
    };
    let level = match inv.verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(&inv) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
