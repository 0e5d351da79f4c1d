//! `hybriddetect` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 network error.
//! Diagnostics go to stderr; machine-readable outputs are written only to files
//! inside the output directory, together with a `run-meta.json` describing the run.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::blockstats::block_report;
use crate::bundle::{ModelBundle, TrainParams};
use crate::corpus::{self, Domain};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig, Variant};
use crate::llmclient::{
    DeterministicLocal, Identity, ParaphraseCache, ParaphraseConfig, Paraphraser, Remote, CACHE_FILE,
};
use crate::metrics::RunMetrics;
use crate::robustness::attack_bundle;
use crate::seeding::RNG_IDENTIFIER;
use crate::synthetic::{self, SyntheticConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;

pub const DEFAULT_OUTPUT_DIR: &str = "hybriddetect-out";
pub const RUN_META: &str = "run-meta.json";

#[derive(Debug, Parser)]
#[command(name = "hybriddetect", version, about = "Sentence-level machine-text detection for hybrid articles")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Directory receiving every output file.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Experiment configuration file (TOML). Also supplies training defaults for `train`.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the seed (for `experiment`, the base seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    AllData,
    UnderSample,
    NewsOnly,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::AllData => Variant::AllData,
            VariantArg::UnderSample => Variant::UnderSample,
            VariantArg::NewsOnly => Variant::NewsOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParaphraserKind {
    Remote,
    Identity,
    Local,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset and report counts.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Print article/sentence counts by domain and label.
        #[arg(long)]
        stats: bool,
    },
    /// Fit TF-IDF + Naive Bayes and save a model bundle.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "all-data")]
        variant: VariantArg,
        /// Hold out a seeded article split; writes train.jsonl and validation.jsonl.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        min_df: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Score a labeled dataset with a saved bundle.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Score only news-domain articles.
        #[arg(long)]
        news_only: bool,
    },
    /// Run the repeated-seed evaluation described by --config.
    Experiment {
        /// Number of seeds (overrides the config's `runs`).
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Ignore completed runs in the checkpoint file.
        #[arg(long)]
        no_resume: bool,
    },
    /// Rewrite machine sentences and measure the classifier's degradation.
    Attack {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        validation: PathBuf,
        #[arg(long, value_enum)]
        paraphraser: ParaphraserKind,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        passes: Option<u32>,
        /// File whose contents replace the default rewrite prompt.
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        #[arg(long)]
        max_retries: Option<u32>,
        #[arg(long, value_name = "SECS")]
        timeout: Option<u64>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        requests_per_second: Option<f64>,
        /// Do not read or write the paraphrase cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Measure label run-length structure against a within-article shuffle baseline.
    AnalyzeBlocks {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
    },
    /// Write a synthetic corpus with planted machine signatures.
    GenSynthetic {
        #[arg(long)]
        news: Option<usize>,
        #[arg(long)]
        academic: Option<usize>,
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        academic_shift: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    init_logging(cli.verbose);
    match run(cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_network() {
                EXIT_NETWORK
            } else {
                EXIT_DATA
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    argv: Vec<String>,
    version: &'static str,
    rng: &'static str,
    seeds: Vec<u64>,
    config: Value,
}

struct Context<'a> {
    output_dir: PathBuf,
    argv: &'a [OsString],
}

impl Context<'_> {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn write_meta(&self, command: &str, seeds: Vec<u64>, config: Value) -> Result<()> {
        let meta = RunMeta {
            command,
            argv: self.argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_IDENTIFIER,
            seeds,
            config,
        };
        self.write(RUN_META, &serde_json::to_string_pretty(&meta).map_err(Error::from)?)?;
        Ok(())
    }
}

fn run(cli: Cli, argv: &[OsString]) -> std::result::Result<(), CliError> {
    let file_config = match (&cli.config, &cli.command) {
        (Some(path), _) => Some(ExperimentConfig::load(path)?),
        (None, Command::Experiment { .. }) => {
            return Err(CliError::Usage("`experiment` requires --config <path>".into()));
        }
        (None, _) => None,
    };
    let output_dir = cli
        .output_dir
        .clone()
        .or_else(|| file_config.as_ref().and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let ctx = Context { output_dir, argv };
    ctx.prepare()?;

    match cli.command {
        Command::Ingest { input, stats } => {
            let dataset = corpus::load_dataset(&input)?;
            let counts = dataset.stats();
            if stats {
                print!("{counts}");
            } else {
                eprintln!("{}: {} articles, {} sentences", input.display(), counts.articles, counts.sentences);
            }
            ctx.write("stats.json", &serde_json::to_string_pretty(&counts).map_err(Error::from)?)?;
            ctx.write_meta("ingest", vec![], json!({ "input": input }))?;
        }
        Command::Train {
            input,
            variant,
            train_fraction,
            n_max,
            min_df,
            alpha,
        } => {
            let defaults = file_config.clone().unwrap_or_else(|| ExperimentConfig::new(&input));
            let params = TrainParams {
                n_max: n_max.unwrap_or(defaults.n_max),
                min_df: min_df.unwrap_or(defaults.min_df),
                alpha: alpha.unwrap_or(defaults.alpha),
            };
            let seed = cli.seed.unwrap_or(defaults.base_seed);
            let dataset = corpus::load_dataset(&input)?;
            let variant = Variant::from(variant);
            let population = variant.derive(&dataset, seed)?;
            let train = match train_fraction {
                Some(fraction) => {
                    let (train, validation) = corpus::split_articles(&population, fraction, seed)?;
                    corpus::save_dataset(&train, ctx.path("train.jsonl"))?;
                    corpus::save_dataset(&validation, ctx.path("validation.jsonl"))?;
                    train
                }
                None => population.into_owned(),
            };
            let bundle = ModelBundle::train(train.sentences(), params)?;
            bundle.save(ctx.path("model.json"))?;
            eprintln!(
                "trained on {} sentences, vocabulary {} n-grams -> {}",
                train.sentence_count(),
                bundle.tfidf.len(),
                ctx.path("model.json").display()
            );
            ctx.write_meta(
                "train",
                vec![seed],
                json!({
                    "input": input,
                    "variant": variant,
                    "train_fraction": train_fraction,
                    "params": params,
                }),
            )?;
        }
        Command::Eval {
            bundle,
            input,
            news_only,
        } => {
            let model = ModelBundle::load(&bundle)?;
            let dataset = corpus::load_dataset(&input)?;
            let sentences: Vec<_> = dataset
                .articles()
                .iter()
                .filter(|a| !news_only || a.domain == Domain::News)
                .flat_map(|a| a.sentences.iter())
                .collect();
            if sentences.is_empty() {
                return Err(Error::EmptyDataset("nothing to evaluate".into()).into());
            }
            let truth: Vec<_> = sentences.iter().map(|s| s.label).collect();
            let predicted = model.predict_all(sentences.iter().map(|s| s.text.as_str()))?;
            let metrics = RunMetrics::from_labels(&truth, &predicted, cli.seed.unwrap_or(0))?;
            println!(
                "kappa {:.4}  weighted F1 {:.4}  accuracy {:.4}  ({} sentences)",
                metrics.kappa,
                metrics.weighted_f1,
                metrics.accuracy,
                truth.len()
            );
            ctx.write("eval.json", &serde_json::to_string_pretty(&metrics).map_err(Error::from)?)?;
            ctx.write_meta("eval", vec![], json!({ "bundle": bundle, "input": input, "news_only": news_only }))?;
        }
        Command::Experiment {
            runs,
            workers,
            no_resume,
        } => {
            let mut config = file_config.expect("checked above");
            if let Some(seed) = cli.seed {
                config.base_seed = seed;
                config.seeds = None;
            }
            if let Some(runs) = runs {
                config.runs = runs;
                config.seeds = None;
            }
            if workers.is_some() {
                config.workers = workers;
            }
            config.resume &= !no_resume;
            config.output_dir = Some(ctx.output_dir.clone());
            if !config.dataset.exists() {
                return Err(Error::io(
                    &config.dataset,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                )
                .into());
            }
            let table = run_experiment(&config)?;
            table.write_to(&ctx.output_dir)?;
            print!("{}", table.summary());
            ctx.write_meta(
                "experiment",
                config.seed_list(),
                serde_json::to_value(&table.config).map_err(Error::from)?,
            )?;
        }
        Command::Attack {
            bundle,
            validation,
            paraphraser,
            endpoint,
            model,
            temperature,
            passes,
            prompt_file,
            max_retries,
            timeout,
            concurrency,
            requests_per_second,
            no_cache,
        } => {
            let mut config = ParaphraseConfig::default();
            if let Some(v) = endpoint {
                config.endpoint = v;
            }
            if let Some(v) = model {
                config.model = v;
            }
            if let Some(v) = temperature {
                config.temperature = v;
            }
            if let Some(v) = passes {
                config.passes = v;
            }
            if let Some(path) = &prompt_file {
                config.prompt_template = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            }
            if let Some(v) = max_retries {
                config.max_retries = v;
            }
            if let Some(v) = timeout {
                config.timeout_secs = v;
            }
            if let Some(v) = concurrency {
                config.concurrency = v;
            }
            config.requests_per_second = requests_per_second;
            config
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let seed = cli.seed.unwrap_or(0);
            let model = ModelBundle::load(&bundle)?;
            let dataset = corpus::load_dataset(&validation)?;
            let p: Box<dyn Paraphraser> = match paraphraser {
                ParaphraserKind::Identity => Box::new(Identity),
                ParaphraserKind::Local => Box::new(DeterministicLocal::new(seed)),
                ParaphraserKind::Remote => {
                    let remote = Remote::from_env(&config);
                    if no_cache {
                        Box::new(remote)
                    } else {
                        let cache = ParaphraseCache::open(ctx.path(CACHE_FILE)).map_err(Error::from)?;
                        Box::new(remote.with_cache(cache))
                    }
                }
            };
            let report = attack_bundle(&dataset, &model, p.as_ref(), &config)?;
            ctx.write("robustness.json", &report.to_json()?)?;
            ctx.write("robustness-summary.txt", &report.summary())?;
            print!("{}", report.summary());
            ctx.write_meta(
                "attack",
                vec![seed],
                json!({
                    "bundle": bundle,
                    "validation": validation,
                    "paraphraser": report.paraphraser,
                    "paraphrase_config": config,
                }),
            )?;
        }
        Command::AnalyzeBlocks {
            input,
            permutations,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let dataset = corpus::load_dataset(&input)?;
            let report = block_report(&dataset, permutations, seed)?;
            ctx.write("blocks.json", &serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
            print!("{}", report.summary());
            ctx.write_meta(
                "analyze-blocks",
                vec![seed],
                json!({ "input": input, "permutations": permutations }),
            )?;
        }
        Command::GenSynthetic {
            news,
            academic,
            sentences,
            academic_shift,
            noise,
        } => {
            let defaults = SyntheticConfig::default();
            let config = SyntheticConfig {
                news_articles: news.unwrap_or(defaults.news_articles),
                academic_articles: academic.unwrap_or(defaults.academic_articles),
                sentences_per_article: sentences.unwrap_or(defaults.sentences_per_article),
                seed: cli.seed.unwrap_or(defaults.seed),
                academic_shift: academic_shift.unwrap_or(defaults.academic_shift),
                noise: noise.unwrap_or(defaults.noise),
            };
            let dataset = synthetic::generate(&config).map_err(|e| match e {
                Error::InvalidParameter(m) => CliError::Usage(m),
                other => CliError::Run(other),
            })?;
            let path = ctx.path("synthetic.jsonl");
            corpus::save_dataset(&dataset, &path)?;
            eprintln!("wrote {} articles to {}", dataset.len(), path.display());
            ctx.write_meta(
                "gen-synthetic",
                vec![config.seed],
                serde_json::to_value(config).map_err(Error::from)?,
            )?;
        }
    }
    Ok(())
}
