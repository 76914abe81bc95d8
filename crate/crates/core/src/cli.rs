//! The `nutrec` command line.
//!
//! Every flag can also come from a flat `key = value` config file passed
//! with `--config`. A key may be qualified by subcommand
//! (`train-amounts.learning-rate = 1.0`); unqualified keys apply to every
//! subcommand that has the flag. Flags on the command line win.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 model incompatible with the corpus.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::amounts::{eval_mae, train_amounts, AmountModel, AmountTrainConfig};
use crate::baselines::{build_cooccurrence_graph, nmf_factorize, BinaryMatrix, NmfConfig};
use crate::corpus::{load_nutrient_table, load_recipes, split_corpus, Corpus, IngredientId, NutrientTable, Split};
use crate::embedding::{train_embedding, EmbeddingModel, EmbeddingTrainConfig, NegativeSampling};
use crate::error::{Error, Result};
use crate::eval::{
    eval_missing_ingredient, eval_nutrec, sweep_amounts, top_frequent_itemsets, write_csv_rows, NutrecEvalConfig,
    RandomRanker,
};
use crate::persist;
use crate::predictor::IngredientPredictor;
use crate::recommender::{nutrec_recommend, RecommendConfig, RecommendationReport};
use crate::synth::{generate, SynthConfig};

const CORPUS_KIND: &str = "nutrec-corpus";

#[derive(Debug, Parser)]
#[command(name = "nutrec", version, about = "Nutrition-targeted recipe completion and recommendation")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step (split, training, evaluation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON-lines recipe file (ingest only).
    #[arg(long, global = true)]
    pub recipes: Option<PathBuf>,
    /// Nutrient table CSV.
    #[arg(long, global = true)]
    pub nutrients: Option<PathBuf>,
    #[arg(long, global = true, default_value = "models")]
    pub model_dir: PathBuf,
    #[arg(long, global = true, default_value = "reports")]
    pub report_dir: PathBuf,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the recipe file against the nutrient table, split it 8:1:1 and cache it.
    Ingest,
    /// Train ingredient embeddings on the training split.
    TrainEmbedding(TrainEmbeddingArgs),
    /// Train the amount network on the training split.
    TrainAmounts(TrainAmountsArgs),
    /// Leave-one-out missing-ingredient ranking.
    EvalIp(EvalIpArgs),
    /// Train/validation MAE over a grid of hidden sizes and batch fractions.
    EvalAmounts(EvalAmountsArgs),
    /// Build a pseudo-recipe from the given ingredients and print similar recipes.
    Recommend(RecommendArgs),
    /// Mean WHO score of recommendations seeded by frequent ingredient sets.
    EvalNutrec(EvalNutrecArgs),
    /// Write a synthetic nutrient table and recipe file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Uniform,
    Frequency,
}

#[derive(Debug, Args)]
pub struct TrainEmbeddingArgs {
    #[arg(long, default_value_t = 150)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub final_learning_rate: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub regularization: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = SamplingArg::Uniform)]
    pub sampling: SamplingArg,
    /// Defaults to `<model-dir>/embedding.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AmountTrainArgs {
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct TrainAmountsArgs {
    #[arg(long, default_value_t = 512)]
    pub hidden: usize,
    /// Mini-batch size in percent of the training split.
    #[arg(long, default_value_t = 9.0)]
    pub batch_fraction: f64,
    #[command(flatten)]
    pub train: AmountTrainArgs,
    /// Train only on recipes whose WHO score exceeds this value.
    #[arg(long)]
    pub min_who: Option<u8>,
    /// Defaults to `<model-dir>/amounts.json`, or `amounts-who<N>.json` with `--min-who`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    Embedding,
    Graph,
    Mlp,
    Nmf,
    Random,
}

impl PredictorKind {
    fn name(self) -> &'static str {
        match self {
            PredictorKind::Embedding => "embedding",
            PredictorKind::Graph => "graph",
            PredictorKind::Mlp => "mlp",
            PredictorKind::Nmf => "nmf",
            PredictorKind::Random => "random",
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Defaults to `<model-dir>/embedding.json`.
    #[arg(long)]
    pub embedding_model: Option<PathBuf>,
    /// Defaults to `<model-dir>/amounts.json`, or `amounts-who<N>.json` with `--min-who`.
    #[arg(long)]
    pub amount_model: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub nmf_factors: usize,
    #[arg(long, default_value_t = 200)]
    pub nmf_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalIpArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "embedding")]
    pub predictor: Vec<PredictorKind>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalAmountsArgs {
    #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
    pub hidden_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,9,50")]
    pub batch_fractions: Vec<f64>,
    #[command(flatten)]
    pub train: AmountTrainArgs,
}

#[derive(Debug, Args)]
pub struct RecommendOptions {
    /// Maximum number of ingredients added to the query.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Number of recipes returned.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub candidate_pool: usize,
    /// Multiplies the daily targets, e.g. 0.33 for one of three meals.
    #[arg(long, default_value_t = 1.0)]
    pub target_scale: f64,
    /// Relative instead of raw-gram squared error against the targets.
    #[arg(long)]
    pub normalized_mse: bool,
    /// Use the amount model trained with this WHO filter.
    #[arg(long)]
    pub min_who: Option<u8>,
}

impl RecommendOptions {
    fn config(&self, cos_weight: f64) -> RecommendConfig {
        RecommendConfig {
            n: self.n,
            k: self.k,
            cos_weight,
            candidate_pool: self.candidate_pool,
            target_scale: self.target_scale,
            normalized_mse: self.normalized_mse,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Comma-separated ingredient names from the nutrient table.
    #[arg(long)]
    pub ingredients: String,
    #[arg(long, default_value_t = 0.9)]
    pub cos_weight: f64,
    #[arg(long, value_enum, default_value_t = PredictorKind::Embedding)]
    pub predictor: PredictorKind,
    #[command(flatten)]
    pub options: RecommendOptions,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Also write the report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalNutrecArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "embedding")]
    pub predictors: Vec<PredictorKind>,
    /// Defaults to 0, 0.1, ..., 1.
    #[arg(long, value_delimiter = ',')]
    pub cos_grid: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub set_size: usize,
    #[arg(long, default_value_t = 120)]
    pub set_count: usize,
    /// Average per-set means instead of pooling all recommendations.
    #[arg(long)]
    pub per_set_mean: bool,
    #[command(flatten)]
    pub options: RecommendOptions,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 0.2)]
    pub healthy_fraction: f64,
}

/// Run with `args` (program name first) and print to stdout.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_command_to(args, &mut io::stdout().lock())
}

/// Like [`run_command`], with stdout output going to `out`.
pub fn run_command_to<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match apply_config_file(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    init_logging(cli.verbose);
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Incompatible(_) => 3,
        _ => 2,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn parse_config_file(path: &Path) -> Result<Vec<(Option<String>, String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("{}:{}: expected `key = value`", path.display(), n + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        let (scope, key) = match key.split_once('.') {
            Some((cmd, k)) => (Some(cmd.to_string()), k.to_string()),
            None => (None, key),
        };
        entries.push((scope, key, value));
    }
    Ok(entries)
}

/// Append config-file values as flags for every key the command line left unset.
fn apply_config_file(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let takes_value = |cmd: &clap::Command, long: &str| {
        cmd.get_arguments()
            .find(|a| a.get_long() == Some(long))
            .map(|a| a.get_action().takes_values())
    };
    let strings: Vec<String> = argv.iter().map(|s| s.to_string_lossy().into_owned()).collect();

    // --config is global, so it may sit before or after the subcommand
    let config = strings.iter().enumerate().skip(1).find_map(|(i, tok)| match tok.strip_prefix("--config") {
        Some("") => strings.get(i + 1).cloned(),
        Some(rest) => rest.strip_prefix('=').map(str::to_string),
        None => None,
    });
    // locate the subcommand, skipping global option values
    let mut sub = None;
    let mut i = 1;
    while i < strings.len() {
        let tok = &strings[i];
        if let Some(long) = tok.strip_prefix("--") {
            let needs_value = !long.contains('=') && takes_value(&root, long).unwrap_or(false);
            i += 1 + needs_value as usize;
            continue;
        }
        if !tok.starts_with('-') && root.find_subcommand(tok).is_some() {
            sub = Some(tok.clone());
            break;
        }
        i += 1;
    }
    let (Some(config), Some(sub)) = (config, sub) else {
        return Ok(argv);
    };
    let sub_cmd = root.find_subcommand(&sub).expect("subcommand found above").clone();
    let present = |key: &str| {
        strings.iter().any(|t| t == &format!("--{key}") || t.starts_with(&format!("--{key}=")))
    };
    for (scope, key, value) in parse_config_file(Path::new(&config))? {
        if key == "config" {
            return Err(Error::Config("a config file cannot name another config file".into()));
        }
        if let Some(scope) = &scope {
            if root.find_subcommand(scope).is_none() {
                return Err(Error::Config(format!("config key `{scope}.{key}`: unknown command `{scope}`")));
            }
            if scope != &sub {
                continue;
            }
        }
        let known_anywhere = takes_value(&root, &key).is_some()
            || root.get_subcommands().any(|c| takes_value(c, &key).is_some());
        if !known_anywhere {
            return Err(Error::Config(format!("config key `{key}` is not a known option")));
        }
        let applies = takes_value(&sub_cmd, &key).or_else(|| takes_value(&root, &key));
        let Some(takes) = applies else { continue };
        if present(&key) {
            continue;
        }
        if takes {
            argv.push(format!("--{key}").into());
            argv.push(value.into());
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => argv.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                _ => return Err(Error::Config(format!("config key `{key}` expects true or false"))),
            }
        }
    }
    Ok(argv)
}

struct Workspace {
    table: NutrientTable,
    corpus: Corpus,
}

impl Workspace {
    fn train(&self) -> Corpus {
        self.corpus.part(Split::Train)
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn corpus_path(cli: &Cli) -> PathBuf {
    cli.model_dir.join("corpus.json")
}

fn load_workspace(cli: &Cli) -> Result<Workspace> {
    let table = load_nutrient_table(required(&cli.nutrients, "nutrients")?)?;
    let path = corpus_path(cli);
    if !path.exists() {
        return Err(Error::io(&path, io::Error::new(io::ErrorKind::NotFound, "corpus cache missing; run `ingest` first")));
    }
    let corpus: Corpus = persist::load(&path, CORPUS_KIND)?;
    corpus.check_compatible(&table)?;
    corpus.validate()?;
    if !corpus.is_split() {
        return Err(Error::load(path.display().to_string(), "cached corpus has no split"));
    }
    Ok(Workspace { table, corpus })
}

fn amounts_path(cli: &Cli, explicit: &Option<PathBuf>, min_who: Option<u8>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| match min_who {
        Some(w) => cli.model_dir.join(format!("amounts-who{w}.json")),
        None => cli.model_dir.join("amounts.json"),
    })
}

fn load_embedding(cli: &Cli, models: &ModelArgs, ws: &Workspace) -> Result<EmbeddingModel> {
    let path = models.embedding_model.clone().unwrap_or_else(|| cli.model_dir.join("embedding.json"));
    let model = EmbeddingModel::load(&path)?;
    persist::check_vocab("embedding", model.vocab_hash(), ws.corpus.vocab_hash())?;
    Ok(model)
}

fn load_amounts(cli: &Cli, models: &ModelArgs, min_who: Option<u8>, ws: &Workspace) -> Result<AmountModel> {
    let model = AmountModel::load(amounts_path(cli, &models.amount_model, min_who))?;
    persist::check_vocab("amount", model.vocab_hash(), ws.corpus.vocab_hash())?;
    Ok(model)
}

/// Predictors are built lazily so only the requested models must exist.
fn build_predictor(
    kind: PredictorKind,
    cli: &Cli,
    models: &ModelArgs,
    min_who: Option<u8>,
    ws: &Workspace,
) -> Result<Box<dyn IngredientPredictor>> {
    Ok(match kind {
        PredictorKind::Embedding => Box::new(load_embedding(cli, models, ws)?),
        PredictorKind::Graph => Box::new(build_cooccurrence_graph(&ws.train())),
        PredictorKind::Mlp => Box::new(load_amounts(cli, models, min_who, ws)?),
        PredictorKind::Nmf => {
            let cfg = NmfConfig { factors: models.nmf_factors, iterations: models.nmf_iterations, seed: cli.seed, ..Default::default() };
            Box::new(nmf_factorize(&BinaryMatrix::from_corpus(&ws.train()), &cfg)?)
        }
        PredictorKind::Random => Box::new(RandomRanker { vocab_size: ws.table.len(), seed: cli.seed }),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    write_csv_rows(&mut w, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ingest => ingest(cli),
        Command::TrainEmbedding(a) => cmd_train_embedding(cli, a),
        Command::TrainAmounts(a) => cmd_train_amounts(cli, a),
        Command::EvalIp(a) => cmd_eval_ip(cli, a),
        Command::EvalAmounts(a) => cmd_eval_amounts(cli, a),
        Command::Recommend(a) => cmd_recommend(cli, a, out),
        Command::EvalNutrec(a) => cmd_eval_nutrec(cli, a),
        Command::Synth(a) => {
            let cfg = SynthConfig { recipes: a.count, healthy_fraction: a.healthy_fraction, seed: cli.seed, ..Default::default() };
            generate(&cfg)?.write(&a.out)
        }
    }
}

fn ingest(cli: &Cli) -> Result<()> {
    #[derive(Serialize)]
    struct IngestSummary {
        recipes: usize,
        vocabulary: usize,
        vocab_hash: String,
        train: usize,
        validation: usize,
        test: usize,
        load: crate::corpus::LoadReport,
    }
    let table = load_nutrient_table(required(&cli.nutrients, "nutrients")?)?;
    let (corpus, report) = load_recipes(required(&cli.recipes, "recipes")?, &table)?;
    let corpus = split_corpus(corpus, cli.seed)?;
    persist::save(corpus_path(cli), CORPUS_KIND, &corpus)?;
    let [train, validation, test] = corpus.split_sizes();
    log::info!("cached {} recipes ({train}/{validation}/{test})", corpus.len());
    let summary = IngestSummary {
        recipes: corpus.len(),
        vocabulary: corpus.vocab_size(),
        vocab_hash: corpus.vocab_hash().to_string(),
        train,
        validation,
        test,
        load: report,
    };
    write_json(&cli.report_dir.join("ingest.json"), &summary)
}

fn cmd_train_embedding(cli: &Cli, a: &TrainEmbeddingArgs) -> Result<()> {
    let ws = load_workspace(cli)?;
    let cfg = EmbeddingTrainConfig {
        dim: a.dim,
        negatives: a.negatives,
        learning_rate: a.learning_rate,
        final_learning_rate: a.final_learning_rate,
        regularization: a.regularization,
        epochs: a.epochs,
        seed: cli.seed,
        sampling: match a.sampling {
            SamplingArg::Uniform => NegativeSampling::Uniform,
            SamplingArg::Frequency => NegativeSampling::Frequency,
        },
    };
    cfg.validate()?;
    let model = train_embedding(&ws.train(), &cfg)?;
    let path = a.output.clone().unwrap_or_else(|| cli.model_dir.join("embedding.json"));
    model.save(&path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn amount_config(t: &AmountTrainArgs, hidden_size: usize, batch_fraction: f64, seed: u64) -> AmountTrainConfig {
    AmountTrainConfig {
        hidden_size,
        batch_fraction,
        learning_rate: t.learning_rate,
        momentum: t.momentum,
        epochs: t.epochs,
        seed,
    }
}

fn cmd_train_amounts(cli: &Cli, a: &TrainAmountsArgs) -> Result<()> {
    let ws = load_workspace(cli)?;
    let cfg = amount_config(&a.train, a.hidden, a.batch_fraction, cli.seed);
    cfg.validate()?;
    let model = train_amounts(&ws.train(), &ws.table, &cfg, a.min_who)?;
    let path = amounts_path(cli, &a.output, a.min_who);
    model.save(&path)?;
    let validation = ws.corpus.part(Split::Validation);
    if !validation.is_empty() {
        log::info!("validation MAE {:.4}", eval_mae(&model, validation.recipes())?);
    }
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_eval_ip(cli: &Cli, a: &EvalIpArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        predictor: &'static str,
        split: String,
        recipes: usize,
        pct_top10: f64,
        mean_rank: f64,
        median_rank: f64,
    }
    #[derive(Serialize)]
    struct RankRow<'a> {
        predictor: &'static str,
        recipe_id: &'a str,
        removed: usize,
        rank: usize,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: u64,
        split: String,
        results: &'a [Row],
    }
    let ws = load_workspace(cli)?;
    let split = Split::from(a.split);
    let split_name = format!("{split:?}").to_lowercase();
    let recipes = ws.corpus.part(split);
    if recipes.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let mut rows = Vec::new();
    let mut all_metrics = Vec::new();
    for &kind in &a.predictor {
        let predictor = build_predictor(kind, cli, &a.models, None, &ws)?;
        let metrics = eval_missing_ingredient(&predictor.as_ref(), recipes.recipes(), cli.seed)?;
        log::info!("{}: top-10 {:.1}%", kind.name(), metrics.pct_top10);
        rows.push(Row {
            predictor: kind.name(),
            split: split_name.clone(),
            recipes: recipes.len(),
            pct_top10: metrics.pct_top10,
            mean_rank: metrics.mean_rank,
            median_rank: metrics.median_rank,
        });
        all_metrics.push((kind.name(), metrics));
    }
    let ranks: Vec<RankRow> = all_metrics
        .iter()
        .flat_map(|(name, m)| {
            m.trials.iter().map(move |t| RankRow { predictor: name, recipe_id: &t.recipe_id, removed: t.removed.index(), rank: t.rank })
        })
        .collect();
    write_csv(&cli.report_dir.join("eval-ip.csv"), &rows)?;
    write_csv(&cli.report_dir.join("eval-ip-ranks.csv"), &ranks)?;
    write_json(&cli.report_dir.join("eval-ip.json"), &Summary { seed: cli.seed, split: split_name, results: &rows })
}

fn cmd_eval_amounts(cli: &Cli, a: &EvalAmountsArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: u64,
        learning_rate: f64,
        momentum: f64,
        epochs: usize,
        rows: &'a [crate::eval::AmountSweepRow],
        best: Option<&'a crate::eval::AmountSweepRow>,
    }
    let ws = load_workspace(cli)?;
    let base = amount_config(&a.train, 1, 9.0, cli.seed);
    let rows = sweep_amounts(
        &ws.train(),
        &ws.corpus.part(Split::Validation),
        &ws.table,
        &base,
        &a.hidden_sizes,
        &a.batch_fractions,
    )?;
    let best = rows.iter().min_by(|x, y| x.validation_mae.total_cmp(&y.validation_mae));
    write_csv(&cli.report_dir.join("eval-amounts.csv"), &rows)?;
    let summary = Summary { seed: cli.seed, learning_rate: a.train.learning_rate, momentum: a.train.momentum, epochs: a.train.epochs, rows: &rows, best };
    write_json(&cli.report_dir.join("eval-amounts.json"), &summary)
}

fn parse_ingredients(list: &str, table: &NutrientTable) -> Result<Vec<IngredientId>> {
    let ids = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| table.id(name).ok_or_else(|| Error::UnknownIngredient(name.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(Error::Config("--ingredients names no ingredient".into()));
    }
    Ok(ids)
}

fn cmd_recommend(cli: &Cli, a: &RecommendArgs, out: &mut dyn Write) -> Result<()> {
    let ws = load_workspace(cli)?;
    let initial = parse_ingredients(&a.ingredients, &ws.table)?;
    let cfg = a.options.config(a.cos_weight);
    cfg.validate()?;
    let amounts = load_amounts(cli, &a.models, a.options.min_who, &ws)?;
    let ip = build_predictor(a.predictor, cli, &a.models, a.options.min_who, &ws)?;
    let (pseudo, recs) = nutrec_recommend(&initial, &ip.as_ref(), &amounts, &ws.corpus, &ws.table, &cfg)?;
    let report = RecommendationReport::new(&pseudo, &recs, &ws.corpus, &ws.table, &cfg)?;
    if let Some(path) = &a.output {
        write_json(path, &report)?;
    }
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_eval_nutrec(cli: &Cli, a: &EvalNutrecArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: u64,
        set_size: usize,
        sets_requested: usize,
        sets_short: bool,
        seed_sets: Vec<Vec<String>>,
        config: &'a NutrecEvalConfig,
        report: &'a crate::eval::WhoReport,
    }
    let ws = load_workspace(cli)?;
    let mut cfg = NutrecEvalConfig { recommend: a.options.config(0.9), per_set_mean: a.per_set_mean, ..Default::default() };
    if !a.cos_grid.is_empty() {
        cfg.cos_grid = a.cos_grid.clone();
    }
    cfg.recommend.validate()?;
    let frequent = top_frequent_itemsets(&ws.train(), a.set_size, a.set_count)?;
    if frequent.short {
        log::warn!("only {} ingredient sets reach support 2", frequent.sets.len());
    }
    let sets: Vec<Vec<IngredientId>> = frequent.sets.iter().map(|(s, _)| s.clone()).collect();
    let amounts = load_amounts(cli, &a.models, a.options.min_who, &ws)?;
    let mut boxed = Vec::new();
    for &kind in &a.predictors {
        boxed.push((kind.name(), build_predictor(kind, cli, &a.models, a.options.min_who, &ws)?));
    }
    let predictors: Vec<(&str, &dyn IngredientPredictor)> = boxed.iter().map(|(n, p)| (*n, p.as_ref())).collect();
    let report = eval_nutrec(&ws.corpus, &sets, &predictors, &amounts, &ws.table, &cfg, a.options.min_who)?;
    let path = cli.report_dir.join("eval-nutrec.csv");
    let mut w = create(&path)?;
    report.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    let name = |id: &IngredientId| ws.table.name(*id).unwrap_or("?").to_string();
    let summary = Summary {
        seed: cli.seed,
        set_size: a.set_size,
        sets_requested: a.set_count,
        sets_short: frequent.short,
        seed_sets: sets.iter().map(|s| s.iter().map(name).collect()).collect(),
        config: &cfg,
        report: &report,
    };
    write_json(&cli.report_dir.join("eval-nutrec.json"), &summary)
}
