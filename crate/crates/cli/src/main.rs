//! `dihedral`: train, evaluate and inspect DihEdral knowledge-graph embeddings.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dihedral_kge::analysis::{
    component_csv, component_histogram, composition_product, diagonal_csv, inversion_product,
    parse_tuples, HardRelations, ProductSummary,
};
use dihedral_kge::checkpoint::Checkpoint;
use dihedral_kge::dataset::{write_family, FamilySpec, Split, TripleStore};
use dihedral_kge::eval::{evaluate, EvalOptions};
use dihedral_kge::trainer::{train_with, TrainConfig};
use dihedral_kge::{Error, Mode, Model};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

const THREADS_ENV: &str = "DIHEDRAL_THREADS";

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "dihedral", version, about = "DihEdral knowledge-graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write checkpoints, a log and a manifest.
    Train(TrainArgs),
    /// Print filtered MRR and HITS@{1,3,10} of a checkpoint as JSON.
    Evaluate(EvaluateArgs),
    /// Generate the synthetic FAMILY dataset.
    FamilyGen(FamilyGenArgs),
    /// Inversion / composition products and component histograms.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// TOML file with config keys at top level.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// One flag per config key; set flags win over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    k: Option<u16>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long = "learning_rate", visible_alias = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long = "l2_lambda", visible_alias = "l2-lambda")]
    l2_lambda: Option<f64>,
    #[arg(long = "batch_size", visible_alias = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "neg_ratio", visible_alias = "neg-ratio")]
    neg_ratio: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long = "tau_floor", visible_alias = "tau-floor")]
    tau_floor: Option<f64>,
    #[arg(long = "tau_decay", visible_alias = "tau-decay")]
    tau_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated relation names.
    #[arg(long = "skew_relations", visible_alias = "skew-relations", value_delimiter = ',')]
    skew_relations: Option<Vec<String>>,
    #[arg(long = "skew_prob", visible_alias = "skew-prob")]
    skew_prob: Option<f64>,
    #[arg(long = "component_reg", visible_alias = "component-reg")]
    component_reg: Option<bool>,
    #[arg(long = "eval_every", visible_alias = "eval-every")]
    eval_every: Option<usize>,
    #[arg(long = "eval_cap", visible_alias = "eval-cap")]
    eval_cap: Option<usize>,
}

impl Overrides {
    fn apply(self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            k,
            dim,
            mode,
            learning_rate,
            l2_lambda,
            batch_size,
            neg_ratio,
            epochs,
            tau0,
            tau_floor,
            tau_decay,
            seed,
            skew_relations,
            skew_prob,
            component_reg,
            eval_every,
            eval_cap
        );
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Score Gumbel relations with the noise-free softmax at this temperature.
    #[arg(long, value_name = "TAU")]
    soft: Option<f64>,
    /// Rank against all entities instead of the filtered candidate set.
    #[arg(long)]
    raw: bool,
    /// Also write per-relation metrics to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FamilyGenArgs {
    #[arg(long, default_value_t = 200)]
    people: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AnalysisKind {
    Inversion,
    Composition,
    Histogram,
}

impl AnalysisKind {
    fn arity(self) -> usize {
        match self {
            AnalysisKind::Inversion => 2,
            AnalysisKind::Composition => 3,
            AnalysisKind::Histogram => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            AnalysisKind::Inversion => "inversion",
            AnalysisKind::Composition => "composition",
            AnalysisKind::Histogram => "histogram",
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    kind: AnalysisKind,
    #[arg(long)]
    checkpoint: PathBuf,
    /// One comma-separated relation tuple per line: `r1,r2` for inversion,
    /// `r1,r2,r3` for composition, `r` for histogram (default: all relations).
    #[arg(long)]
    tuples: Option<PathBuf>,
    /// Directory for `<kind>.csv` and `<kind>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::FamilyGen(args) => cmd_family_gen(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))
}

/// Defaults, then the config file, then flags.
fn resolve_config(path: Option<&Path>, overrides: Overrides) -> CliResult<TrainConfig> {
    let mut config = match path {
        None => TrainConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
            if let Some(bad) = table.keys().find(|k| !TrainConfig::KEYS.contains(&k.as_str())) {
                return Err(CliError::usage(format!(
                    "unknown config key `{bad}` in {}; valid keys: {}",
                    path.display(),
                    TrainConfig::KEYS.join(", ")
                )));
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?
        }
    };
    overrides.apply(&mut config);
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

fn load_store(dir: &Path) -> CliResult<TripleStore> {
    if !dir.is_dir() {
        return Err(CliError::data(format!("dataset directory {} does not exist", dir.display())));
    }
    Ok(TripleStore::load_tsv(dir)?)
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> CliResult {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::data(format!("cannot write to stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::from(Error::from(e)))
}

#[derive(Serialize)]
struct CheckpointEntry {
    file: String,
    sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    valid_mrr: Option<f64>,
}

#[derive(Serialize)]
struct DatasetEntry {
    path: String,
    entities: usize,
    relations: usize,
    train: usize,
    valid: usize,
    test: usize,
    entity_dict_sha256: String,
    relation_dict_sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    config: TrainConfig,
    seed: u64,
    dataset: DatasetEntry,
    checkpoint_best: CheckpointEntry,
    checkpoint_final: CheckpointEntry,
    /// Outputs depend only on the config, the data and the seed.
    deterministic: bool,
}

const BEST_FILE: &str = "checkpoint_best.bin";
const FINAL_FILE: &str = "checkpoint_final.bin";

fn save_checkpoint(
    model: &Model<f32>,
    store: &TripleStore,
    dir: &Path,
    file: &str,
) -> CliResult<(Checkpoint, String)> {
    let ckpt = Checkpoint::from_model(model, store)?;
    let bytes = ckpt.to_bytes()?;
    write_file(&dir.join(file), &bytes)?;
    let sha = ckpt.sha256()?;
    Ok((ckpt, sha))
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let config = resolve_config(args.config.as_deref(), args.overrides)?;
    let store = load_store(&args.data)?;
    for name in &config.skew_relations {
        store.relation_id(name)?;
    }
    create_dir(&args.out)?;
    let log_path = args.out.join("train_log.jsonl");
    let mut log_file = fs::File::create(&log_path)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", log_path.display())))?;
    let mut log_error = None;
    let outcome = train_with::<f32>(&store, &config, |stats| {
        match stats.valid_mrr {
            Some(mrr) => log::info!("epoch {} loss {:.4} tau {:.3} valid MRR {mrr:.4}", stats.epoch, stats.mean_loss, stats.tau),
            None => log::info!("epoch {} loss {:.4} tau {:.3}", stats.epoch, stats.mean_loss, stats.tau),
        }
        let line = serde_json::to_string(stats).expect("stats serialize");
        if let Err(e) = writeln!(log_file, "{line}") {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error {
        return Err(CliError::data(format!("cannot write {}: {e}", log_path.display())));
    }

    let (best_ckpt, best_sha) = save_checkpoint(&outcome.best, &store, &args.out, BEST_FILE)?;
    let (_, final_sha) = save_checkpoint(&outcome.model, &store, &args.out, FINAL_FILE)?;
    let relations = best_ckpt.hard_relations()?;
    write_file(&args.out.join("relations.json"), to_json(&relations.to_export())? + "\n")?;

    let manifest = Manifest {
        seed: config.seed,
        dataset: DatasetEntry {
            path: args.data.display().to_string(),
            entities: store.num_entities(),
            relations: store.num_relations(),
            train: store.train().len(),
            valid: store.valid().len(),
            test: store.test().len(),
            entity_dict_sha256: store.entities().fingerprint(),
            relation_dict_sha256: store.relations().fingerprint(),
        },
        checkpoint_best: CheckpointEntry {
            file: BEST_FILE.into(),
            sha256: best_sha,
            epoch: outcome.best_epoch,
            valid_mrr: outcome.best_valid_mrr,
        },
        checkpoint_final: CheckpointEntry {
            file: FINAL_FILE.into(),
            sha256: final_sha,
            epoch: config.epochs.checked_sub(1),
            valid_mrr: outcome.log.last().and_then(|s| s.valid_mrr),
        },
        config,
        deterministic: true,
    };
    let json = to_json(&manifest)?;
    write_file(&args.out.join("manifest.json"), json.clone() + "\n")?;
    emit(&json)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let store = load_store(&args.data)?;
    ckpt.check_dictionaries(&store).map_err(|e| {
        CliError::data(format!(
            "{e}; checkpoint {} was trained on a different dataset than {}",
            args.checkpoint.display(),
            args.data.display()
        ))
    })?;
    if let Some(tau) = args.soft {
        if !(tau > 0.0) {
            return Err(CliError::usage(format!("--soft needs a positive temperature, got {tau}")));
        }
    }
    let model = ckpt.to_model::<f32>()?;
    let options = EvalOptions {
        soft_tau: args.soft,
        filtered: !args.raw,
    };
    let report = evaluate(args.split, &model, &store, &options)?;
    if let Some(csv) = &args.csv {
        write_file(csv, report.per_relation_csv())?;
    }
    emit(&to_json(&report)?)?;
    Ok(())
}

fn cmd_family_gen(args: FamilyGenArgs) -> CliResult {
    if args.people == 0 || args.people % 2 != 0 {
        return Err(CliError::usage(format!(
            "--people must be a positive even number, got {}",
            args.people
        )));
    }
    create_dir(&args.out)?;
    let spec = FamilySpec {
        people_per_generation: args.people,
        seed: args.seed,
    };
    let provenance = write_family(&args.out, &spec)?;
    emit(&to_json(&provenance)?)?;
    Ok(())
}

#[derive(Serialize)]
struct CompositionSummary {
    correct: ProductSummary,
    swapped: ProductSummary,
}

#[derive(Serialize)]
struct HistogramSummary {
    relation: String,
    counts: std::collections::BTreeMap<String, usize>,
    symmetric: usize,
    skew_symmetric: usize,
    neither: usize,
}

fn cmd_analyze(args: AnalyzeArgs) -> CliResult {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let rels = ckpt.hard_relations()?;
    let kind = args.kind;
    let tuples = match &args.tuples {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            parse_tuples(&text, kind.arity(), &rels).map_err(|e| match e {
                Error::Parse { line, message, .. } => {
                    CliError::data(format!("{}:{line}: {message}", path.display()))
                }
                other => other.into(),
            })?
        }
        None if kind == AnalysisKind::Histogram => rels.names().iter().map(|n| vec![n.clone()]).collect(),
        None => return Err(CliError::usage(format!("{} analysis needs --tuples", kind.name()))),
    };
    let (csv, json) = analyze(kind, &rels, &tuples)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join(format!("{}.csv", kind.name())), csv)?;
        write_file(&out.join(format!("{}.json", kind.name())), json.clone() + "\n")?;
    }
    emit(&json)?;
    Ok(())
}

fn analyze(kind: AnalysisKind, rels: &HardRelations, tuples: &[Vec<String>]) -> CliResult<(String, String)> {
    Ok(match kind {
        AnalysisKind::Inversion => {
            let hists = tuples
                .iter()
                .map(|t| inversion_product(rels, &t[0], &t[1]))
                .collect::<Result<Vec<_>, _>>()?;
            let summary: Vec<ProductSummary> = hists.iter().map(ProductSummary::from).collect();
            (diagonal_csv(&hists), to_json(&summary)?)
        }
        AnalysisKind::Composition => {
            let reports = tuples
                .iter()
                .map(|t| composition_product(rels, &t[0], &t[1], &t[2]))
                .collect::<Result<Vec<_>, _>>()?;
            let hists: Vec<_> = reports
                .iter()
                .flat_map(|r| [r.correct.clone(), r.swapped.clone()])
                .collect();
            let summary: Vec<CompositionSummary> = reports
                .iter()
                .map(|r| CompositionSummary {
                    correct: (&r.correct).into(),
                    swapped: (&r.swapped).into(),
                })
                .collect();
            (diagonal_csv(&hists), to_json(&summary)?)
        }
        AnalysisKind::Histogram => {
            let hists = tuples
                .iter()
                .map(|t| component_histogram(rels, &t[0]))
                .collect::<Result<Vec<_>, _>>()?;
            let summary: Vec<HistogramSummary> = hists
                .iter()
                .map(|h| HistogramSummary {
                    relation: h.relation.clone(),
                    counts: h.labels.iter().cloned().zip(h.counts.iter().copied()).collect(),
                    symmetric: h.symmetric,
                    skew_symmetric: h.skew_symmetric,
                    neither: h.neither,
                })
                .collect();
            (component_csv(&hists), to_json(&summary)?)
        }
    })
}
