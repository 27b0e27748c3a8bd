//! Command-line front end: train, disambiguate, evaluate, gradcheck, inspect.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use morphdis::analyzer::{check_consistency, default_rules, load_dictionary, load_rules, MorphDictionary};
use morphdis::checkpoint::Checkpoint;
use morphdis::corpus::tsv::{read_rows, token_from_row, token_from_wide_row};
use morphdis::corpus::{parse_corpus, parse_embeddings, Normalizer, Sentence};
use morphdis::disambig::{disambiguate, output_line, Mode, RankingWeights};
use morphdis::gradsuite::{run_suite, small_config};
use morphdis::metrics::{evaluate, Tally};
use morphdis::model::DecodeConfig;
use morphdis::nn::GradCheckOptions;
use morphdis::train::{TrainConfig, Trainer};
use morphdis::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "morphdis", version, about = "Joint morphological tagging, lemmatization and diacritization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, epoch log and summary.
    Train(TrainArgs),
    /// Pick a full analysis for every token of a corpus-format file.
    Disambiguate(DisambiguateArgs),
    /// Score a system file against gold.
    Evaluate(EvaluateArgs),
    /// Finite-difference gradient checks on a fresh model.
    Gradcheck(GradcheckArgs),
    /// Print a checkpoint's settings and tensor shapes.
    Inspect(InspectArgs),
}

#[derive(Args, Default)]
struct Common {
    /// key=value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    normalization: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DisambiguateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// `analyzer` or `model`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    beam_width: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    normalization: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
    /// A check ran to completion and failed.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
            CliError::Failed(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self.code() {
            1 => "usage",
            2 => "data",
            _ => "numeric",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Prints to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const PATH_KEYS: &[&str] = &[
    "corpus",
    "dictionary",
    "embeddings",
    "normalization",
    "rules",
    "out",
    "resume",
    "checkpoint",
    "input",
    "output",
    "weights",
    "gold",
    "system",
    "mode",
];

/// Settings after merging the config file, `--set` and dedicated flags.
struct Resolved {
    train: TrainConfig,
    paths: BTreeMap<String, String>,
}

impl Resolved {
    fn path(&self, key: &str) -> Option<PathBuf> {
        self.paths.get(key).map(PathBuf::from)
    }

    fn require(&self, key: &str) -> CliResult<PathBuf> {
        self.path(key)
            .ok_or_else(|| CliError::Usage(format!("missing required setting {key} (use --{key})")))
    }

    fn log(&self, command: &str) -> String {
        let mut s = format!("# morphdis {command}\n");
        for (k, v) in &self.paths {
            s.push_str(&format!("{k}={v}\n"));
        }
        for (k, v) in self.train.entries() {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}

fn apply_entry(r: &mut Resolved, key: &str, value: &str, source: &str) -> CliResult<()> {
    if PATH_KEYS.contains(&key) {
        r.paths.insert(key.to_string(), value.to_string());
        return Ok(());
    }
    r.train.set(key, value).map_err(|e| match e {
        Error::Config(m) => CliError::Usage(format!("{source}: {m}")),
        e => CliError::Core(e),
    })
}

fn resolve(base: TrainConfig, common: &Common, flags: &[(&str, Option<String>)]) -> CliResult<Resolved> {
    let mut r = Resolved {
        train: base,
        paths: BTreeMap::new(),
    };
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let source = path.display().to_string();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{source}:{}: expected key=value", n + 1)))?;
            let (k, mut v) = (k.trim(), v.trim().to_string());
            // paths in a settings file are relative to that file
            if PATH_KEYS.contains(&k) && k != "mode" && Path::new(&v).is_relative() {
                if let Some(dir) = path.parent() {
                    v = dir.join(&v).display().to_string();
                }
            }
            apply_entry(&mut r, k, &v, &format!("{source}:{}", n + 1))?;
        }
    }
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        apply_entry(&mut r, k.trim(), v.trim(), "--set")?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            apply_entry(&mut r, k, v, "flag")?;
        }
    }
    Ok(r)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn load_normalizer(path: Option<PathBuf>) -> CliResult<Normalizer> {
    Ok(match path {
        Some(p) => Normalizer::load(&p)?,
        None => Normalizer::default(),
    })
}

fn load_dict(r: &Resolved, normalizer: &Normalizer) -> CliResult<Option<MorphDictionary>> {
    let Some(path) = r.path("dictionary") else {
        return Ok(None);
    };
    let dict = load_dictionary(&path, normalizer)?;
    let rules = match r.path("rules") {
        Some(p) => load_rules(&p)?,
        None => default_rules(),
    };
    let inconsistent = dict
        .analyses()
        .filter(|a| !check_consistency(a, &rules).is_empty())
        .count();
    eprintln!(
        "dictionary {}: {} surfaces, {} analyses, {} inconsistent",
        path.display(),
        dict.surface_count(),
        dict.entry_count(),
        inconsistent
    );
    Ok(Some(dict))
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Core(Error::io(path, e)))
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let r = resolve(
        TrainConfig::default(),
        &a.common,
        &[
            ("corpus", path_flag(&a.corpus)),
            ("dictionary", path_flag(&a.dictionary)),
            ("embeddings", path_flag(&a.embeddings)),
            ("normalization", path_flag(&a.normalization)),
            ("rules", path_flag(&a.rules)),
            ("out", path_flag(&a.out)),
            ("resume", path_flag(&a.resume)),
            ("epochs", a.epochs.map(|e| e.to_string())),
            ("seed", a.seed.map(|s| s.to_string())),
        ],
    )?;
    r.train.validate()?;
    let corpus_path = r.require("corpus")?;
    let out = r.require("out")?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let resolved = r.log("train");
    eprint!("{resolved}");
    write_file(&out.join("config.resolved"), resolved.as_bytes())?;

    let corpus = parse_corpus(&corpus_path)?;
    let resume = r.path("resume").map(|p| Checkpoint::load(&p)).transpose()?;
    let normalizer = match &resume {
        Some(ckpt) => ckpt.vocab.normalizer().clone(),
        None => load_normalizer(r.path("normalization"))?,
    };
    let dict = load_dict(&r, &normalizer)?;
    let mut trainer = match resume {
        Some(ckpt) => Trainer::resume(ckpt, r.train.clone(), &corpus, dict.as_ref())?,
        None => {
            let embeddings = match r.path("embeddings") {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    Some(parse_embeddings(&text, r.train.model.word_dim, &p.display().to_string())?)
                }
                None => None,
            };
            Trainer::new(r.train.clone(), &corpus, dict.as_ref(), normalizer, embeddings.as_ref())?
        }
    };
    let report = trainer.train_with(|rec, _| {
        eprintln!("{}", rec.log_line());
        true
    })?;
    trainer.checkpoint().save(&out.join("model.ckpt"))?;
    write_file(&out.join("train_log.txt"), report.log_text().as_bytes())?;
    write_file(&out.join("summary.json"), report.summary_json().as_bytes())?;
    match (&report.best_epoch, &report.final_tune) {
        (Some(b), Some(m)) => out!("best_epoch={b} final_tune {}", m.summary_line()),
        _ => out!("best_epoch=none epochs=0"),
    }
    Ok(())
}

fn cmd_disambiguate(a: DisambiguateArgs) -> CliResult<()> {
    let r = resolve(
        TrainConfig::default(),
        &a.common,
        &[
            ("checkpoint", path_flag(&a.checkpoint)),
            ("input", path_flag(&a.input)),
            ("output", path_flag(&a.output)),
            ("dictionary", path_flag(&a.dictionary)),
            ("weights", path_flag(&a.weights)),
            ("rules", path_flag(&a.rules)),
            ("mode", a.mode.clone()),
            ("beam_width", a.beam_width.map(|b| b.to_string())),
        ],
    )?;
    let ckpt_path = r.require("checkpoint")?;
    let input = r.require("input")?;
    let mode = match r.paths.get("mode").map(String::as_str) {
        None | Some("analyzer") => Mode::Analyzer,
        Some("model") => Mode::Model,
        Some(m) => return Err(CliError::Usage(format!("mode must be analyzer or model, got {m:?}"))),
    };
    if r.train.beam_width == 0 {
        return Err(CliError::Usage("beam_width must be positive".into()));
    }
    eprint!("{}", r.log("disambiguate"));
    let model = Checkpoint::load(&ckpt_path)?.inference_model()?;
    let dict = load_dict(&r, model.vocab.normalizer())?;
    if mode == Mode::Analyzer && dict.is_none() {
        eprintln!("note: no dictionary given, every token is reported in model mode");
    }
    let weights = match r.path("weights") {
        Some(p) => RankingWeights::load(&p)?,
        None => RankingWeights::default(),
    };
    let decode = DecodeConfig::default().with_beam(r.train.beam_width);
    let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
    let source = input.display().to_string();
    let sentences = read_rows(&text, &source)?;
    let mut out = String::new();
    let mut tally = Tally::default();
    let mut all_gold = true;
    for rows in &sentences {
        let surfaces: Vec<&str> = rows.iter().map(|row| row.cols[0].as_str()).collect();
        if let Some(row) = rows.iter().find(|row| row.cols[0].is_empty()) {
            return Err(Error::parse(&source, row.line, "empty surface form").into());
        }
        let chosen = disambiguate(&model, dict.as_ref(), &weights, mode, &surfaces, &decode)?;
        for (row, d) in rows.iter().zip(&chosen) {
            out.push_str(&output_line(&row.cols[0], d));
            out.push('\n');
            if row.cols.len() >= 17 {
                tally.add(&token_from_row(row, &source)?.gold, &d.analysis);
            } else {
                all_gold = false;
            }
        }
        out.push('\n');
    }
    match r.path("output") {
        Some(p) => write_file(&p, out.as_bytes())?,
        None => {
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
        }
    }
    if all_gold && !sentences.is_empty() {
        eprintln!("gold columns present: {}", tally.report(sentences.len()).summary_line());
    }
    Ok(())
}

fn read_system(path: &Path) -> CliResult<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    let rows = read_rows(&text, &source)?;
    Ok(rows
        .iter()
        .map(|s| s.iter().map(|row| token_from_wide_row(row, &source)).collect())
        .collect::<Result<Vec<_>, _>>()?)
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult<()> {
    let r = resolve(
        TrainConfig::default(),
        &a.common,
        &[
            ("gold", path_flag(&a.gold)),
            ("system", path_flag(&a.system)),
            ("normalization", path_flag(&a.normalization)),
        ],
    )?;
    let gold = parse_corpus(&r.require("gold")?)?;
    let system = read_system(&r.require("system")?)?;
    let normalizer = load_normalizer(r.path("normalization"))?;
    let report = evaluate(&gold, &system, &normalizer)?;
    if a.json {
        out!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        out!("{}", report.summary_line());
        for (f, acc) in &report.per_feature {
            out!("feature={f} accuracy={acc:.4}");
        }
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CliResult<()> {
    let base = TrainConfig {
        model: small_config(),
        ..TrainConfig::default()
    };
    let r = resolve(base, &a.common, &[("seed", a.seed.map(|s| s.to_string()))])?;
    r.train.model.validate()?;
    eprint!("{}", r.log("gradcheck"));
    let mut opts = GradCheckOptions::default();
    if let Some(t) = a.tolerance {
        opts.tolerance = t;
    }
    let checks = run_suite(&r.train.model, r.train.seed, &opts)?;
    let mut failed = Vec::new();
    for c in &checks {
        let ok = c.report.passed();
        out!(
            "component={} entries={} max_rel_error={:.3e} status={}",
            c.component,
            c.report.entries.len(),
            c.report.max_rel_error,
            if ok { "pass" } else { "fail" }
        );
        if !ok {
            failed.push(c.component);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradient check above tolerance {:e} in {}",
            opts.tolerance,
            failed.join(",")
        )))
    }
}

fn cmd_inspect(a: InspectArgs) -> CliResult<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let _ = std::io::stdout().lock().write_all(ckpt.describe().as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage message={first:?}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Disambiguate(a) => cmd_disambiguate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.message());
            ExitCode::from(e.code())
        }
    }
}
