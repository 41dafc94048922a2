//! Command-line entry point: `ingest`, `train`, `eval`, `cv`, `predict` and
//! `stream` subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
//! divergence during training. Results go to standard output (or `--out`
//! files), diagnostics to standard error.
//!
//! `--config <file>` reads a TOML table whose keys are long flag names
//! (`seed = 7`, `train-fraction = 0.8`, `fit-on-train = true`). Config
//! values are applied first, so flags given on the command line win.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::alarm::{frames_from_records, read_jsonl_frames, AlarmPolicy, Replayer, SensorFrame};
use crate::ann::{load_model, save_model, NetworkConfig, CLASS_COUNT};
use crate::error::Error;
use crate::ingest::{parse_air_quality_csv, ChannelId, CsvDialect, RawFeatureRow};
use crate::metrics::{evaluate, stratified_kfold_cv};
use crate::pipeline::{load_rows, train_holdout, PrepareOptions};
use crate::preprocess::{apply_scaler, label_rows, RiskThresholds, ScoreRule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "airq-alarm",
    version,
    about = "Air-quality risk classifier and stream alarm",
    args_override_self = true
)]
struct Cli {
    /// TOML file with default flag values (keys are long flag names).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a dataset and print row diagnostics.
    Ingest(IngestArgs),
    /// Run the full pipeline and write a model file.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Classify one row of raw readings.
    Predict(PredictArgs),
    /// Replay a frame stream through the alarm.
    Stream(StreamArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreRuleArg {
    Mean8,
    Mean5,
}

impl From<ScoreRuleArg> for ScoreRule {
    fn from(arg: ScoreRuleArg) -> Self {
        match arg {
            ScoreRuleArg::Mean8 => ScoreRule::MeanAll8,
            ScoreRuleArg::Mean5 => ScoreRule::MeanPollutants5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
struct DialectArgs {
    /// Field separator.
    #[arg(long, default_value_t = ';')]
    delimiter: char,
    /// Decimal separator.
    #[arg(long, default_value_t = ',')]
    decimal: char,
    /// Missing-value sentinel.
    #[arg(long, default_value_t = -200.0, allow_hyphen_values = true)]
    missing: f64,
    /// The file has no header line.
    #[arg(long)]
    no_header: bool,
}

impl DialectArgs {
    fn dialect(&self) -> CsvDialect {
        CsvDialect {
            delimiter: self.delimiter,
            decimal: self.decimal,
            missing: self.missing,
            has_header: !self.no_header,
        }
    }
}

#[derive(Debug, Args)]
struct PrepArgs {
    #[arg(long, value_enum, default_value_t = ScoreRuleArg::Mean8)]
    score_rule: ScoreRuleArg,
    /// Scores below this are Low.
    #[arg(long, default_value_t = 0.3)]
    low: f64,
    /// Scores above this are High.
    #[arg(long, default_value_t = 0.6)]
    high: f64,
}

impl PrepArgs {
    fn thresholds(&self) -> Result<RiskThresholds, String> {
        RiskThresholds::new(self.low, self.high).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "5", value_parser = parse_hidden)]
    hidden: HiddenLayers,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Seed for initialization, shuffling and splitting.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl NetArgs {
    fn config(&self) -> Result<NetworkConfig, String> {
        let mut layer_sizes = vec![ChannelId::COUNT];
        layer_sizes.extend(&self.hidden.0);
        layer_sizes.push(CLASS_COUNT);
        let config = NetworkConfig {
            layer_sizes,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
            ..NetworkConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenLayers(Vec<usize>);

fn parse_hidden(s: &str) -> Result<HiddenLayers, String> {
    let sizes = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid layer size `{p}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.contains(&0) {
        return Err("layer sizes must be positive".into());
    }
    Ok(HiddenLayers(sizes))
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number `{s}`"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Dataset in the configured CSV dialect.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    #[command(flatten)]
    dialect: DialectArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset in the configured CSV dialect.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Model file to write.
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    #[command(flatten)]
    dialect: DialectArgs,
    #[command(flatten)]
    prep: PrepArgs,
    #[arg(long, default_value = "0.7", value_parser = parse_fraction)]
    train_fraction: f64,
    /// Fit the scaler on the training split only.
    #[arg(long)]
    fit_on_train: bool,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Print the loss of every epoch to standard error.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Dataset in the configured CSV dialect.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    #[command(flatten)]
    dialect: DialectArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct CvArgs {
    /// Dataset in the configured CSV dialect.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    #[command(flatten)]
    dialect: DialectArgs,
    #[command(flatten)]
    prep: PrepArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Eight raw readings, comma separated, in CO,NMHC,C6H6,NOx,NO2,T,RH,AH order.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct StreamArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Frame stream (CSV dialect or JSON lines).
    #[arg(long, value_name = "FILE")]
    frames: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FrameFormat>,
    #[command(flatten)]
    dialect: DialectArgs,
    /// Consecutive frames required before the level changes.
    #[arg(long, default_value_t = 1)]
    debounce: usize,
    /// Do not alert on transitions into Medium.
    #[arg(long)]
    no_medium_warning: bool,
    /// Write the per-frame classification trace (JSON lines) to this file.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Write alert events here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

type CliResult = Result<(), Failure>;

/// Runs the CLI on `argv` (program name first) against the process streams.
pub fn dispatch(argv: &[String]) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Same as [`dispatch`] with explicit output streams.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Cv(a) => cmd_cv(a, out, err),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Stream(a) => cmd_stream(a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_DATA,
            }
        }
    }
}

/// Splices `--key value` pairs from the config file in front of the
/// subcommand's own flags.
fn expand_config(argv: &[String]) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            path = Some(iter.next().ok_or("--config needs a file path")?.clone());
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg.clone());
        }
    }
    let Some(path) = path else {
        return Ok(argv.iter().map(OsString::from).collect());
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("invalid config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (key, value) in table {
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => injected.extend([flag, s]),
            toml::Value::Integer(i) => injected.extend([flag, i.to_string()]),
            toml::Value::Float(f) => injected.extend([flag, f.to_string()]),
            toml::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                injected.extend([flag, joined.join(",")]);
            }
            other => return Err(format!("config key `{key}` has unsupported value {other}")),
        }
    }
    // argv[0] is the program, the first non-flag argument after it the subcommand.
    let position = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(rest.len(), |p| p + 2);
    let mut expanded = rest[..position].to_vec();
    expanded.extend(injected);
    expanded.extend_from_slice(&rest[position..]);
    Ok(expanded.into_iter().map(OsString::from).collect())
}

fn write_json(out: &mut dyn Write, value: &impl serde::Serialize) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    writeln!(out, "{text}")
}

fn cmd_ingest(args: IngestArgs, out: &mut dyn Write) -> CliResult {
    let file = File::open(&args.data)?;
    let (records, diag) = parse_air_quality_csv(BufReader::new(file), &args.dialect.dialect())?;
    let complete = records.iter().filter(|r| r.is_complete()).count();
    if matches!(args.report, ReportFormat::Text | ReportFormat::Both) {
        writeln!(out, "rows read:     {}", diag.rows_read)?;
        writeln!(out, "rows parsed:   {}", diag.rows_parsed)?;
        writeln!(out, "rows rejected: {}", diag.rows_rejected)?;
        writeln!(out, "complete rows: {complete}")?;
        let blank = diag
            .rejection_reasons
            .iter()
            .filter(|r| r.reason == "blank")
            .count();
        if blank > 0 {
            writeln!(out, "blank lines:   {blank}")?;
        }
        for r in diag
            .rejection_reasons
            .iter()
            .filter(|r| r.reason != "blank")
        {
            writeln!(out, "line {}: {}", r.line, r.reason)?;
        }
    }
    if matches!(args.report, ReportFormat::Json | ReportFormat::Both) {
        write_json(
            out,
            &json!({ "diagnostics": diag, "complete_rows": complete }),
        )?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let thresholds = args.prep.thresholds().map_err(Failure::Usage)?;
    let config = args.net.config().map_err(Failure::Usage)?;
    let options = PrepareOptions {
        score_rule: args.prep.score_rule.into(),
        thresholds,
        train_fraction: args.train_fraction,
        seed: args.net.seed,
        fit_on_train: args.fit_on_train,
    };
    let (rows, diag) = load_rows(&args.data, &args.dialect.dialect())?;
    let outcome = train_holdout(&rows, &options, &config)?;
    if args.verbose {
        for (i, loss) in outcome.report.epoch_losses.iter().enumerate() {
            writeln!(err, "epoch {:>4}: mse {loss:.6}", i + 1)?;
        }
    }
    save_model(&outcome.bundle, &args.out)?;

    if matches!(args.report, ReportFormat::Text | ReportFormat::Both) {
        let sizes: Vec<String> = config.layer_sizes.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "dataset: {} rows read, {} parsed, {} rejected, {} complete",
            diag.rows_read,
            diag.rows_parsed,
            diag.rows_rejected,
            rows.len()
        )?;
        writeln!(
            out,
            "split: {} train / {} test (seed {})",
            outcome.train_size, outcome.test_size, options.seed
        )?;
        writeln!(
            out,
            "network: {} {}, learning rate {}, {} epochs",
            sizes.join("-"),
            config.activation.name(),
            config.learning_rate,
            config.epochs
        )?;
        writeln!(
            out,
            "final epoch mse: {:.6}, train accuracy: {:.4}",
            outcome.report.epoch_losses.last().copied().unwrap_or(0.0),
            outcome.report.final_train_accuracy
        )?;
        writeln!(out, "model written to {}\n", args.out.display())?;
        write!(out, "{}", outcome.test.to_text())?;
    }
    if matches!(args.report, ReportFormat::Json | ReportFormat::Both) {
        write_json(
            out,
            &json!({
                "dataset": { "rows_read": diag.rows_read, "rows_parsed": diag.rows_parsed,
                             "rows_rejected": diag.rows_rejected, "complete_rows": rows.len() },
                "train_size": outcome.train_size,
                "test_size": outcome.test_size,
                "train_report": outcome.report,
                "test": outcome.test,
            }),
        )?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> CliResult {
    let bundle = load_model(&args.model)?;
    let (rows, _) = load_rows(&args.data, &args.dialect.dialect())?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let examples = label_rows(&rows, &bundle.scaler, bundle.score_rule, &bundle.thresholds);
    let report = evaluate(&bundle.network, &examples)?;
    if matches!(args.report, ReportFormat::Text | ReportFormat::Both) {
        write!(out, "{}", report.to_text())?;
    }
    if matches!(args.report, ReportFormat::Json | ReportFormat::Both) {
        write_json(out, &report)?;
    }
    Ok(())
}

fn cmd_cv(args: CvArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let thresholds = args.prep.thresholds().map_err(Failure::Usage)?;
    let config = args.net.config().map_err(Failure::Usage)?;
    if args.folds < 2 {
        return Err(Failure::Usage("--folds must be at least 2".into()));
    }
    let (rows, _) = load_rows(&args.data, &args.dialect.dialect())?;
    let scaler = crate::preprocess::fit_scaler(&rows)?;
    let examples = label_rows(&rows, &scaler, args.prep.score_rule.into(), &thresholds);
    let report = stratified_kfold_cv(&examples, args.folds, args.net.seed, &config)?;
    for w in &report.warnings {
        writeln!(err, "warning: {w}")?;
    }
    if matches!(args.report, ReportFormat::Text | ReportFormat::Both) {
        write!(out, "{}", report.to_text())?;
    }
    if matches!(args.report, ReportFormat::Json | ReportFormat::Both) {
        write_json(out, &report)?;
    }
    Ok(())
}

fn parse_values(text: &str) -> Result<RawFeatureRow, String> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("invalid reading `{}`", v.trim()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let found = values.len();
    let array: [f64; ChannelId::COUNT] = values
        .try_into()
        .map_err(|_| format!("expected {} readings, found {found}", ChannelId::COUNT))?;
    Ok(RawFeatureRow(array))
}

fn cmd_predict(args: PredictArgs, out: &mut dyn Write) -> CliResult {
    let raw = parse_values(&args.values).map_err(Failure::Usage)?;
    let bundle = load_model(&args.model)?;
    let features = apply_scaler(&bundle.scaler, &raw);
    let prediction = bundle.network.predict(&features)?;
    if matches!(args.report, ReportFormat::Text | ReportFormat::Both) {
        writeln!(out, "label: {}", prediction.label)?;
        let s = prediction.scores;
        writeln!(
            out,
            "scores: Low {:.6}  Medium {:.6}  High {:.6}",
            s[0], s[1], s[2]
        )?;
    }
    if matches!(args.report, ReportFormat::Json | ReportFormat::Both) {
        write_json(
            out,
            &json!({ "features": features, "scores": prediction.scores, "label": prediction.label }),
        )?;
    }
    Ok(())
}

fn read_frames(args: &StreamArgs, err: &mut dyn Write) -> Result<Vec<SensorFrame>, Failure> {
    let format =
        args.format
            .unwrap_or_else(|| match args.frames.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("json") | Some("ndjson") => FrameFormat::Jsonl,
                _ => FrameFormat::Csv,
            });
    let reader = BufReader::new(File::open(&args.frames)?);
    match format {
        FrameFormat::Csv => {
            let (records, diag) = parse_air_quality_csv(reader, &args.dialect.dialect())?;
            let (frames, incomplete) = frames_from_records(&records);
            if diag.rows_rejected > 0 || incomplete > 0 {
                writeln!(
                    err,
                    "skipped {} unparsable and {incomplete} incomplete frames",
                    diag.rows_rejected
                )?;
            }
            Ok(frames)
        }
        FrameFormat::Jsonl => {
            let (frames, rejected) = read_jsonl_frames(reader)?;
            for r in &rejected {
                writeln!(err, "skipped line {}: {}", r.line, r.reason)?;
            }
            Ok(frames)
        }
    }
}

fn write_lines<T: serde::Serialize>(
    path: Option<&Path>,
    items: &[T],
    out: &mut dyn Write,
) -> io::Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("serializable"));
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

fn cmd_stream(args: StreamArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let policy = AlarmPolicy::new(args.debounce, !args.no_medium_warning)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let bundle = load_model(&args.model)?;
    let frames = read_frames(&args, err)?;
    let mut replayer = Replayer::new(&bundle, policy)?;
    let log = replayer.feed(&frames)?;
    write_lines(args.out.as_deref(), &log.events, out)?;
    if let Some(trace) = &args.trace {
        write_lines(Some(trace), &log.trace, out)?;
    }
    Ok(())
}
