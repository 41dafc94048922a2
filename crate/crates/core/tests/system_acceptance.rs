//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Criteria 1-3 need the full UCI Air Quality file. It is looked up at
//! `data/AirQualityUCI.csv` under the workspace root, or passed as the first
//! argument: `cargo test --release --test system_acceptance -- /path/AirQualityUCI.csv`.

mod common;

use std::fs::{self, File};
use std::io::BufReader;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use airq_alarm::alarm::{frames_from_records, replay, AlarmPolicy, AlertLog, Replayer};
use airq_alarm::ann::{
    gradient_check, init_network, load_model, save_model, ModelBundle, NetworkConfig,
};
use airq_alarm::ingest::{
    parse_air_quality_csv, select_features, write_air_quality_csv, CsvDialect, RawRecord,
};
use airq_alarm::metrics::{
    confusion_matrix, per_class_metrics, regression_errors, roc_auc, stratified_kfold_cv,
    summary_stats, ConfusionMatrix, EvalReport,
};
use airq_alarm::pipeline::{load_rows, prepare, train_holdout, PrepareOptions};
use airq_alarm::preprocess::{
    label_risk, FeatureVector, LabeledExample, RiskLabel, RiskThresholds,
};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const ACCURACY_FLOOR: f64 = 0.98;
const KAPPA_FLOOR: f64 = 0.95;
const CV_GAP: f64 = 0.01;
const GRAD_TOLERANCE: f64 = 1e-5;
const GRAD_EPSILON: f64 = 1e-5;
const ORACLE_TOLERANCE: f64 = 1e-12;
const ROUND_TRIP_TOLERANCE: f64 = 1e-15;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Holdout {
    accuracy: f64,
    kappa: f64,
    examples: Vec<LabeledExample>,
    seconds: f64,
}

fn dataset_path() -> PathBuf {
    std::env::args()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
            let root = manifest.ancestors().nth(2).unwrap_or(manifest);
            root.join("data/AirQualityUCI.csv")
        })
}

fn holdout_run(path: &Path) -> Result<Holdout, String> {
    if !path.exists() {
        return Err(format!("dataset not found at {}", path.display()));
    }
    let start = Instant::now();
    let (rows, _) = load_rows(path, &CsvDialect::default()).map_err(|e| e.to_string())?;
    let options = PrepareOptions::default();
    let outcome =
        train_holdout(&rows, &options, &NetworkConfig::default()).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let examples = prepare(&rows, &options)
        .map_err(|e| e.to_string())?
        .examples;
    Ok(Holdout {
        accuracy: outcome.test.accuracy,
        kappa: outcome.test.kappa,
        examples,
        seconds,
    })
}

fn criterion_1(h: &Result<Holdout, String>) -> Outcome {
    let h = h.as_ref().map_err(Clone::clone)?;
    check(
        h.accuracy >= ACCURACY_FLOOR,
        format!(
            "test accuracy {:.4} (floor {ACCURACY_FLOOR}), {:.1} s",
            h.accuracy, h.seconds
        ),
    )
}

fn criterion_2(h: &Result<Holdout, String>) -> Outcome {
    let h = h.as_ref().map_err(Clone::clone)?;
    check(
        h.kappa >= KAPPA_FLOOR,
        format!("kappa {:.4} (floor {KAPPA_FLOOR})", h.kappa),
    )
}

fn criterion_3(h: &Result<Holdout, String>) -> Outcome {
    let h = h.as_ref().map_err(Clone::clone)?;
    let config = NetworkConfig::default();
    let cv =
        stratified_kfold_cv(&h.examples, 10, config.seed, &config).map_err(|e| e.to_string())?;
    let gap = (cv.pooled.accuracy - h.accuracy).abs();
    check(
        gap <= CV_GAP,
        format!(
            "10-fold accuracy {:.4} vs holdout {:.4}, gap {gap:.4} (max {CV_GAP})",
            cv.pooled.accuracy, h.accuracy
        ),
    )
}

fn random_example(rng: &mut ChaCha8Rng) -> LabeledExample {
    let mut f = [0.0; 8];
    for v in &mut f {
        *v = rng.random();
    }
    LabeledExample {
        features: FeatureVector(f),
        score: 0.0,
        label: random_label(rng),
        origin: 0,
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let net = init_network(&NetworkConfig {
            seed,
            ..NetworkConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..10 {
            let err = gradient_check(&net, &random_example(&mut rng), GRAD_EPSILON)
                .map_err(|e| e.to_string())?;
            worst = worst.max(err);
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    check(
        worst < GRAD_TOLERANCE && seconds < 5.0,
        format!("max relative error {worst:.3e} (limit {GRAD_TOLERANCE:e}), {seconds:.2} s"),
    )
}

fn close(name: &str, got: f64, want: f64) -> Result<(), String> {
    if (got - want).abs() <= ORACLE_TOLERANCE {
        Ok(())
    } else {
        Err(format!("{name}: library {got} vs oracle {want}"))
    }
}

fn one_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(1..=50);
    let outputs = random_outputs(rng, n);
    let actuals: Vec<RiskLabel> = (0..n).map(|_| random_label(rng)).collect();
    let predicted: Vec<RiskLabel> = outputs.iter().map(oracle_argmax).collect();
    let pairs: Vec<(RiskLabel, RiskLabel)> = predicted
        .iter()
        .copied()
        .zip(actuals.iter().copied())
        .collect();

    let matrix = confusion_matrix(&predicted, &actuals).map_err(|e| e.to_string())?;
    let summary = summary_stats(&matrix).map_err(|e| e.to_string())?;
    close("accuracy", summary.accuracy, oracle_accuracy(&pairs))?;
    close("kappa", summary.kappa, oracle_kappa(&pairs))?;

    let (classes, _) = per_class_metrics(&matrix, &outputs, &actuals).map_err(|e| e.to_string())?;
    for k in RiskLabel::ALL {
        let (p, r, f) = oracle_prf(&pairs, k);
        let c = classes[k.index()];
        close("precision", c.precision, p)?;
        close("recall", c.recall, r)?;
        close("f1", c.f_measure, f)?;
        let scores: Vec<f64> = outputs.iter().map(|o| o[k.index()]).collect();
        let positives: Vec<bool> = actuals.iter().map(|a| *a == k).collect();
        match (
            oracle_auc(&scores, &positives),
            roc_auc(&scores, &positives),
        ) {
            (Some(want), Ok(got)) => close("auc", got, want)?,
            (None, Err(_)) => close("auc (undefined)", c.roc_area, 0.0)?,
            (want, got) => {
                return Err(format!(
                    "auc definedness differs: oracle {want:?}, library {got:?}"
                ))
            }
        }
    }

    let (mae, rmse) = oracle_mae_rmse(&outputs, &actuals);
    let report = EvalReport::from_outputs(&outputs, &actuals).map_err(|e| e.to_string())?;
    close("mae", report.mae, mae)?;
    close("rmse", report.rmse, rmse)?;
    let targets: Vec<[f64; 3]> = actuals.iter().map(|a| a.one_hot()).collect();
    if let Ok(errors) = regression_errors(&outputs, &targets) {
        close("mae", errors.mae, mae)?;
        close("rmse", errors.rmse, rmse)?;
    }
    Ok(())
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        one_instance(&mut rng).map_err(|e| format!("instance {i}: {e}"))?;
    }
    Ok(format!("1000 instances agree within {ORACLE_TOLERANCE:e}"))
}

fn criterion_6() -> Outcome {
    let matrix = ConfusionMatrix::from_counts([[40, 10, 0], [20, 30, 0], [0, 0, 0]]);
    let s = summary_stats(&matrix).map_err(|e| e.to_string())?;
    let t = RiskThresholds::default();
    let labels: Vec<RiskLabel> = [0.65, 0.45, 0.29]
        .iter()
        .map(|&x| label_risk(x, &t))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    check(
        s.accuracy == 0.7
            && s.kappa == 0.4
            && labels == [RiskLabel::High, RiskLabel::Medium, RiskLabel::Low],
        format!(
            "accuracy {}, kappa {}, labels {labels:?}",
            s.accuracy, s.kappa
        ),
    )
}

fn criterion_7() -> Outcome {
    let file = File::open(fixture("air_fixture.csv")).map_err(|e| e.to_string())?;
    let (records, diag) = parse_air_quality_csv(BufReader::new(file), &CsvDialect::default())
        .map_err(|e| e.to_string())?;
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(fixture("air_fixture.golden.json")).unwrap())
            .map_err(|e| e.to_string())?;
    let expected: Vec<RawRecord> =
        serde_json::from_value(golden["records"].clone()).map_err(|e| e.to_string())?;
    let complete = records.iter().filter_map(select_features).count();
    check(
        serde_json::to_value(&diag).unwrap() == golden["diagnostics"]
            && records == expected
            && Some(complete as u64) == golden["complete_rows"].as_u64(),
        format!(
            "{} records, {} rejected, {complete} complete",
            records.len(),
            diag.rows_rejected
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("air.csv");
    let records = synthetic_records(1500, 11, 0.6);
    write_air_quality_csv(
        &records,
        &CsvDialect::default(),
        File::create(&data).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let mut models = Vec::new();
    for name in ["a.json", "b.json"] {
        let out_path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_airq-alarm"))
            .args([
                "train",
                "--data",
                data.to_str().unwrap(),
                "--out",
                out_path.to_str().unwrap(),
                "--seed",
                "42",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "train failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        models.push(fs::read(&out_path).map_err(|e| e.to_string())?);
    }
    let identical = models[0] == models[1];

    let bundle = load_model(dir.path().join("a.json")).map_err(|e| e.to_string())?;
    let copy = dir.path().join("copy.json");
    save_model(&bundle, &copy).map_err(|e| e.to_string())?;
    let reloaded: ModelBundle = load_model(&copy).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_example(&mut rng).features;
        let a = bundle
            .network
            .predict(&x)
            .map_err(|e| e.to_string())?
            .scores;
        let b = reloaded
            .network
            .predict(&x)
            .map_err(|e| e.to_string())?
            .scores;
        for k in 0..3 {
            worst = worst.max((a[k] - b[k]).abs());
        }
    }
    check(
        identical && worst <= ROUND_TRIP_TOLERANCE,
        format!("model files identical: {identical}, max round-trip output difference {worst:e}"),
    )
}

fn criterion_9() -> Outcome {
    let bundle = load_model(fixture("crafted_model.json")).map_err(|e| e.to_string())?;
    let file = File::open(fixture("alarm_frames.csv")).map_err(|e| e.to_string())?;
    let (records, _) = parse_air_quality_csv(BufReader::new(file), &CsvDialect::default())
        .map_err(|e| e.to_string())?;
    let (frames, _) = frames_from_records(&records);
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(fixture("alarm_golden.json")).unwrap())
            .map_err(|e| e.to_string())?;
    let policy: AlarmPolicy =
        serde_json::from_value(golden["policy"].clone()).map_err(|e| e.to_string())?;
    let log = replay(&frames, &bundle, &policy).map_err(|e| e.to_string())?;

    let mut mismatches = Vec::new();
    let events = golden["events"].as_array().unwrap();
    if events.len() != log.events.len() {
        mismatches.push(format!(
            "{} events, expected {}",
            log.events.len(),
            events.len()
        ));
    }
    for (got, want) in log.events.iter().zip(events) {
        let logit = want["logit"].as_f64().unwrap();
        let score = 1.0 / (1.0 + (-logit).exp());
        if got.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string()
            != want["timestamp"].as_str().unwrap()
            || got.level.name() != want["level"].as_str().unwrap()
            || got.message != want["message"].as_str().unwrap()
            || (got.score - score).abs() > ORACLE_TOLERANCE
        {
            mismatches.push(format!("event at {} differs", got.timestamp));
        }
    }
    let levels: Vec<&str> = log.trace.iter().map(|t| t.level.name()).collect();
    let want_levels: Vec<&str> = golden["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    if levels != want_levels {
        mismatches.push("per-frame levels differ".into());
    }

    for size in 1..=frames.len() {
        let mut replayer = Replayer::new(&bundle, policy).map_err(|e| e.to_string())?;
        let mut chunked = AlertLog::default();
        for chunk in frames.chunks(size) {
            chunked.extend(replayer.feed(chunk).map_err(|e| e.to_string())?);
        }
        if chunked != log {
            mismatches.push(format!(
                "chunk size {size} differs from whole-stream replay"
            ));
        }
    }
    if mismatches.is_empty() {
        Ok(format!(
            "{} events match, chunked replay equal for sizes 1-{}",
            log.events.len(),
            frames.len()
        ))
    } else {
        Err(mismatches.join("; "))
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()))
}

fn main() {
    let holdout = holdout_run(&dataset_path());
    let criteria: Vec<(&str, Outcome)> = vec![
        ("end-to-end accuracy", guarded(|| criterion_1(&holdout))),
        ("kappa", guarded(|| criterion_2(&holdout))),
        (
            "cross-validation consistency",
            guarded(|| criterion_3(&holdout)),
        ),
        ("gradient correctness", guarded(criterion_4)),
        ("metrics oracle equivalence", guarded(criterion_5)),
        ("worked numeric checks", guarded(criterion_6)),
        ("ingestion fidelity", guarded(criterion_7)),
        ("determinism", guarded(criterion_8)),
        ("alarm replay golden log", guarded(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
