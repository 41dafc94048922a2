//! Stratified k-fold cross-validation on a dataset file.
//!
//! cargo run --release --example cross_validate -- AirQualityUCI.csv [folds]

use airq_alarm::ann::NetworkConfig;
use airq_alarm::ingest::CsvDialect;
use airq_alarm::metrics::stratified_kfold_cv;
use airq_alarm::pipeline::{load_rows, prepare, PrepareOptions};

fn main() -> airq_alarm::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(data) = args.next() else {
        eprintln!("usage: cross_validate <AirQualityUCI.csv> [folds]");
        std::process::exit(1);
    };
    let folds = args.next().and_then(|k| k.parse().ok()).unwrap_or(10);

    let (rows, _) = load_rows(&data, &CsvDialect::default())?;
    let examples = prepare(&rows, &PrepareOptions::default())?.examples;
    let config = NetworkConfig::default();
    let report = stratified_kfold_cv(&examples, folds, config.seed, &config)?;
    print!("{}", report.to_text());
    Ok(())
}
