//! Train the default 8-5-3 network on a 70/30 split and print the test
//! tables, then save the model.
//!
//! cargo run --release --example train_holdout -- AirQualityUCI.csv [model.json]

use airq_alarm::ann::{save_model, NetworkConfig};
use airq_alarm::ingest::CsvDialect;
use airq_alarm::pipeline::{load_rows, train_holdout, PrepareOptions};

fn main() -> airq_alarm::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(data) = args.next() else {
        eprintln!("usage: train_holdout <AirQualityUCI.csv> [model.json]");
        std::process::exit(1);
    };
    let model = args.next().unwrap_or_else(|| "model.json".into());

    let (rows, diag) = load_rows(&data, &CsvDialect::default())?;
    println!(
        "{} complete rows of {} parsed",
        rows.len(),
        diag.rows_parsed
    );

    let outcome = train_holdout(&rows, &PrepareOptions::default(), &NetworkConfig::default())?;
    let losses = &outcome.report.epoch_losses;
    for epoch in [1, 10, 50, losses.len()] {
        println!("epoch {epoch:>3}: mse {:.6}", losses[epoch - 1]);
    }
    println!(
        "train {} / test {}\n",
        outcome.train_size, outcome.test_size
    );
    print!("{}", outcome.test);

    save_model(&outcome.bundle, &model)?;
    println!("\nsaved {model}");
    Ok(())
}
