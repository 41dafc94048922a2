//! Parse an air-quality CSV and show what was kept and rejected.
//!
//! cargo run --example parse_dataset -- [path/to/AirQualityUCI.csv]

use std::fs::File;
use std::io::BufReader;

use airq_alarm::ingest::{parse_air_quality_csv, select_features, ChannelId, CsvDialect};

fn main() -> airq_alarm::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/air_fixture.csv").into()
    });
    let file = File::open(&path)?;
    let (records, diag) = parse_air_quality_csv(BufReader::new(file), &CsvDialect::default())?;

    println!("{path}");
    println!(
        "read {}, parsed {}, rejected {}",
        diag.rows_read, diag.rows_parsed, diag.rows_rejected
    );
    for r in diag
        .rejection_reasons
        .iter()
        .filter(|r| r.reason != "blank")
        .take(10)
    {
        println!("  line {}: {}", r.line, r.reason);
    }

    for ch in ChannelId::ALL {
        let absent = records.iter().filter(|r| r.get(ch).is_none()).count();
        println!("{:>5}: {absent} absent", ch.name());
    }
    let complete: Vec<_> = records.iter().filter_map(select_features).collect();
    println!("{} complete rows", complete.len());
    if let Some(first) = complete.first() {
        println!("first: {:?}", first.0);
    }
    Ok(())
}
