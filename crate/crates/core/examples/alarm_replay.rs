//! Replay the bundled 20-frame stream through the debounced alarm, whole
//! and in chunks.

use std::fs::File;
use std::io::BufReader;

use airq_alarm::alarm::{frames_from_records, AlarmPolicy, AlertLog, Replayer};
use airq_alarm::ann::load_model;
use airq_alarm::ingest::{parse_air_quality_csv, CsvDialect};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");

fn main() -> airq_alarm::Result<()> {
    let bundle = load_model(format!("{DATA}/crafted_model.json"))?;
    let file = File::open(format!("{DATA}/alarm_frames.csv"))?;
    let (records, _) = parse_air_quality_csv(BufReader::new(file), &CsvDialect::default())?;
    let (frames, _) = frames_from_records(&records);

    for debounce in [1, 2, 3] {
        let policy = AlarmPolicy::new(debounce, true)?;
        let log = Replayer::new(&bundle, policy)?.feed(&frames)?;
        println!("debounce {debounce}: {} alerts", log.events.len());
        for e in &log.events {
            println!("  {}  {}", e.timestamp, e.message);
        }
    }

    let policy = AlarmPolicy::new(2, true)?;
    let mut replayer = Replayer::new(&bundle, policy)?;
    let mut chunked = AlertLog::default();
    for chunk in frames.chunks(6) {
        chunked.extend(replayer.feed(chunk)?);
    }
    let whole = Replayer::new(&bundle, policy)?.feed(&frames)?;
    println!("chunked replay equals whole stream: {}", chunked == whole);
    Ok(())
}
