//! Classify raw readings with a saved model.
//!
//! cargo run --example predict -- [model.json] [CO,NMHC,C6H6,NOx,NO2,T,RH,AH]

use airq_alarm::ann::load_model;
use airq_alarm::ingest::{ChannelId, RawFeatureRow};
use airq_alarm::preprocess::{apply_scaler, risk_score, RiskLabel};

fn main() -> airq_alarm::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/crafted_model.json").into()
    });
    let bundle = load_model(&model)?;

    let rows: Vec<RawFeatureRow> = match args.next() {
        Some(text) => {
            let values: Vec<f64> = text
                .split(',')
                .map(|v| v.trim().parse().expect("number"))
                .collect();
            vec![RawFeatureRow(values.try_into().expect("eight readings"))]
        }
        None => [0.5, 4.0, 7.5]
            .iter()
            .map(|&co| {
                let mut raw = [0.5; ChannelId::COUNT];
                raw[0] = co;
                RawFeatureRow(raw)
            })
            .collect(),
    };

    for raw in rows {
        let features = apply_scaler(&bundle.scaler, &raw);
        let p = bundle.network.predict(&features)?;
        let rule_label = airq_alarm::preprocess::label_risk(
            risk_score(&features, bundle.score_rule),
            &bundle.thresholds,
        )?;
        print!("{:?} -> {:<6}", raw.0, p.label.name());
        for label in RiskLabel::ALL {
            print!("  {} {:.4}", label.name(), p.scores[label.index()]);
        }
        println!("  (labelling rule: {rule_label})");
    }
    Ok(())
}
