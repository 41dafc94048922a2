//! Build the evaluation tables from raw network outputs and labels.

use airq_alarm::metrics::EvalReport;
use airq_alarm::preprocess::RiskLabel::{self, High, Low, Medium};

fn main() -> airq_alarm::Result<()> {
    let cases: [([f64; 3], RiskLabel); 8] = [
        ([0.91, 0.08, 0.01], Low),
        ([0.70, 0.35, 0.02], Low),
        ([0.10, 0.85, 0.07], Medium),
        ([0.05, 0.52, 0.49], Medium),
        ([0.40, 0.45, 0.03], Low),
        ([0.01, 0.20, 0.93], High),
        ([0.02, 0.61, 0.58], High),
        ([0.01, 0.10, 0.97], High),
    ];
    let outputs: Vec<[f64; 3]> = cases.iter().map(|c| c.0).collect();
    let actuals: Vec<RiskLabel> = cases.iter().map(|c| c.1).collect();
    let report = EvalReport::from_outputs(&outputs, &actuals)?;
    print!("{report}");
    println!(
        "\n{}",
        serde_json::to_string_pretty(&report).expect("plain data")
    );
    Ok(())
}
