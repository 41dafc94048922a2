use std::fmt::{self, Write as _};

use super::{ClassMetrics, CvReport, EvalReport};
use crate::preprocess::RiskLabel;

/// Display order of the tables: High, Normal (Medium), Low.
const TABLE_ORDER: [RiskLabel; 3] = [RiskLabel::High, RiskLabel::Medium, RiskLabel::Low];

fn percent_line(out: &mut String, name: &str, value: Option<f64>) {
    match value {
        Some(v) => writeln!(out, "{name:<36}{v:>12.4} %"),
        None => writeln!(out, "{name:<36}{:>12}", "n/a"),
    }
    .expect("write to String");
}

fn class_row(out: &mut String, c: &ClassMetrics, name: &str) {
    writeln!(
        out,
        "{:>9.4}{:>9.4}{:>11.4}{:>9.4}{:>11.4}{:>10.4}  {name}",
        c.tp_rate, c.fp_rate, c.precision, c.recall, c.f_measure, c.roc_area
    )
    .expect("write to String");
}

impl EvalReport {
    /// Plain-text layout: summary, detailed accuracy by class, confusion
    /// matrix (rows predicted, columns actual).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n = self.instances;
        let wrong = n - self.correct;
        out.push_str("=== Summary ===\n\n");
        writeln!(
            out,
            "{:<36}{:>6}{:>12.4} %",
            "Correctly Classified Instances",
            self.correct,
            100.0 * self.accuracy
        )
        .unwrap();
        writeln!(
            out,
            "{:<36}{:>6}{:>12.4} %",
            "Incorrectly Classified Instances",
            wrong,
            100.0 * (1.0 - self.accuracy)
        )
        .unwrap();
        writeln!(out, "{:<36}{:>12.4}", "Kappa statistic", self.kappa).unwrap();
        writeln!(out, "{:<36}{:>12.4}", "Mean absolute error", self.mae).unwrap();
        writeln!(out, "{:<36}{:>12.4}", "Root mean squared error", self.rmse).unwrap();
        percent_line(&mut out, "Relative absolute error", self.rae_percent);
        percent_line(&mut out, "Root relative squared error", self.rrse_percent);
        writeln!(out, "{:<36}{:>6}", "Total Number of Instances", n).unwrap();

        out.push_str("\n=== Detailed Accuracy By Class ===\n\n");
        out.push_str("  TP Rate  FP Rate  Precision   Recall  F-Measure  ROC Area  Class\n");
        for label in TABLE_ORDER {
            class_row(&mut out, &self.per_class[label.index()], label.table_name());
        }
        class_row(&mut out, &self.weighted_avg, "Weighted Avg.");

        out.push_str("\n=== Confusion Matrix ===\n\n");
        out.push_str("      a      b      c   <-- actual\n");
        for (row, p) in TABLE_ORDER.iter().enumerate() {
            for a in TABLE_ORDER {
                write!(out, "{:>7}", self.matrix.get(*p, a)).unwrap();
            }
            let letter = ['a', 'b', 'c'][row];
            writeln!(out, "   | {letter} = {} (predicted)", p.table_name()).unwrap();
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl CvReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "=== Stratified {}-fold cross-validation ===\n\n",
            self.folds
        );
        for (i, (size, acc)) in self
            .fold_sizes
            .iter()
            .zip(&self.fold_accuracies)
            .enumerate()
        {
            writeln!(
                out,
                "fold {:>2}: {size:>5} instances, accuracy {:.4}",
                i + 1,
                acc
            )
            .unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out.push('\n');
        out.push_str(&self.pooled.to_text());
        out
    }
}
