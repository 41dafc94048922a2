//! Evaluation tables: confusion matrix, summary statistics, per-class
//! detail and stratified cross-validation.
//!
//! Confusion matrices are indexed `[predicted][actual]`; rows are the
//! predicted class. All 0/0 ratios are reported as 0.

mod cv;
mod report;
mod roc;

pub use cv::{stratified_folds, stratified_kfold_cv, CvReport, FoldAssignment};
pub use roc::{average_ranks, roc_auc};

use serde::{Deserialize, Serialize};

use crate::ann::{Network, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::preprocess::{LabeledExample, RiskLabel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[p][a]`: predicted class `p`, actual class `a`.
    pub counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; CLASS_COUNT]; CLASS_COUNT]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn get(&self, predicted: RiskLabel, actual: RiskLabel) -> u64 {
        self.counts[predicted.index()][actual.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..CLASS_COUNT).map(|k| self.counts[k][k]).sum()
    }

    /// Instances predicted as class `k`.
    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// Instances whose actual class is `k` (the class support).
    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for p in 0..CLASS_COUNT {
            for a in 0..CLASS_COUNT {
                self.counts[p][a] += other.counts[p][a];
            }
        }
    }
}

pub fn confusion_matrix(predicted: &[RiskLabel], actual: &[RiskLabel]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::Domain(format!(
            "{} predictions but {} actual labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Domain("no instances to compare".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        m.counts[p.index()][a.index()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub accuracy: f64,
    pub kappa: f64,
}

/// Accuracy and Cohen's kappa. Kappa is 0 when chance agreement is 1.
///
/// Kappa is evaluated on integer counts as
/// `(n·trace − Σ row·col) / (n² − Σ row·col)`, which equals
/// `(p_o − p_e) / (1 − p_e)` but rounds only once.
pub fn summary_stats(matrix: &ConfusionMatrix) -> Result<SummaryStats> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Domain("empty confusion matrix".into()));
    }
    let n = u128::from(total);
    let observed = matrix.trace() as f64 / total as f64;
    let chance: u128 = (0..CLASS_COUNT)
        .map(|k| u128::from(matrix.row_sum(k)) * u128::from(matrix.col_sum(k)))
        .sum();
    let agreement = n * u128::from(matrix.trace());
    let kappa = if chance == n * n {
        0.0
    } else {
        (agreement as f64 - chance as f64) / ((n * n - chance) as f64)
    };
    Ok(SummaryStats {
        accuracy: observed,
        kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionErrors {
    pub mae: f64,
    pub rmse: f64,
    pub rae_percent: f64,
    pub rrse_percent: f64,
}

/// Errors of the raw network outputs against one-hot targets, over all
/// `N × 3` components. The relative errors compare against predicting the
/// per-component target mean.
pub fn regression_errors(
    outputs: &[[f64; CLASS_COUNT]],
    targets: &[[f64; CLASS_COUNT]],
) -> Result<RegressionErrors> {
    if outputs.len() != targets.len() {
        return Err(Error::Domain(format!(
            "{} outputs but {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = outputs.len() as f64;
    let mut mean = [0.0; CLASS_COUNT];
    for t in targets {
        for k in 0..CLASS_COUNT {
            mean[k] += t[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let (mut abs, mut sq, mut base_abs, mut base_sq) = (0.0, 0.0, 0.0, 0.0);
    for (o, t) in outputs.iter().zip(targets) {
        for k in 0..CLASS_COUNT {
            let e = o[k] - t[k];
            let b = t[k] - mean[k];
            abs += e.abs();
            sq += e * e;
            base_abs += b.abs();
            base_sq += b * b;
        }
    }
    if base_abs == 0.0 || base_sq == 0.0 {
        return Err(Error::UndefinedBaseline);
    }
    let count = n * CLASS_COUNT as f64;
    Ok(RegressionErrors {
        mae: abs / count,
        rmse: (sq / count).sqrt(),
        rae_percent: 100.0 * abs / base_abs,
        rrse_percent: 100.0 * (sq / base_sq).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub roc_area: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest metrics per class and their support-weighted average. The
/// ROC area of class `k` uses output `k` as the score; it is 0 when the
/// class (or its complement) is absent.
pub fn per_class_metrics(
    matrix: &ConfusionMatrix,
    scores: &[[f64; CLASS_COUNT]],
    actuals: &[RiskLabel],
) -> Result<(Vec<ClassMetrics>, ClassMetrics)> {
    if scores.len() != actuals.len() {
        return Err(Error::Domain(format!(
            "{} score vectors but {} labels",
            scores.len(),
            actuals.len()
        )));
    }
    let total = matrix.total();
    if total != actuals.len() as u64 {
        return Err(Error::Domain(format!(
            "matrix holds {total} instances but {} labels were given",
            actuals.len()
        )));
    }
    let mut classes = Vec::with_capacity(CLASS_COUNT);
    for k in 0..CLASS_COUNT {
        let tp = matrix.counts[k][k];
        let fp = matrix.row_sum(k) - tp;
        let fne = matrix.col_sum(k) - tp;
        let tn = total - tp - fp - fne;
        let recall = ratio(tp, tp + fne);
        let precision = ratio(tp, tp + fp);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let class_scores: Vec<f64> = scores.iter().map(|s| s[k]).collect();
        let positives: Vec<bool> = actuals.iter().map(|a| a.index() == k).collect();
        let roc_area = match roc_auc(&class_scores, &positives) {
            Ok(auc) => auc,
            Err(Error::UndefinedAuc) => 0.0,
            Err(e) => return Err(e),
        };
        classes.push(ClassMetrics {
            tp_rate: recall,
            fp_rate: ratio(fp, fp + tn),
            precision,
            recall,
            f_measure,
            roc_area,
            support: matrix.col_sum(k),
        });
    }
    Ok((classes.clone(), weighted_average(&classes)))
}

fn weighted_average(classes: &[ClassMetrics]) -> ClassMetrics {
    let support: u64 = classes.iter().map(|c| c.support).sum();
    if support == 0 {
        return ClassMetrics::default();
    }
    let w = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / support as f64
    };
    ClassMetrics {
        tp_rate: w(|c| c.tp_rate),
        fp_rate: w(|c| c.fp_rate),
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f_measure: w(|c| c.f_measure),
        roc_area: w(|c| c.roc_area),
        support,
    }
}

/// Everything shown in the evaluation tables for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub kappa: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when every target is the same class.
    pub rae_percent: Option<f64>,
    pub rrse_percent: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    pub weighted_avg: ClassMetrics,
    pub matrix: ConfusionMatrix,
}

impl EvalReport {
    /// Builds the report from raw network outputs and the true labels.
    pub fn from_outputs(outputs: &[[f64; CLASS_COUNT]], actuals: &[RiskLabel]) -> Result<Self> {
        let predicted: Vec<RiskLabel> = outputs.iter().map(crate::ann::argmax_label).collect();
        let matrix = confusion_matrix(&predicted, actuals)?;
        let summary = summary_stats(&matrix)?;
        let targets: Vec<[f64; CLASS_COUNT]> = actuals.iter().map(|a| a.one_hot()).collect();
        let (mae, rmse, rae, rrse) = match regression_errors(outputs, &targets) {
            Ok(r) => (r.mae, r.rmse, Some(r.rae_percent), Some(r.rrse_percent)),
            Err(Error::UndefinedBaseline) => {
                // Absolute errors stay defined without a baseline.
                let count = (outputs.len() * CLASS_COUNT) as f64;
                let diffs = outputs
                    .iter()
                    .zip(&targets)
                    .flat_map(|(o, t)| o.iter().zip(t).map(|(a, b)| a - b));
                let (abs, sq) = diffs.fold((0.0, 0.0), |(a, s), e| (a + e.abs(), s + e * e));
                (abs / count, (sq / count).sqrt(), None, None)
            }
            Err(e) => return Err(e),
        };
        let (per_class, weighted_avg) = per_class_metrics(&matrix, outputs, actuals)?;
        Ok(EvalReport {
            instances: matrix.total(),
            correct: matrix.trace(),
            accuracy: summary.accuracy,
            kappa: summary.kappa,
            mae,
            rmse,
            rae_percent: rae,
            rrse_percent: rrse,
            per_class,
            weighted_avg,
            matrix,
        })
    }
}

/// Network outputs for every example, in order.
pub fn network_outputs(
    net: &Network,
    examples: &[LabeledExample],
) -> Result<Vec<[f64; CLASS_COUNT]>> {
    examples
        .iter()
        .map(|ex| net.predict(&ex.features).map(|p| p.scores))
        .collect()
}

pub fn evaluate(net: &Network, examples: &[LabeledExample]) -> Result<EvalReport> {
    let outputs = network_outputs(net, examples)?;
    let actuals: Vec<RiskLabel> = examples.iter().map(|e| e.label).collect();
    EvalReport::from_outputs(&outputs, &actuals)
}
