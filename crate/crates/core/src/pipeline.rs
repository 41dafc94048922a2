//! The end-to-end training run: clean rows → scale → label → split →
//! train → evaluate on the held-out part.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ann::{init_network, train, ModelBundle, NetworkConfig, TrainReport};
use crate::error::Result;
use crate::ingest::{parse_air_quality_csv, CsvDialect, ParseDiagnostics, RawFeatureRow};
use crate::metrics::{evaluate, EvalReport};
use crate::preprocess::{
    drop_incomplete, fit_scaler, label_rows, split_indices, LabeledExample, RiskThresholds,
    ScalerParams, ScoreRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepareOptions {
    pub score_rule: ScoreRule,
    pub thresholds: RiskThresholds,
    pub train_fraction: f64,
    pub seed: u64,
    /// Fit the scaler on the training split only instead of all clean rows.
    pub fit_on_train: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            score_rule: ScoreRule::MeanAll8,
            thresholds: RiskThresholds::default(),
            train_fraction: 0.7,
            seed: 42,
            fit_on_train: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub scaler: ScalerParams,
    /// Every clean row, scaled and labelled; `origin` is the row position.
    pub examples: Vec<LabeledExample>,
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Reads a dataset file and keeps its complete rows.
pub fn load_rows(
    path: impl AsRef<Path>,
    dialect: &CsvDialect,
) -> Result<(Vec<RawFeatureRow>, ParseDiagnostics)> {
    let file = File::open(path)?;
    let (records, diagnostics) = parse_air_quality_csv(BufReader::new(file), dialect)?;
    Ok((drop_incomplete(&records), diagnostics))
}

/// Splits with the same permutation as `split_train_test`, so fitting on
/// the training part only changes the scaler, never the split.
pub fn prepare(rows: &[RawFeatureRow], options: &PrepareOptions) -> Result<PreparedData> {
    options.thresholds.validate()?;
    let (train_idx, test_idx) = split_indices(rows.len(), options.train_fraction, options.seed)?;
    let scaler = if options.fit_on_train {
        let train_rows: Vec<RawFeatureRow> = train_idx.iter().map(|&i| rows[i]).collect();
        fit_scaler(&train_rows)?
    } else {
        fit_scaler(rows)?
    };
    let examples = label_rows(rows, &scaler, options.score_rule, &options.thresholds);
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect();
    Ok(PreparedData {
        train: pick(&train_idx),
        test: pick(&test_idx),
        scaler,
        examples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub report: TrainReport,
    pub test: EvalReport,
    pub train_size: usize,
    pub test_size: usize,
}

pub fn train_holdout(
    rows: &[RawFeatureRow],
    options: &PrepareOptions,
    config: &NetworkConfig,
) -> Result<TrainOutcome> {
    let data = prepare(rows, options)?;
    let net = init_network(config)?;
    let (network, report) = train(net, &data.train, config)?;
    let test = evaluate(&network, &data.test)?;
    Ok(TrainOutcome {
        bundle: ModelBundle {
            network,
            scaler: data.scaler,
            thresholds: options.thresholds,
            score_rule: options.score_rule,
        },
        report,
        test,
        train_size: data.train.len(),
        test_size: data.test.len(),
    })
}
