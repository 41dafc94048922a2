//! Cleaning, min-max scaling, risk scoring and the train/test split.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{select_features, ChannelId, RawFeatureRow, RawRecord};

/// Eight scaled values in `[0, 1]`, in [`ChannelId`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; ChannelId::COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-channel minima and maxima in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    mins: [f64; ChannelId::COUNT],
    maxs: [f64; ChannelId::COUNT],
}

impl ScalerParams {
    pub fn new(mins: [f64; ChannelId::COUNT], maxs: [f64; ChannelId::COUNT]) -> Result<Self> {
        for (i, (lo, hi)) in mins.iter().zip(maxs.iter()).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain(format!(
                    "scaler bounds for {} are not finite",
                    ChannelId::ALL[i]
                )));
            }
            if lo > hi {
                return Err(Error::Domain(format!(
                    "scaler minimum {lo} exceeds maximum {hi} for {}",
                    ChannelId::ALL[i]
                )));
            }
        }
        Ok(ScalerParams { mins, maxs })
    }

    pub fn mins(&self) -> &[f64; ChannelId::COUNT] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64; ChannelId::COUNT] {
        &self.maxs
    }

    /// Maps scaled values back to raw units. Exact only for channels that
    /// are neither degenerate nor clamped.
    pub fn invert(&self, features: &FeatureVector) -> RawFeatureRow {
        let mut raw = [0.0; ChannelId::COUNT];
        for (i, slot) in raw.iter_mut().enumerate() {
            *slot = self.mins[i] + features.0[i] * (self.maxs[i] - self.mins[i]);
        }
        RawFeatureRow(raw)
    }
}

pub fn fit_scaler(rows: &[RawFeatureRow]) -> Result<ScalerParams> {
    let first = rows.first().ok_or(Error::EmptyDataset)?;
    let mut mins = first.0;
    let mut maxs = first.0;
    for row in &rows[1..] {
        for i in 0..ChannelId::COUNT {
            mins[i] = mins[i].min(row.0[i]);
            maxs[i] = maxs[i].max(row.0[i]);
        }
    }
    ScalerParams::new(mins, maxs)
}

/// Min-max scales a row. Degenerate channels (min = max) map to 0 and
/// values outside the fitted range clamp to `[0, 1]`.
pub fn apply_scaler(params: &ScalerParams, row: &RawFeatureRow) -> FeatureVector {
    let mut out = [0.0; ChannelId::COUNT];
    for (i, slot) in out.iter_mut().enumerate() {
        let span = params.maxs[i] - params.mins[i];
        *slot = if span > 0.0 {
            ((row.0[i] - params.mins[i]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    FeatureVector(out)
}

/// How the risk score is aggregated from a feature vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreRule {
    /// Mean of all eight scaled channels.
    #[default]
    #[serde(rename = "mean8")]
    MeanAll8,
    /// Mean of the five pollutant channels (CO through NO2).
    #[serde(rename = "mean5")]
    MeanPollutants5,
}

impl ScoreRule {
    pub fn name(self) -> &'static str {
        match self {
            ScoreRule::MeanAll8 => "mean8",
            ScoreRule::MeanPollutants5 => "mean5",
        }
    }
}

impl fmt::Display for ScoreRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean8" => Ok(ScoreRule::MeanAll8),
            "mean5" => Ok(ScoreRule::MeanPollutants5),
            other => Err(Error::Domain(format!("unknown score rule `{other}`"))),
        }
    }
}

pub fn risk_score(features: &FeatureVector, rule: ScoreRule) -> f64 {
    let used = match rule {
        ScoreRule::MeanAll8 => &features.0[..],
        ScoreRule::MeanPollutants5 => &features.0[..5],
    };
    used.iter().sum::<f64>() / used.len() as f64
}

/// The two cut points separating Low / Medium / High.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    pub low_upper: f64,
    pub high_lower: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            low_upper: 0.3,
            high_lower: 0.6,
        }
    }
}

impl RiskThresholds {
    pub fn new(low_upper: f64, high_lower: f64) -> Result<Self> {
        let t = RiskThresholds {
            low_upper,
            high_lower,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.low_upper && self.low_upper < self.high_lower && self.high_lower < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "thresholds must satisfy 0 < low ({}) < high ({}) < 1",
                self.low_upper, self.high_lower
            )))
        }
    }
}

/// Risk class. The discriminant is the class index used for one-hot
/// targets and network outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLabel {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl RiskLabel {
    pub const ALL: [RiskLabel; 3] = [RiskLabel::Low, RiskLabel::Medium, RiskLabel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<RiskLabel> {
        RiskLabel::ALL.get(index).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            RiskLabel::Low => "Low",
            RiskLabel::Medium => "Medium",
            RiskLabel::High => "High",
        }
    }

    /// Label used in the evaluation tables, where Medium reads "Normal".
    pub fn table_name(self) -> &'static str {
        match self {
            RiskLabel::Medium => "Normal",
            other => other.name(),
        }
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// High strictly above `high_lower`, Low strictly below `low_upper`,
/// Medium on the closed interval between.
pub fn label_risk(score: f64, thresholds: &RiskThresholds) -> Result<RiskLabel> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Domain(format!("risk score {score} outside [0, 1]")));
    }
    Ok(if score > thresholds.high_lower {
        RiskLabel::High
    } else if score < thresholds.low_upper {
        RiskLabel::Low
    } else {
        RiskLabel::Medium
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub score: f64,
    pub label: RiskLabel,
    /// Position of the row in the cleaned dataset.
    pub origin: usize,
}

/// Keeps complete records only, in input order.
pub fn drop_incomplete(records: &[RawRecord]) -> Vec<RawFeatureRow> {
    records.iter().filter_map(select_features).collect()
}

pub fn label_example(
    row: &RawFeatureRow,
    origin: usize,
    scaler: &ScalerParams,
    rule: ScoreRule,
    thresholds: &RiskThresholds,
) -> LabeledExample {
    let features = apply_scaler(scaler, row);
    let score = risk_score(&features, rule);
    // Scaled components are in [0, 1], so is their mean.
    let label = label_risk(score, thresholds).expect("mean of clamped features lies in [0, 1]");
    LabeledExample {
        features,
        score,
        label,
        origin,
    }
}

/// Scales and labels every row; `origin` is the row position.
pub fn label_rows(
    rows: &[RawFeatureRow],
    scaler: &ScalerParams,
    rule: ScoreRule,
    thresholds: &RiskThresholds,
) -> Vec<LabeledExample> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| label_example(row, i, scaler, rule, thresholds))
        .collect()
}

/// Index permutation used by [`split_train_test`], exposed so callers can
/// split raw rows before fitting a scaler on the training part.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let cut = (n as f64 * train_fraction).floor() as usize;
    let test = order.split_off(cut);
    Ok((order, test))
}

/// Seeded shuffle, then split at `floor(n * train_fraction)`.
pub fn split_train_test(
    examples: &[LabeledExample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let (train, test) = split_indices(examples.len(), train_fraction, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| examples[i].clone()).collect();
    Ok((pick(train), pick(test)))
}
