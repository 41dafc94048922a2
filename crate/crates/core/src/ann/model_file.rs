//! JSON model file: network parameters plus the preprocessing state needed
//! to score raw readings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Activation, Network, NetworkConfig, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::ingest::ChannelId;
use crate::preprocess::{RiskThresholds, ScalerParams, ScoreRule};

pub const FORMAT_VERSION: u64 = 1;

/// Everything needed to go from raw sensor readings to a risk class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub network: Network,
    pub scaler: ScalerParams,
    pub thresholds: RiskThresholds,
    pub score_rule: ScoreRule,
}

// Field order here is the key order in the file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    scaler: ScalerSection,
    thresholds: ThresholdSection,
    score_rule: ScoreRule,
    seed: u64,
    trained_epochs: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalerSection {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    channels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdSection {
    low_upper: f64,
    high_lower: f64,
}

impl ModelBundle {
    pub fn to_json(&self) -> String {
        let net = &self.network;
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            layer_sizes: net.layer_sizes().to_vec(),
            activation: net.activation(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.rows().map(<[f64]>::to_vec).collect())
                .collect(),
            biases: net.layers().iter().map(|l| l.biases().to_vec()).collect(),
            scaler: ScalerSection {
                mins: self.scaler.mins().to_vec(),
                maxs: self.scaler.maxs().to_vec(),
                channels: ChannelId::ALL
                    .iter()
                    .map(|c| c.name().to_string())
                    .collect(),
            },
            thresholds: ThresholdSection {
                low_upper: self.thresholds.low_upper,
                high_lower: self.thresholds.high_lower,
            },
            score_rule: self.score_rule,
            seed: net.config().seed,
            trained_epochs: net.trained_epochs(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model file is plain data");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<ModelBundle> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::format("model", e.to_string()))?;
        match value.get("format_version").and_then(Value::as_u64) {
            Some(FORMAT_VERSION) => {}
            Some(other) => {
                return Err(Error::format(
                    "format_version",
                    format!("unsupported version {other}"),
                ))
            }
            None => return Err(Error::format("format_version", "missing or not an integer")),
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::format("model", e.to_string()))?;

        let sizes = &file.layer_sizes;
        if sizes.first() != Some(&ChannelId::COUNT) {
            return Err(Error::format(
                "layer_sizes",
                format!("input layer must have {} nodes", ChannelId::COUNT),
            ));
        }
        if sizes.last() != Some(&CLASS_COUNT) {
            return Err(Error::format(
                "layer_sizes",
                format!("output layer must have {CLASS_COUNT} nodes"),
            ));
        }
        let config = NetworkConfig {
            layer_sizes: file.layer_sizes.clone(),
            activation: file.activation,
            seed: file.seed,
            ..NetworkConfig::default()
        };
        let mut network = Network::from_parameters(file.weights, file.biases, config)?;
        network.set_trained_epochs(file.trained_epochs);

        let scaler = parse_scaler(file.scaler)?;
        let thresholds = RiskThresholds {
            low_upper: file.thresholds.low_upper,
            high_lower: file.thresholds.high_lower,
        };
        thresholds
            .validate()
            .map_err(|e| Error::format("thresholds", e.to_string()))?;
        Ok(ModelBundle {
            network,
            scaler,
            thresholds,
            score_rule: file.score_rule,
        })
    }
}

fn parse_scaler(section: ScalerSection) -> Result<ScalerParams> {
    let expected: Vec<&str> = ChannelId::ALL.iter().map(|c| c.name()).collect();
    if section.channels != expected {
        return Err(Error::format(
            "scaler.channels",
            format!("expected {expected:?}"),
        ));
    }
    let to_array = |field: &str, v: Vec<f64>| -> Result<[f64; ChannelId::COUNT]> {
        let found = v.len();
        v.try_into().map_err(|_| {
            Error::format(
                format!("scaler.{field}"),
                format!("expected {} values, found {found}", ChannelId::COUNT),
            )
        })
    };
    let mins = to_array("mins", section.mins)?;
    let maxs = to_array("maxs", section.maxs)?;
    ScalerParams::new(mins, maxs).map_err(|e| Error::format("scaler", e.to_string()))
}

/// Writes the bundle as JSON. Identical bundles produce identical bytes.
pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, bundle.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let text = fs::read_to_string(path)?;
    ModelBundle::from_json(&text)
}
