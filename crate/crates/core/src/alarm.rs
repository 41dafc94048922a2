//! Offline replay of sensor frames through a trained bundle, producing
//! debounced alert events.
//!
//! The alarm tracks a current risk level, starting at Low. A frame whose
//! predicted class differs from the current level starts (or extends) a
//! pending run; once `debounce` consecutive frames agree on the new class
//! the level switches. Switching into High always alerts, into Medium only
//! with `warn_on_medium`, into Low never.

use std::io::BufRead;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ann::{ModelBundle, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::ingest::{select_features, ChannelId, RawFeatureRow, RawRecord, Rejection};
use crate::preprocess::{apply_scaler, RiskLabel};

const JSON_TIMESTAMP_FORMATS: [&str; 2] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub timestamp: NaiveDateTime,
    pub raw: RawFeatureRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmPolicy {
    pub debounce: usize,
    pub warn_on_medium: bool,
}

impl Default for AlarmPolicy {
    fn default() -> Self {
        AlarmPolicy {
            debounce: 1,
            warn_on_medium: true,
        }
    }
}

impl AlarmPolicy {
    pub fn new(debounce: usize, warn_on_medium: bool) -> Result<Self> {
        if debounce == 0 {
            return Err(Error::Config("debounce must be at least 1".into()));
        }
        Ok(AlarmPolicy {
            debounce,
            warn_on_medium,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub timestamp: NaiveDateTime,
    /// Medium or High; Low never alerts.
    pub level: RiskLabel,
    pub score: f64,
    pub message: String,
}

impl AlertEvent {
    fn new(timestamp: NaiveDateTime, level: RiskLabel, score: f64) -> Self {
        let message = match level {
            RiskLabel::High => format!(
                "High pollution risk ({score:.2}): leave this area and take your reliever inhaler"
            ),
            _ => format!("Medium pollution risk ({score:.2}): limit exposure and stay alert"),
        };
        AlertEvent {
            timestamp,
            level,
            score,
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmState {
    pub current_level: RiskLabel,
    pub pending_level: RiskLabel,
    pub pending_run: usize,
}

impl Default for AlarmState {
    fn default() -> Self {
        AlarmState {
            current_level: RiskLabel::Low,
            pending_level: RiskLabel::Low,
            pending_run: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Network activation of the chosen class.
    pub score: f64,
    pub label: RiskLabel,
    pub net_scores: [f64; CLASS_COUNT],
}

/// Scales the frame with the bundle's (clamping) scaler and classifies it.
pub fn classify_frame(bundle: &ModelBundle, frame: &SensorFrame) -> Result<Classification> {
    let features = apply_scaler(&bundle.scaler, &frame.raw);
    let prediction = bundle.network.predict(&features)?;
    Ok(Classification {
        score: prediction.scores[prediction.label.index()],
        label: prediction.label,
        net_scores: prediction.scores,
    })
}

pub fn alarm_step(
    state: AlarmState,
    label: RiskLabel,
    score: f64,
    timestamp: NaiveDateTime,
    policy: &AlarmPolicy,
) -> (AlarmState, Option<AlertEvent>) {
    if label == state.current_level {
        let reset = AlarmState {
            current_level: state.current_level,
            pending_level: state.current_level,
            pending_run: 0,
        };
        return (reset, None);
    }
    let run = if label == state.pending_level {
        state.pending_run + 1
    } else {
        1
    };
    if run < policy.debounce {
        let pending = AlarmState {
            current_level: state.current_level,
            pending_level: label,
            pending_run: run,
        };
        return (pending, None);
    }
    let switched = AlarmState {
        current_level: label,
        pending_level: label,
        pending_run: 0,
    };
    let event = match label {
        RiskLabel::High => Some(AlertEvent::new(timestamp, label, score)),
        RiskLabel::Medium if policy.warn_on_medium => {
            Some(AlertEvent::new(timestamp, label, score))
        }
        _ => None,
    };
    (switched, event)
}

/// Per-frame record of what the alarm saw and decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub timestamp: NaiveDateTime,
    pub label: RiskLabel,
    pub score: f64,
    pub net_scores: [f64; CLASS_COUNT],
    /// Alarm level after this frame.
    pub level: RiskLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlertLog {
    pub events: Vec<AlertEvent>,
    pub trace: Vec<FrameTrace>,
}

impl AlertLog {
    pub fn extend(&mut self, other: AlertLog) {
        self.events.extend(other.events);
        self.trace.extend(other.trace);
    }
}

/// Stateful replay that can be fed a stream in consecutive chunks.
#[derive(Debug, Clone)]
pub struct Replayer<'a> {
    bundle: &'a ModelBundle,
    policy: AlarmPolicy,
    state: AlarmState,
    last_timestamp: Option<NaiveDateTime>,
}

impl<'a> Replayer<'a> {
    pub fn new(bundle: &'a ModelBundle, policy: AlarmPolicy) -> Result<Self> {
        AlarmPolicy::new(policy.debounce, policy.warn_on_medium)?;
        Ok(Replayer {
            bundle,
            policy,
            state: AlarmState::default(),
            last_timestamp: None,
        })
    }

    pub fn state(&self) -> AlarmState {
        self.state
    }

    /// Replays the next chunk. Timestamps must not decrease, across chunk
    /// boundaries too; the whole chunk is checked before any state changes.
    pub fn feed(&mut self, frames: &[SensorFrame]) -> Result<AlertLog> {
        let mut last = self.last_timestamp;
        for frame in frames {
            if last.is_some_and(|t| frame.timestamp < t) {
                return Err(Error::Ordering {
                    timestamp: frame.timestamp.to_string(),
                });
            }
            last = Some(frame.timestamp);
        }
        let mut log = AlertLog::default();
        for frame in frames {
            let c = classify_frame(self.bundle, frame)?;
            let (state, event) =
                alarm_step(self.state, c.label, c.score, frame.timestamp, &self.policy);
            self.state = state;
            log.events.extend(event);
            log.trace.push(FrameTrace {
                timestamp: frame.timestamp,
                label: c.label,
                score: c.score,
                net_scores: c.net_scores,
                level: state.current_level,
            });
        }
        self.last_timestamp = last;
        Ok(log)
    }
}

/// Replays a whole stream from the initial Low state.
pub fn replay(
    frames: &[SensorFrame],
    bundle: &ModelBundle,
    policy: &AlarmPolicy,
) -> Result<AlertLog> {
    Replayer::new(bundle, *policy)?.feed(frames)
}

/// Turns parsed CSV records into frames, rejecting incomplete ones.
pub fn frames_from_records(records: &[RawRecord]) -> (Vec<SensorFrame>, usize) {
    let frames: Vec<SensorFrame> = records
        .iter()
        .filter_map(|r| {
            select_features(r).map(|raw| SensorFrame {
                timestamp: r.timestamp,
                raw,
            })
        })
        .collect();
    let rejected = records.len() - frames.len();
    (frames, rejected)
}

fn parse_json_timestamp(text: &str) -> Option<NaiveDateTime> {
    JSON_TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
}

/// Reads a JSON-lines frame stream: one object per line with a `timestamp`
/// (`YYYY-MM-DDTHH:MM:SS`) and the eight channels by name (`CO`, `NMHC`,
/// `C6H6`, `NOx`, `NO2`, `T`, `RH`, `AH`). Lines with a missing, null or
/// non-finite channel are rejected; malformed lines are a format error.
pub fn read_jsonl_frames<R: BufRead>(source: R) -> Result<(Vec<SensorFrame>, Vec<Rejection>)> {
    let mut frames = Vec::new();
    let mut rejected = Vec::new();
    for (index, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("line {line_no}"), e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| Error::format(format!("line {line_no}"), "expected a JSON object"))?;
        let timestamp = object
            .get("timestamp")
            .and_then(Value::as_str)
            .and_then(parse_json_timestamp)
            .ok_or_else(|| {
                Error::format(
                    format!("line {line_no}.timestamp"),
                    "missing or invalid timestamp",
                )
            })?;
        let mut values = [None; ChannelId::COUNT];
        for (key, v) in object {
            if let Some(ch) = ChannelId::from_header(key) {
                values[ch.ordinal()] = v.as_f64().filter(|x| x.is_finite());
            }
        }
        match values.iter().position(Option::is_none) {
            Some(missing) => rejected.push(Rejection {
                line: line_no,
                reason: format!("missing channel {}", ChannelId::ALL[missing]),
            }),
            None => frames.push(SensorFrame {
                timestamp,
                raw: RawFeatureRow(values.map(|v| v.expect("checked above"))),
            }),
        }
    }
    Ok((frames, rejected))
}
