//! Helpers shared by the integration tests: fixture paths, a synthetic
//! air-quality generator, and metric oracles computed straight from the
//! definitions over (predicted, actual, score) triples.
#![allow(dead_code)]

use std::path::PathBuf;

use airq_alarm::ingest::{ChannelId, RawRecord};
use airq_alarm::preprocess::RiskLabel;
use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn start_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2004, 3, 10)
        .unwrap()
        .and_hms_opt(18, 0, 0)
        .unwrap()
}

/// Hourly records driven by one smooth latent pollution level, with about
/// `missing_rate` of the NMHC cells absent.
pub fn synthetic_records(n: usize, seed: u64, missing_rate: f64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level: f64 = 0.4;
    let mut weather: f64 = 0.5;
    (0..n)
        .map(|i| {
            level = (level + rng.random_range(-0.08..0.08)).clamp(0.0, 1.0);
            weather = (weather + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0);
            let mut jitter = |scale: f64| rng.random_range(-scale..scale);
            let round = |v: f64, places: i32| {
                let f = 10f64.powi(places);
                (v * f).round() / f
            };
            let co = round(0.1 + 11.0 * level + jitter(0.3), 1).max(0.1);
            let nmhc = round(10.0 + 1100.0 * level + jitter(30.0), 0).max(7.0);
            let c6h6 = round(0.2 + 55.0 * level + jitter(1.0), 1).max(0.1);
            let nox = round(5.0 + 1400.0 * level + jitter(40.0), 0).max(2.0);
            let no2 = round(5.0 + 320.0 * level + jitter(10.0), 0).max(2.0);
            let t = round(-1.0 + 44.0 * weather + jitter(1.0), 1);
            let rh = round(85.0 - 70.0 * weather + jitter(3.0), 1);
            let ah = round(0.2 + 1.9 * weather + jitter(0.05), 4).max(0.19);
            let mut channels = [co, nmhc, c6h6, nox, no2, t, rh, ah].map(Some);
            if rng.random_bool(missing_rate) {
                channels[ChannelId::Nmhc.ordinal()] = None;
            }
            RawRecord::new(start_time() + Duration::hours(i as i64), channels)
        })
        .collect()
}

pub fn random_label(rng: &mut ChaCha8Rng) -> RiskLabel {
    RiskLabel::from_index(rng.random_range(0..3)).unwrap()
}

/// Output vectors with frequent exact ties, so rank averaging is exercised.
pub fn random_outputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            let mut o = [0.0; 3];
            for v in &mut o {
                *v = if coarse {
                    f64::from(rng.random_range(0..5u8)) / 4.0
                } else {
                    rng.random()
                };
            }
            o
        })
        .collect()
}

/// First index of the largest output.
pub fn oracle_argmax(o: &[f64; 3]) -> RiskLabel {
    let mut best = 0;
    for k in 1..3 {
        if o[k] > o[best] {
            best = k;
        }
    }
    RiskLabel::from_index(best).unwrap()
}

fn count(pairs: &[(RiskLabel, RiskLabel)], f: impl Fn(RiskLabel, RiskLabel) -> bool) -> f64 {
    pairs.iter().filter(|(p, a)| f(*p, *a)).count() as f64
}

pub fn oracle_accuracy(pairs: &[(RiskLabel, RiskLabel)]) -> f64 {
    count(pairs, |p, a| p == a) / pairs.len() as f64
}

pub fn oracle_kappa(pairs: &[(RiskLabel, RiskLabel)]) -> f64 {
    let n = pairs.len() as f64;
    let observed = oracle_accuracy(pairs);
    let chance: f64 = RiskLabel::ALL
        .iter()
        .map(|&k| (count(pairs, |p, _| p == k) / n) * (count(pairs, |_, a| a == k) / n))
        .sum();
    if chance == 1.0 {
        0.0
    } else {
        (observed - chance) / (1.0 - chance)
    }
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// (precision, recall, F1) of class `k` against the rest.
pub fn oracle_prf(pairs: &[(RiskLabel, RiskLabel)], k: RiskLabel) -> (f64, f64, f64) {
    let tp = count(pairs, |p, a| p == k && a == k);
    let fp = count(pairs, |p, a| p == k && a != k);
    let fn_ = count(pairs, |p, a| p != k && a == k);
    let precision = safe_div(tp, tp + fp);
    let recall = safe_div(tp, tp + fn_);
    (
        precision,
        recall,
        safe_div(2.0 * precision * recall, precision + recall),
    )
}

/// (MAE, RMSE) over every output component against one-hot targets.
pub fn oracle_mae_rmse(outputs: &[[f64; 3]], actuals: &[RiskLabel]) -> (f64, f64) {
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (o, a) in outputs.iter().zip(actuals) {
        for (k, v) in o.iter().enumerate() {
            let t = if a.index() == k { 1.0 } else { 0.0 };
            abs += (v - t).abs();
            sq += (v - t) * (v - t);
        }
    }
    let m = (3 * outputs.len()) as f64;
    (abs / m, (sq / m).sqrt())
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half;
/// `None` without both kinds.
pub fn oracle_auc(scores: &[f64], positives: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if !positives[i] {
            continue;
        }
        for (j, &t) in scores.iter().enumerate() {
            if positives[j] {
                continue;
            }
            pairs += 1.0;
            if s > t {
                wins += 1.0;
            } else if s == t {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}
