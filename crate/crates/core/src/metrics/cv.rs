use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{network_outputs, EvalReport};
use crate::ann::{init_network, train, NetworkConfig, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::preprocess::{LabeledExample, RiskLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Example indices held out in each fold.
    pub folds: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Shuffles each class with the seeded PRNG and deals its members
/// round-robin into `k` folds. The dealing position carries over from one
/// class to the next, so overall fold sizes also differ by at most one.
pub fn stratified_folds(labels: &[RiskLabel], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Domain(format!(
            "{k} folds requested for {} examples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut warnings = Vec::new();
    let mut next = 0;
    for class in RiskLabel::ALL {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class)
            .map(|(i, _)| i)
            .collect();
        if !members.is_empty() && members.len() < k {
            warnings.push(format!(
                "class {class} has {} members for {k} folds; some folds will lack it",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { folds, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub warnings: Vec<String>,
    /// Statistics over the pooled held-out predictions of every fold.
    pub pooled: EvalReport,
}

/// Stratified k-fold cross-validation. Each fold trains its own network from
/// `config` (folds run in parallel) and is scored on its held-out part.
pub fn stratified_kfold_cv(
    data: &[LabeledExample],
    k: usize,
    seed: u64,
    config: &NetworkConfig,
) -> Result<CvReport> {
    let labels: Vec<RiskLabel> = data.iter().map(|e| e.label).collect();
    let assignment = stratified_folds(&labels, k, seed)?;

    let results: Vec<(Vec<[f64; CLASS_COUNT]>, Vec<RiskLabel>)> = assignment
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold, held_out)| {
            let train_set: Vec<LabeledExample> = assignment
                .folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != fold)
                .flat_map(|(_, idx)| idx.iter().map(|&i| data[i].clone()))
                .collect();
            let test_set: Vec<LabeledExample> = held_out.iter().map(|&i| data[i].clone()).collect();
            let net = init_network(config)?;
            let (net, _) = train(net, &train_set, config)?;
            let outputs = network_outputs(&net, &test_set)?;
            Ok((outputs, test_set.iter().map(|e| e.label).collect()))
        })
        .collect::<Result<_>>()?;

    let mut outputs = Vec::with_capacity(data.len());
    let mut actuals = Vec::with_capacity(data.len());
    let mut fold_accuracies = Vec::with_capacity(k);
    for (out, act) in &results {
        let correct = out
            .iter()
            .zip(act)
            .filter(|(o, a)| crate::ann::argmax_label(o) == **a)
            .count();
        fold_accuracies.push(if act.is_empty() {
            0.0
        } else {
            correct as f64 / act.len() as f64
        });
        outputs.extend_from_slice(out);
        actuals.extend_from_slice(act);
    }
    Ok(CvReport {
        folds: k,
        fold_sizes: assignment.folds.iter().map(Vec::len).collect(),
        fold_accuracies,
        warnings: assignment.warnings,
        pooled: EvalReport::from_outputs(&outputs, &actuals)?,
    })
}
