use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{kendall_tau, rank_cmim, rank_jmi, rank_mi, FeatureRanking, DEFAULT_BINS};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::explain::{explain_rows, Explainer, ExplainerConfig, ExplanationSet};
use crate::model::{train_mlp, MlpConfig, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Cmim,
    Jmi,
    Mi,
    /// Keep every feature.
    None,
}

impl SelectionMethod {
    pub fn rank(self, ds: &Dataset, bins: usize) -> Option<FeatureRanking> {
        match self {
            SelectionMethod::Cmim => Some(rank_cmim(ds, bins)),
            SelectionMethod::Jmi => Some(rank_jmi(ds, bins)),
            SelectionMethod::Mi => Some(rank_mi(ds, bins)),
            SelectionMethod::None => None,
        }
    }
}

/// Drop-if-no-loss: keep removing the lowest-ranked feature while the mean
/// retrained accuracy stays within `delta` of the all-features accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionPolicy {
    pub delta: f64,
    /// Accuracy is averaged over trainings with seeds `mlp.seed + 0..seeds`.
    pub seeds: usize,
    pub bins: usize,
    pub min_features: usize,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            delta: 0.005,
            seeds: 5,
            bins: DEFAULT_BINS,
            min_features: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: Vec<String>,
    pub accuracy: f64,
    pub kendall_tau_vs_full: f64,
    pub influence_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetTrial {
    pub subset: Vec<String>,
    pub mean_accuracy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub method: SelectionMethod,
    pub ranking: Option<FeatureRanking>,
    pub full_accuracy: f64,
    /// Kept features in dataset column order.
    pub selected: Vec<String>,
    pub dropped: Vec<String>,
    pub trials: Vec<SubsetTrial>,
}

/// Mean resubstitution accuracy over `seeds` trainings.
pub fn mean_accuracy(ds: &Dataset, mlp: &MlpConfig, seeds: usize) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..seeds.max(1) {
        let cfg = MlpConfig {
            seed: mlp.seed.wrapping_add(k as u64),
            ..mlp.clone()
        };
        total += train_mlp(ds, &cfg)?.accuracy(ds)?;
    }
    Ok(total / seeds.max(1) as f64)
}

pub fn select_features(
    ds: &Dataset,
    method: SelectionMethod,
    policy: &SelectionPolicy,
    mlp: &MlpConfig,
) -> Result<SelectionOutcome> {
    let ranking = method.rank(ds, policy.bins);
    let mut cache: HashMap<Vec<String>, f64> = HashMap::new();
    let mut score = |names: &[String]| -> Result<f64> {
        let mut key = names.to_vec();
        key.sort();
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let v = mean_accuracy(
            &ds.select_features(&in_column_order(ds, names))?,
            mlp,
            policy.seeds,
        )?;
        cache.insert(key, v);
        Ok(v)
    };
    let full_accuracy = score(ds.feature_names())?;
    let mut trials = Vec::new();
    let mut kept: Vec<String> = match &ranking {
        Some(r) => r.names.clone(),
        None => ds.feature_names().to_vec(),
    };
    if ranking.is_some() {
        while kept.len() > policy.min_features.max(1) {
            let candidate = &kept[..kept.len() - 1];
            let acc = score(candidate)?;
            let accepted = acc >= full_accuracy - policy.delta;
            trials.push(SubsetTrial {
                subset: in_column_order(ds, candidate),
                mean_accuracy: acc,
                accepted,
            });
            if !accepted {
                break;
            }
            kept.pop();
        }
    }
    let selected = in_column_order(ds, &kept);
    let dropped = ds
        .feature_names()
        .iter()
        .filter(|n| !selected.contains(n))
        .cloned()
        .collect();
    Ok(SelectionOutcome {
        method,
        ranking,
        full_accuracy,
        selected,
        dropped,
        trials,
    })
}

fn in_column_order(ds: &Dataset, names: &[String]) -> Vec<String> {
    ds.feature_names()
        .iter()
        .filter(|n| names.contains(n))
        .cloned()
        .collect()
}

/// Features ordered by mean |attribution| descending, ties by column order.
fn influence_ranking(names: &[String], influence: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| influence[b].total_cmp(&influence[a]).then(a.cmp(&b)));
    order.into_iter().map(|i| names[i].clone()).collect()
}

/// Retrains on `subset` and compares its explanations with the all-features
/// baseline over the baseline's instances.
pub fn evaluate_subset(
    ds: &Dataset,
    subset: &[String],
    full_model: &TrainedModel,
    full_explanations: &ExplanationSet,
    mlp: &MlpConfig,
    explainer: &ExplainerConfig,
) -> Result<SubsetReport> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("feature subset is empty".into()));
    }
    if full_explanations.feature_names != ds.feature_names() {
        return Err(Error::InvalidInput(
            "baseline explanations must cover every dataset feature".into(),
        ));
    }
    let sub = ds.select_features(subset)?;
    let same = sub.feature_names() == ds.feature_names() && *mlp == full_model.config;
    let retrained;
    let model = if same {
        full_model
    } else {
        retrained = train_mlp(&sub, mlp)?;
        &retrained
    };
    let accuracy = model.accuracy(&sub)?;

    let rows = sub.features().select_rows(&full_explanations.instance_ids);
    let xs = if same {
        full_explanations.clone()
    } else {
        let ex = Explainer::new(model, sub.features(), *explainer)?;
        explain_rows(&ex, &rows, sub.feature_names())?
    };

    let full_infl = full_explanations.mean_abs();
    let sub_infl = xs.mean_abs();
    let shared: Vec<String> = sub.feature_names().to_vec();
    let full_shared: Vec<f64> = shared
        .iter()
        .map(|n| full_infl[ds.feature_index(n).expect("subset of ds")])
        .collect();
    let tau = kendall_tau(
        &influence_ranking(&shared, &sub_infl),
        &influence_ranking(&shared, &full_shared),
    )?;
    let influence_change = sub_infl
        .iter()
        .zip(&full_shared)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / shared.len() as f64;
    Ok(SubsetReport {
        subset: shared,
        accuracy,
        kendall_tau_vs_full: tau,
        influence_change,
    })
}
