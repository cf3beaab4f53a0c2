//! Grid search over explainer configurations scored by robustness and
//! infidelity, standardized and combined into one ranking.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::kernel_shap::{coalition_values, solve_attributions};
use crate::explain::{Explainer, ExplainerConfig, L1Reg, LimeConfig, ShapConfig, Summarize};
use crate::matrix::Matrix;
use crate::model::Predictor;
use crate::seed;
use crate::xai_eval::{
    infidelity_multi, instance_sample, robustness_lipschitz_multi, InfidelityConfig,
    RobustnessConfig,
};

/// Attribution magnitude below which a feature counts as inactive.
pub const SUPPORT_EPS: f64 = 1e-9;

/// Kernel SHAP sample budget, possibly relative to the feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NSamples {
    Fixed(usize),
    /// `k * d + c`
    PerFeature {
        k: usize,
        c: usize,
    },
    /// All `2^d - 2` coalitions; skipped when `d > 10`.
    Exhaustive,
}

pub const MAX_EXHAUSTIVE_FEATURES: usize = 10;

impl NSamples {
    pub fn resolve(self, d: usize) -> Option<usize> {
        match self {
            NSamples::Fixed(n) => Some(n),
            NSamples::PerFeature { k, c } => Some(k * d + c),
            NSamples::Exhaustive => (d <= MAX_EXHAUSTIVE_FEATURES).then(|| (1usize << d) - 2),
        }
    }
}

impl std::fmt::Display for NSamples {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NSamples::Fixed(n) => write!(f, "{n}"),
            NSamples::PerFeature { k, c: 0 } => write!(f, "{k}d"),
            NSamples::PerFeature { k, c } => write!(f, "{k}d+{c}"),
            NSamples::Exhaustive => write!(f, "exhaustive"),
        }
    }
}

impl std::str::FromStr for NSamples {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "exhaustive" {
            return Ok(NSamples::Exhaustive);
        }
        if let Ok(n) = s.parse() {
            return Ok(NSamples::Fixed(n));
        }
        let bad = || Error::Config(format!("bad nsamples {s:?}; use N, kd, kd+c or exhaustive"));
        let (k, c) = match s.split_once('+') {
            Some((a, b)) => (a.trim(), b.trim().parse().map_err(|_| bad())?),
            None => (s, 0),
        };
        let k = k.strip_suffix('d').ok_or_else(bad)?;
        let k = if k.is_empty() {
            1
        } else {
            k.parse().map_err(|_| bad())?
        };
        Ok(NSamples::PerFeature { k, c })
    }
}

impl Serialize for NSamples {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NSamples::Fixed(n) => s.serialize_u64(*n as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for NSamples {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(NSamples::Fixed(n as usize)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub nsamples: Vec<NSamples>,
    pub l1_reg: Vec<L1Reg>,
    pub summarize: Vec<Summarize>,
    pub lime_num_samples: Vec<usize>,
    pub lime_kernel_width: Option<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            nsamples: vec![
                NSamples::PerFeature { k: 2, c: 2 },
                NSamples::PerFeature { k: 10, c: 0 },
                NSamples::PerFeature { k: 100, c: 0 },
                NSamples::Fixed(581),
                NSamples::Exhaustive,
            ],
            l1_reg: vec![
                L1Reg::None,
                L1Reg::Bic,
                L1Reg::NumFeatures(2),
                L1Reg::NumFeatures(4),
            ],
            summarize: vec![Summarize::Full, Summarize::Kmeans(10)],
            lime_num_samples: vec![10, 69, 500, 5000],
            lime_kernel_width: None,
        }
    }
}

impl SearchSpace {
    /// Concrete configurations in enumeration order: Kernel SHAP by
    /// (nsamples, l1_reg, summarize), then LIME.
    pub fn configs(&self, d: usize, seed: u64) -> Result<Vec<ExplainerConfig>> {
        let mut out = Vec::new();
        for ns in &self.nsamples {
            let Some(nsamples) = ns.resolve(d) else {
                log::info!("skipping nsamples={ns} for d={d}");
                continue;
            };
            for &l1_reg in &self.l1_reg {
                for &summarize in &self.summarize {
                    out.push(ExplainerConfig::Shap(ShapConfig {
                        nsamples,
                        l1_reg,
                        summarize,
                        seed,
                    }));
                }
            }
        }
        for &num_samples in &self.lime_num_samples {
            out.push(ExplainerConfig::Lime(LimeConfig {
                num_samples,
                kernel_width: self.lime_kernel_width,
                seed,
            }));
        }
        if out.len() < 2 {
            return Err(Error::Config(format!(
                "search space yields {} configuration(s); at least 2 are needed",
                out.len()
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub robustness: RobustnessConfig,
    pub infidelity: InfidelityConfig,
    pub sample_size: usize,
    /// Seed of the shared instance sample.
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            robustness: RobustnessConfig::default(),
            infidelity: InfidelityConfig::default(),
            sample_size: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub robustness: f64,
    pub infidelity: f64,
    /// Mean |attribution| per feature over the instance sample.
    pub mean_abs_attribution: Vec<f64>,
}

impl RawScores {
    pub fn support(&self) -> usize {
        self.mean_abs_attribution
            .iter()
            .filter(|v| **v > SUPPORT_EPS)
            .count()
    }
}

struct Accumulator {
    robustness: Vec<f64>,
    infidelity: Vec<f64>,
    mean_abs: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(k: usize, d: usize) -> Self {
        Self {
            robustness: vec![0.0; k],
            infidelity: vec![0.0; k],
            mean_abs: vec![vec![0.0; d]; k],
        }
    }

    fn add(&mut self, phis: &[Vec<f64>], rob: &[f64], inf: &[f64]) {
        for v in 0..phis.len() {
            self.robustness[v] += rob[v];
            self.infidelity[v] += inf[v];
            for (m, p) in self.mean_abs[v].iter_mut().zip(&phis[v]) {
                *m += p.abs();
            }
        }
    }

    fn finish(self, count: usize) -> Vec<RawScores> {
        let c = count as f64;
        (0..self.robustness.len())
            .map(|v| RawScores {
                robustness: self.robustness[v] / c,
                infidelity: self.infidelity[v] / c,
                mean_abs_attribution: self.mean_abs[v].iter().map(|m| m / c).collect(),
            })
            .collect()
    }
}

/// Scores Kernel SHAP configurations that differ only in `l1_reg`, sharing
/// coalition evaluations between them.
fn evaluate_shap_group<P: Predictor + ?Sized>(
    model: &P,
    data: &Matrix,
    base: ShapConfig,
    l1s: &[L1Reg],
    eval: &EvalSettings,
) -> Result<Vec<RawScores>> {
    let explainer = Explainer::new(model, data, ExplainerConfig::Shap(base))?;
    let bg = explainer.background();
    let phi0 = explainer.base_value();
    let sample = instance_sample(data.rows(), eval.sample_size, eval.seed)?;
    let mut acc = Accumulator::new(l1s.len(), data.cols());
    for &i in &sample {
        let es = base.seed.wrapping_add(i as u64);
        let design = explainer.design(es)?;
        let explain = |p: &[f64]| -> Result<Vec<Vec<f64>>> {
            let values = coalition_values(model, p, bg, &design.masks);
            let fx = model.predict_row(p);
            l1s.iter()
                .map(|&l1| solve_attributions(&design, &values, fx, phi0, l1))
                .collect()
        };
        let x = data.row(i);
        let phis = explain(x)?;
        let rob = robustness_lipschitz_multi(
            explain,
            x,
            &RobustnessConfig {
                seed: seed::derive(eval.robustness.seed, i as u64),
                ..eval.robustness
            },
        )?;
        let inf = infidelity_multi(
            &phis,
            model,
            x,
            &InfidelityConfig {
                seed: seed::derive(eval.infidelity.seed, i as u64),
                ..eval.infidelity
            },
        )?;
        acc.add(&phis, &rob, &inf);
    }
    Ok(acc.finish(sample.len()))
}

fn evaluate_single<P: Predictor + ?Sized>(
    cfg: &ExplainerConfig,
    model: &P,
    data: &Matrix,
    eval: &EvalSettings,
) -> Result<RawScores> {
    let explainer = Explainer::new(model, data, *cfg)?;
    let sample = instance_sample(data.rows(), eval.sample_size, eval.seed)?;
    let mut acc = Accumulator::new(1, data.cols());
    for &i in &sample {
        let es = cfg.seed().wrapping_add(i as u64);
        let explain = |p: &[f64]| Ok(vec![explainer.explain(p, es)?.phi]);
        let x = data.row(i);
        let phis = explain(x)?;
        let rob = robustness_lipschitz_multi(
            explain,
            x,
            &RobustnessConfig {
                seed: seed::derive(eval.robustness.seed, i as u64),
                ..eval.robustness
            },
        )?;
        let inf = infidelity_multi(
            &phis,
            model,
            x,
            &InfidelityConfig {
                seed: seed::derive(eval.infidelity.seed, i as u64),
                ..eval.infidelity
            },
        )?;
        acc.add(&phis, &rob, &inf);
    }
    Ok(acc.finish(sample.len()).remove(0))
}

/// Mean robustness and infidelity of one configuration over the shared
/// instance sample.
pub fn evaluate_config<P: Predictor + ?Sized>(
    cfg: &ExplainerConfig,
    model: &P,
    data: &Matrix,
    eval: &EvalSettings,
) -> Result<RawScores> {
    evaluate_single(cfg, model, data, eval)
}

/// Design identity: exhaustive designs do not depend on nsamples.
fn group_key(c: &ShapConfig, d: usize) -> (Option<usize>, Summarize, u64) {
    let exhaustive = d <= 1 || (1u64 << d.min(63)) - 2 <= c.nsamples as u64;
    ((!exhaustive).then_some(c.nsamples), c.summarize, c.seed)
}

/// Evaluates every configuration; Kernel SHAP configurations that share a
/// coalition design are scored together. Results align with `cfgs`.
pub fn evaluate_all<P: Predictor + ?Sized>(
    cfgs: &[ExplainerConfig],
    model: &P,
    data: &Matrix,
    eval: &EvalSettings,
) -> Vec<Result<RawScores>> {
    let d = data.cols();
    let mut groups: Vec<((Option<usize>, Summarize, u64), ShapConfig, Vec<L1Reg>)> = Vec::new();
    let mut slot: Vec<Option<(usize, usize)>> = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        match cfg {
            ExplainerConfig::Shap(c) => {
                let key = group_key(c, d);
                let g = match groups.iter().position(|(k, _, _)| *k == key) {
                    Some(g) => g,
                    None => {
                        groups.push((key, *c, Vec::new()));
                        groups.len() - 1
                    }
                };
                let l1s = &mut groups[g].2;
                let v = match l1s.iter().position(|l| *l == c.l1_reg) {
                    Some(v) => v,
                    None => {
                        l1s.push(c.l1_reg);
                        l1s.len() - 1
                    }
                };
                slot.push(Some((g, v)));
            }
            ExplainerConfig::Lime(_) => slot.push(None),
        }
    }
    let mut group_results: HashMap<usize, std::result::Result<Vec<RawScores>, String>> =
        HashMap::new();
    for (g, (_, base, l1s)) in groups.iter().enumerate() {
        log::debug!(
            "evaluating kernel SHAP group {} with {} l1 variants",
            g,
            l1s.len()
        );
        group_results.insert(
            g,
            evaluate_shap_group(model, data, *base, l1s, eval).map_err(|e| e.to_string()),
        );
    }
    cfgs.iter()
        .zip(&slot)
        .map(|(cfg, s)| match s {
            Some((g, v)) => match &group_results[g] {
                Ok(scores) => Ok(scores[*v].clone()),
                Err(e) => Err(Error::InvalidInput(e.clone())),
            },
            None => evaluate_single(cfg, model, data, eval),
        })
        .collect()
}

/// Z-scores with population standard deviation; a constant metric maps to
/// zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * mean.abs().max(1e-300)) || !std.is_finite() {
        log::warn!("metric has zero variance across configurations; standardized to 0");
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Orients both metrics so that higher is better, then standardizes each.
/// Returns `(robustness_std, fidelity_std)`.
pub fn standardize_scores(
    raw_robustness: &[f64],
    raw_infidelity: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if raw_robustness.len() != raw_infidelity.len() {
        return Err(Error::Dimension {
            expected: raw_robustness.len(),
            got: raw_infidelity.len(),
        });
    }
    if raw_robustness.len() < 2 {
        return Err(Error::InvalidInput(
            "standardization needs at least 2 configurations".into(),
        ));
    }
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    Ok((
        standardize(&neg(raw_robustness)),
        standardize(&neg(raw_infidelity)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub robustness: f64,
    pub fidelity: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            robustness: 0.5,
            fidelity: 1.0,
        }
    }
}

pub fn aggregate(z_robustness: f64, z_fidelity: f64, w: Weights) -> f64 {
    w.robustness * z_robustness + w.fidelity * z_fidelity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub aggregated: f64,
    pub robustness_std: f64,
    pub fidelity_std: f64,
    pub algorithm: String,
    pub hyperparameters: String,
    pub config: ExplainerConfig,
    pub raw_robustness: f64,
    pub raw_infidelity: f64,
    pub support: usize,
    pub mean_abs_attribution: Vec<f64>,
    /// Position in the search-space enumeration.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedConfig {
    pub algorithm: String,
    pub hyperparameters: String,
    pub config: ExplainerConfig,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub weights: Weights,
    pub entries: Vec<RankingEntry>,
    pub skipped: Vec<SkippedConfig>,
}

/// Sorts by aggregated score descending, ties in enumeration order, and
/// numbers ranks from 1.
pub fn rank_configs(mut entries: Vec<RankingEntry>) -> Vec<RankingEntry> {
    entries.sort_by(|a, b| {
        b.aggregated
            .total_cmp(&a.aggregated)
            .then(a.order.cmp(&b.order))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

/// Builds a ranking table from raw scores aligned with `cfgs`.
pub fn build_table(
    cfgs: &[ExplainerConfig],
    raws: Vec<Result<RawScores>>,
    weights: Weights,
) -> Result<RankingTable> {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (order, (cfg, raw)) in cfgs.iter().zip(raws).enumerate() {
        match raw {
            Ok(r) if r.robustness.is_finite() && r.infidelity.is_finite() => {
                ok.push((order, cfg, r))
            }
            Ok(_) => skipped.push(skip(cfg, "non-finite metric".into())),
            Err(e) => skipped.push(skip(cfg, e.to_string())),
        }
    }
    if ok.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} configuration(s) could be evaluated",
            ok.len()
        )));
    }
    let rob: Vec<f64> = ok.iter().map(|(_, _, r)| r.robustness).collect();
    let inf: Vec<f64> = ok.iter().map(|(_, _, r)| r.infidelity).collect();
    let (zr, zf) = standardize_scores(&rob, &inf)?;
    let entries = ok
        .into_iter()
        .enumerate()
        .map(|(k, (order, cfg, r))| RankingEntry {
            rank: 0,
            aggregated: aggregate(zr[k], zf[k], weights),
            robustness_std: zr[k],
            fidelity_std: zf[k],
            algorithm: cfg.algorithm().into(),
            hyperparameters: cfg.hyperparameters(),
            config: *cfg,
            raw_robustness: r.robustness,
            raw_infidelity: r.infidelity,
            support: r.support(),
            mean_abs_attribution: r.mean_abs_attribution,
            order,
        })
        .collect();
    Ok(RankingTable {
        weights,
        entries: rank_configs(entries),
        skipped,
    })
}

fn skip(cfg: &ExplainerConfig, reason: String) -> SkippedConfig {
    SkippedConfig {
        algorithm: cfg.algorithm().into(),
        hyperparameters: cfg.hyperparameters(),
        config: *cfg,
        reason,
    }
}

/// Enumerates, evaluates and ranks the search space.
pub fn search<P: Predictor + ?Sized>(
    model: &P,
    data: &Matrix,
    space: &SearchSpace,
    eval: &EvalSettings,
    weights: Weights,
    explainer_seed: u64,
) -> Result<RankingTable> {
    let cfgs = space.configs(data.cols(), explainer_seed)?;
    let raws = evaluate_all(&cfgs, model, data, eval);
    build_table(&cfgs, raws, weights)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConstraints {
    pub min_active_features: Option<usize>,
    /// Allowed algorithms ("SHAP", "LIME"); empty allows all.
    pub algorithms: Vec<String>,
}

pub fn select_config<'a>(
    table: &'a RankingTable,
    c: &SelectionConstraints,
) -> Result<&'a RankingEntry> {
    if table.entries.is_empty() {
        return Err(Error::InvalidInput("ranking table is empty".into()));
    }
    table
        .entries
        .iter()
        .find(|e| {
            c.min_active_features.is_none_or(|m| e.support >= m)
                && (c.algorithms.is_empty()
                    || c.algorithms
                        .iter()
                        .any(|a| a.eq_ignore_ascii_case(&e.algorithm)))
        })
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "no ranked configuration satisfies constraints {c:?}"
            ))
        })
}

impl RankingTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "| Rank | Aggregated | Robustness (std) | Fidelity (std) | Algorithm | Hyperparameters | Raw robustness | Raw infidelity | Active features |"
        );
        let _ = writeln!(s, "|---:|---:|---:|---:|---|---|---:|---:|---:|");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "| {} | {:.3} | {:.3} | {:.3} | {} | {} | {:.4} | {:.3e} | {} |",
                e.rank,
                e.aggregated,
                e.robustness_std,
                e.fidelity_std,
                e.algorithm,
                e.hyperparameters,
                e.raw_robustness,
                e.raw_infidelity,
                e.support
            );
        }
        for k in &self.skipped {
            let _ = writeln!(
                s,
                "\nSkipped {} {}: {}",
                k.algorithm, k.hyperparameters, k.reason
            );
        }
        s
    }
}
