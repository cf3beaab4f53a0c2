//! Cluster summaries: per-cluster model statistics, one high-precision rule
//! per cluster over the original feature values, and the medoid instance.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expcluster::ClusterAssignment;
use crate::explain::ExplanationSet;
use crate::matrix::{euclidean, Matrix};
use crate::model::Predictor;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub size: usize,
    pub accuracy: f64,
    pub mean_prediction: f64,
    pub positive_rate: f64,
}

pub fn cluster_stats_from_proba(
    assign: &ClusterAssignment,
    proba: &[f64],
    labels: &[u8],
) -> Vec<ClusterStats> {
    (0..assign.c)
        .map(|c| {
            let members = assign.members(c);
            let k = members.len() as f64;
            let correct = members
                .iter()
                .filter(|&&i| (proba[i] >= 0.5) == (labels[i] == 1))
                .count();
            ClusterStats {
                cluster: c,
                size: members.len(),
                accuracy: correct as f64 / k,
                mean_prediction: members.iter().map(|&i| proba[i]).sum::<f64>() / k,
                positive_rate: members.iter().filter(|&&i| labels[i] == 1).count() as f64 / k,
            }
        })
        .collect()
}

/// `ds` must be in the model's input space.
pub fn cluster_stats<P: Predictor + ?Sized>(
    assign: &ClusterAssignment,
    model: &P,
    ds: &Dataset,
) -> Result<Vec<ClusterStats>> {
    if assign.labels.len() != ds.n() {
        return Err(Error::Dimension {
            expected: ds.n(),
            got: assign.labels.len(),
        });
    }
    let mut proba = vec![0.0; ds.n()];
    model.predict_into(ds.features().as_slice(), &mut proba);
    Ok(cluster_stats_from_proba(assign, &proba, ds.labels()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    #[serde(skip)]
    pub index: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, row: &[f64]) -> bool {
        match self.op {
            Op::Le => row[self.index] <= self.threshold,
            Op::Gt => row[self.index] > self.threshold,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            Op::Le => "<=",
            Op::Gt => ">",
        };
        write!(f, "{} {} {}", self.feature, op, round3(self.threshold))
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No candidate reached the minimum precision.
    pub low_precision: bool,
}

impl Rule {
    pub fn covers(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(row))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conditions.is_empty() {
            return write!(f, "(always)");
        }
        let parts: Vec<String> = self.conditions.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" and "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub max_terms: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_precision: f64,
    pub seed: u64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            max_terms: 3,
            n_trees: 30,
            max_depth: 3,
            min_precision: 0.6,
            seed: 0,
        }
    }
}

/// `(precision, recall, f1)` of `covers` against `target` over `rows`.
fn score(rows: &[usize], x: &Matrix, target: &[bool], conds: &[Condition]) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for &i in rows {
        let hit = conds.iter().all(|c| c.holds(x.row(i)));
        match (hit, target[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            _ => {}
        }
        pos += usize::from(target[i]);
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if pos > 0 { tp as f64 / pos as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Depth-limited Gini tree grown on a bootstrap bag; only the root-to-leaf
/// paths of leaves whose positive fraction exceeds the bag's base rate are kept.
fn grow_paths(
    x: &Matrix,
    target: &[bool],
    bag: &[usize],
    features: &[usize],
    max_depth: usize,
) -> Vec<Vec<(usize, Op, f64)>> {
    let base = bag.iter().filter(|&&i| target[i]).count() as f64 / bag.len() as f64;
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, Vec<(usize, Op, f64)>)> = vec![(bag.to_vec(), Vec::new())];
    while let Some((rows, path)) = stack.pop() {
        let pos = rows.iter().filter(|&&i| target[i]).count();
        let frac = pos as f64 / rows.len() as f64;
        let split = if path.len() < max_depth && pos > 0 && pos < rows.len() {
            best_split(x, target, &rows, features)
        } else {
            None
        };
        match split {
            Some((j, t)) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, j) <= t);
                let mut pr = path.clone();
                pr.push((j, Op::Gt, t));
                let mut pl = path;
                pl.push((j, Op::Le, t));
                // Right pushed first so the left subtree is emitted first.
                stack.push((right, pr));
                stack.push((left, pl));
            }
            None => {
                if frac > base && !path.is_empty() {
                    out.push(path);
                }
            }
        }
    }
    out
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

fn best_split(
    x: &Matrix,
    target: &[bool],
    rows: &[usize],
    features: &[usize],
) -> Option<(usize, f64)> {
    let n = rows.len() as f64;
    let total_pos = rows.iter().filter(|&&i| target[i]).count() as f64;
    let parent = gini(total_pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut vals: Vec<(f64, bool)> = Vec::with_capacity(rows.len());
    for &j in features {
        vals.clear();
        vals.extend(rows.iter().map(|&i| (x.get(i, j), target[i])));
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0.0;
        for k in 0..vals.len() - 1 {
            left_pos += f64::from(u8::from(vals[k].1));
            if vals[k].0 == vals[k + 1].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let child = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
            let gain = parent - child;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, j, 0.5 * (vals[k].0 + vals[k + 1].0)));
            }
        }
    }
    best.map(|(_, j, t)| (j, t))
}

/// Interval form: the tightest bound per (feature, op), ordered by feature.
fn simplify(path: &[(usize, Op, f64)]) -> Vec<(usize, Op, f64)> {
    let mut out: Vec<(usize, Op, f64)> = Vec::new();
    for &(j, op, t) in path {
        match out.iter_mut().find(|c| c.0 == j && c.1 == op) {
            Some(c) => {
                c.2 = match op {
                    Op::Le => c.2.min(t),
                    Op::Gt => c.2.max(t),
                }
            }
            None => out.push((j, op, t)),
        }
    }
    out.sort_by_key(|a| (a.0, a.1));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rule: String,
    pub terms: usize,
    pub oob_precision: f64,
    pub oob_recall: f64,
    pub oob_f1: f64,
    /// Number of trees that produced this condition set.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleInduction {
    pub rule: Rule,
    /// Deduplicated candidates ordered by selection preference.
    pub candidates: Vec<Candidate>,
}

/// Skope-rules-style induction for "in cluster vs rest" on `ds` (original
/// feature units). Candidates are scored out-of-bag; duplicates average their
/// scores. Reported precision, recall and F1 are measured on all of `ds`.
pub fn induce_rules(
    ds: &Dataset,
    assign: &ClusterAssignment,
    cluster: usize,
    cfg: &RuleConfig,
) -> Result<RuleInduction> {
    if assign.labels.len() != ds.n() {
        return Err(Error::Dimension {
            expected: ds.n(),
            got: assign.labels.len(),
        });
    }
    let target: Vec<bool> = assign.labels.iter().map(|&l| l == cluster).collect();
    if !target.iter().any(|&t| t) {
        return Err(Error::InvalidInput(format!("cluster {cluster} is empty")));
    }
    if cfg.n_trees == 0 || cfg.max_depth == 0 || cfg.max_terms == 0 {
        return Err(Error::Config(
            "rule induction needs positive n_trees, max_depth, max_terms".into(),
        ));
    }
    let x = ds.features();
    let (n, d) = (ds.n(), ds.d());
    let all: Vec<usize> = (0..n).collect();
    let m = ((d as f64).sqrt().ceil() as usize).clamp(1, d);

    struct Acc {
        terms: Vec<(usize, Op, f64)>,
        precision: f64,
        recall: f64,
        f1: f64,
        count: usize,
    }
    let mut acc: Vec<Acc> = Vec::new();
    let to_conds = |terms: &[(usize, Op, f64)]| -> Vec<Condition> {
        terms
            .iter()
            .map(|&(j, op, t)| Condition {
                feature: ds.feature_names()[j].clone(),
                index: j,
                op,
                threshold: t,
            })
            .collect()
    };

    for t in 0..cfg.n_trees {
        let mut rng = seed::rng(seed::derive(cfg.seed, t as u64));
        let bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut features = index::sample(&mut rng, d, m).into_vec();
        features.sort_unstable();
        let mut in_bag = vec![false; n];
        for &i in &bag {
            in_bag[i] = true;
        }
        let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
        // Without out-of-bag positives the candidate is scored on all rows.
        let eval_rows = if oob.iter().any(|&i| target[i]) {
            &oob
        } else {
            &all
        };
        for path in grow_paths(x, &target, &bag, &features, cfg.max_depth) {
            let mut terms = simplify(&path);
            while terms.len() > cfg.max_terms {
                let drop = (0..terms.len())
                    .map(|k| {
                        let mut rest = terms.clone();
                        rest.remove(k);
                        (k, score(&bag, x, &target, &to_conds(&rest)).0)
                    })
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                    .0;
                terms.remove(drop);
            }
            let (p, r, f) = score(eval_rows, x, &target, &to_conds(&terms));
            match acc.iter_mut().find(|a| a.terms == terms) {
                Some(a) => {
                    a.precision += p;
                    a.recall += r;
                    a.f1 += f;
                    a.count += 1;
                }
                None => acc.push(Acc {
                    terms,
                    precision: p,
                    recall: r,
                    f1: f,
                    count: 1,
                }),
            }
        }
    }
    if acc.is_empty() {
        // Degenerate: no tree produced a positive leaf; fall back to the empty rule.
        let (precision, recall, f1) = score(&all, x, &target, &[]);
        return Ok(RuleInduction {
            rule: Rule {
                conditions: Vec::new(),
                precision,
                recall,
                f1,
                low_precision: precision < cfg.min_precision,
            },
            candidates: Vec::new(),
        });
    }
    for a in &mut acc {
        let c = a.count as f64;
        a.precision /= c;
        a.recall /= c;
        a.f1 /= c;
    }
    // Preference: meets precision floor, then F1, fewer terms, precision;
    // the stable sort keeps discovery order for exact ties.
    acc.sort_by(|a, b| {
        let ok = |v: &Acc| v.precision >= cfg.min_precision;
        ok(b)
            .cmp(&ok(a))
            .then(b.f1.total_cmp(&a.f1))
            .then(a.terms.len().cmp(&b.terms.len()))
            .then(b.precision.total_cmp(&a.precision))
    });
    let best = &acc[0];
    let conditions = to_conds(&best.terms);
    let (precision, recall, f1) = score(&all, x, &target, &conditions);
    let low_precision = best.precision < cfg.min_precision;
    if low_precision {
        log::warn!(
            "cluster {cluster}: no rule reaches precision {}",
            cfg.min_precision
        );
    }
    let candidates = acc
        .iter()
        .map(|a| Candidate {
            rule: Rule {
                conditions: to_conds(&a.terms),
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                low_precision: false,
            }
            .to_string(),
            terms: a.terms.len(),
            oob_precision: a.precision,
            oob_recall: a.recall,
            oob_f1: a.f1,
            count: a.count,
        })
        .collect();
    Ok(RuleInduction {
        rule: Rule {
            conditions,
            precision,
            recall,
            f1,
            low_precision,
        },
        candidates,
    })
}

/// Member minimizing the summed Euclidean distance to the other members in
/// explanation space; ties go to the smallest instance id.
pub fn medoid(xs: &ExplanationSet, assign: &ClusterAssignment, cluster: usize) -> Result<usize> {
    let members = assign.members(cluster);
    if members.is_empty() {
        return Err(Error::InvalidInput(format!("cluster {cluster} is empty")));
    }
    let mut best = (f64::INFINITY, members[0]);
    for &i in &members {
        let s: f64 = members
            .iter()
            .map(|&j| euclidean(xs.phi.row(i), xs.phi.row(j)))
            .sum();
        if s < best.0 {
            best = (s, i);
        }
    }
    Ok(xs.instance_ids[best.1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: String,
    pub value: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub cluster: usize,
    pub instance_id: usize,
    pub label: u8,
    /// Original feature values paired with attributions, largest |phi| first.
    pub attributions: Vec<Attribution>,
    pub phi0: f64,
    pub fx: f64,
    pub rule: Rule,
    pub stats: ClusterStats,
}

/// One recommendation per cluster built around its medoid. `original` holds
/// the instances in original units, row-aligned with `xs`.
pub fn recommend(
    xs: &ExplanationSet,
    assign: &ClusterAssignment,
    original: &Dataset,
    rules: &[Rule],
    stats: &[ClusterStats],
) -> Result<Vec<Recommendation>> {
    if rules.len() != assign.c || stats.len() != assign.c {
        return Err(Error::InvalidInput(format!(
            "expected {} rules and stats, got {} and {}",
            assign.c,
            rules.len(),
            stats.len()
        )));
    }
    (0..assign.c)
        .map(|c| {
            let id = medoid(xs, assign, c)?;
            let row = xs
                .instance_ids
                .iter()
                .position(|&v| v == id)
                .expect("medoid is a member");
            let mut attributions: Vec<Attribution> = xs
                .feature_names
                .iter()
                .enumerate()
                .map(|(j, name)| Attribution {
                    feature: name.clone(),
                    value: original.features().get(id, j),
                    phi: xs.phi.get(row, j),
                })
                .collect();
            attributions.sort_by(|a, b| b.phi.abs().total_cmp(&a.phi.abs()));
            Ok(Recommendation {
                cluster: c,
                instance_id: id,
                label: original.labels()[id],
                attributions,
                phi0: xs.phi0[row],
                fx: xs.fx[row],
                rule: rules[c].clone(),
                stats: stats[c].clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnPredictor;
    use proptest::prelude::*;
    use rand::Rng;

    fn xs_from(phi: Matrix) -> ExplanationSet {
        let n = phi.rows();
        ExplanationSet {
            feature_names: (0..phi.cols()).map(|j| format!("f{j}")).collect(),
            instance_ids: (0..n).collect(),
            phi,
            phi0: vec![0.0; n],
            fx: vec![0.0; n],
        }
    }

    #[test]
    fn medoid_of_collinear_points() {
        let xs = xs_from(Matrix::from_rows(&[[0.0], [1.0], [10.0]]).unwrap());
        let a = ClusterAssignment {
            labels: vec![0, 0, 0],
            c: 1,
        };
        assert_eq!(medoid(&xs, &a, 0).unwrap(), 1);
        let single = ClusterAssignment {
            labels: vec![0, 1, 0],
            c: 2,
        };
        assert_eq!(medoid(&xs, &single, 1).unwrap(), 1);
    }

    #[test]
    fn stats_singleton_and_totals() {
        let a = ClusterAssignment {
            labels: vec![0, 1, 1, 1],
            c: 2,
        };
        let proba = [0.8, 0.2, 0.6, 0.4];
        let labels = [1, 0, 0, 1];
        let s = cluster_stats_from_proba(&a, &proba, &labels);
        assert_eq!(s[0].accuracy, 1.0);
        assert_eq!(s[0].mean_prediction, 0.8);
        assert_eq!(s[0].positive_rate, 1.0);
        assert!((s[1].accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.iter().map(|c| c.size).sum::<usize>(), 4);
    }

    fn ages(n: usize, seed: u64) -> Dataset {
        // age in [20, 49] or [51, 80]; other columns are noise.
        let mut rng = seed::rng(seed);
        let mut data = Vec::new();
        for _ in 0..n {
            let age = if rng.gen_bool(0.4) {
                rng.gen_range(51..=80)
            } else {
                rng.gen_range(20..=49)
            } as f64;
            data.extend([rng.gen_range(90.0..200.0), age, rng.gen_range(15.0..45.0)]);
        }
        Dataset::new(
            Matrix::from_vec(n, 3, data).unwrap(),
            vec!["sbp".into(), "age".into(), "obesity".into()],
            (0..n).map(|i| (i % 2) as u8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn planted_age_rule() {
        let ds = ages(200, 3);
        let labels: Vec<usize> = (0..ds.n())
            .map(|i| usize::from(ds.features().get(i, 1) > 50.0))
            .collect();
        let a = ClusterAssignment { labels, c: 2 };
        let out = induce_rules(&ds, &a, 1, &RuleConfig::default()).unwrap();
        let r = &out.rule;
        assert_eq!(r.conditions.len(), 1, "{r}");
        assert_eq!(r.conditions[0].feature, "age");
        assert_eq!(r.conditions[0].op, Op::Gt);
        assert!((49.0..=51.0).contains(&r.conditions[0].threshold));
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        assert!(!r.low_precision);
    }

    #[test]
    fn single_instance_cluster() {
        let ds = ages(60, 4);
        let mut labels = vec![0; 60];
        labels[17] = 1;
        let a = ClusterAssignment { labels, c: 2 };
        let r = induce_rules(&ds, &a, 1, &RuleConfig::default())
            .unwrap()
            .rule;
        assert!(r.conditions.len() <= 3);
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn stored_scores_match_direct_evaluation() {
        let ds = ages(150, 5);
        let labels: Vec<usize> = (0..ds.n())
            .map(|i| usize::from(ds.features().get(i, 0) > 140.0 && ds.features().get(i, 2) < 30.0))
            .collect();
        let a = ClusterAssignment {
            labels: labels.clone(),
            c: 2,
        };
        for c in 0..2 {
            let r = induce_rules(&ds, &a, c, &RuleConfig::default())
                .unwrap()
                .rule;
            let covered: Vec<usize> = (0..ds.n()).filter(|&i| r.covers(ds.row(i))).collect();
            let tp = covered.iter().filter(|&&i| labels[i] == c).count() as f64;
            let pos = labels.iter().filter(|&&l| l == c).count() as f64;
            assert_eq!(r.precision, tp / covered.len() as f64);
            assert_eq!(r.recall, tp / pos);
            let mut per_feature = std::collections::HashSet::new();
            for cond in &r.conditions {
                assert!(per_feature.insert((cond.index, cond.op)));
            }
        }
    }

    #[test]
    fn recommendations_use_medoids() {
        let ds = ages(12, 6);
        let xs =
            xs_from(Matrix::from_vec(12, 3, (0..36).map(|v| (v % 7) as f64).collect()).unwrap());
        let a = ClusterAssignment {
            labels: (0..12).map(|i| usize::from(i >= 6)).collect(),
            c: 2,
        };
        let f = FnPredictor::new(3, |x: &[f64]| (x[1] / 100.0).min(1.0));
        let stats = cluster_stats(&a, &f, &ds).unwrap();
        let rules: Vec<Rule> = (0..2)
            .map(|c| {
                induce_rules(&ds, &a, c, &RuleConfig::default())
                    .unwrap()
                    .rule
            })
            .collect();
        let recs = recommend(&xs, &a, &ds, &rules, &stats).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert_eq!(a.labels[r.instance_id], r.cluster);
            assert_eq!(r.instance_id, medoid(&xs, &a, r.cluster).unwrap());
            assert!(r
                .attributions
                .windows(2)
                .all(|w| w[0].phi.abs() >= w[1].phi.abs()));
        }
    }

    proptest! {
        #[test]
        fn medoid_matches_exhaustive(raw in proptest::collection::vec(-3.0f64..3.0, 4..120), k in 1usize..4) {
            let n = raw.len() / 2;
            let xs = xs_from(Matrix::from_vec(n, 2, raw[..2 * n].to_vec()).unwrap());
            let labels: Vec<usize> = (0..n).map(|i| i % k.min(n)).collect();
            let a = ClusterAssignment { labels, c: k.min(n) };
            for c in 0..a.c {
                let members = a.members(c);
                let sums: Vec<f64> = members
                    .iter()
                    .map(|&i| members.iter().map(|&j| euclidean(xs.phi.row(i), xs.phi.row(j))).sum())
                    .collect();
                let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
                let want = members[sums.iter().position(|&s| s == min).unwrap()];
                prop_assert_eq!(medoid(&xs, &a, c).unwrap(), want);
            }
        }

        #[test]
        fn weighted_cluster_accuracy_is_global(
            proba in proptest::collection::vec(0.0f64..1.0, 5..80),
            seed in 0u64..1000,
        ) {
            let n = proba.len();
            let mut rng = seed::rng(seed);
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let c = 3.min(n);
            let assign = ClusterAssignment { labels: (0..n).map(|i| i % c).collect(), c };
            let stats = cluster_stats_from_proba(&assign, &proba, &labels);
            let weighted: f64 = stats.iter().map(|s| s.size as f64 * s.accuracy).sum::<f64>() / n as f64;
            prop_assert!((weighted - crate::model::accuracy(&proba, &labels)).abs() <= 1e-12);
            prop_assert_eq!(stats.iter().map(|s| s.size).sum::<usize>(), n);
        }
    }
}
