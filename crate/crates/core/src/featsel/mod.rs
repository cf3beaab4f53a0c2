//! Information-theoretic feature ranking (CMIM, JMI, univariate MI) on
//! equal-frequency discretized columns, plus subset evaluation against the
//! all-features explanation baseline.

mod subset;

pub use subset::{
    evaluate_subset, mean_accuracy, select_features, SelectionMethod, SelectionOutcome,
    SelectionPolicy, SubsetReport, SubsetTrial,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedColumn {
    pub bins: Vec<usize>,
    /// `-inf`, interior cut points, `+inf`; strictly increasing.
    pub edges: Vec<f64>,
}

impl DiscretizedColumn {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }
}

/// Equal-frequency binning into at most `bins` bins. Equal values always share
/// a bin; columns with at most `bins` distinct values get one bin per value.
pub fn discretize(col: &[f64], bins: usize) -> DiscretizedColumn {
    let bins = bins.max(2);
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut distinct = sorted.clone();
    distinct.dedup();

    let mut cuts: Vec<f64> = if distinct.len() <= bins {
        distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    } else {
        let mut cuts = Vec::with_capacity(bins - 1);
        for k in 1..bins {
            let t = k * n / bins;
            if t == 0 || t >= n {
                continue;
            }
            let boundary = if sorted[t - 1] != sorted[t] {
                t
            } else {
                // Move the cut to the edge of the tie group containing t.
                let v = sorted[t];
                let lo = sorted.partition_point(|&s| s < v);
                let hi = sorted.partition_point(|&s| s <= v);
                match (lo == 0, hi == n) {
                    (true, true) => continue,
                    (true, false) => hi,
                    (false, true) => lo,
                    (false, false) => {
                        if hi - t <= t - lo {
                            hi
                        } else {
                            lo
                        }
                    }
                }
            };
            cuts.push(0.5 * (sorted[boundary - 1] + sorted[boundary]));
        }
        cuts
    };
    cuts.dedup();

    let bins = col
        .iter()
        .map(|&v| cuts.partition_point(|&c| c < v))
        .collect();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(cuts);
    edges.push(f64::INFINITY);
    DiscretizedColumn { bins, edges }
}

/// Maps arbitrary symbols to `0..k` by ascending value, so the result does not
/// depend on row order.
fn compact(x: &[usize]) -> (Vec<usize>, usize) {
    let mut values = x.to_vec();
    values.sort_unstable();
    values.dedup();
    let ids = x
        .iter()
        .map(|v| values.binary_search(v).expect("value present"))
        .collect();
    (ids, values.len())
}

/// Pairs two symbol vectors into one joint symbol.
pub fn joint(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (a, _) = compact(a);
    let (b, kb) = compact(b);
    a.iter().zip(&b).map(|(x, y)| x * kb + y).collect()
}

fn check_lengths(lens: &[usize]) -> Result<()> {
    if lens[0] == 0 {
        return Err(Error::InvalidInput("empty input".into()));
    }
    if lens.iter().any(|&l| l != lens[0]) {
        return Err(Error::InvalidInput(
            "symbol vectors differ in length".into(),
        ));
    }
    Ok(())
}

fn mi_unchecked(x: &[usize], y: &[usize]) -> f64 {
    let (x, kx) = compact(x);
    let (y, ky) = compact(y);
    let n = x.len() as f64;
    let mut cxy = vec![0usize; kx * ky];
    let mut cx = vec![0usize; kx];
    let mut cy = vec![0usize; ky];
    for (&a, &b) in x.iter().zip(&y) {
        cxy[a * ky + b] += 1;
        cx[a] += 1;
        cy[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..kx {
        for b in 0..ky {
            let c = cxy[a * ky + b];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (cx[a] as f64 * cy[b] as f64)).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Plug-in mutual information in bits.
pub fn mutual_information(x: &[usize], y: &[usize]) -> Result<f64> {
    check_lengths(&[x.len(), y.len()])?;
    Ok(mi_unchecked(x, y))
}

/// Plug-in `I(X;Y|Z) = sum_z p(z) I(X;Y | Z=z)` in bits.
pub fn conditional_mutual_information(x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
    check_lengths(&[x.len(), y.len(), z.len()])?;
    let (z, kz) = compact(z);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); kz];
    for (i, &g) in z.iter().enumerate() {
        groups[g].push(i);
    }
    let n = x.len() as f64;
    let mut cmi = 0.0;
    for rows in groups {
        let xs: Vec<usize> = rows.iter().map(|&i| x[i]).collect();
        let ys: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
        cmi += rows.len() as f64 / n * mi_unchecked(&xs, &ys);
    }
    Ok(cmi.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Feature names, best first.
    pub names: Vec<String>,
    /// Column index in the ranked dataset, aligned with `names`.
    pub indices: Vec<usize>,
    /// Selection-time objective value in bits.
    pub scores: Vec<f64>,
}

/// Greedy forward selection over discrete columns. `objective(k, selected)` is
/// evaluated for every remaining candidate once at least one feature is chosen;
/// the first pick maximizes `I(X_k; Y)`. Ties go to the lower index.
fn greedy<F>(cols: &[Vec<usize>], y: &[usize], mut objective: F) -> (Vec<usize>, Vec<f64>)
where
    F: FnMut(usize, &[usize]) -> f64,
{
    let d = cols.len();
    let mut selected = Vec::with_capacity(d);
    let mut scores = Vec::with_capacity(d);
    let mut remaining: Vec<usize> = (0..d).collect();
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for &k in &remaining {
            let s = if selected.is_empty() {
                mi_unchecked(&cols[k], y)
            } else {
                objective(k, &selected)
            };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        let (k, s) = best.expect("nonempty");
        selected.push(k);
        scores.push(s);
        remaining.retain(|&r| r != k);
    }
    (selected, scores)
}

pub fn cmim_order(cols: &[Vec<usize>], y: &[usize]) -> (Vec<usize>, Vec<f64>) {
    greedy(cols, y, |k, selected| {
        selected
            .iter()
            .map(|&j| conditional_mutual_information(&cols[k], y, &cols[j]).expect("checked"))
            .fold(f64::INFINITY, f64::min)
    })
}

pub fn jmi_order(cols: &[Vec<usize>], y: &[usize]) -> (Vec<usize>, Vec<f64>) {
    greedy(cols, y, |k, selected| {
        selected
            .iter()
            .map(|&j| mi_unchecked(&joint(&cols[k], &cols[j]), y))
            .sum()
    })
}

pub fn mi_order(cols: &[Vec<usize>], y: &[usize]) -> (Vec<usize>, Vec<f64>) {
    greedy(cols, y, |k, _| mi_unchecked(&cols[k], y))
}

fn discretized_columns(ds: &Dataset, bins: usize) -> Vec<Vec<usize>> {
    (0..ds.d())
        .map(|j| discretize(&ds.features().column(j), bins).bins)
        .collect()
}

fn labels(ds: &Dataset) -> Vec<usize> {
    ds.labels().iter().map(|&l| l as usize).collect()
}

fn ranking(ds: &Dataset, (order, scores): (Vec<usize>, Vec<f64>)) -> FeatureRanking {
    FeatureRanking {
        names: order
            .iter()
            .map(|&j| ds.feature_names()[j].clone())
            .collect(),
        indices: order,
        scores,
    }
}

pub fn rank_cmim(ds: &Dataset, bins: usize) -> FeatureRanking {
    ranking(ds, cmim_order(&discretized_columns(ds, bins), &labels(ds)))
}

pub fn rank_jmi(ds: &Dataset, bins: usize) -> FeatureRanking {
    ranking(ds, jmi_order(&discretized_columns(ds, bins), &labels(ds)))
}

pub fn rank_mi(ds: &Dataset, bins: usize) -> FeatureRanking {
    ranking(ds, mi_order(&discretized_columns(ds, bins), &labels(ds)))
}

/// Kendall tau-a between two strict rankings of the same names.
pub fn kendall_tau<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    let mut sa: Vec<&str> = a.iter().map(AsRef::as_ref).collect();
    let mut sb: Vec<&str> = b.iter().map(AsRef::as_ref).collect();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb || sa.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(
            "rankings cover different name sets".into(),
        ));
    }
    let m = a.len();
    if m < 2 {
        return Ok(1.0);
    }
    let pos_b = |name: &str| b.iter().position(|x| x.as_ref() == name).expect("same set");
    let rb: Vec<usize> = a.iter().map(|x| pos_b(x.as_ref())).collect();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..m {
        for j in i + 1..m {
            if rb[i] < rb[j] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok((concordant - discordant) as f64 / (m * (m - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    /// H(X) + H(Y) - H(X,Y), counted with hash maps.
    fn mi_by_entropies(x: &[usize], y: &[usize]) -> f64 {
        fn entropy<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>, n: f64) -> f64 {
            let mut c: HashMap<K, f64> = HashMap::new();
            for k in keys {
                *c.entry(k).or_default() += 1.0;
            }
            -c.values().map(|v| v / n * (v / n).log2()).sum::<f64>()
        }
        let n = x.len() as f64;
        entropy(x.iter(), n) + entropy(y.iter(), n) - entropy(x.iter().zip(y), n)
    }

    #[test]
    fn discretize_median_split() {
        let col: Vec<f64> = (1..=10).map(f64::from).collect();
        let d = discretize(&col, 2);
        assert_eq!(d.bins, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(d.edges.len(), 3);
    }

    #[test]
    fn discretize_constant_column() {
        let d = discretize(&[4.0; 7], 5);
        assert_eq!(d.bins, vec![0; 7]);
        assert_eq!(d.n_bins(), 1);
    }

    #[test]
    fn discretize_groups_ties() {
        // Quantile positions 2 and 4 of [1,1,1,2,3,4]: the first falls inside
        // the run of 1s, so the cut moves to its upper edge (1.5); the second
        // splits 2|3 (2.5).
        let d = discretize(&[1.0, 1.0, 1.0, 2.0, 3.0, 4.0], 3);
        assert_eq!(d.bins, vec![0, 0, 0, 1, 2, 2]);
        assert_eq!(d.edges[1..3], [1.5, 2.5]);
        assert!(d.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mi_perfect_dependence() {
        let x: Vec<usize> = (0..100).map(|i| i % 2).collect();
        assert!((mutual_information(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mi_independence() {
        let x: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let y: Vec<usize> = (0..100).map(|i| (i / 2) % 2).collect();
        assert!(mutual_information(&x, &y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mi_hand_counts() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b, c) in [(0, 0, 40), (0, 1, 10), (1, 0, 10), (1, 1, 40)] {
            x.extend(std::iter::repeat_n(a, c));
            y.extend(std::iter::repeat_n(b, c));
        }
        let expect = mi_by_entropies(&x, &y);
        let got = mutual_information(&x, &y).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.278_072).abs() < 1e-6, "{got}");
    }

    #[test]
    fn mi_empty_is_error() {
        assert!(mutual_information(&[], &[]).is_err());
        assert!(conditional_mutual_information(&[], &[], &[]).is_err());
    }

    #[test]
    fn cmi_vacuous_and_redundant_conditioning() {
        let x: Vec<usize> = (0..60).map(|i| (i * 7) % 3).collect();
        let y: Vec<usize> = (0..60).map(|i| (i * 5 + i / 4) % 2).collect();
        let z = vec![9; 60];
        let mi = mutual_information(&x, &y).unwrap();
        let cmi = conditional_mutual_information(&x, &y, &z).unwrap();
        assert!((mi - cmi).abs() < 1e-12);
        assert!(conditional_mutual_information(&x, &y, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cmi_matches_triple_sum() {
        // counts for (x, y, z) in {0,1}^3
        let counts = [5usize, 9, 2, 14, 11, 3, 7, 6];
        let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for (cell, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                x.push(cell >> 2 & 1);
                y.push(cell >> 1 & 1);
                z.push(cell & 1);
            }
        }
        let n: f64 = counts.iter().sum::<usize>() as f64;
        let p = |f: &dyn Fn(usize) -> bool| {
            counts
                .iter()
                .enumerate()
                .filter(|(c, _)| f(*c))
                .map(|(_, &k)| k as f64)
                .sum::<f64>()
                / n
        };
        let mut oracle = 0.0;
        for cell in 0..8 {
            let (a, b, c) = (cell >> 2 & 1, cell >> 1 & 1, cell & 1);
            let pxyz = counts[cell] as f64 / n;
            let pz = p(&|k| k & 1 == c);
            let pxz = p(&|k| k >> 2 & 1 == a && k & 1 == c);
            let pyz = p(&|k| k >> 1 & 1 == b && k & 1 == c);
            oracle += pxyz * (pz * pxyz / (pxz * pyz)).log2();
        }
        let got = conditional_mutual_information(&x, &y, &z).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn cmim_and_jmi_with_duplicate_feature() {
        let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let noise: Vec<usize> = (0..200).map(|i| (i / 2) % 2).collect();
        let cols = vec![y.clone(), y.clone(), noise];
        let (order, scores) = cmim_order(&cols, &y);
        assert_eq!(order[..2], [0, 1]);
        assert!((scores[0] - 1.0).abs() < 1e-12);
        assert!(scores[1].abs() < 1e-12);

        // y = a OR b: once `a` is chosen, its duplicate adds nothing jointly
        // while `b` completes the label.
        let a: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let b: Vec<usize> = (0..200).map(|i| (i / 2) % 2).collect();
        let y: Vec<usize> = a.iter().zip(&b).map(|(p, q)| p | q).collect();
        let (order, scores) = jmi_order(&[a.clone(), a.clone(), b.clone()], &y);
        assert_eq!(order, vec![0, 2, 1]);
        let h_y = mi_by_entropies(&y, &y);
        assert!((scores[1] - h_y).abs() < 1e-12);
        assert!((scores[2] - mutual_information(&a, &y).unwrap() - h_y).abs() < 1e-9);
    }

    #[test]
    fn single_feature_rankings() {
        let y = vec![0, 1, 0, 1];
        let cols = vec![vec![0, 1, 1, 1]];
        assert_eq!(cmim_order(&cols, &y).0, vec![0]);
        assert_eq!(jmi_order(&cols, &y).0, vec![0]);
    }

    #[test]
    fn kendall_examples() {
        let a = ["a", "b", "c", "d"];
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &["d", "c", "b", "a"]).unwrap(), -1.0);
        let t = kendall_tau(&a, &["a", "c", "b", "d"]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-12);
        assert!(kendall_tau(&a, &["a", "b", "c", "e"]).is_err());
    }

    fn symbols(k: usize, n: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..k, n)
    }

    proptest! {
        #[test]
        fn mi_symmetric_nonnegative(x in symbols(4, 80), y in symbols(3, 80)) {
            let a = mutual_information(&x, &y).unwrap();
            let b = mutual_information(&y, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0);
            prop_assert!((a - mi_by_entropies(&x, &y)).abs() < 1e-9);
        }

        #[test]
        fn cmi_nonnegative(x in symbols(3, 60), y in symbols(2, 60), z in symbols(3, 60)) {
            prop_assert!(conditional_mutual_information(&x, &y, &z).unwrap() >= 0.0);
        }

        #[test]
        fn merging_bins_never_increases_mi(x in symbols(6, 100), y in symbols(3, 100)) {
            let merged: Vec<usize> = x.iter().map(|v| v / 2).collect();
            prop_assert!(
                mutual_information(&merged, &y).unwrap() <= mutual_information(&x, &y).unwrap() + 1e-12
            );
        }

        #[test]
        fn kendall_symmetric_bounded(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
            let a: Vec<String> = (0..6).map(|i| i.to_string()).collect();
            let b: Vec<String> = perm.iter().map(|i| i.to_string()).collect();
            let t1 = kendall_tau(&a, &b).unwrap();
            let t2 = kendall_tau(&b, &a).unwrap();
            prop_assert!((t1 - t2).abs() < 1e-12);
            prop_assert!(t1.abs() <= 1.0);
        }

        #[test]
        fn rankings_ignore_row_order(
            rows in prop::collection::vec((0..3usize, 0..4usize, 0..2usize, 0..2usize), 40),
            rot in 1usize..39,
        ) {
            let cols = |rs: &[(usize, usize, usize, usize)]| {
                vec![
                    rs.iter().map(|r| r.0).collect::<Vec<_>>(),
                    rs.iter().map(|r| r.1).collect(),
                    rs.iter().map(|r| r.2).collect(),
                ]
            };
            let y = |rs: &[(usize, usize, usize, usize)]| rs.iter().map(|r| r.3).collect::<Vec<_>>();
            let mut shuffled = rows.clone();
            shuffled.rotate_left(rot);
            shuffled.reverse();
            prop_assert_eq!(cmim_order(&cols(&rows), &y(&rows)).0, cmim_order(&cols(&shuffled), &y(&shuffled)).0);
            prop_assert_eq!(jmi_order(&cols(&rows), &y(&rows)).0, jmi_order(&cols(&shuffled), &y(&shuffled)).0);
        }
    }
}
