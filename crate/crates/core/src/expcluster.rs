//! Ward hierarchical clustering of explanation vectors with the number of
//! clusters chosen by the L-method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ExplanationSet;
use crate::matrix::{squared_euclidean, Matrix};

/// One agglomeration step. Ids below `n` are leaves; merge `k` creates id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub c: usize,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.c];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Ward linkage by the Lance–Williams recurrence on squared distances.
/// Heights are square roots of the Ward distance. Among equal distances the
/// pair with the smallest (i, j) is merged, where a cluster's index is its
/// smallest leaf.
pub fn ward_linkage(points: &Matrix) -> Result<Dendrogram> {
    let n = points.rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "ward linkage needs n >= 2, got {n}"
        )));
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinates".into()));
    }
    // Upper triangle only: dist[i * n + j] for i < j.
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            dist[i * n + j] = squared_euclidean(points.row(i), points.row(j));
        }
    }
    let at = |i: usize, j: usize| if i < j { i * n + j } else { j * n + i };
    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                let v = dist[i * n + j];
                if v < best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (d2, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * dist[at(k, i)] + (nj + nk) * dist[at(k, j)] - nk * d2)
                / (ni + nj + nk);
            dist[at(k, i)] = v.max(0.0);
        }
        merges.push(Merge {
            left: id[i],
            right: id[j],
            height: d2.max(0.0).sqrt(),
            size: size[i] + size[j],
        });
        size[i] += size[j];
        id[i] = n + step;
        active.retain(|&k| k != j);
    }
    Ok(Dendrogram { n, merges })
}

/// Points `(k, h)` for `k = 1..n-1`, where `h` is the height of the merge that
/// takes `k + 1` clusters to `k`.
pub fn evaluation_graph(dg: &Dendrogram) -> Vec<(usize, f64)> {
    let m = dg.merges.len();
    (1..=m).map(|k| (k, dg.merges[m - k].height)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knee {
    pub c: usize,
    /// Cutoff used at each refinement pass.
    pub cutoffs: Vec<usize>,
    /// True when a single line fits the series (no knee present).
    pub degenerate: bool,
}

fn line_rmse(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (my + slope * (p.0 - mx));
            r * r
        })
        .sum();
    (sse / m).sqrt()
}

/// One L-method pass on the points with `x <= cutoff`.
fn l_method_pass(series: &[(usize, f64)], cutoff: usize) -> Result<usize> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.0 <= cutoff)
        .map(|&(x, y)| (x as f64, y))
        .collect();
    let b = pts.len();
    if b < 4 {
        return Err(Error::InvalidInput(format!(
            "L-method needs at least 4 points, got {b}"
        )));
    }
    let mut best = (f64::INFINITY, 2);
    // Split positions are 1-based: left = points[..c], right = points[c-1..].
    for c in 2..=b - 2 {
        let left = line_rmse(&pts[..c]);
        let right = line_rmse(&pts[c - 1..]);
        let err = (c - 1) as f64 / (b - 1) as f64 * left + (b - c) as f64 / (b - 1) as f64 * right;
        if err < best.0 {
            best = (err, c);
        }
    }
    Ok(pts[best.1 - 1].0 as usize)
}

/// Knee of an evaluation graph with iterative refinement: the cutoff shrinks
/// to `min(2 * knee, c_max)` until the knee stops moving.
pub fn l_method_knee(series: &[(usize, f64)], c_max: usize) -> Result<Knee> {
    let mut sorted = series.to_vec();
    sorted.sort_by_key(|p| p.0);
    let mut cutoff = c_max;
    let mut cutoffs = vec![cutoff];
    let mut knee = l_method_pass(&sorted, cutoff)?;
    for _ in 0..64 {
        let next = (2 * knee).min(c_max);
        if next == cutoff || sorted.iter().filter(|p| p.0 <= next).count() < 4 {
            break;
        }
        cutoff = next;
        cutoffs.push(cutoff);
        let k = l_method_pass(&sorted, cutoff)?;
        if k == knee {
            break;
        }
        knee = k;
    }
    let head: Vec<(f64, f64)> = sorted
        .iter()
        .filter(|p| p.0 <= c_max)
        .map(|&(x, y)| (x as f64, y))
        .collect();
    let scale = head
        .iter()
        .map(|p| p.1.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let degenerate = line_rmse(&head) <= 1e-9 * scale;
    if degenerate {
        log::warn!("evaluation graph is linear; no knee, returning c = {knee}");
    }
    Ok(Knee {
        c: knee,
        cutoffs,
        degenerate,
    })
}

/// Undoes the last `c - 1` merges. Clusters are numbered by their smallest leaf.
pub fn cut(dg: &Dendrogram, c: usize) -> Result<ClusterAssignment> {
    let n = dg.n;
    if c == 0 || c > n {
        return Err(Error::InvalidInput(format!(
            "cluster count {c} outside 1..={n}"
        )));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (k, m) in dg.merges.iter().take(n - c).enumerate() {
        let node = n + k;
        let a = find(&mut parent, m.left);
        let b = find(&mut parent, m.right);
        parent[a] = node;
        parent[b] = node;
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut labels = vec![0; n];
    for (i, l) in labels.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        let next = label_of_root.len();
        *l = *label_of_root.entry(r).or_insert(next);
    }
    Ok(ClusterAssignment { labels, c })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub dendrogram: Dendrogram,
    pub assignment: ClusterAssignment,
    pub knee: Knee,
    pub c_max: usize,
}

/// Ward + L-method on raw attribution rows (base values excluded).
/// `c_max` defaults to `min(20, n - 1)`.
pub fn cluster_explanations(xs: &ExplanationSet, c_max: Option<usize>) -> Result<ClusterModel> {
    let n = xs.n();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "clustering needs n >= 4, got {n}"
        )));
    }
    let c_max = c_max.unwrap_or(20).min(n - 1);
    let dendrogram = ward_linkage(&xs.phi)?;
    let knee = l_method_knee(&evaluation_graph(&dendrogram), c_max)?;
    let assignment = cut(&dendrogram, knee.c)?;
    Ok(ClusterModel {
        dendrogram,
        assignment,
        knee,
        c_max,
    })
}
