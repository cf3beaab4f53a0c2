use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_euclidean, Matrix};
use crate::seed;

/// Reference rows used to switch features "off", with weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub rows: Matrix,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summarize {
    Full,
    Kmeans(usize),
}

impl std::fmt::Display for Summarize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Summarize::Full => write!(f, "KernelExplainer"),
            Summarize::Kmeans(k) => write!(f, "kmeans({k})"),
        }
    }
}

impl Background {
    pub fn uniform(rows: Matrix) -> Result<Self> {
        if rows.rows() == 0 {
            return Err(Error::InvalidInput(
                "background needs at least one row".into(),
            ));
        }
        let w = 1.0 / rows.rows() as f64;
        let weights = vec![w; rows.rows()];
        Ok(Self { rows, weights })
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn d(&self) -> usize {
        self.rows.cols()
    }

    /// Weighted per-feature standard deviation.
    pub fn std(&self) -> Vec<f64> {
        (0..self.d())
            .map(|j| {
                let mean: f64 = self
                    .rows
                    .iter_rows()
                    .zip(&self.weights)
                    .map(|(r, w)| w * r[j])
                    .sum();
                self.rows
                    .iter_rows()
                    .zip(&self.weights)
                    .map(|(r, w)| w * (r[j] - mean) * (r[j] - mean))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

pub fn summarize_background(data: &Matrix, mode: Summarize, seed: u64) -> Result<Background> {
    match mode {
        Summarize::Full => Background::uniform(data.clone()),
        Summarize::Kmeans(k) => {
            if k == 0 || k > data.rows() {
                return Err(Error::InvalidInput(format!(
                    "kmeans({k}) needs 1 <= K <= n = {}",
                    data.rows()
                )));
            }
            let (centroids, sizes) = kmeans(data, k, 10, seed);
            let n = data.rows() as f64;
            Ok(Background {
                rows: centroids,
                weights: sizes.iter().map(|&s| s as f64 / n).collect(),
            })
        }
    }
}

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the lowest
/// inertia. Returns centroids and cluster sizes.
pub fn kmeans(data: &Matrix, k: usize, restarts: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut best: Option<(f64, Matrix, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seed::rng(seed::derive(seed, r as u64));
        let mut centroids = plus_plus_init(data, k, &mut rng);
        let mut assign = vec![usize::MAX; data.rows()];
        for _ in 0..300 {
            let mut changed = false;
            for (i, row) in data.iter_rows().enumerate() {
                let c = nearest(&centroids, row).0;
                if assign[i] != c {
                    assign[i] = c;
                    changed = true;
                }
            }
            let mut sums = Matrix::zeros(k, data.cols());
            let mut sizes = vec![0usize; k];
            for (row, &c) in data.iter_rows().zip(&assign) {
                sizes[c] += 1;
                for (s, v) in sums.row_mut(c).iter_mut().zip(row) {
                    *s += v;
                }
            }
            for c in 0..k {
                if sizes[c] == 0 {
                    // Re-seed an empty cluster at the point farthest from its centroid.
                    let far = data
                        .iter_rows()
                        .enumerate()
                        .map(|(i, row)| (i, squared_euclidean(row, centroids.row(assign[i]))))
                        .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
                        .0;
                    centroids.row_mut(c).copy_from_slice(data.row(far));
                    assign[far] = c;
                    changed = true;
                } else {
                    let inv = 1.0 / sizes[c] as f64;
                    for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                        *dst = s * inv;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut sizes = vec![0usize; k];
        let mut inertia = 0.0;
        for (row, &c) in data.iter_rows().zip(&assign) {
            sizes[c] += 1;
            inertia += squared_euclidean(row, centroids.row(c));
        }
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, centroids, sizes));
        }
    }
    let (_, c, s) = best.expect("at least one restart");
    (c, s)
}

fn nearest(centroids: &Matrix, row: &[f64]) -> (usize, f64) {
    centroids
        .iter_rows()
        .enumerate()
        .map(|(c, cent)| (c, squared_euclidean(row, cent)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn plus_plus_init(data: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut dist: Vec<f64> = data
        .iter_rows()
        .map(|r| squared_euclidean(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut t = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        };
        chosen.push(next);
        for (dv, r) in dist.iter_mut().zip(data.iter_rows()) {
            *dv = dv.min(squared_euclidean(r, data.row(next)));
        }
    }
    data.select_rows(&chosen)
}
