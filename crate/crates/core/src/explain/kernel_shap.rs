//! Kernel SHAP: Shapley values as the solution of a weighted least-squares
//! problem over feature coalitions.
//!
//! A coalition `z` is a bitmask over features. Its value `v(z)` is the
//! background-weighted mean of `f` at `x` with the features outside `z`
//! replaced by the background row (interventional expectation). Coalitions of
//! size 1..d-1 enter the regression; the empty and full coalitions are imposed
//! exactly: `phi0 = v(empty)` and `sum(phi) = f(x) - phi0`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::background::Background;
use super::Explanation;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::seed;

pub const MAX_SHAP_FEATURES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Reg {
    None,
    Bic,
    NumFeatures(usize),
}

impl std::fmt::Display for L1Reg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            L1Reg::None => write!(f, "none"),
            L1Reg::Bic => write!(f, "bic"),
            L1Reg::NumFeatures(k) => write!(f, "num_features({k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShapConfig {
    pub nsamples: usize,
    pub l1_reg: L1Reg,
    pub summarize: super::Summarize,
    pub seed: u64,
}

/// Shapley kernel weight `(d-1) / (C(d,s) s (d-s))` for `1 <= s <= d-1`.
/// Sizes 0 and d carry infinite weight and are reported as an error.
pub fn shapley_kernel_weight(d: usize, s: usize) -> Result<f64> {
    if s == 0 || s >= d {
        return Err(Error::InvalidInput(format!(
            "infinite weight for coalition size {s} of {d}; enforced as a constraint"
        )));
    }
    Ok((d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64))
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The regression rows: distinct coalitions and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionDesign {
    pub d: usize,
    pub masks: Vec<u64>,
    pub weights: Vec<f64>,
    pub exhaustive: bool,
}

impl CoalitionDesign {
    /// Enumerates every coalition of size 1..d-1 when `2^d - 2 <= nsamples`;
    /// otherwise samples `nsamples` distinct coalitions with size drawn in
    /// proportion to its total kernel weight, each followed by its complement.
    /// Repeat draws add to the coalition's weight.
    pub fn new(d: usize, nsamples: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_SHAP_FEATURES {
            return Err(Error::InvalidInput(format!(
                "kernel SHAP supports 1..={MAX_SHAP_FEATURES} features, got {d}"
            )));
        }
        if d == 1 {
            return Ok(Self {
                d,
                masks: Vec::new(),
                weights: Vec::new(),
                exhaustive: true,
            });
        }
        let total = (1u64 << d) - 2;
        if total <= nsamples as u64 {
            let mut masks = Vec::with_capacity(total as usize);
            let mut weights = Vec::with_capacity(total as usize);
            for m in 1..(1u64 << d) - 1 {
                masks.push(m);
                weights.push(shapley_kernel_weight(d, m.count_ones() as usize)?);
            }
            return Ok(Self {
                d,
                masks,
                weights,
                exhaustive: true,
            });
        }
        if nsamples < 2 * d + 2 {
            log::warn!(
                "nsamples {nsamples} below the recommended 2d+2 = {}",
                2 * d + 2
            );
        }

        let size_weights: Vec<f64> = (1..d)
            .map(|s| (d - 1) as f64 / (s * (d - s)) as f64)
            .collect();
        let size_total: f64 = size_weights.iter().sum();
        let mut rng = seed::rng(seed);
        let mut masks = Vec::with_capacity(nsamples);
        let mut weights: Vec<f64> = Vec::with_capacity(nsamples);
        let mut index_of: HashMap<u64, usize> = HashMap::new();
        let full = (1u64 << d) - 1;
        let max_draws = 100 * nsamples + 1000;
        let mut draws = 0;
        while masks.len() < nsamples && draws < max_draws {
            draws += 1;
            let mut t = rng.gen_range(0.0..size_total);
            let mut size = d - 1;
            for (i, w) in size_weights.iter().enumerate() {
                if t < *w {
                    size = i + 1;
                    break;
                }
                t -= w;
            }
            let mask = index::sample(&mut rng, d, size)
                .iter()
                .fold(0u64, |m, i| m | (1 << i));
            for m in [mask, full ^ mask] {
                match index_of.get(&m) {
                    Some(&i) => weights[i] += 1.0,
                    None if masks.len() < nsamples => {
                        index_of.insert(m, masks.len());
                        masks.push(m);
                        weights.push(1.0);
                    }
                    None => {}
                }
            }
        }
        Ok(Self {
            d,
            masks,
            weights,
            exhaustive: false,
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// `v(z)` for every coalition in the design.
pub fn coalition_values<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    bg: &Background,
    masks: &[u64],
) -> Vec<f64> {
    f.coalition_means(x, bg.rows.as_slice(), &bg.weights, masks)
}

/// Background-weighted mean prediction (the base value).
pub fn base_value<P: Predictor + ?Sized>(f: &P, bg: &Background) -> f64 {
    let mut out = vec![0.0; bg.len()];
    f.predict_into(bg.rows.as_slice(), &mut out);
    out.iter().zip(&bg.weights).map(|(p, w)| p * w).sum()
}

/// Weighted least squares restricted to `support`, with the attributions on
/// the support summing to `total`; features off the support get zero.
fn constrained_wls(
    design: &CoalitionDesign,
    y: &[f64],
    support: &[usize],
    total: f64,
) -> Result<Vec<f64>> {
    let d = design.d;
    let mut phi = vec![0.0; d];
    match support.len() {
        0 => return Ok(phi),
        1 => {
            phi[support[0]] = total;
            return Ok(phi);
        }
        _ => {}
    }
    let s = support.len();
    let last = support[s - 1];
    let p = s - 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for ((&mask, &w), &yz) in design.masks.iter().zip(&design.weights).zip(y) {
        let z_last = (mask >> last & 1) as f64;
        for (r, &j) in row.iter_mut().zip(support) {
            *r = (mask >> j & 1) as f64 - z_last;
        }
        let target = yz - z_last * total;
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            let wa = w * row[a];
            xtwy[a] += wa * target;
            for b in 0..p {
                xtwx[(a, b)] += wa * row[b];
            }
        }
    }
    let singular = || Error::SingularSystem {
        distinct: design.len(),
        features: d,
    };
    // Rank-deficient designs (some features always co-occur) fall back to the
    // minimum-norm least-squares solution.
    let beta = match xtwx.clone().cholesky() {
        Some(c) => c.solve(&xtwy),
        None => xtwx
            .svd(true, true)
            .solve(&xtwy, 1e-12)
            .map_err(|_| singular())?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(singular());
    }
    let mut rest = total;
    for (k, &j) in support[..p].iter().enumerate() {
        phi[j] = beta[k];
        rest -= beta[k];
    }
    phi[last] = rest;
    Ok(phi)
}

/// Lasso path over a 50-point log grid by covariance-form coordinate
/// descent; returns the support minimizing `N ln(RSS/N) + k ln N`.
fn bic_support(design: &CoalitionDesign, y: &[f64]) -> Vec<usize> {
    let d = design.d;
    let n = design.len() as f64;
    let wsum: f64 = design.weights.iter().sum();
    let w: Vec<f64> = design.weights.iter().map(|v| v / wsum).collect();
    let mut gram = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    for ((&m, &wi), &yi) in design.masks.iter().zip(&w).zip(y) {
        for j in (0..d).filter(|j| m >> j & 1 == 1) {
            xty[j] += wi * yi;
            for k in (0..d).filter(|k| m >> k & 1 == 1) {
                gram[j * d + k] += wi;
            }
        }
    }
    let lambda_max = xty.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut beta = vec![0.0; d];
    let mut best: (f64, Vec<usize>) = (f64::INFINITY, Vec::new());
    const GRID: usize = 50;
    for g in 0..GRID {
        let lambda = lambda_max * 10f64.powf(-3.0 * g as f64 / (GRID - 1) as f64);
        for _sweep in 0..1000 {
            let mut max_delta = 0.0f64;
            for j in 0..d {
                let gjj = gram[j * d + j];
                if gjj == 0.0 {
                    continue;
                }
                let row = &gram[j * d..(j + 1) * d];
                let fitted: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let rho = xty[j] - fitted + gjj * beta[j];
                let new = rho.signum() * (rho.abs() - lambda).max(0.0) / gjj;
                let delta = new - beta[j];
                if delta != 0.0 {
                    beta[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            let scale = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if max_delta <= 1e-10 * scale.max(1e-6) {
                break;
            }
        }
        let rss: f64 = n * design
            .masks
            .iter()
            .zip(&w)
            .zip(y)
            .map(|((&m, wi), yi)| {
                let pred: f64 = (0..d).filter(|j| m >> j & 1 == 1).map(|j| beta[j]).sum();
                wi * (yi - pred) * (yi - pred)
            })
            .sum::<f64>();
        let support: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
        let bic = n * (rss / n).max(1e-300).ln() + support.len() as f64 * n.ln();
        if bic < best.0 {
            best = (bic, support);
        }
    }
    best.1
}

/// Attributions from precomputed coalition values.
pub fn solve_attributions(
    design: &CoalitionDesign,
    values: &[f64],
    fx: f64,
    phi0: f64,
    l1: L1Reg,
) -> Result<Vec<f64>> {
    let d = design.d;
    let total = fx - phi0;
    if d == 1 {
        return Ok(vec![total]);
    }
    if design.len() < d {
        return Err(Error::SingularSystem {
            distinct: design.len(),
            features: d,
        });
    }
    let y: Vec<f64> = values.iter().map(|v| v - phi0).collect();
    let all: Vec<usize> = (0..d).collect();
    match l1 {
        L1Reg::None => constrained_wls(design, &y, &all, total),
        L1Reg::NumFeatures(k) if k >= d => constrained_wls(design, &y, &all, total),
        L1Reg::NumFeatures(k) => {
            let full = constrained_wls(design, &y, &all, total)?;
            let mut order = all.clone();
            order.sort_by(|&a, &b| full[b].abs().total_cmp(&full[a].abs()).then(a.cmp(&b)));
            let mut support = order[..k].to_vec();
            support.sort_unstable();
            constrained_wls(design, &y, &support, total)
        }
        L1Reg::Bic => {
            // Singularity of the full problem is still an error.
            constrained_wls(design, &y, &all, total)?;
            let support = bic_support(design, &y);
            constrained_wls(design, &y, &support, total)
        }
    }
}

pub fn kernel_shap_explain<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    bg: &Background,
    cfg: &ShapConfig,
) -> Result<Explanation> {
    check_dims(f, x, bg)?;
    let design = CoalitionDesign::new(x.len(), cfg.nsamples, cfg.seed)?;
    let phi0 = base_value(f, bg);
    explain_with_design(f, x, bg, &design, phi0, cfg.l1_reg)
}

pub(crate) fn explain_with_design<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    bg: &Background,
    design: &CoalitionDesign,
    phi0: f64,
    l1: L1Reg,
) -> Result<Explanation> {
    let fx = f.predict_row(x);
    let values = coalition_values(f, x, bg, &design.masks);
    let phi = solve_attributions(design, &values, fx, phi0, l1)?;
    Ok(Explanation { phi, phi0, fx })
}

pub(crate) fn check_dims<P: Predictor + ?Sized>(f: &P, x: &[f64], bg: &Background) -> Result<()> {
    if x.len() != f.n_features() {
        return Err(Error::Dimension {
            expected: f.n_features(),
            got: x.len(),
        });
    }
    if bg.d() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: bg.d(),
        });
    }
    if bg.is_empty() {
        return Err(Error::InvalidInput("empty background".into()));
    }
    Ok(())
}
