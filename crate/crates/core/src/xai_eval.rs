//! Explanation quality metrics: local Lipschitz robustness and infidelity.
//! Both are "lower is better".

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explainer;
use crate::matrix::{euclidean, Matrix};
use crate::model::Predictor;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub epsilon: f64,
    pub n_perturb: usize,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n_perturb: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfidelityConfig {
    pub noise_std: f64,
    pub n_perturb: usize,
    pub seed: u64,
}

impl Default for InfidelityConfig {
    fn default() -> Self {
        Self {
            noise_std: 0.3,
            n_perturb: 100,
            seed: 0,
        }
    }
}

impl RobustnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) || self.n_perturb == 0 {
            return Err(Error::Config(format!("invalid robustness config {self:?}")));
        }
        Ok(())
    }
}

impl InfidelityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) || self.n_perturb == 0 {
            return Err(Error::Config(format!("invalid infidelity config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Robustness(RobustnessConfig),
    Infidelity(InfidelityConfig),
}

/// Uniform draw from the open ℓ2 ball of radius `eps` around the origin.
fn ball_offset(d: usize, eps: f64, rng: &mut impl Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = eps * rng.gen::<f64>().powf(1.0 / d as f64);
    if norm == 0.0 {
        return vec![0.0; d];
    }
    g.into_iter().map(|v| v * r / norm).collect()
}

/// Robustness for several explainers evaluated on the same perturbations.
/// `explain` maps a point to one attribution vector per explainer.
pub fn robustness_lipschitz_multi<F>(
    explain: F,
    x: &[f64],
    cfg: &RobustnessConfig,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<Vec<f64>>>,
{
    cfg.validate()?;
    let base = explain(x)?;
    let mut best = vec![0.0f64; base.len()];
    let mut rng = seed::rng(cfg.seed);
    let mut xp = vec![0.0; x.len()];
    for _ in 0..cfg.n_perturb {
        let mut dist = 0.0;
        for _retry in 0..=10 {
            let off = ball_offset(x.len(), cfg.epsilon, &mut rng);
            for ((p, a), o) in xp.iter_mut().zip(x).zip(&off) {
                *p = a + o;
            }
            dist = euclidean(x, &xp);
            if dist > 0.0 {
                break;
            }
        }
        if dist == 0.0 {
            continue;
        }
        let other = explain(&xp)?;
        for ((b, p), q) in best.iter_mut().zip(&base).zip(&other) {
            *b = b.max(euclidean(p, q) / dist);
        }
    }
    Ok(best)
}

/// `max ||Φ(x) - Φ(x')|| / ||x - x'||` over uniform draws in the ε-ball.
pub fn robustness_lipschitz<F>(explain: F, x: &[f64], cfg: &RobustnessConfig) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    Ok(robustness_lipschitz_multi(|p| Ok(vec![explain(p)?]), x, cfg)?[0])
}

/// Infidelity of several attribution vectors for the same instance.
pub fn infidelity_multi<P: Predictor + ?Sized>(
    phis: &[Vec<f64>],
    f: &P,
    x: &[f64],
    cfg: &InfidelityConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = x.len();
    if let Some(p) = phis.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: p.len(),
        });
    }
    let normal = Normal::new(0.0, cfg.noise_std).expect("validated");
    let mut rng = seed::rng(cfg.seed);
    let m = cfg.n_perturb;
    let noise: Vec<f64> = (0..m * d).map(|_| normal.sample(&mut rng)).collect();
    let rows: Vec<f64> = noise
        .chunks_exact(d)
        .flat_map(|i| x.iter().zip(i).map(|(a, b)| a - b))
        .collect();
    let mut shifted = vec![0.0; m];
    f.predict_into(&rows, &mut shifted);
    let fx = f.predict_row(x);
    Ok(phis
        .iter()
        .map(|phi| {
            noise
                .chunks_exact(d)
                .zip(&shifted)
                .map(|(i, fs)| {
                    let dot: f64 = i.iter().zip(phi).map(|(a, b)| a * b).sum();
                    let gap = dot - (fx - fs);
                    gap * gap
                })
                .sum::<f64>()
                / m as f64
        })
        .collect())
}

/// `E[(Iᵀφ - (f(x) - f(x - I)))²]` with `I ~ N(0, σ² Id)`.
pub fn infidelity<P: Predictor + ?Sized>(
    phi: &[f64],
    f: &P,
    x: &[f64],
    cfg: &InfidelityConfig,
) -> Result<f64> {
    Ok(infidelity_multi(&[phi.to_vec()], f, x, cfg)?[0])
}

/// Seeded, sorted instance sample shared by every configuration.
pub fn instance_sample(n: usize, sample_size: usize, seed: u64) -> Result<Vec<usize>> {
    if sample_size == 0 || sample_size > n {
        return Err(Error::InvalidInput(format!(
            "sample_size {sample_size} must lie in 1..={n}"
        )));
    }
    let mut idx = index::sample(&mut seed::rng(seed), n, sample_size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Per-instance seeds: the explainer uses `cfg.seed + i` (as in a full
/// explanation run) and metric draws use `derive(metric seed, i)`.
pub fn dataset_metric<P: Predictor + ?Sized>(
    explainer: &Explainer<'_, P>,
    rows: &Matrix,
    metric: &Metric,
    sample_size: usize,
    seed: u64,
) -> Result<f64> {
    let sample = instance_sample(rows.rows(), sample_size, seed)?;
    let base = explainer.config().seed();
    let mut total = 0.0;
    for &i in &sample {
        let x = rows.row(i);
        let es = base.wrapping_add(i as u64);
        total += match metric {
            Metric::Robustness(c) => {
                let c = RobustnessConfig {
                    seed: seed::derive(c.seed, i as u64),
                    ..*c
                };
                robustness_lipschitz(|p| Ok(explainer.explain(p, es)?.phi), x, &c)?
            }
            Metric::Infidelity(c) => {
                let c = InfidelityConfig {
                    seed: seed::derive(c.seed, i as u64),
                    ..*c
                };
                let phi = explainer.explain(x, es)?.phi;
                infidelity(&phi, explainer.model(), x, &c)?
            }
        };
    }
    Ok(total / sample.len() as f64)
}
