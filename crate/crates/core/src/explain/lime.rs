use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::background::Background;
use super::kernel_shap::check_dims;
use super::Explanation;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::seed;

const RIDGE_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub num_samples: usize,
    /// Defaults to `0.75 * sqrt(d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_width: Option<f64>,
    pub seed: u64,
}

impl LimeConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::Config("LIME num_samples must be positive".into()));
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "LIME kernel_width must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn warn_if_underdetermined(&self, d: usize) {
        if self.num_samples < d + 2 {
            log::warn!(
                "LIME num_samples {} below d+2 = {}; surrogate is underdetermined",
                self.num_samples,
                d + 2
            );
        }
    }
}

/// Local linear surrogate fitted on Gaussian perturbations around `x`, scaled
/// by the background's per-feature standard deviation.
pub fn lime_explain<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    bg: &Background,
    cfg: &LimeConfig,
) -> Result<Explanation> {
    check_dims(f, x, bg)?;
    cfg.validate()?;
    cfg.warn_if_underdetermined(x.len());
    lime_with_std(f, x, &bg.std(), cfg, cfg.seed)
}

pub(crate) fn lime_with_std<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    std: &[f64],
    cfg: &LimeConfig,
    seed: u64,
) -> Result<Explanation> {
    let d = x.len();
    let n = cfg.num_samples;
    if std.iter().all(|s| *s == 0.0) {
        return Err(Error::InvalidInput(
            "degenerate LIME perturbations: background has zero spread".into(),
        ));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let mut rng = seed::rng(seed);
    let mut delta = vec![0.0; n * d];
    for (k, v) in delta.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = z * std[k % d];
    }
    let rows: Vec<f64> = delta
        .chunks_exact(d)
        .flat_map(|dl| dl.iter().zip(x).map(|(a, b)| a + b))
        .collect();
    let mut y = vec![0.0; n];
    f.predict_into(&rows, &mut y);
    let w: Vec<f64> = delta
        .chunks_exact(d)
        .map(|dl| (-dl.iter().map(|v| v * v).sum::<f64>() / (width * width)).exp())
        .collect();

    // Weighted ridge with an unpenalized intercept: centre on weighted means.
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::InvalidInput(
            "LIME kernel weights vanished; widen the kernel".into(),
        ));
    }
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for ((dl, &yi), &wi) in delta.chunks_exact(d).zip(&y).zip(&w) {
        for (m, v) in xbar.iter_mut().zip(dl) {
            *m += wi * v / wsum;
        }
        ybar += wi * yi / wsum;
    }
    let mut a = DMatrix::<f64>::identity(d, d) * RIDGE_ALPHA;
    let mut b = DVector::<f64>::zeros(d);
    for ((dl, &yi), &wi) in delta.chunks_exact(d).zip(&y).zip(&w) {
        for i in 0..d {
            let ci = dl[i] - xbar[i];
            b[i] += wi * ci * (yi - ybar);
            for j in 0..d {
                a[(i, j)] += wi * ci * (dl[j] - xbar[j]);
            }
        }
    }
    let phi = a
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("LIME normal equations not positive definite".into()))?
        .solve(&b);
    let phi: Vec<f64> = phi.iter().copied().collect();
    let phi0 = ybar - phi.iter().zip(&xbar).map(|(p, m)| p * m).sum::<f64>();
    Ok(Explanation {
        phi,
        phi0,
        fx: f.predict_row(x),
    })
}
