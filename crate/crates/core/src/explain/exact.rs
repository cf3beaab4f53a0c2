use super::background::Background;
use super::kernel_shap::{base_value, check_dims, coalition_values};
use super::Explanation;
use crate::error::{Error, Result};
use crate::model::Predictor;

pub const MAX_EXACT_FEATURES: usize = 12;

/// Shapley values by direct summation over all subsets, using the same
/// interventional coalition value as Kernel SHAP.
pub fn exact_shapley<P: Predictor + ?Sized>(
    f: &P,
    x: &[f64],
    bg: &Background,
) -> Result<Explanation> {
    check_dims(f, x, bg)?;
    let d = x.len();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::InvalidInput(format!(
            "exact Shapley values limited to {MAX_EXACT_FEATURES} features, got {d}"
        )));
    }
    let masks: Vec<u64> = (0..1u64 << d).collect();
    let v = coalition_values(f, x, bg, &masks);
    // weight[s] = s! (d-s-1)! / d!
    let mut weight = vec![0.0; d];
    for (s, w) in weight.iter_mut().enumerate() {
        *w = factorial(s) * factorial(d - s - 1) / factorial(d);
    }
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for s in masks.iter().filter(|&&m| m & bit == 0) {
            *p += weight[s.count_ones() as usize] * (v[(s | bit) as usize] - v[*s as usize]);
        }
    }
    Ok(Explanation {
        phi,
        phi0: base_value(f, bg),
        fx: f.predict_row(x),
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
