//! Additive feature attributions: Kernel SHAP, LIME and an exact Shapley
//! oracle. All explainers query the model's positive-class probability.

mod background;
pub mod exact;
pub mod kernel_shap;
pub mod lime;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use background::{kmeans, summarize_background, Background, Summarize};
pub use exact::exact_shapley;
pub use kernel_shap::{
    kernel_shap_explain, shapley_kernel_weight, CoalitionDesign, L1Reg, ShapConfig,
};
pub use lime::{lime_explain, LimeConfig};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Predictor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub phi: Vec<f64>,
    pub phi0: f64,
    pub fx: f64,
}

impl Explanation {
    /// `|phi0 + sum(phi) - fx|`.
    pub fn additivity_gap(&self) -> f64 {
        (self.phi0 + self.phi.iter().sum::<f64>() - self.fx).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ExplainerConfig {
    Shap(ShapConfig),
    Lime(LimeConfig),
}

impl ExplainerConfig {
    pub fn seed(&self) -> u64 {
        match self {
            ExplainerConfig::Shap(c) => c.seed,
            ExplainerConfig::Lime(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ExplainerConfig::Shap(c) => c.seed = seed,
            ExplainerConfig::Lime(c) => c.seed = seed,
        }
        self
    }

    /// "SHAP" or "LIME".
    pub fn algorithm(&self) -> &'static str {
        match self {
            ExplainerConfig::Shap(_) => "SHAP",
            ExplainerConfig::Lime(_) => "LIME",
        }
    }

    /// Hyperparameters in the `a ; b ; c` style of a ranking table.
    pub fn hyperparameters(&self) -> String {
        match self {
            ExplainerConfig::Shap(c) => format!("{} ; {} ; {}", c.nsamples, c.l1_reg, c.summarize),
            ExplainerConfig::Lime(c) => match c.kernel_width {
                Some(w) => format!("{} ; width {w}", c.num_samples),
                None => c.num_samples.to_string(),
            },
        }
    }
}

/// A configured explainer bound to a model and a background dataset.
pub struct Explainer<'a, P: Predictor + ?Sized> {
    f: &'a P,
    cfg: ExplainerConfig,
    bg: Background,
    phi0: f64,
    /// Seed-independent design, present when enumeration is exhaustive.
    design: Option<CoalitionDesign>,
}

impl<'a, P: Predictor + ?Sized> Explainer<'a, P> {
    /// `data` supplies the background (Kernel SHAP) or perturbation scale (LIME).
    pub fn new(f: &'a P, data: &Matrix, cfg: ExplainerConfig) -> Result<Self> {
        if data.cols() != f.n_features() {
            return Err(Error::Dimension {
                expected: f.n_features(),
                got: data.cols(),
            });
        }
        let (bg, phi0, design) = match &cfg {
            ExplainerConfig::Shap(c) => {
                let bg = summarize_background(data, c.summarize, c.seed)?;
                let phi0 = kernel_shap::base_value(f, &bg);
                let design = CoalitionDesign::new(data.cols(), c.nsamples, c.seed)?;
                (bg, phi0, design.exhaustive.then_some(design))
            }
            ExplainerConfig::Lime(c) => {
                c.validate()?;
                c.warn_if_underdetermined(data.cols());
                (Background::uniform(data.clone())?, 0.0, None)
            }
        };
        Ok(Self {
            f,
            cfg,
            bg,
            phi0,
            design,
        })
    }

    pub fn config(&self) -> &ExplainerConfig {
        &self.cfg
    }

    pub fn background(&self) -> &Background {
        &self.bg
    }

    pub fn model(&self) -> &'a P {
        self.f
    }

    pub fn d(&self) -> usize {
        self.bg.d()
    }

    /// Coalition design used for a given per-call seed (Kernel SHAP only).
    pub fn design(&self, seed: u64) -> Result<std::borrow::Cow<'_, CoalitionDesign>> {
        match (&self.cfg, &self.design) {
            (_, Some(d)) => Ok(std::borrow::Cow::Borrowed(d)),
            (ExplainerConfig::Shap(c), None) => Ok(std::borrow::Cow::Owned(CoalitionDesign::new(
                self.d(),
                c.nsamples,
                seed,
            )?)),
            (ExplainerConfig::Lime(_), None) => {
                Err(Error::InvalidInput("LIME has no coalition design".into()))
            }
        }
    }

    pub fn base_value(&self) -> f64 {
        self.phi0
    }

    pub fn explain(&self, x: &[f64], seed: u64) -> Result<Explanation> {
        kernel_shap::check_dims(self.f, x, &self.bg)?;
        match &self.cfg {
            ExplainerConfig::Shap(c) => {
                let design = self.design(seed)?;
                kernel_shap::explain_with_design(self.f, x, &self.bg, &design, self.phi0, c.l1_reg)
            }
            ExplainerConfig::Lime(c) => lime::lime_with_std(self.f, x, &self.bg.std(), c, seed),
        }
    }
}

/// Attributions for every row of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSet {
    pub feature_names: Vec<String>,
    pub instance_ids: Vec<usize>,
    pub phi: Matrix,
    pub phi0: Vec<f64>,
    pub fx: Vec<f64>,
}

impl ExplanationSet {
    pub fn n(&self) -> usize {
        self.phi.rows()
    }

    pub fn d(&self) -> usize {
        self.phi.cols()
    }

    pub fn get(&self, i: usize) -> Explanation {
        Explanation {
            phi: self.phi.row(i).to_vec(),
            phi0: self.phi0[i],
            fx: self.fx[i],
        }
    }

    /// Mean absolute attribution per feature.
    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.n().max(1) as f64;
        (0..self.d())
            .map(|j| self.phi.iter_rows().map(|r| r[j].abs()).sum::<f64>() / n)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["instance_id".to_string(), "phi0".into(), "fx".into()];
        header.extend(self.feature_names.iter().cloned());
        out.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![
                self.instance_ids[i].to_string(),
                self.phi0[i].to_string(),
                self.fx[i].to_string(),
            ];
            rec.extend(self.phi.row(i).iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 4
            || &header[0] != "instance_id"
            || &header[1] != "phi0"
            || &header[2] != "fx"
        {
            return Err(Error::InvalidInput(
                "explanation CSV must start with instance_id,phi0,fx".into(),
            ));
        }
        let feature_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let d = feature_names.len();
        let (mut ids, mut phi0, mut fx, mut data) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::NonNumeric {
                        column: header.get(k).unwrap_or("?").to_string(),
                        token: rec.get(k).unwrap_or("").to_string(),
                        row,
                    })
            };
            ids.push(rec[0].parse().map_err(|_| Error::NonNumeric {
                column: "instance_id".into(),
                token: rec[0].to_string(),
                row,
            })?);
            phi0.push(num(1)?);
            fx.push(num(2)?);
            for k in 0..d {
                data.push(num(3 + k)?);
            }
        }
        let n = ids.len();
        Ok(Self {
            feature_names,
            instance_ids: ids,
            phi: Matrix::from_vec(n, d, data)?,
            phi0,
            fx,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Explains every row of `ds`; row `i` uses seed `cfg.seed() + i` and the
/// dataset itself as background.
pub fn explain_all<P: Predictor + ?Sized>(
    f: &P,
    ds: &Dataset,
    cfg: &ExplainerConfig,
) -> Result<ExplanationSet> {
    let explainer = Explainer::new(f, ds.features(), *cfg)?;
    explain_rows(&explainer, ds.features(), ds.feature_names())
}

pub fn explain_rows<P: Predictor + ?Sized>(
    explainer: &Explainer<'_, P>,
    rows: &Matrix,
    feature_names: &[String],
) -> Result<ExplanationSet> {
    let base = explainer.config().seed();
    let n = rows.rows();
    let d = rows.cols();
    let mut phi = Matrix::zeros(n, d);
    let mut phi0 = Vec::with_capacity(n);
    let mut fx = Vec::with_capacity(n);
    for (i, x) in rows.iter_rows().enumerate() {
        let e = explainer
            .explain(x, base.wrapping_add(i as u64))
            .map_err(|source| Error::Instance {
                row: i,
                source: Box::new(source),
            })?;
        phi.row_mut(i).copy_from_slice(&e.phi);
        phi0.push(e.phi0);
        fx.push(e.fx);
    }
    Ok(ExplanationSet {
        feature_names: feature_names.to_vec(),
        instance_ids: (0..n).collect(),
        phi,
        phi0,
        fx,
    })
}
