pub mod autoxai;
pub mod dataset;
pub mod error;
pub mod expcluster;
pub mod explain;
pub mod featsel;
pub mod insight;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod xai_eval;

pub use dataset::{load_csv, Dataset, ScalerParams, Schema};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{train_mlp, Activation, MlpConfig, Predictor, TrainedModel};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport, ReportFormat, Stage};
