//! End-to-end orchestration: feature selection, training, explainer search,
//! explanations, clustering and cluster insight, with every stage reading and
//! writing artifacts in a workspace directory.
//!
//! Per-stage seeds are `seed::derive(master, k)` with `k` = 1 (fs), 2 (train),
//! 3 (autoxai), 6 (insight). Seed fields inside config sections are replaced
//! by these derived values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autoxai::{
    search, select_config, EvalSettings, RankingEntry, RankingTable, SearchSpace,
    SelectionConstraints, Weights,
};
use crate::dataset::{load_csv, Dataset, ScalerParams, Schema};
use crate::error::{Error, Result};
use crate::expcluster::{
    cluster_explanations, evaluation_graph, ClusterAssignment, Dendrogram, Knee,
};
use crate::explain::{explain_all, ExplainerConfig, ExplanationSet, L1Reg, ShapConfig, Summarize};
use crate::featsel::{
    evaluate_subset, select_features, SelectionMethod, SelectionOutcome, SelectionPolicy,
    SubsetReport,
};
use crate::insight::{
    cluster_stats, induce_rules, recommend, ClusterStats, Recommendation, RuleConfig, RuleInduction,
};
use crate::model::{train_mlp, MlpConfig, TrainedModel};
use crate::seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fs,
    Train,
    Autoxai,
    Explain,
    Cluster,
    Insight,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Fs,
        Stage::Train,
        Stage::Autoxai,
        Stage::Explain,
        Stage::Cluster,
        Stage::Insight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Fs => "fs",
            Stage::Train => "train",
            Stage::Autoxai => "autoxai",
            Stage::Explain => "explain",
            Stage::Cluster => "cluster",
            Stage::Insight => "insight",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Md,
    #[default]
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "md" => Ok(ReportFormat::Md),
            "both" => Ok(ReportFormat::Both),
            _ => Err(Error::Config(format!(
                "unknown format {s:?}; use json, md or both"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSelectionConfig {
    pub method: SelectionMethod,
    /// Features removed before ranking.
    pub force_drop: Vec<String>,
    pub delta: f64,
    pub seeds: usize,
    pub bins: usize,
    pub min_features: usize,
    /// Kernel SHAP budget of the probe explainer used for subset reports.
    pub probe_nsamples: usize,
    pub probe_summarize: Summarize,
}

impl Default for FeatureSelectionConfig {
    fn default() -> Self {
        let p = SelectionPolicy::default();
        Self {
            method: SelectionMethod::Cmim,
            force_drop: Vec::new(),
            delta: p.delta,
            seeds: p.seeds,
            bins: p.bins,
            min_features: p.min_features,
            probe_nsamples: 1022,
            probe_summarize: Summarize::Kmeans(10),
        }
    }
}

impl FeatureSelectionConfig {
    fn policy(&self) -> SelectionPolicy {
        SelectionPolicy {
            delta: self.delta,
            seeds: self.seeds,
            bins: self.bins,
            min_features: self.min_features,
        }
    }
}

/// `min_active_features` as a count or `"all"` (every selected feature).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinActive {
    Count(usize),
    All,
}

impl Serialize for MinActive {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MinActive::Count(n) => s.serialize_u64(*n as u64),
            MinActive::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for MinActive {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(MinActive::Count(n as usize)),
            Raw::S(s) if s == "all" => Ok(MinActive::All),
            Raw::S(s) => Err(serde::de::Error::custom(format!(
                "min_active_features must be a count or \"all\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct AutoxaiConfig {
    pub weights: Weights,
    pub min_active_features: Option<MinActive>,
    pub algorithms: Vec<String>,
    pub space: SearchSpace,
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub c_max: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { c_max: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub feature_selection: FeatureSelectionConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub autoxai: AutoxaiConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub rules: RuleConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative data paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        self.autoxai.eval.robustness.validate()?;
        self.autoxai.eval.infidelity.validate()?;
        if self.clustering.c_max < 4 {
            return Err(Error::Config("clustering.c_max must be at least 4".into()));
        }
        if !(0.0..=1.0).contains(&self.rules.min_precision) {
            return Err(Error::Config(
                "rules.min_precision must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.as_os_str().is_empty() || p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.data.path)
    }

    pub fn schema_path(&self) -> PathBuf {
        self.resolve(&self.data.schema)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub fs: u64,
    pub train: u64,
    pub autoxai: u64,
    pub insight: u64,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            fs: seed::derive(master, 1),
            train: seed::derive(master, 2),
            autoxai: seed::derive(master, 3),
            insight: seed::derive(master, 6),
        }
    }
}

/// Stage artifacts live as files in one directory.
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn require(&self, name: &str, producer: Stage) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                artifact: name.into(),
                stage: producer.name().into(),
            })
        }
    }

    fn read<T: DeserializeOwned>(&self, name: &str, producer: Stage) -> Result<T> {
        let p = self.require(name, producer)?;
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsArtifact {
    pub seed: u64,
    pub forced_drop: Vec<String>,
    pub outcome: SelectionOutcome,
    pub subset_reports: Vec<SubsetReport>,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub seed: u64,
    pub features: Vec<String>,
    pub scaler: Option<ScalerParams>,
    pub accuracy: f64,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingArtifact {
    pub seed: u64,
    pub constraints: SelectionConstraints,
    pub chosen: RankingEntry,
    pub table: RankingTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationArtifact {
    pub seed: u64,
    pub config: ExplainerConfig,
    pub explanations: ExplanationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub seed: u64,
    pub c: usize,
    pub c_max: usize,
    pub knee: Knee,
    pub assignment: ClusterAssignment,
    pub evaluation_graph: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: String,
    pub n: usize,
    pub d: usize,
    pub features: Vec<String>,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub features: Vec<String>,
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub accuracy: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub stats: ClusterStats,
    pub rule: String,
    pub induction: RuleInduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: String,
    pub seeds: Seeds,
    pub dataset: DatasetSummary,
    pub feature_selection: FsArtifact,
    pub model: ModelSummary,
    pub ranking: RankingTable,
    pub chosen: RankingEntry,
    pub c: usize,
    pub knee: Knee,
    pub clusters: Vec<ClusterSummary>,
    pub recommendations: Vec<Recommendation>,
}

/// Everything a stage needs besides its upstream artifacts.
pub struct Context<'a> {
    pub cfg: &'a PipelineConfig,
    pub ws: &'a Workspace,
    pub seeds: Seeds,
    pub format: ReportFormat,
}

impl<'a> Context<'a> {
    pub fn new(
        cfg: &'a PipelineConfig,
        ws: &'a Workspace,
        master_seed: u64,
        format: ReportFormat,
    ) -> Self {
        Self {
            cfg,
            ws,
            seeds: Seeds::new(master_seed),
            format,
        }
    }

    fn raw_dataset(&self) -> Result<Dataset> {
        let schema = Schema::load(self.cfg.schema_path())?;
        load_csv(self.cfg.data_path(), &schema)
    }

    /// Original-unit and model-space views of the selected features.
    fn prepared(
        &self,
        features: &[String],
        scaler: Option<&ScalerParams>,
    ) -> Result<(Dataset, Dataset)> {
        let raw = self.raw_dataset()?.select_features(features)?;
        let model_space = match scaler {
            Some(s) => s.transform(&raw)?,
            None => raw.clone(),
        };
        Ok((raw, model_space))
    }

    fn check_seed(&self, artifact: &str, seed: u64, producer: Stage) -> Result<()> {
        if seed != self.seeds.master {
            return Err(Error::Config(format!(
                "{artifact} was produced with seed {seed}, not {}; rerun {producer}",
                self.seeds.master
            )));
        }
        Ok(())
    }

    fn fs(&self) -> Result<FsArtifact> {
        let a: FsArtifact = self.ws.read("features.json", Stage::Fs)?;
        self.check_seed("features.json", a.seed, Stage::Fs)?;
        Ok(a)
    }

    fn model(&self) -> Result<ModelArtifact> {
        let a: ModelArtifact = self.ws.read("model.json", Stage::Train)?;
        self.check_seed("model.json", a.seed, Stage::Train)?;
        Ok(a)
    }

    fn ranking(&self) -> Result<RankingArtifact> {
        let a: RankingArtifact = self.ws.read("ranking.json", Stage::Autoxai)?;
        self.check_seed("ranking.json", a.seed, Stage::Autoxai)?;
        Ok(a)
    }

    fn explanations(&self) -> Result<ExplanationArtifact> {
        self.ws.require("explanations.csv", Stage::Explain)?;
        let a: ExplanationArtifact = self.ws.read("explanations.json", Stage::Explain)?;
        self.check_seed("explanations.json", a.seed, Stage::Explain)?;
        Ok(a)
    }

    fn clusters(&self) -> Result<ClusterArtifact> {
        let a: ClusterArtifact = self.ws.read("clusters.json", Stage::Cluster)?;
        self.check_seed("clusters.json", a.seed, Stage::Cluster)?;
        Ok(a)
    }

    fn mlp(&self, seed: u64) -> MlpConfig {
        MlpConfig {
            seed,
            ..self.cfg.mlp.clone()
        }
    }

    fn standardize(&self, ds: &Dataset) -> Result<(Dataset, Option<ScalerParams>)> {
        if self.cfg.data.standardize {
            let (s, p) = ds.standardize()?;
            Ok((s, Some(p)))
        } else {
            Ok((ds.clone(), None))
        }
    }

    pub fn run_fs(&self) -> Result<()> {
        let fc = &self.cfg.feature_selection;
        let raw = self.raw_dataset()?.drop_features(&fc.force_drop)?;
        let (ds, _) = self.standardize(&raw)?;
        let mlp = self.mlp(self.seeds.fs);
        let outcome = select_features(&ds, fc.method, &fc.policy(), &mlp)?;

        let full_model = train_mlp(&ds, &mlp)?;
        let probe = ExplainerConfig::Shap(ShapConfig {
            nsamples: fc.probe_nsamples,
            l1_reg: L1Reg::None,
            summarize: fc.probe_summarize,
            seed: self.seeds.fs,
        });
        let full_xs = explain_all(&full_model, &ds, &probe)?;
        let mut subsets: Vec<Vec<String>> =
            outcome.trials.iter().map(|t| t.subset.clone()).collect();
        if !subsets.contains(&outcome.selected) {
            subsets.push(outcome.selected.clone());
        }
        let subset_reports = subsets
            .iter()
            .map(|s| evaluate_subset(&ds, s, &full_model, &full_xs, &mlp, &probe))
            .collect::<Result<Vec<_>>>()?;
        let artifact = FsArtifact {
            seed: self.seeds.master,
            forced_drop: fc.force_drop.clone(),
            features: outcome.selected.clone(),
            outcome,
            subset_reports,
        };
        log::info!("fs: keeping {:?}", artifact.features);
        self.ws.write_json("features.json", &artifact)
    }

    pub fn run_train(&self) -> Result<()> {
        let fs = self.fs()?;
        let raw = self.raw_dataset()?.select_features(&fs.features)?;
        let (ds, scaler) = self.standardize(&raw)?;
        let model = train_mlp(&ds, &self.mlp(self.seeds.train))?;
        let accuracy = model.accuracy(&ds)?;
        log::info!("train: resubstitution accuracy {accuracy:.4}");
        self.ws.write_json(
            "model.json",
            &ModelArtifact {
                seed: self.seeds.master,
                features: fs.features,
                scaler,
                accuracy,
                model,
            },
        )
    }

    pub fn run_autoxai(&self) -> Result<()> {
        let m = self.model()?;
        let (_, ds) = self.prepared(&m.features, m.scaler.as_ref())?;
        let ac = &self.cfg.autoxai;
        let s = self.seeds.autoxai;
        let mut eval = ac.eval;
        eval.seed = seed::derive(s, 0);
        eval.robustness.seed = seed::derive(s, 1);
        eval.infidelity.seed = seed::derive(s, 2);
        let table = search(&m.model, ds.features(), &ac.space, &eval, ac.weights, s)?;
        let constraints = SelectionConstraints {
            min_active_features: ac.min_active_features.map(|v| match v {
                MinActive::Count(n) => n,
                MinActive::All => ds.d(),
            }),
            algorithms: ac.algorithms.clone(),
        };
        let chosen = select_config(&table, &constraints)?.clone();
        log::info!(
            "autoxai: chose {} {} (rank {})",
            chosen.algorithm,
            chosen.hyperparameters,
            chosen.rank
        );
        self.ws.write_text("ranking.md", &table.to_markdown())?;
        self.ws.write_json(
            "ranking.json",
            &RankingArtifact {
                seed: self.seeds.master,
                constraints,
                chosen,
                table,
            },
        )
    }

    pub fn run_explain(&self) -> Result<()> {
        let m = self.model()?;
        let r = self.ranking()?;
        let (_, ds) = self.prepared(&m.features, m.scaler.as_ref())?;
        let xs = explain_all(&m.model, &ds, &r.chosen.config)?;
        xs.save_csv(self.ws.path("explanations.csv"))?;
        self.ws.write_json(
            "explanations.json",
            &ExplanationArtifact {
                seed: self.seeds.master,
                config: r.chosen.config,
                explanations: xs,
            },
        )
    }

    pub fn run_cluster(&self) -> Result<()> {
        let xs = self.explanations()?.explanations;
        let cm = cluster_explanations(&xs, Some(self.cfg.clustering.c_max))?;
        log::info!("cluster: c = {}", cm.knee.c);
        let graph = evaluation_graph(&cm.dendrogram);
        let mut csv = String::from("num_clusters,height\n");
        for (k, h) in &graph {
            let _ = writeln!(csv, "{k},{h}");
        }
        self.ws.write_text("evaluation_graph.csv", &csv)?;
        let mut assign = String::from("instance_id,cluster\n");
        for (i, l) in xs.instance_ids.iter().zip(&cm.assignment.labels) {
            let _ = writeln!(assign, "{i},{l}");
        }
        self.ws.write_text("clusters.csv", &assign)?;
        self.ws.write_json("dendrogram.json", &cm.dendrogram)?;
        self.ws.write_json(
            "clusters.json",
            &ClusterArtifact {
                seed: self.seeds.master,
                c: cm.knee.c,
                c_max: cm.c_max,
                knee: cm.knee,
                assignment: cm.assignment,
                evaluation_graph: graph,
            },
        )
    }

    pub fn run_insight(&self) -> Result<PipelineReport> {
        let fs = self.fs()?;
        let m = self.model()?;
        let r = self.ranking()?;
        let xs = self.explanations()?.explanations;
        let cl = self.clusters()?;
        let _: Dendrogram = self.ws.read("dendrogram.json", Stage::Cluster)?;
        let (raw, ds) = self.prepared(&m.features, m.scaler.as_ref())?;
        let assign = &cl.assignment;

        let stats = cluster_stats(assign, &m.model, &ds)?;
        let inductions = (0..assign.c)
            .map(|c| {
                let cfg = RuleConfig {
                    seed: seed::derive(self.seeds.insight, c as u64),
                    ..self.cfg.rules
                };
                induce_rules(&raw, assign, c, &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let rules: Vec<_> = inductions.iter().map(|i| i.rule.clone()).collect();
        let recommendations = recommend(&xs, assign, &raw, &rules, &stats)?;
        let clusters = stats
            .into_iter()
            .zip(inductions)
            .map(|(stats, induction)| ClusterSummary {
                rule: induction.rule.to_string(),
                stats,
                induction,
            })
            .collect();

        let all = self.raw_dataset()?;
        let report = PipelineReport {
            version: VERSION.into(),
            seeds: self.seeds,
            dataset: DatasetSummary {
                path: self.cfg.data.path.display().to_string(),
                n: all.n(),
                d: all.d(),
                features: all.feature_names().to_vec(),
                positives: all.labels().iter().filter(|&&l| l == 1).count(),
            },
            feature_selection: fs,
            model: ModelSummary {
                features: m.features.clone(),
                hidden_layers: m.model.config.hidden_layers.clone(),
                epochs: m.model.config.epochs,
                accuracy: m.accuracy,
                initial_loss: m.model.initial_loss,
                final_loss: m
                    .model
                    .loss_trace
                    .last()
                    .copied()
                    .unwrap_or(m.model.initial_loss),
            },
            ranking: r.table,
            chosen: r.chosen,
            c: cl.c,
            knee: cl.knee,
            clusters,
            recommendations,
        };
        if matches!(self.format, ReportFormat::Json | ReportFormat::Both) {
            self.ws.write_json("report.json", &report)?;
        }
        if matches!(self.format, ReportFormat::Md | ReportFormat::Both) {
            self.ws.write_text("report.md", &render_markdown(&report))?;
        }
        Ok(report)
    }

    /// Runs one stage; failures are tagged with the stage name.
    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        let out = match stage {
            Stage::Fs => self.run_fs(),
            Stage::Train => self.run_train(),
            Stage::Autoxai => self.run_autoxai(),
            Stage::Explain => self.run_explain(),
            Stage::Cluster => self.run_cluster(),
            Stage::Insight => self.run_insight().map(|_| ()),
        };
        out.map_err(|source| Error::Stage {
            stage: stage.name().into(),
            source: Box::new(source),
        })
    }
}

/// All stages in order; returns the final report.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    workspace: impl Into<PathBuf>,
    master_seed: u64,
    format: ReportFormat,
) -> Result<PipelineReport> {
    let ws = Workspace::create(workspace)?;
    let ctx = Context::new(cfg, &ws, master_seed, format);
    for stage in &Stage::ALL[..5] {
        ctx.run_stage(*stage)?;
    }
    ctx.run_insight().map_err(|source| Error::Stage {
        stage: Stage::Insight.name().into(),
        source: Box::new(source),
    })
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

pub fn render_markdown(r: &PipelineReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Knowledge extraction report\n");
    let _ = writeln!(
        s,
        "Dataset `{}`: {} instances, {} features, {} positives. Master seed {}.\n",
        r.dataset.path, r.dataset.n, r.dataset.d, r.dataset.positives, r.seeds.master
    );

    let fs = &r.feature_selection;
    let _ = writeln!(s, "## Feature selection\n");
    let _ = writeln!(s, "Method: {:?}.", fs.outcome.method);
    if let Some(rk) = &fs.outcome.ranking {
        let _ = writeln!(s, "Ranking: {}.", rk.names.join(", "));
    }
    let dropped: Vec<String> = fs
        .forced_drop
        .iter()
        .chain(&fs.outcome.dropped)
        .cloned()
        .collect();
    let _ = writeln!(
        s,
        "Kept: {}. Dropped: {}. Mean accuracy with all candidates: {:.3}.\n",
        fs.features.join(", "),
        if dropped.is_empty() {
            "none".into()
        } else {
            dropped.join(", ")
        },
        fs.outcome.full_accuracy
    );
    let _ = writeln!(
        s,
        "| Subset | Accuracy | Kendall tau vs full | Influence change |"
    );
    let _ = writeln!(s, "|---|---:|---:|---:|");
    for rep in &fs.subset_reports {
        let _ = writeln!(
            s,
            "| {} | {:.3} | {:.3} | {:.4} |",
            rep.subset.join(", "),
            rep.accuracy,
            rep.kendall_tau_vs_full,
            rep.influence_change
        );
    }

    let _ = writeln!(s, "\n## Model\n");
    let _ = writeln!(
        s,
        "MLP {:?}, {} epochs, resubstitution accuracy {:.3} (loss {:.4} -> {:.4}).\n",
        r.model.hidden_layers,
        r.model.epochs,
        r.model.accuracy,
        r.model.initial_loss,
        r.model.final_loss
    );

    let _ = writeln!(s, "## Explainer ranking\n");
    let _ = writeln!(
        s,
        "Weights: robustness {}, fidelity {}. Chosen: rank {} ({} {}).\n",
        r.ranking.weights.robustness,
        r.ranking.weights.fidelity,
        r.chosen.rank,
        r.chosen.algorithm,
        r.chosen.hyperparameters
    );
    s.push_str(&r.ranking.to_markdown());

    let _ = writeln!(s, "\n## Clusters\n");
    let _ = writeln!(
        s,
        "{} clusters (L-method knee, cutoffs {:?}).\n",
        r.c, r.knee.cutoffs
    );
    let _ = writeln!(s, "| Cluster | Rule | Accuracy | Mean prediction | Positive rate | Size | Rule precision | Rule recall |");
    let _ = writeln!(s, "|---:|---|---:|---:|---:|---:|---:|---:|");
    for c in &r.clusters {
        let flag = if c.induction.rule.low_precision {
            " (low precision)"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "| {} | {}{} | {} | {} | {} | {} | {:.3} | {:.3} |",
            c.stats.cluster + 1,
            c.rule,
            flag,
            pct(c.stats.accuracy),
            pct(c.stats.mean_prediction),
            pct(c.stats.positive_rate),
            c.stats.size,
            c.induction.rule.precision,
            c.induction.rule.recall
        );
    }

    let _ = writeln!(s, "\n## Recommended instances\n");
    for rec in &r.recommendations {
        let _ = writeln!(
            s,
            "### Cluster {}: instance {} (label {}, prediction {:.3}, base value {:.3})\n",
            rec.cluster + 1,
            rec.instance_id,
            rec.label,
            rec.fx,
            rec.phi0
        );
        let _ = writeln!(s, "| Feature | Value | Attribution |");
        let _ = writeln!(s, "|---|---:|---:|");
        for a in &rec.attributions {
            let _ = writeln!(s, "| {} | {} | {:+.4} |", a.feature, a.value, a.phi);
        }
        let _ = writeln!(s);
    }
    s
}
