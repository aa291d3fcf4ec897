//! Declarative experiments: train → capture → connect → binarize → gta →
//! tda → cluster → report, with every intermediate written under the
//! output directory.
//!
//! Each completed stage leaves a marker holding a hash of the
//! configuration it depends on. A rerun skips stages whose marker matches,
//! unless forced; a forced rerun reproduces the same bytes.

mod config;
mod report;

pub use config::{
    CaptureSplit, ClusterSpec, DatasetSource, DensitySpec, ExperimentConfig, GroupSpec, ModelSpec, SmallWorldSpec,
    TdaSource, TdaSpec,
};
pub use report::{
    ClusterReport, DensityMetrics, ModelReport, RunReport, SmallWorldEntry, TrainSummary, TrendRow, TrendSummary,
};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{agglomerate, cut_and_score, pairwise_distances, Measure, ModelProfile};
use crate::connectivity::{functional_connectivity_matrix, pearson_correlation_matrix, ConnectivityMatrix};
use crate::gta::{graph_metrics, small_world_sigma};
use crate::io::{self, Dataset, IoError};
use crate::linalg::Matrix;
use crate::netbuild::{density_sweep, FunctionalNetwork};
use crate::tda::{persistence, BettiCurve, WeightedComplex};
use crate::trainer::{capture_activations, evaluate, train, ModelParams, TrainConfig};

use config::hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Train,
    Capture,
    Connect,
    Binarize,
    Gta,
    Tda,
    Cluster,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Train,
        Stage::Capture,
        Stage::Connect,
        Stage::Binarize,
        Stage::Gta,
        Stage::Tda,
        Stage::Cluster,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Capture => "capture",
            Stage::Connect => "connect",
            Stage::Binarize => "binarize",
            Stage::Gta => "gta",
            Stage::Tda => "tda",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    fn per_model(self) -> bool {
        !matches!(self, Stage::Cluster | Stage::Report)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} needs {needs} output that is missing or stale: {path} (run `{needs}` first)")]
    MissingArtifact { stage: Stage, needs: Stage, path: PathBuf },
    #[error("stage {stage} failed for {model}: {source}")]
    Stage {
        stage: Stage,
        model: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    /// True for errors caught before any computation (bad configuration).
    pub fn is_validation(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

fn stage_err<E: std::error::Error + Send + Sync + 'static>(
    stage: Stage,
    model: &str,
) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Stage { stage, model: model.to_string(), source: Box::new(e) }
}

/// How many units of work a stage ran and skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageOutcome {
    pub ran: usize,
    pub skipped: usize,
}

/// What the train stage records besides the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainRecord {
    input_dim: usize,
    num_classes: usize,
    train_samples: usize,
    test_samples: usize,
    test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Degenerate {
    degenerate: Vec<usize>,
}

pub struct Pipeline {
    cfg: ExperimentConfig,
    out: PathBuf,
    workers: Option<usize>,
    force: bool,
    data: OnceLock<(Dataset<f64>, Dataset<f64>)>,
}

/// Network file name for a density; fixed precision keeps grid values stable.
fn network_file(density: f64) -> String {
    format!("d{density:.6}.edges")
}

impl Pipeline {
    /// Validates `cfg`; outputs go to `cfg.output_dir`.
    pub fn new(cfg: ExperimentConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let out = cfg.output_dir.clone();
        Ok(Self { cfg, out, workers: None, force: false, data: OnceLock::new() })
    }

    pub fn with_output_dir(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = out.into();
        self
    }

    /// Bounds model-level parallelism; `None` uses every core.
    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn model_dir(&self, m: &ModelSpec) -> PathBuf {
        self.out.join("models").join(&m.id)
    }

    /// Stages this configuration actually runs, in order.
    pub fn enabled_stages(&self) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| match s {
                Stage::Tda => self.cfg.tda.is_some(),
                Stage::Cluster => self.cfg.cluster.is_some(),
                _ => true,
            })
            .collect()
    }

    fn upstream(&self, stage: Stage) -> Vec<Stage> {
        let tda_on_network = matches!(self.cfg.tda, Some(TdaSpec { source: TdaSource::Network { .. }, .. }));
        let mut up = match stage {
            Stage::Train => vec![],
            Stage::Capture => vec![Stage::Train],
            Stage::Connect => vec![Stage::Capture],
            Stage::Binarize => vec![Stage::Connect],
            Stage::Gta => vec![Stage::Binarize],
            Stage::Tda if tda_on_network => vec![Stage::Connect, Stage::Binarize],
            Stage::Tda => vec![Stage::Connect],
            Stage::Cluster => vec![Stage::Train, Stage::Tda],
            Stage::Report => vec![Stage::Train, Stage::Connect, Stage::Gta, Stage::Tda, Stage::Cluster],
        };
        let enabled = self.enabled_stages();
        up.retain(|s| enabled.contains(s));
        up
    }

    /// Hash of everything a stage's outputs depend on.
    fn stage_key(&self, stage: Stage, model: Option<&ModelSpec>) -> String {
        let c = &self.cfg;
        let mut key = json!({
            "stage": stage.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "model": model,
            "dataset": c.dataset,
            "train_samples": c.train_samples,
            "train": c.train,
        });
        let obj = key.as_object_mut().expect("object");
        if stage >= Stage::Capture {
            obj.insert("capture_split".into(), json!(c.capture_split));
        }
        if stage >= Stage::Binarize {
            obj.insert("networks".into(), json!(c.network_densities()));
        }
        if stage == Stage::Gta {
            obj.insert("sweep".into(), json!(c.sweep()));
            obj.insert("small_world".into(), json!(c.small_world));
        }
        if stage == Stage::Tda {
            obj.insert("tda".into(), json!(c.tda));
        }
        if !stage.per_model() {
            obj.insert("config".into(), json!(c.hash()));
        }
        hex(&Sha256::digest(serde_json::to_vec(&key).expect("key serializes")))
    }

    fn marker(&self, stage: Stage, model: Option<&ModelSpec>) -> PathBuf {
        let dir = match model {
            Some(m) => self.model_dir(m),
            None => self.out.clone(),
        };
        dir.join(".done").join(stage.name())
    }

    fn is_done(&self, stage: Stage, model: Option<&ModelSpec>) -> bool {
        fs::read_to_string(self.marker(stage, model)).is_ok_and(|k| k.trim() == self.stage_key(stage, model))
    }

    fn mark_done(&self, stage: Stage, model: Option<&ModelSpec>) -> Result<(), PipelineError> {
        let key = self.stage_key(stage, model);
        io::write_text(&self.marker(stage, model), &format!("{key}\n"))?;
        Ok(())
    }

    fn require_upstream(&self, stage: Stage) -> Result<(), PipelineError> {
        for needs in self.upstream(stage) {
            if needs.per_model() {
                for m in self.cfg.models() {
                    if !self.is_done(needs, Some(&m)) {
                        return Err(PipelineError::MissingArtifact {
                            stage,
                            needs,
                            path: self.marker(needs, Some(&m)),
                        });
                    }
                }
            } else if !self.is_done(needs, None) {
                return Err(PipelineError::MissingArtifact { stage, needs, path: self.marker(needs, None) });
            }
        }
        Ok(())
    }

    fn splits(&self) -> Result<&(Dataset<f64>, Dataset<f64>), PipelineError> {
        if let Some(d) = self.data.get() {
            return Ok(d);
        }
        let loaded = self.cfg.load_splits()?;
        Ok(self.data.get_or_init(|| loaded))
    }

    fn write_config(&self) -> Result<(), PipelineError> {
        // The output directory is left out so relocated runs stay byte-identical.
        let mut config = serde_json::to_value(&self.cfg).expect("config serializes");
        config.as_object_mut().expect("object").remove("output_dir");
        let doc = json!({ "config_hash": self.cfg.hash(), "config": config });
        io::save_json(&doc, &self.out.join("config.json"))?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w.max(1));
        }
        b.build().map_err(|e| PipelineError::Pool(e.to_string()))
    }

    /// Runs one stage, after checking that its inputs exist.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        if !self.enabled_stages().contains(&stage) {
            return Err(PipelineError::Config(format!("stage {stage} is disabled by this configuration")));
        }
        self.require_upstream(stage)?;
        self.write_config()?;
        if !stage.per_model() {
            if !self.force && self.is_done(stage, None) {
                return Ok(StageOutcome { ran: 0, skipped: 1 });
            }
            match stage {
                Stage::Cluster => self.cluster()?,
                _ => {
                    self.report()?;
                }
            }
            self.mark_done(stage, None)?;
            return Ok(StageOutcome { ran: 1, skipped: 0 });
        }
        let models = self.cfg.models();
        let todo: Vec<&ModelSpec> = models.iter().filter(|m| self.force || !self.is_done(stage, Some(m))).collect();
        if !todo.is_empty() && matches!(stage, Stage::Train | Stage::Capture) {
            self.splits()?;
        }
        let results: Vec<Result<(), PipelineError>> = self.pool()?.install(|| {
            todo.par_iter()
                .map(|m| {
                    self.run_model_stage(stage, m)?;
                    self.mark_done(stage, Some(m))
                })
                .collect()
        });
        results.into_iter().collect::<Result<Vec<()>, _>>()?;
        Ok(StageOutcome { ran: todo.len(), skipped: models.len() - todo.len() })
    }

    /// Runs every enabled stage in order and returns the report.
    pub fn run_all(&self) -> Result<RunReport, PipelineError> {
        for stage in self.enabled_stages() {
            self.run_stage(stage)?;
        }
        self.load_report()
    }

    pub fn load_report(&self) -> Result<RunReport, PipelineError> {
        let path = self.out.join("report.json");
        if !path.exists() {
            return Err(PipelineError::MissingArtifact { stage: Stage::Report, needs: Stage::Report, path });
        }
        Ok(io::load_json(&path)?)
    }

    fn run_model_stage(&self, stage: Stage, m: &ModelSpec) -> Result<(), PipelineError> {
        let dir = self.model_dir(m);
        match stage {
            Stage::Train => self.train_model(m, &dir),
            Stage::Capture => self.capture(m, &dir),
            Stage::Connect => self.connect(m, &dir),
            Stage::Binarize => self.binarize(m, &dir),
            Stage::Gta => self.gta(m, &dir),
            Stage::Tda => self.tda(m, &dir),
            Stage::Cluster | Stage::Report => unreachable!("experiment-level stage"),
        }
    }

    fn train_config(&self, m: &ModelSpec) -> TrainConfig {
        TrainConfig { seed: m.seed, ..self.cfg.train.clone() }
    }

    fn train_model(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let (train_set, test_set) = self.splits()?;
        let arch = m.architecture(train_set.feature_dim(), train_set.num_classes());
        let init = ModelParams::<f64>::init(&arch, m.seed).map_err(stage_err(Stage::Train, &m.id))?;
        let (model, log) = train(&init, train_set, &self.train_config(m)).map_err(stage_err(Stage::Train, &m.id))?;
        let scored = if test_set.is_empty() { train_set } else { test_set };
        let test_accuracy = evaluate(&model, scored).map_err(stage_err(Stage::Train, &m.id))?;
        io::save_model(&model, &dir.join("model.fnmd"))?;
        io::save_training_log(&log, &dir.join("train_log.csv"))?;
        let record = TrainRecord {
            input_dim: arch.input_dim,
            num_classes: arch.num_classes,
            train_samples: train_set.len(),
            test_samples: test_set.len(),
            test_accuracy,
        };
        io::save_json(&record, &dir.join("train.json"))?;
        Ok(())
    }

    fn capture(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let (train_set, test_set) = self.splits()?;
        let model: ModelParams<f64> = io::load_model(&dir.join("model.fnmd"))?;
        let all;
        let data = match self.cfg.capture_split {
            CaptureSplit::Train => train_set,
            CaptureSplit::Test => test_set,
            CaptureSplit::All => {
                let mut features = train_set.features().as_slice().to_vec();
                features.extend_from_slice(test_set.features().as_slice());
                let labels: Vec<usize> = train_set.labels().iter().chain(test_set.labels()).copied().collect();
                let features = Matrix::from_vec(labels.len(), train_set.feature_dim(), features);
                all = Dataset::new("all", features, labels, train_set.num_classes())?;
                &all
            }
        };
        let act =
            capture_activations(&model, data, self.cfg.train.leaky_slope).map_err(stage_err(Stage::Capture, &m.id))?;
        io::save_matrix(&act.values, &dir.join("activations.fnmx"))?;
        Ok(())
    }

    fn connect(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let a = io::load_matrix::<f64>(&dir.join("activations.fnmx"))?;
        let f = connectivity_from_activations(&a).map_err(stage_err(Stage::Connect, &m.id))?;
        save_connectivity(&f, dir)
    }

    fn binarize(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let f = load_connectivity(dir)?;
        let nets = density_sweep(&f, &self.cfg.network_densities()).map_err(stage_err(Stage::Binarize, &m.id))?;
        for net in &nets {
            io::save_network(net, &dir.join("networks").join(network_file(net.target_density())))?;
        }
        Ok(())
    }

    fn network(&self, dir: &Path, density: f64) -> Result<FunctionalNetwork, PipelineError> {
        Ok(io::load_network(&dir.join("networks").join(network_file(density)))?)
    }

    fn gta(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let mut rows = Vec::new();
        for d in self.cfg.sweep() {
            let net = self.network(dir, d)?;
            let metrics = graph_metrics::<f64>(net.graph()).map_err(stage_err(Stage::Gta, &m.id))?;
            rows.push(DensityMetrics {
                density: d,
                edges: net.graph().edge_count(),
                target_edges: net.target_edges(),
                achieved_density: net.achieved_density(),
                metrics,
            });
        }
        io::save_json(&rows, &dir.join("gta.json"))?;
        report::save_wide_gta(&rows, &dir.join("gta.csv"))?;
        let mut sw = Vec::new();
        if let Some(spec) = &self.cfg.small_world {
            for &d in &spec.densities {
                let net = self.network(dir, d)?;
                let seed = spec.seed.wrapping_add(m.seed);
                let result = small_world_sigma(net.graph(), spec.null_model, spec.samples, seed)
                    .map_err(stage_err(Stage::Gta, &m.id))?;
                sw.push(SmallWorldEntry { density: d, result });
            }
        }
        io::save_json(&sw, &dir.join("small_world.json"))?;
        Ok(())
    }

    fn tda(&self, m: &ModelSpec, dir: &Path) -> Result<(), PipelineError> {
        let spec = self.cfg.tda.as_ref().expect("tda stage enabled");
        let f = load_connectivity(dir)?;
        let complex = match spec.source {
            TdaSource::Connectivity => WeightedComplex::from_connectivity(&f, spec.triangle_budget),
            TdaSource::Network { density } => {
                let net = self.network(dir, density)?;
                WeightedComplex::from_network(&f, net.graph(), spec.triangle_budget)
            }
        }
        .map_err(stage_err(Stage::Tda, &m.id))?;
        let (d0, d1) = persistence(&complex);
        io::save_diagrams(&[&d0, &d1], &dir.join("diagrams.csv"))?;
        let (c0, c1) = (BettiCurve::from_diagram(&d0), BettiCurve::from_diagram(&d1));
        io::save_curves(&[&c0, &c1], &dir.join("curves.csv"))?;
        Ok(())
    }

    fn curves(&self, dir: &Path) -> Result<(BettiCurve<f64>, BettiCurve<f64>), PipelineError> {
        let mut curves = io::load_curves::<f64>(&dir.join("curves.csv"))?;
        let c0 = curves.remove(&0).unwrap_or_else(|| BettiCurve::zero(0));
        let c1 = curves.remove(&1).unwrap_or_else(|| BettiCurve::zero(1));
        Ok((c0, c1))
    }

    fn cluster(&self) -> Result<(), PipelineError> {
        let spec = self.cfg.cluster.as_ref().expect("cluster stage enabled");
        let models = self.cfg.models();
        let mut profiles = Vec::with_capacity(models.len());
        for m in &models {
            let dir = self.model_dir(m);
            let record: TrainRecord = io::load_json(&dir.join("train.json"))?;
            let (betti0, betti1) = self.curves(&dir)?;
            profiles.push(ModelProfile { accuracy: record.test_accuracy, betti0, betti1 });
        }
        let tags: Vec<usize> = models.iter().map(|m| m.group_tag).collect();
        let truth: Vec<usize> = models.iter().map(|m| m.group_index).collect();
        let k = self.cfg.groups.len();
        let dir = self.out.join("cluster");
        let mut reports = Vec::new();
        for measure in Measure::ALL {
            let err = stage_err(Stage::Cluster, measure.name());
            let d = pairwise_distances(&profiles, measure).map_err(err)?;
            let dend = agglomerate(&d, spec.linkage)
                .and_then(|dd| dd.with_labels(tags.clone()))
                .map_err(stage_err(Stage::Cluster, measure.name()))?;
            let (assignment, ari) =
                cut_and_score(&dend, k, &truth).map_err(stage_err(Stage::Cluster, measure.name()))?;
            io::save_dissimilarity(&d, &dir.join(format!("{}.dissimilarity.fnmx", measure.name())))?;
            io::save_json(&dend, &dir.join(format!("{}.dendrogram.json", measure.name())))?;
            io::save_merge_table(&dend, &dir.join(format!("{}.merges.csv", measure.name())))?;
            reports.push(ClusterReport {
                measure,
                linkage: spec.linkage,
                models: models.iter().map(|m| m.id.clone()).collect(),
                dendrogram: dend,
                clusters: k,
                assignment,
                ari,
            });
        }
        io::save_json(&reports, &dir.join("clustering.json"))?;
        Ok(())
    }

    fn report(&self) -> Result<RunReport, PipelineError> {
        let mut models = Vec::new();
        for m in self.cfg.models() {
            let dir = self.model_dir(&m);
            let record: TrainRecord = io::load_json(&dir.join("train.json"))?;
            let log = io::load_training_log(&dir.join("train_log.csv"))?;
            let degenerate: Degenerate = io::load_json(&dir.join("connectivity.json"))?;
            let (betti0, betti1) = if self.cfg.tda.is_some() {
                let (a, b) = self.curves(&dir)?;
                (Some(a), Some(b))
            } else {
                (None, None)
            };
            let last = log.epochs.last();
            models.push(ModelReport {
                train: TrainSummary {
                    test_accuracy: record.test_accuracy,
                    final_loss: last.map(|e| e.loss),
                    final_train_accuracy: last.map(|e| e.train_accuracy),
                    epochs: log.epochs.len(),
                    train_samples: record.train_samples,
                    test_samples: record.test_samples,
                },
                neurons: m.neurons(),
                degenerate_neurons: degenerate.degenerate,
                gta: io::load_json(&dir.join("gta.json"))?,
                small_world: io::load_json(&dir.join("small_world.json"))?,
                betti0,
                betti1,
                spec: m,
            });
        }
        let clustering = if self.cfg.cluster.is_some() {
            io::load_json(&self.out.join("cluster").join("clustering.json"))?
        } else {
            Vec::new()
        };
        let rep = RunReport::assemble(&self.cfg, models, clustering);
        io::save_json(&rep, &self.out.join("report.json"))?;
        report::save_tidy_gta(&rep, &self.out.join("gta.csv"))?;
        Ok(rep)
    }
}

/// `F = |pearson(A)|` off the diagonal.
pub fn connectivity_from_activations(
    a: &Matrix<f64>,
) -> Result<ConnectivityMatrix<f64>, crate::connectivity::ConnectivityError> {
    Ok(functional_connectivity_matrix(&pearson_correlation_matrix(a)?))
}

/// Writes `connectivity.fnmx` and the degenerate-neuron list `connectivity.json` into `dir`.
pub fn save_connectivity(f: &ConnectivityMatrix<f64>, dir: &Path) -> Result<(), PipelineError> {
    io::save_matrix(f.strengths(), &dir.join("connectivity.fnmx"))?;
    io::save_json(&Degenerate { degenerate: f.degenerate().to_vec() }, &dir.join("connectivity.json"))?;
    Ok(())
}

pub fn load_connectivity(dir: &Path) -> Result<ConnectivityMatrix<f64>, PipelineError> {
    let path = dir.join("connectivity.fnmx");
    let strengths = io::load_matrix::<f64>(&path)?;
    let d: Degenerate = io::load_json(&dir.join("connectivity.json"))?;
    ConnectivityMatrix::from_parts(strengths, d.degenerate)
        .map_err(|e| PipelineError::Io(io::schema_error(&path, e.to_string())))
}

/// Validates `cfg` and runs every stage.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport, PipelineError> {
    Pipeline::new(cfg.clone())?.run_all()
}
