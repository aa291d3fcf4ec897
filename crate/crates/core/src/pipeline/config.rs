use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::cluster::Linkage;
use crate::gta::NullModel;
use crate::io::{self, Dataset, DatasetFormat, SyntheticSpec};
use crate::netbuild::density_grid;
use crate::tda::DEFAULT_TRIANGLE_BUDGET;
use crate::trainer::{Architecture, Regularizer, TrainConfig};

/// Where the data comes from. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
    Csv {
        path: PathBuf,
    },
}

/// Which rows of the dataset feed the activation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureSplit {
    Train,
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default)]
    pub regularizer: Regularizer,
    pub hidden: Vec<usize>,
}

/// Either an explicit ascending list or an inclusive `start:stop:step` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    List(Vec<f64>),
    Grid { start: f64, stop: f64, step: f64 },
}

impl DensitySpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DensitySpec::List(v) => v.clone(),
            DensitySpec::Grid { start, stop, step } => density_grid(*start, *stop, *step),
        }
    }
}

impl std::str::FromStr for DensitySpec {
    type Err = String;

    /// Parses `start:stop:step`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("expected start:stop:step, got {s:?}"));
        };
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !(start > 0.0) || stop < start {
            return Err(format!("need 0 < start <= stop and step > 0, got {s:?}"));
        }
        Ok(DensitySpec::Grid { start, stop, step })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldSpec {
    pub densities: Vec<f64>,
    #[serde(default)]
    pub null_model: NullModel,
    #[serde(default = "default_null_samples")]
    pub samples: usize,
    /// Null-model seed; each model adds its own seed to it.
    #[serde(default)]
    pub seed: u64,
}

fn default_null_samples() -> usize {
    20
}

/// Complex the Betti curves are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TdaSource {
    /// The full weighted connectivity matrix.
    #[default]
    Connectivity,
    /// The functional network binarized at `density`, weighted by F.
    Network { density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdaSpec {
    #[serde(default)]
    pub source: TdaSource,
    #[serde(default = "default_budget")]
    pub triangle_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_TRIANGLE_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ClusterSpec {
    #[serde(default)]
    pub linkage: Linkage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSource,
    /// Leading rows used for training; the rest form the test split.
    pub train_samples: usize,
    #[serde(default)]
    pub capture_split: CaptureSplit,
    pub groups: Vec<GroupSpec>,
    pub seeds: Vec<u64>,
    /// `seed` is ignored: each model trains with its own seed.
    #[serde(default)]
    pub train: TrainConfig,
    pub densities: DensitySpec,
    #[serde(default)]
    pub small_world: Option<SmallWorldSpec>,
    #[serde(default)]
    pub tda: Option<TdaSpec>,
    #[serde(default)]
    pub cluster: Option<ClusterSpec>,
    pub output_dir: PathBuf,
    /// Directory relative dataset paths resolve against; set by [`ExperimentConfig::load`].
    /// The output directory is taken as given (relative to the working directory).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One trained network of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub group: String,
    pub group_index: usize,
    pub group_tag: usize,
    pub seed: u64,
    pub regularizer: Regularizer,
    pub hidden: Vec<usize>,
}

impl ModelSpec {
    pub fn neurons(&self) -> usize {
        self.hidden.iter().sum()
    }

    pub fn architecture(&self, input_dim: usize, num_classes: usize) -> Architecture {
        Architecture::new(input_dim, self.hidden.clone(), num_classes, self.regularizer)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Sweep densities, ascending.
    pub fn sweep(&self) -> Vec<f64> {
        self.densities.values()
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        let mut out = Vec::with_capacity(self.groups.len() * self.seeds.len());
        for (gi, g) in self.groups.iter().enumerate() {
            for &seed in &self.seeds {
                out.push(ModelSpec {
                    id: format!("{}-s{seed}", g.name),
                    group: g.name.clone(),
                    group_index: gi,
                    group_tag: g.regularizer.group_tag(),
                    seed,
                    regularizer: g.regularizer,
                    hidden: g.hidden.clone(),
                });
            }
        }
        out
    }

    /// Every density a functional network is built at: the sweep, the
    /// small-world densities and the TDA network density, sorted and deduplicated.
    pub fn network_densities(&self) -> Vec<f64> {
        let mut all = self.sweep();
        if let Some(sw) = &self.small_world {
            all.extend(&sw.densities);
        }
        if let Some(TdaSpec { source: TdaSource::Network { density }, .. }) = &self.tda {
            all.push(*density);
        }
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.groups.is_empty() {
            return bad("at least one group is required".into());
        }
        let names: BTreeSet<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        if names.len() != self.groups.len() {
            return bad("group names must be distinct".into());
        }
        if let Some(g) = self
            .groups
            .iter()
            .find(|g| g.name.is_empty() || !g.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        {
            return bad(format!("group name {:?} must be non-empty ASCII letters, digits, '-' or '_'", g.name));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.train_samples == 0 {
            return bad("train_samples must be at least 1".into());
        }
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let sweep = self.sweep();
        if sweep.is_empty() {
            return bad("the density sweep is empty".into());
        }
        if let Some(w) = sweep.windows(2).find(|w| w[1] <= w[0]) {
            return bad(format!("densities must be strictly ascending ({} then {})", w[0], w[1]));
        }
        for g in &self.groups {
            // The input dimension is only known once data is loaded; 1 stands in.
            Architecture::new(1, g.hidden.clone(), 1, g.regularizer)
                .validate()
                .map_err(|e| PipelineError::Config(format!("group {}: {e}", g.name)))?;
            let n = g.hidden.iter().sum::<usize>();
            if n < 2 {
                return bad(format!("group {} has {n} hidden neurons; a network needs at least 2", g.name));
            }
            let min = 2.0 / n as f64;
            for d in self.network_densities() {
                if !(d <= 1.0 && d >= min - 1e-12) {
                    return bad(format!("density {d} is outside [2/n, 1] = [{min}, 1] for group {} (n = {n})", g.name));
                }
            }
        }
        if let Some(sw) = &self.small_world {
            if sw.samples == 0 {
                return bad("small_world.samples must be at least 1".into());
            }
        }
        if let Some(tda) = &self.tda {
            if tda.triangle_budget == 0 {
                return bad("tda.triangle_budget must be positive".into());
            }
        }
        if self.cluster.is_some() && self.groups.len() * self.seeds.len() < 2 {
            return bad("clustering needs at least two models".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of everything that affects results
    /// (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut canon = serde_json::to_value(self).expect("config serializes");
        canon.as_object_mut().expect("object").remove("output_dir");
        hex(&Sha256::digest(serde_json::to_vec(&canon).expect("value serializes")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads the full dataset and splits it into (train, test).
    pub fn load_splits(&self) -> Result<(Dataset<f64>, Dataset<f64>), PipelineError> {
        let data: Dataset<f64> = match &self.dataset {
            DatasetSource::Synthetic(spec) => io::generate_synthetic(spec)?,
            DatasetSource::Idx { images, labels, limit } => {
                io::load_idx(&self.resolve(images), &self.resolve(labels), *limit)?
            }
            DatasetSource::Csv { path } => io::load_dataset(&self.resolve(path), &DatasetFormat::Csv)?,
        };
        if self.train_samples > data.len() {
            return Err(PipelineError::Config(format!(
                "train_samples {} exceeds the {} samples available",
                self.train_samples,
                data.len()
            )));
        }
        if self.train_samples == data.len() && self.capture_split == CaptureSplit::Test {
            return Err(PipelineError::Config(
                "capture_split is \"test\" but no samples remain after the training split".into(),
            ));
        }
        Ok(data.split_at(self.train_samples))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
