use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::csv_error;
use super::{read_all, IoError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Labelled feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    name: String,
    features: Matrix<T>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        features: Matrix<T>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, IoError> {
        if features.rows() != labels.len() {
            return Err(IoError::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(IoError::InvalidDataset(format!("label {bad} outside [0, {num_classes})")));
        }
        if !features.is_finite() {
            return Err(IoError::InvalidDataset("non-finite feature".into()));
        }
        Ok(Self { name: name.into(), features, labels, num_classes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `p`.
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// First `k` samples and the rest.
    pub fn split_at(&self, k: usize) -> (Self, Self) {
        let k = k.min(self.len());
        let head: Vec<usize> = (0..k).collect();
        let tail: Vec<usize> = (k..self.len()).collect();
        (self.subset(&head, format!("{}[..{k}]", self.name)), self.subset(&tail, format!("{}[{k}..]", self.name)))
    }
}

/// Gaussian class blobs: each class gets a centre with `N(0, separation²)`
/// coordinates, each sample its class centre plus `N(0, noise²)` noise.
/// Labels are balanced (`i mod classes`) and then shuffled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub classes: usize,
    pub samples: usize,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_features() -> usize {
    20
}

fn default_separation() -> f64 {
    3.0
}

fn default_noise() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn new(seed: u64, classes: usize, samples: usize) -> Self {
        Self {
            seed,
            classes,
            samples,
            features: default_features(),
            separation: default_separation(),
            noise: default_noise(),
        }
    }
}

/// Deterministic blob dataset; a pure function of `spec`.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>, IoError> {
    if spec.samples == 0 {
        return Err(IoError::EmptyDataset);
    }
    if spec.classes == 0 || spec.features == 0 {
        return Err(IoError::InvalidDataset("synthetic spec needs at least one class and one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let centres: Vec<Vec<f64>> =
        (0..spec.classes).map(|_| (0..spec.features).map(|_| spec.separation * normal(&mut rng)).collect()).collect();
    let mut labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(spec.samples * spec.features);
    for &l in &labels {
        for c in &centres[l] {
            data.push(T::lit(c + spec.noise * normal(&mut rng)));
        }
    }
    let name = format!("synthetic(seed={}, classes={}, m={})", spec.seed, spec.classes, spec.samples);
    Dataset::new(name, Matrix::from_vec(spec.samples, spec.features, data), labels, spec.classes)
}

/// How to interpret the file handed to [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// IDX image file (the path) with a companion IDX label file.
    Idx {
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// CSV with a header row; the last column holds the integer label.
    Csv,
    /// JSON document holding a [`SyntheticSpec`].
    SyntheticSpec,
}

pub fn load_dataset<T: Scalar>(path: &Path, format: &DatasetFormat) -> Result<Dataset<T>, IoError> {
    let ds = match format {
        DatasetFormat::Idx { labels, limit } => load_idx(path, labels, *limit)?,
        DatasetFormat::Csv => load_csv(path)?,
        DatasetFormat::SyntheticSpec => {
            let bytes = read_all(path)?;
            let spec: SyntheticSpec =
                serde_json::from_slice(&bytes).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
            generate_synthetic(&spec)?
        }
    };
    if ds.is_empty() {
        return Err(IoError::EmptyDataset);
    }
    Ok(ds)
}

fn idx_header(path: &Path, bytes: &[u8], expect_dims: Option<usize>) -> Result<(Vec<usize>, usize), IoError> {
    let fmt = |offset: u64, message: String| IoError::Format { path: path.to_path_buf(), offset, message };
    if bytes.len() < 4 {
        return Err(fmt(bytes.len() as u64, "file ends inside the IDX magic number".into()));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(fmt(0, "IDX magic must start with two zero bytes".into()));
    }
    if bytes[2] != 0x08 {
        return Err(fmt(2, format!("unsupported IDX element type 0x{:02x} (only unsigned bytes)", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    if let Some(d) = expect_dims.filter(|&d| d != ndims) {
        return Err(fmt(3, format!("expected {d} dimensions, found {ndims}")));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(fmt(bytes.len() as u64, "file ends inside the IDX dimension table".into()));
    }
    let dims: Vec<usize> =
        (0..ndims).map(|k| u32::from_be_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize).collect();
    let payload: usize = dims.iter().product();
    if bytes.len() != header + payload {
        return Err(fmt(
            bytes.len().min(header + payload) as u64,
            format!("payload holds {} bytes, dimensions {dims:?} need {payload}", bytes.len() - header),
        ));
    }
    Ok((dims, header))
}

/// IDX images plus labels; pixels scaled to `[0, 1]`. `limit` keeps the
/// first samples only.
pub fn load_idx<T: Scalar>(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset<T>, IoError> {
    let img = read_all(images)?;
    let (dims, img_off) = idx_header(images, &img, None)?;
    if dims.is_empty() {
        return Err(super::schema(images, "IDX image file has no sample dimension"));
    }
    let lab = read_all(labels)?;
    let (ldims, lab_off) = idx_header(labels, &lab, Some(1))?;
    if ldims[0] != dims[0] {
        return Err(super::schema(labels, format!("{} labels for {} images", ldims[0], dims[0])));
    }
    let m = limit.map_or(dims[0], |k| k.min(dims[0]));
    let p: usize = dims[1..].iter().product();
    let data: Vec<T> = img[img_off..img_off + m * p].iter().map(|&b| T::lit(b as f64 / 255.0)).collect();
    let labels_v: Vec<usize> = lab[lab_off..lab_off + m].iter().map(|&b| b as usize).collect();
    let classes = lab[lab_off..].iter().copied().max().map_or(0, |c| c as usize + 1);
    let name = images.file_name().map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, Matrix::from_vec(m, p, data), labels_v, classes)
}

fn load_csv<T: Scalar>(path: &Path) -> Result<Dataset<T>, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || headers.get(headers.len() - 1) != Some("label") {
        return Err(super::schema(path, "CSV dataset needs feature columns followed by a `label` column"));
    }
    let p = headers.len() - 1;
    let (mut data, mut labels) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let offset = record.position().map_or(0, |pos| pos.byte());
        let bad =
            |field: &str| IoError::Format { path: path.to_path_buf(), offset, message: format!("bad field {field:?}") };
        for field in record.iter().take(p) {
            data.push(T::lit(field.trim().parse::<f64>().map_err(|_| bad(field))?));
        }
        let label = &record[p];
        labels.push(label.trim().parse::<usize>().map_err(|_| bad(label))?);
    }
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let name = path.file_name().map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, Matrix::from_vec(labels.len(), p, data), labels, classes)
}
