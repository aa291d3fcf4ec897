//! Functional networks of fully connected classifiers: correlation-based
//! connectivity between hidden neurons, graph-theoretic metrics against
//! random nulls, persistent homology of the weighted networks, and
//! clustering of trained models by their Betti curves.

pub mod cluster;
pub mod connectivity;
pub mod graph;
pub mod gta;
pub mod io;
pub mod linalg;
pub mod netbuild;
pub mod pipeline;
pub mod scalar;
pub mod tda;
pub mod trainer;

pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type CorrelationMatrix = connectivity::CorrelationMatrix<f64>;
pub type ConnectivityMatrix = connectivity::ConnectivityMatrix<f64>;
pub type WeightedComplex = tda::WeightedComplex<f64>;
pub type BettiCurve = tda::BettiCurve<f64>;
pub type Dataset = io::Dataset<f64>;
pub type ModelParams = trainer::ModelParams<f64>;
pub type ActivationMatrix = trainer::ActivationMatrix<f64>;
pub type Dissimilarity = cluster::Dissimilarity<f64>;
pub type GraphMetrics = gta::GraphMetrics<f64>;
pub type SmallWorldResult = gta::SmallWorldResult<f64>;
