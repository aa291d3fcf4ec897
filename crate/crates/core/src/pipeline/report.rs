use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelSpec};
use crate::cluster::{Dendrogram, Linkage, Measure};
use crate::gta::{GraphMetrics, SmallWorldResult};
use crate::io::{self, IoError};
use crate::tda::BettiCurve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetrics {
    pub density: f64,
    pub edges: usize,
    pub target_edges: usize,
    pub achieved_density: f64,
    pub metrics: GraphMetrics<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldEntry {
    pub density: f64,
    pub result: SmallWorldResult<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Inference-mode accuracy on the test split (the training split if there is none).
    pub test_accuracy: f64,
    pub final_loss: Option<f64>,
    pub final_train_accuracy: Option<f64>,
    pub epochs: usize,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub spec: ModelSpec,
    pub neurons: usize,
    pub train: TrainSummary,
    /// Constant neurons: zero connectivity to every other neuron.
    pub degenerate_neurons: Vec<usize>,
    pub gta: Vec<DensityMetrics>,
    pub small_world: Vec<SmallWorldEntry>,
    pub betti0: Option<BettiCurve<f64>>,
    pub betti1: Option<BettiCurve<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub measure: Measure,
    pub linkage: Linkage,
    /// Model ids in dendrogram item order.
    pub models: Vec<String>,
    pub dendrogram: Dendrogram<f64>,
    pub clusters: usize,
    pub assignment: Vec<usize>,
    pub ari: f64,
}

/// Group means of one metric at one density, keyed by group name.
pub type GroupMeans = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub density: f64,
    pub global_efficiency: GroupMeans,
    pub avg_clustering: GroupMeans,
    pub avg_shortest_path: GroupMeans,
    /// `E(batchnorm) > E(vanilla) > E(dropout)`.
    pub efficiency_order_holds: bool,
    /// `C(dropout) > C(vanilla) > C(batchnorm)`.
    pub clustering_order_holds: bool,
    /// `L(dropout) > L(vanilla) > L(batchnorm)`.
    pub path_length_order_holds: bool,
}

/// Whether the expected orderings between the vanilla, dropout and
/// batchnorm groups hold at each sweep density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub vanilla: String,
    pub dropout: String,
    pub batchnorm: String,
    pub rows: Vec<TrendRow>,
    pub statements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub provenance: Provenance,
    pub densities: Vec<f64>,
    pub models: Vec<ModelReport>,
    pub clustering: Vec<ClusterReport>,
    /// Present when the experiment has a vanilla, a dropout and a batchnorm group.
    pub trends: Option<TrendSummary>,
    /// Caveats a reader must know, such as null samples that fell back to
    /// their largest component.
    pub notes: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl RunReport {
    pub(crate) fn assemble(cfg: &ExperimentConfig, models: Vec<ModelReport>, clustering: Vec<ClusterReport>) -> Self {
        let densities = cfg.sweep();
        let trends = trend_summary(cfg, &models, &densities);
        let mut notes = Vec::new();
        for m in &models {
            for sw in &m.small_world {
                if sw.result.fallback_samples > 0 {
                    notes.push(format!(
                        "{} at density {}: {}/{} null samples never connected; their path length is taken on the largest component",
                        m.spec.id, sw.density, sw.result.fallback_samples, sw.result.null_samples
                    ));
                }
            }
            if !m.degenerate_neurons.is_empty() {
                notes.push(format!(
                    "{}: {} constant neurons have zero connectivity",
                    m.spec.id,
                    m.degenerate_neurons.len()
                ));
            }
        }
        RunReport {
            name: cfg.name.clone(),
            provenance: Provenance {
                config_hash: cfg.hash(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seeds: cfg.seeds.clone(),
            },
            densities,
            models,
            clustering,
            trends,
            notes,
        }
    }

    /// True when every number in the report is finite.
    pub fn all_finite(&self) -> bool {
        let curve_ok =
            |c: &Option<BettiCurve<f64>>| c.as_ref().is_none_or(|c| c.breakpoints.iter().all(|b| b.is_finite()));
        let models_ok = self.models.iter().all(|m| {
            let t = &m.train;
            t.test_accuracy.is_finite()
                && t.final_loss.is_none_or(f64::is_finite)
                && t.final_train_accuracy.is_none_or(f64::is_finite)
                && m.gta.iter().all(|r| {
                    let g = &r.metrics;
                    [
                        r.density,
                        r.achieved_density,
                        g.density,
                        g.avg_shortest_path,
                        g.global_efficiency,
                        g.avg_clustering,
                    ]
                    .iter()
                    .all(|v| v.is_finite())
                })
                && m.small_world.iter().all(|s| {
                    let r = &s.result;
                    [r.sigma, r.c_real, r.c_random, r.l_real, r.l_random].iter().all(|v| v.is_finite())
                })
                && curve_ok(&m.betti0)
                && curve_ok(&m.betti1)
        });
        let clusters_ok = self
            .clustering
            .iter()
            .all(|c| c.ari.is_finite() && c.dendrogram.merges.iter().all(|m| m.height.is_finite()));
        let trends_ok = self.trends.as_ref().is_none_or(|t| {
            t.rows.iter().all(|r| {
                [&r.global_efficiency, &r.avg_clustering, &r.avg_shortest_path]
                    .iter()
                    .all(|m| m.values().all(|v| v.is_finite()))
            })
        });
        models_ok && clusters_ok && trends_ok
    }
}

fn trend_summary(cfg: &ExperimentConfig, models: &[ModelReport], densities: &[f64]) -> Option<TrendSummary> {
    let find = |tag: usize| cfg.groups.iter().find(|g| g.regularizer.group_tag() == tag).map(|g| g.name.clone());
    let (vanilla, dropout, batchnorm) = (find(0)?, find(1)?, find(2)?);
    let groups = [&vanilla, &dropout, &batchnorm];
    let mut rows = Vec::with_capacity(densities.len());
    for (k, &d) in densities.iter().enumerate() {
        let mut e = GroupMeans::new();
        let mut c = GroupMeans::new();
        let mut l = GroupMeans::new();
        for g in groups {
            let of = |f: fn(&GraphMetrics<f64>) -> f64| -> f64 {
                mean(&models.iter().filter(|m| &m.spec.group == g).map(|m| f(&m.gta[k].metrics)).collect::<Vec<_>>())
            };
            e.insert(g.clone(), of(|m| m.global_efficiency));
            c.insert(g.clone(), of(|m| m.avg_clustering));
            l.insert(g.clone(), of(|m| m.avg_shortest_path));
        }
        let desc = |m: &GroupMeans, a: &str, b: &str, c: &str| m[a] > m[b] && m[b] > m[c];
        rows.push(TrendRow {
            density: d,
            efficiency_order_holds: desc(&e, &batchnorm, &vanilla, &dropout),
            clustering_order_holds: desc(&c, &dropout, &vanilla, &batchnorm),
            path_length_order_holds: desc(&l, &dropout, &vanilla, &batchnorm),
            global_efficiency: e,
            avg_clustering: c,
            avg_shortest_path: l,
        });
    }
    let count = |f: fn(&TrendRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let n = rows.len();
    let statements = vec![
        format!(
            "E_global({batchnorm}) > E_global({vanilla}) > E_global({dropout}) holds at {}/{n} densities",
            count(|r| r.efficiency_order_holds)
        ),
        format!(
            "C({dropout}) > C({vanilla}) > C({batchnorm}) holds at {}/{n} densities",
            count(|r| r.clustering_order_holds)
        ),
        format!(
            "L({dropout}) > L({vanilla}) > L({batchnorm}) holds at {}/{n} densities",
            count(|r| r.path_length_order_holds)
        ),
    ];
    Some(TrendSummary { vanilla, dropout, batchnorm, rows, statements })
}

/// One row per density: `density,edges,target_edges,avg_shortest_path,global_efficiency,avg_clustering`.
pub(crate) fn save_wide_gta(rows: &[DensityMetrics], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("density,edges,target_edges,avg_shortest_path,global_efficiency,avg_clustering\n");
    for r in rows {
        out.push_str(&format!(
            "{:?},{},{},{:?},{:?},{:?}\n",
            r.density,
            r.edges,
            r.target_edges,
            r.metrics.avg_shortest_path,
            r.metrics.global_efficiency,
            r.metrics.avg_clustering
        ));
    }
    io::write_text(path, &out)
}

/// Tidy table `group,seed,density,metric,value` over all models.
pub(crate) fn save_tidy_gta(rep: &RunReport, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("group,seed,density,metric,value\n");
    for m in &rep.models {
        let (g, s) = (&m.spec.group, m.spec.seed);
        for r in &m.gta {
            for (name, v) in [
                ("density", r.metrics.density),
                ("avg_shortest_path", r.metrics.avg_shortest_path),
                ("global_efficiency", r.metrics.global_efficiency),
                ("avg_clustering", r.metrics.avg_clustering),
            ] {
                out.push_str(&format!("{g},{s},{:?},{name},{v:?}\n", r.density));
            }
        }
        for sw in &m.small_world {
            out.push_str(&format!("{g},{s},{:?},sigma,{:?}\n", sw.density, sw.result.sigma));
        }
    }
    io::write_text(path, &out)
}
