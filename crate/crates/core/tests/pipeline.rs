use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use funcnet::io::{load_matrix, SyntheticSpec};
use funcnet::pipeline::{
    connectivity_from_activations, load_connectivity, ClusterSpec, DatasetSource, DensitySpec, ExperimentConfig,
    GroupSpec, Pipeline, PipelineError, SmallWorldSpec, Stage, TdaSource, TdaSpec,
};
use funcnet::trainer::{Regularizer, TrainConfig};
use sha2::{Digest, Sha256};

fn tiny(out: &Path) -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "name": "tiny",
        "dataset": { "kind": "synthetic", "seed": 3, "classes": 3, "samples": 150, "features": 8, "separation": 1.5 },
        "train_samples": 100,
        "groups": [
            { "name": "vanilla", "regularizer": "none", "hidden": [12, 8] },
            { "name": "dropout", "regularizer": { "dropout": { "rate": 0.5 } }, "hidden": [12, 8] },
            { "name": "batchnorm", "regularizer": "batchnorm", "hidden": [12, 8] }
        ],
        "seeds": [0, 1],
        "train": { "epochs": 3, "batch_size": 16 },
        "densities": { "start": 0.1, "stop": 0.3, "step": 0.1 },
        "small_world": { "densities": [0.2], "samples": 3 },
        "tda": {},
        "cluster": {},
        "output_dir": out
    }))
    .unwrap()
}

/// SHA-256 of every file under `dir`, keyed by relative path.
fn tree_hashes(dir: &Path) -> BTreeMap<PathBuf, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), format!("{digest:x}"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn assert_same_tree(a: &Path, b: &Path) {
    let (ha, hb) = (tree_hashes(a), tree_hashes(b));
    let keys: Vec<_> = ha.keys().chain(hb.keys()).filter(|k| ha.get(*k) != hb.get(*k)).collect();
    assert!(keys.is_empty(), "artifacts differ: {keys:?}");
    assert!(ha.len() > 100);
}

#[test]
fn config_is_parsed_with_defaults() {
    let cfg = tiny(Path::new("x"));
    assert_eq!(cfg.train, TrainConfig { epochs: 3, batch_size: 16, ..TrainConfig::default() });
    assert_eq!(
        cfg.groups[1],
        GroupSpec { name: "dropout".into(), regularizer: Regularizer::Dropout { rate: 0.5 }, hidden: vec![12, 8] }
    );
    assert_eq!(cfg.tda, Some(TdaSpec { source: TdaSource::Connectivity, triangle_budget: 200_000_000 }));
    assert_eq!(cfg.cluster, Some(ClusterSpec::default()));
    assert_eq!(cfg.small_world.as_ref().map(|s| s.null_model), Some(Default::default()));
    assert!(matches!(cfg.dataset, DatasetSource::Synthetic(SyntheticSpec { seed: 3, .. })));
    assert_eq!(cfg.models().len(), 6);
}

#[test]
fn end_to_end_equals_stagewise_and_reruns_are_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let rep = Pipeline::new(tiny(&a)).unwrap().with_workers(Some(2)).run_all().unwrap();
    assert!(rep.all_finite());
    assert_eq!(rep.models.len(), 6);
    assert_eq!(rep.clustering.len(), 3);
    assert!(rep.trends.as_ref().unwrap().rows.len() == 3);

    let staged = Pipeline::new(tiny(&b)).unwrap().with_workers(Some(1));
    for stage in Stage::ALL {
        let outcome = staged.run_stage(stage).unwrap();
        assert_eq!(outcome.skipped, 0, "{stage}");
    }
    assert_same_tree(&a, &b);

    // skip-completed
    let again = Pipeline::new(tiny(&a)).unwrap();
    for stage in Stage::ALL {
        assert_eq!(again.run_stage(stage).unwrap().ran, 0, "{stage}");
    }
    // forced recomputation reproduces every byte
    let before = tree_hashes(&a);
    let forced = Pipeline::new(tiny(&a)).unwrap().with_force(true);
    forced.run_all().unwrap();
    assert!(before == tree_hashes(&a), "forced rerun changed artifacts");

    // connect on the saved activations reproduces the stored connectivity
    let dir = a.join("models").join("dropout-s1");
    let recomputed = connectivity_from_activations(&load_matrix(&dir.join("activations.fnmx")).unwrap()).unwrap();
    assert_eq!(recomputed, load_connectivity(&dir).unwrap());
}

#[test]
fn changed_config_reruns_downstream_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.tda = None;
    cfg.cluster = None;
    Pipeline::new(cfg.clone()).unwrap().run_all().unwrap();
    cfg.densities = DensitySpec::List(vec![0.15, 0.25]);
    let p = Pipeline::new(cfg).unwrap();
    assert_eq!(p.run_stage(Stage::Train).unwrap().ran, 0);
    assert_eq!(p.run_stage(Stage::Connect).unwrap().ran, 0);
    assert_eq!(p.run_stage(Stage::Binarize).unwrap().ran, 6);
    assert_eq!(p.run_stage(Stage::Gta).unwrap().ran, 6);
    let rep = p.run_all().unwrap();
    assert!(rep.models.iter().all(|m| m.gta.len() == 2));
}

#[test]
fn missing_upstream_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Pipeline::new(tiny(tmp.path())).unwrap();
    for stage in [Stage::Report, Stage::Gta, Stage::Capture] {
        let err = p.run_stage(stage).unwrap_err();
        assert!(matches!(err, PipelineError::MissingArtifact { .. }), "{err}");
        assert!(!err.is_validation());
    }
}

#[test]
fn density_below_two_over_n_fails_before_training() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.densities = DensitySpec::List(vec![0.001]);
    let err = Pipeline::new(cfg).err().unwrap();
    assert!(err.is_validation(), "{err}");
    assert!(std::fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn full_sweep_gives_eight_rows_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.groups.truncate(1);
    cfg.seeds = vec![5];
    cfg.tda = None;
    cfg.cluster = None;
    cfg.small_world =
        Some(SmallWorldSpec { densities: vec![0.1], null_model: Default::default(), samples: 2, seed: 1 });
    cfg.densities = "0.025:0.2:0.025".parse().unwrap();
    // 20 neurons need density >= 0.1
    cfg.groups[0].hidden = vec![60, 20];
    let rep = Pipeline::new(cfg).unwrap().run_all().unwrap();
    assert_eq!(rep.models[0].gta.len(), 8);
    let csv = std::fs::read_to_string(tmp.path().join("models/vanilla-s5/gta.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    let tidy = std::fs::read_to_string(tmp.path().join("gta.csv")).unwrap();
    assert_eq!(tidy.lines().next(), Some("group,seed,density,metric,value"));
    assert_eq!(tidy.lines().count(), 1 + 8 * 4 + 1);
}
