//! Runs an experiment config end to end: `cargo run --release --example run_config -- configs/x.json [out]`.

use std::path::PathBuf;

use funcnet::pipeline::{ExperimentConfig, Pipeline};

fn main() {
    let mut args = std::env::args().skip(1);
    let cfg = ExperimentConfig::load(&PathBuf::from(args.next().expect("config path"))).unwrap();
    let mut p = Pipeline::new(cfg).unwrap();
    if let Some(out) = args.next() {
        p = p.with_output_dir(out);
    }
    let t = std::time::Instant::now();
    let rep = p.run_all().unwrap();
    println!("{}", serde_json::to_string_pretty(&rep.trends).unwrap());
    for m in &rep.models {
        let sw: Vec<f64> = m.small_world.iter().map(|s| s.result.sigma).collect();
        println!("{} acc={:.3} sigma={sw:?}", m.spec.id, m.train.test_accuracy);
    }
    for c in &rep.clustering {
        println!("{:?} ari={:.3} assignment={:?}", c.measure, c.ari, c.assignment);
    }
    println!("finite={} notes={} elapsed={:?}", rep.all_finite(), rep.notes.len(), t.elapsed());
}
