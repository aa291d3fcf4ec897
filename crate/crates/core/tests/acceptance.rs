//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! `cargo test -p funcnet-core --test acceptance`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use funcnet::cluster::{agglomerate, curve_distances, cut_and_score, Linkage};
use funcnet::connectivity::ConnectivityMatrix;
use funcnet::graph::Graph;
use funcnet::gta::{
    average_clustering_coefficient, average_shortest_path_length, erdos_renyi_gnm, global_efficiency, graph_density,
    small_world_sigma, watts_strogatz, NullModel,
};
use funcnet::io;
use funcnet::linalg::Matrix;
use funcnet::netbuild::{density_grid, density_sweep, maximum_spanning_tree};
use funcnet::pipeline::{ExperimentConfig, Pipeline, RunReport};
use funcnet::tda::oracle::betti_oracle;
use funcnet::tda::{betti_curves, betti_distance, BettiCurve, WeightedComplex};
use funcnet::trainer::{dropout_masks, Architecture, ModelParams, Regularizer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(name: &str, out: &Path) -> RunReport {
    let cfg = ExperimentConfig::load(&configs().join(name)).unwrap();
    Pipeline::new(cfg).unwrap().with_output_dir(out).run_all().unwrap()
}

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

fn c1_homology_oracle() -> Outcome {
    let t = Instant::now();
    let mut probes = 0;
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let w: f64 = r.random();
                if w > 0.0 {
                    edges.push((a, b, w));
                }
            }
        }
        let k = WeightedComplex::from_weighted_edges(n, edges, 1000).unwrap();
        let (c0, c1) = betti_curves(&k);
        let mut eps: Vec<f64> =
            k.edges().iter().map(|e| e.weight).chain(c0.breakpoints.clone()).chain(c1.breakpoints.clone()).collect();
        eps.push(0.0);
        for e in eps {
            probes += 1;
            let (b0, b1) = betti_oracle(&k, e);
            if c0.value_at(e) != b0 || c1.value_at(e) != b1 {
                return outcome(
                    false,
                    format!("seed {seed} eps {e}: curves ({}, {}) oracle ({b0}, {b1})", c0.value_at(e), c1.value_at(e)),
                );
            }
        }
    }
    let el = t.elapsed();
    outcome(el < Duration::from_secs(60), format!("100 complexes, {probes} breakpoints exact, {el:.2?}"))
}

fn c2_filtration_fixtures() -> Outcome {
    let tri = WeightedComplex::from_weighted_edges(3, [(0, 1, 0.9), (1, 2, 0.8), (0, 2, 0.5)], 10).unwrap();
    let (t0, t1) = betti_curves(&tri);
    let cyc =
        WeightedComplex::from_weighted_edges(4, [(0, 1, 0.9), (1, 2, 0.8), (2, 3, 0.7), (3, 0, 0.6)], 10).unwrap();
    let (_, q1) = betti_curves(&cyc);
    let want_t0 = BettiCurve::from_steps(0, vec![1.0, 0.9, 0.8], vec![3, 2, 1]);
    let want_q1 = BettiCurve::from_steps(1, vec![1.0, 0.6], vec![0, 1]);
    let samples_ok = [(0.95, 3), (0.9, 2), (0.85, 2), (0.8, 1), (0.0, 1)].iter().all(|&(e, v)| t0.value_at(e) == v)
        && [(0.65, 0), (0.6, 1), (0.0, 1)].iter().all(|&(e, v)| q1.value_at(e) == v)
        && [0.0, 0.5, 0.7, 1.0].iter().all(|&e| t1.value_at(e) == 0);
    let pass = t0 == want_t0 && q1 == want_q1 && samples_ok && tri.triangles().len() == 1 && cyc.triangles().is_empty();
    outcome(
        pass,
        format!("triangle b0 {:?}/{:?}, 4-cycle b1 {:?}/{:?}", t0.breakpoints, t0.values, q1.breakpoints, q1.values),
    )
}

fn floyd_warshall(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b) in g.edges() {
        d[a][b] = 1.0;
        d[b][a] = 1.0;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn clustering_oracle(g: &Graph) -> f64 {
    let n = g.node_count();
    let mut total = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&u| g.has_edge(u, v)).collect();
        let k = nb.len();
        if k >= 2 {
            let links =
                (0..k).flat_map(|x| (x + 1..k).map(move |y| (x, y))).filter(|&(x, y)| g.has_edge(nb[x], nb[y])).count();
            total += 2.0 * links as f64 / (k * (k - 1)) as f64;
        }
    }
    total / n as f64
}

fn c3_gta_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let mut r = rng(seed);
        let n = r.random_range(2..=50);
        let p = r.random_range(0.0..0.4);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (r.random_range(0..v), v)).collect();
        for a in 0..n {
            for b in a + 1..n {
                if r.random::<f64>() < p && !edges.contains(&(a, b)) {
                    edges.push((a, b));
                }
            }
        }
        let g = Graph::from_edges(n, edges).unwrap();
        let d = floyd_warshall(&g);
        let pairs = (n * (n - 1)) as f64;
        let l = d.iter().flatten().sum::<f64>() / pairs;
        let e = d.iter().flatten().filter(|&&v| v > 0.0).map(|v| 1.0 / v).sum::<f64>() / pairs;
        let dens = 2.0 * g.edge_count() as f64 / pairs;
        for (got, want) in [
            (graph_density::<f64>(&g).unwrap(), dens),
            (average_shortest_path_length::<f64>(&g).unwrap(), l),
            (global_efficiency::<f64>(&g).unwrap(), e),
            (average_clustering_coefficient::<f64>(&g), clustering_oracle(&g)),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    let k4e = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
    let hand = [
        average_shortest_path_length::<f64>(&p3).unwrap(),
        average_shortest_path_length::<f64>(&c4).unwrap(),
        average_clustering_coefficient::<f64>(&k4e),
    ];
    let hand_ok = hand == [4.0 / 3.0, 4.0 / 3.0, 5.0 / 6.0];
    outcome(worst <= 1e-12 && hand_ok, format!("200 graphs, max abs error {worst:.1e}; hand values {hand:?}"))
}

fn c4_small_world_sanity() -> Outcome {
    let t = Instant::now();
    let mut ws_sigmas = Vec::new();
    for seed in 0..20 {
        let g = watts_strogatz(100, 4, 0.1, &mut rng(seed));
        let r = small_world_sigma::<f64>(&g, NullModel::ErdosRenyiGnm, 20, 1000 + seed);
        ws_sigmas.push(r.map_or(f64::NAN, |r| r.sigma));
    }
    let ws_hits = ws_sigmas.iter().filter(|&&s| s > 1.0).count();
    let mut er_sigmas = Vec::new();
    let mut redraws = 0;
    for seed in 0..20 {
        // the sampled graph itself must be connected for L to exist
        let mut r = rng(500 + seed);
        let g = loop {
            let g = erdos_renyi_gnm(100, 200, &mut r);
            if g.is_connected() {
                break g;
            }
            redraws += 1;
        };
        er_sigmas.push(
            small_world_sigma::<f64>(&g, NullModel::ErdosRenyiGnm, 20, 2000 + seed).map_or(f64::NAN, |r| r.sigma),
        );
    }
    let er_mean = er_sigmas.iter().sum::<f64>() / er_sigmas.len() as f64;
    let el = t.elapsed();
    let ws_min = ws_sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        ws_hits >= 19 && (0.7..=1.3).contains(&er_mean) && el < Duration::from_secs(120),
        format!("WS sigma>1 in {ws_hits}/20 (min {ws_min:.3}); ER mean sigma {er_mean:.3} ({redraws} disconnected redraws); {el:.2?}"),
    )
}

fn c5_binarization() -> Outcome {
    let n = 100;
    let grid = density_grid(0.025, 0.2, 0.025);
    let mut checked = 0;
    for seed in 0..20u64 {
        let mut r = rng(seed);
        // odd seeds use eight weight levels so tie groups are large
        let tied = seed % 2 == 1;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let w = if tied { r.random_range(1..=8) as f64 / 8.0 } else { r.random::<f64>() };
                m[(i, j)] = w;
                m[(j, i)] = w;
            }
        }
        let f = ConnectivityMatrix::from_parts(m, vec![]).unwrap();
        let nets = density_sweep(&f, &grid).unwrap();
        let mst = maximum_spanning_tree(&f);
        for (k, net) in nets.iter().enumerate() {
            let g = net.graph();
            let target = (grid[k] * (n * (n - 1)) as f64 / 2.0).round() as usize;
            let extra: Vec<f64> = g.edges().iter().filter(|e| !mst.contains(e)).map(|&(a, b)| f.weight(a, b)).collect();
            let cutoff = extra.iter().copied().fold(f64::INFINITY, f64::min);
            let below_cut = g.edges().len() - extra.iter().filter(|&&w| w == cutoff).count();
            let dropped_max =
                f.upper_edges().filter(|&(a, b, _)| !g.has_edge(a, b)).map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
            let ok = g.is_connected()
                && mst.iter().all(|&(a, b)| g.has_edge(a, b))
                && g.edge_count() >= target
                && (g.edge_count() == target || (below_cut < target && cutoff > dropped_max))
                && (k == 0 || nets[k - 1].graph().edges().iter().all(|&(a, b)| g.has_edge(a, b)));
            if !ok {
                return outcome(
                    false,
                    format!("seed {seed} density {}: {} edges for target {target}", grid[k], g.edge_count()),
                );
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} networks over 20 matrices and {} densities", grid.len()))
}

fn gradient_error(reg: Regularizer, seed: u64) -> f64 {
    const STEP: f64 = 1e-5;
    let arch = Architecture::new(3, vec![4, 3], 3, reg);
    let mut model = ModelParams::<f64>::init(&arch, seed).unwrap();
    // zero biases put a neuron whose inputs are all dropped exactly on the
    // leaky ReLU kink, where central differences average the two slopes
    let mut jitter = rng(seed + 100);
    for t in model.trainable_mut() {
        for v in t.iter_mut() {
            *v += jitter.random_range(-0.1..0.1);
        }
    }
    let x = Matrix::from_fn(8, 3, |i, j| ((i * 5 + j * 3) % 7) as f64 / 3.0 - 1.0 + 0.05 * j as f64);
    let labels = [0, 1, 2, 0, 1, 2, 1, 0];
    let masks = dropout_masks::<f64, _>(&arch, x.rows(), &mut rng(seed));
    let masks = masks.as_deref();
    let analytic: Vec<f64> = model.loss_and_gradients(&x, &labels, masks, 0.01).1.slices().concat();
    let mut numeric = Vec::new();
    for t in 0..model.trainable_mut().len() {
        for k in 0..model.trainable_mut()[t].len() {
            let orig = model.trainable_mut()[t][k];
            model.trainable_mut()[t][k] = orig + STEP;
            let up = model.loss_and_gradients(&x, &labels, masks, 0.01).0;
            model.trainable_mut()[t][k] = orig - STEP;
            let down = model.loss_and_gradients(&x, &labels, masks, 0.01).0;
            model.trainable_mut()[t][k] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6)).fold(0.0, f64::max)
}

fn c6_gradient_check() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, reg) in [
        ("vanilla", Regularizer::None),
        ("dropout", Regularizer::Dropout { rate: 0.5 }),
        ("batchnorm", Regularizer::Batchnorm),
    ] {
        let worst = (0..3).map(|s| gradient_error(reg, s)).fold(0.0, f64::max);
        pass &= worst < 1e-4;
        parts.push(format!("{name} {worst:.1e}"));
    }
    outcome(pass, format!("max relative error: {}", parts.join(", ")))
}

fn c7_desk_small_world(out: &Path) -> Outcome {
    let t = Instant::now();
    let rep = run_config("smallworld-desk.json", out);
    let el = t.elapsed();
    let sigmas: Vec<f64> = rep.models.iter().flat_map(|m| m.small_world.iter().map(|s| s.result.sigma)).collect();
    let accs: Vec<String> = rep.models.iter().map(|m| format!("{:.3}", m.train.test_accuracy)).collect();
    let pass =
        rep.models.len() == 4 && sigmas.len() == 4 && sigmas.iter().all(|&s| s > 1.0) && el < Duration::from_secs(600);
    let sig: Vec<String> = sigmas.iter().map(|s| format!("{s:.2}")).collect();
    outcome(pass, format!("sigma at 2.5% = [{}], test accuracy [{}], {el:.2?}", sig.join(", "), accs.join(", ")))
}

fn c8_regularization_trends(rep: &RunReport, elapsed: Duration) -> Outcome {
    let rows = &rep.trends.as_ref().map_or(&[][..], |t| &t.rows[..]);
    let count = |f: fn(&funcnet::pipeline::TrendRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let statements = rep.trends.as_ref().map_or(0, |t| t.statements.len());
    let pass = rep.all_finite() && !rows.is_empty() && statements > 0 && rep.models.len() == 15;
    outcome(
        pass,
        format!(
            "{} models, all finite = {}, expected order holds at E {}/{n}, C {}/{n}, L {}/{n} densities (recorded, not asserted), {elapsed:.2?}",
            rep.models.len(),
            rep.all_finite(),
            count(|r| r.efficiency_order_holds),
            count(|r| r.clustering_order_holds),
            count(|r| r.path_length_order_holds),
            n = rows.len(),
        ),
    )
}

fn c9_clustering(rep: &RunReport) -> Outcome {
    let mut r = rng(9);
    let mut curves = Vec::new();
    let mut labels = Vec::new();
    for g in 0..3usize {
        for _ in 0..5 {
            // group g sits at level 10g + 1 on [0, w] with w within 0.002 of 0.5
            let w = 0.5 + r.random_range(-0.002..0.002);
            curves.push(BettiCurve::from_steps(0, vec![1.0, w], vec![0, 10 * g + 1]));
            labels.push(g);
        }
    }
    let refs: Vec<&BettiCurve<f64>> = curves.iter().collect();
    let d = curve_distances(&refs).unwrap();
    let (mut within, mut between) = (0.0f64, f64::INFINITY);
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            if labels[i] == labels[j] {
                within = within.max(d.get(i, j));
            } else {
                between = between.min(d.get(i, j));
            }
        }
    }
    let dend = agglomerate(&d, Linkage::Average).unwrap();
    let (_, ari) = cut_and_score(&dend, 3, &labels).unwrap();
    let desk: Vec<String> = rep.clustering.iter().map(|c| format!("{} {:.3}", c.measure.name(), c.ari)).collect();
    outcome(
        ari == 1.0 && between >= 10.0 * within,
        format!("synthetic ARI {ari} (between/within {:.0}x); desk ARI: {}", between / within, desk.join(", ")),
    )
}

fn c10_determinism(first: &Path, second: &Path) -> Outcome {
    run_config("smallworld-desk.json", second);
    let (a, b) = (tree_hashes(first), tree_hashes(second));
    let differing = a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).count();

    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(10);
    let m = Matrix::from_fn(7, 5, |_, _| r.random_range(-1e3..1e3));
    io::save_matrix(&m, &dir.path().join("m.fnmx")).unwrap();
    let mut laws = vec![io::load_matrix::<f64>(&dir.path().join("m.fnmx")).unwrap() == m];
    io::save_matrix_csv(&m, &dir.path().join("m.csv")).unwrap();
    laws.push(io::load_matrix_csv::<f64>(&dir.path().join("m.csv")).unwrap() == m);
    let mut edges: Vec<(usize, usize)> = (1..20).map(|v| (v - 1, v)).collect();
    edges.shuffle(&mut r);
    let g = Graph::from_edges(20, edges).unwrap();
    io::save_graph(&g, &dir.path().join("g.edges")).unwrap();
    laws.push(io::load_graph(&dir.path().join("g.edges")).unwrap() == g);
    let c = BettiCurve::from_steps(1, vec![1.0, 0.7, 0.3], vec![0, 2, 1]);
    io::save_curves(&[&c], &dir.path().join("c.csv")).unwrap();
    laws.push(io::load_curves::<f64>(&dir.path().join("c.csv")).unwrap()[&1] == c);
    let arch = Architecture::new(4, vec![5, 3], 2, Regularizer::Batchnorm);
    let model = ModelParams::<f64>::init(&arch, 3).unwrap();
    io::save_model(&model, &dir.path().join("m.fnmd")).unwrap();
    laws.push(io::load_model::<f64>(&dir.path().join("m.fnmd")).unwrap() == model);
    let laws_ok = laws.iter().filter(|&&l| l).count();

    outcome(
        differing == 0 && a.len() > 10 && laws_ok == laws.len(),
        format!(
            "{} artifacts, {differing} differ between two runs; {laws_ok}/{} round-trip laws hold",
            a.len(),
            laws.len()
        ),
    )
}

fn c11_betti_distance() -> Outcome {
    let mut r = rng(11);
    let mut random_curve = || {
        let k = r.random_range(1..6);
        let mut bp: Vec<f64> = (0..k - 1).map(|_| r.random_range(0.01..0.99)).collect();
        bp.push(1.0);
        bp.sort_by(|a, b| b.total_cmp(a));
        bp.dedup();
        let values = bp.iter().map(|_| r.random_range(0..5)).collect();
        BettiCurve::from_steps(0, bp, values)
    };
    let mut ok = 0;
    for _ in 0..100 {
        let (a, b) = (random_curve(), random_curve());
        let ab = betti_distance(&a, &b).unwrap();
        if ab == betti_distance(&b, &a).unwrap() && ab >= 0.0 && betti_distance(&a, &a).unwrap() == 0.0 {
            ok += 1;
        }
    }
    let step = BettiCurve::from_steps(0, vec![1.0, 0.6], vec![0, 1]);
    let fixture = betti_distance(&step, &BettiCurve::zero(0)).unwrap();
    outcome(
        ok == 100 && fixture == 0.6,
        format!("{ok}/100 pairs symmetric, non-negative, zero on self; fixture d = {fixture}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (sw1, sw2, reg) = (dir.path().join("sw1"), dir.path().join("sw2"), dir.path().join("reg"));
    let t = Instant::now();
    let reg_report = run_config("regularization-desk.json", &reg);
    let reg_elapsed = t.elapsed();

    let results = [
        ("1 homology oracle equivalence", c1_homology_oracle()),
        ("2 hand-computed filtration fixtures", c2_filtration_fixtures()),
        ("3 GTA oracle equivalence", c3_gta_oracle()),
        ("4 small-world sanity", c4_small_world_sanity()),
        ("5 binarization contract", c5_binarization()),
        ("6 gradient check", c6_gradient_check()),
        ("7 desk-scale small-world reproduction", c7_desk_small_world(&sw1)),
        ("8 desk-scale regularization trends (soft)", c8_regularization_trends(&reg_report, reg_elapsed)),
        ("9 clustering property", c9_clustering(&reg_report)),
        ("10 determinism and round-trips", c10_determinism(&sw1, &sw2)),
        ("11 Betti-distance properties", c11_betti_distance()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
