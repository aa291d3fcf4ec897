use funcnet::io::{generate_synthetic, Dataset, SyntheticSpec};
use funcnet::linalg::Matrix;
use funcnet::trainer::{
    capture_activations, dropout_masks, evaluate, train, Architecture, ModelParams, Regularizer, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

/// Largest per-parameter relative error between backprop and central
/// differences, `|g − ĝ| / max(|g| + |ĝ|, 1e-6)`.
/// The floor keeps exactly-zero gradients (a bias feeding batchnorm)
/// from comparing rounding noise against zero.
fn gradient_check(reg: Regularizer, seed: u64) -> (f64, usize) {
    let arch = Architecture::new(2, vec![2], 2, reg);
    let mut model = ModelParams::<f64>::init(&arch, seed).unwrap();
    let x = Matrix::from_fn(6, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 / 2.0 - 1.0 + 0.1 * j as f64);
    let labels = [0, 1, 1, 0, 1, 0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = dropout_masks::<f64, _>(&arch, x.rows(), &mut rng);
    let masks = masks.as_deref();
    let (_, grads) = model.loss_and_gradients(&x, &labels, masks, 0.01);
    let analytic: Vec<f64> = grads.slices().concat();

    let mut numeric = Vec::with_capacity(analytic.len());
    let count = model.trainable_mut().len();
    for t in 0..count {
        let len = model.trainable_mut()[t].len();
        for k in 0..len {
            let orig = model.trainable_mut()[t][k];
            model.trainable_mut()[t][k] = orig + STEP;
            let (up, _) = model.loss_and_gradients(&x, &labels, masks, 0.01);
            model.trainable_mut()[t][k] = orig - STEP;
            let (down, _) = model.loss_and_gradients(&x, &labels, masks, 0.01);
            model.trainable_mut()[t][k] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    let worst =
        analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6)).fold(0.0, f64::max);
    (worst, analytic.len())
}

#[test]
fn gradients_match_finite_differences() {
    for reg in [Regularizer::None, Regularizer::Dropout { rate: 0.5 }, Regularizer::Batchnorm] {
        for seed in 0..5 {
            let (err, params) = gradient_check(reg, seed);
            assert!(params >= 10);
            assert!(err < 1e-4, "{reg:?} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn batchnorm_training_statistics() {
    let arch = Architecture::new(6, vec![12, 5], 3, Regularizer::Batchnorm);
    let model = ModelParams::<f64>::init(&arch, 4).unwrap();
    let x = Matrix::from_fn(64, 6, |i, j| ((i * 31 + j * 17) % 23) as f64 * 0.3 - 2.0 + j as f64);
    let layers = model.batchnorm_training_values(&x, 0.01);
    assert_eq!(layers.len(), 2);
    for xhat in layers {
        for k in 0..xhat.cols() {
            let col = xhat.column(k);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-6, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "variance {var}");
        }
    }
}

#[test]
fn dropout_is_identity_at_inference() {
    let with = Architecture::new(5, vec![7, 4], 3, Regularizer::Dropout { rate: 0.5 });
    let without = Architecture { regularizer: Regularizer::None, ..with.clone() };
    let a = ModelParams::<f64>::init(&with, 11).unwrap();
    let mut b = ModelParams::<f64>::init(&without, 0).unwrap();
    b.layers = a.layers.clone();
    let x = Matrix::from_fn(9, 5, |i, j| (i as f64 - 4.0) * 0.5 + j as f64 * 0.1);
    assert_eq!(a.hidden_outputs(&x, 0.01), b.hidden_outputs(&x, 0.01));
    assert_eq!(a.hidden_outputs(&x, 0.01), a.hidden_outputs(&x, 0.01));
}

fn desk_blobs() -> Dataset<f64> {
    generate_synthetic(&SyntheticSpec::new(7, 2, 200)).unwrap()
}

#[test]
fn desk_training_reaches_high_accuracy() {
    let data = desk_blobs();
    let arch = Architecture::new(data.feature_dim(), vec![16, 8], 2, Regularizer::None);
    let model = ModelParams::init(&arch, 7).unwrap();
    let cfg = TrainConfig { epochs: 50, seed: 7, ..TrainConfig::default() };
    let (trained, log) = train(&model, &data, &cfg).unwrap();
    let last = log.epochs.last().unwrap();
    println!("final epoch: {last:?}");
    assert_eq!(log.epochs.len(), 50);
    assert!(last.train_accuracy >= 0.95, "training accuracy {}", last.train_accuracy);
    assert_eq!(evaluate(&trained, &data).unwrap(), last.eval_accuracy);
    let (again, log2) = train(&model, &data, &cfg).unwrap();
    assert_eq!(again, trained);
    assert_eq!(log2, log);
}

#[test]
fn regularized_training_is_deterministic() {
    let data = desk_blobs();
    for reg in [Regularizer::Dropout { rate: 0.5 }, Regularizer::Batchnorm] {
        let arch = Architecture::new(data.feature_dim(), vec![16, 8], 2, reg);
        let model = ModelParams::init(&arch, 3).unwrap();
        let cfg = TrainConfig { epochs: 5, seed: 3, ..TrainConfig::default() };
        let a = train(&model, &data, &cfg).unwrap();
        assert_eq!(a, train(&model, &data, &cfg).unwrap());
        assert_ne!(a.0, model);
        let act = capture_activations(&a.0, &data, cfg.leaky_slope).unwrap();
        assert_eq!(act.values.shape(), (200, 24));
    }
}

#[test]
fn untrained_model_guesses_at_chance() {
    let data: Dataset<f64> = generate_synthetic(&SyntheticSpec::new(5, 10, 2000)).unwrap();
    let mut accs = Vec::new();
    for seed in 0..10 {
        let arch = Architecture::new(data.feature_dim(), vec![32, 16], 10, Regularizer::None);
        accs.push(evaluate(&ModelParams::init(&arch, seed).unwrap(), &data).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.1).abs() <= 0.05, "mean accuracy {mean}, per seed {accs:?}");
}

#[test]
fn capture_shape_for_table_architecture() {
    let data: Dataset<f64> =
        generate_synthetic(&SyntheticSpec { features: 784, ..SyntheticSpec::new(2, 10, 500) }).unwrap();
    let arch = Architecture::new(784, vec![300, 100], 10, Regularizer::None);
    let act = capture_activations(&ModelParams::init(&arch, 0).unwrap(), &data, 0.01).unwrap();
    assert_eq!(act.values.shape(), (500, 400));
    assert!(act.values.is_finite());
}
