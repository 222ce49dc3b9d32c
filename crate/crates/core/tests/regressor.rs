use grasp_core::regressor::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Matrix::from_rows(&data).unwrap()
}

#[test]
fn init_matches_uniform_moments() {
    let head = init_params(HeadDims::new(1024), 3).unwrap();
    assert_eq!(head, init_params(HeadDims::new(1024), 3).unwrap());
    assert_ne!(head, init_params(HeadDims::new(1024), 4).unwrap());
    for layer in &head.params.layers {
        assert!(layer.bias.iter().all(|&b| b == 0.0));
        let n = layer.weights.len() as f64;
        let mean = layer.weights.iter().sum::<f64>() / n;
        let std = (layer.weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        let analytic = 1.0 / (3.0 * layer.fan_in as f64).sqrt();
        if n >= 1e5 {
            assert!((std / analytic - 1.0).abs() < 0.1, "{std} vs {analytic}");
        }
        let bound = 1.0 / (layer.fan_in as f64).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() <= bound));
    }
}

#[test]
fn dropout_masks_are_unbiased() {
    let head = init_params(HeadDims::small(8, 64, 64), 1).unwrap().with_mode(Mode::Train);
    let x = random_batch(4, 8, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sum, mut n) = (0.0, 0usize);
    for _ in 0..10_000 {
        let (_, cache) = head.forward(&x, &mut rng).unwrap();
        for m in cache.masks().iter().flatten() {
            assert!(m.data.iter().all(|&v| v == 0.0 || v == 2.0));
            sum += m.data.iter().sum::<f64>();
            n += m.data.len();
        }
    }
    let mean = sum / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "mask mean {mean}");
}

#[test]
fn eval_ignores_rng_and_train_follows_seed() {
    let head = init_params(HeadDims::small(8, 16, 16), 1).unwrap();
    let x = random_batch(3, 8, 2);
    let (a, _) = head.forward(&x, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (b, _) = head.forward(&x, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a, b);
    let train = head.with_mode(Mode::Train);
    let (c, _) = train.forward(&x, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (d, _) = train.forward(&x, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (e, _) = train.forward(&x, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(c, d);
    assert_ne!(c, e);
}

#[test]
fn gradients_match_differences() {
    for seed in 0..6 {
        let dims = HeadDims::small(3 + seed as usize, 5 + 2 * seed as usize, 4 + seed as usize);
        for dropout in [false, true] {
            let err = grad_check(dims, seed, dropout).unwrap();
            assert!(err < 1e-4, "seed {seed} dropout {dropout}: {err}");
        }
    }
}

#[test]
fn adam_reduces_loss() {
    let mut head = init_params(HeadDims::small(6, 16, 16), 2).unwrap();
    head.dropout_p = 0.0;
    let mut head = head.with_mode(Mode::Train);
    let mut state = AdamState::new(&head, AdamConfig::default());
    let x = random_batch(8, 6, 3);
    let t = Matrix::from_rows(&vec![[0.3, 0.7, 0.5, 0.5, 0.2, 0.1]; 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (first, _) = head.forward(&x, &mut rng).unwrap();
    let start = batch_loss(&first, &t);
    for _ in 0..300 {
        let (_, cache) = head.forward(&x, &mut rng).unwrap();
        let g = head.backward(cache, &t).unwrap();
        adam_step(&mut head, &g, &mut state).unwrap();
    }
    let (last, _) = head.forward(&x, &mut rng).unwrap();
    assert!(batch_loss(&last, &t) < start / 10.0);
    assert_eq!(state.step, 300);
}

proptest! {
    #[test]
    fn loss_is_non_negative(p in prop::array::uniform6(-5.0..5.0f64), t in prop::array::uniform6(0.0..1.0f64)) {
        let l = mse_loss(&p, &t);
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, p == t);
        prop_assert_eq!(mse_loss(&t, &t), 0.0);
    }
}
