use genrefuse::nn::*;
use genrefuse::par::Exec;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

fn every_layer_kind() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d { filters: 2, kh: 2, kw: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool { ph: 2, pw: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { out: 5 },
        LayerSpec::Sigmoid,
        LayerSpec::Dropout { rate: 0.3 },
    ]
}

#[test]
fn dropout_keeps_expectation() {
    let n = 10_000;
    let m = ModelGraph::new(Shape::flat(20), vec![LayerSpec::Dropout { rate: 0.4 }], Head::Cosine(2), 1).unwrap();
    let x = Array2::ones((n, 20));
    let fwd = m.forward(&x, Mode::Train { seed: 9 }).unwrap();
    let dropped = fwd.activation(1);
    let mean = dropped.mean().unwrap();
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    let zeros = dropped.iter().filter(|&&v| v == 0.0).count() as f64 / (n * 20) as f64;
    assert!((zeros - 0.4).abs() < 0.02, "drop fraction {zeros}");
    assert_eq!(m.forward(&x, Mode::Train { seed: 9 }).unwrap().output, fwd.output);
    assert_eq!(m.forward(&x, Mode::Eval).unwrap().activation(1), &x);
}

#[test]
fn logistic_loss_matches_formula() {
    let p = ndarray::array![[0.9, 0.2], [0.0, 1.0]];
    let y = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    let eps = BCE_EPS;
    let want = -((0.9f64).ln() + (0.8f64).ln() + (1.0 - eps).ln() + (1.0 - eps).ln()) / 4.0;
    assert!((loss_logistic(&p, &y).unwrap() - want).abs() < 1e-15);
}

#[test]
fn grad_check_covers_every_layer_kind_in_both_heads() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = Shape::image(1, 5, 7);
    let x = randn(&mut rng, 3, input.len());
    for (i, head) in [Head::Logistic(3), Head::Cosine(3)].into_iter().enumerate() {
        let m = ModelGraph::new(input, every_layer_kind(), head, 10 + i as u64).unwrap();
        let y = match head {
            Head::Logistic(_) => Array2::from_shape_fn((3, 3), |(r, c)| ((r + c) % 2) as f64),
            Head::Cosine(_) => randn(&mut rng, 3, 3),
        };
        let cfg = GradCheckConfig { mode: Mode::Train { seed: 5 }, ..Default::default() };
        let r = grad_check(&m, &x, &y, &cfg).unwrap();
        assert!(r.pass, "{:?}", r.failures());
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = ModelGraph::new(Shape::image(1, 5, 7), every_layer_kind(), Head::Cosine(4), 2).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &m).unwrap();
    let back = read_checkpoint(buf.as_slice()).unwrap();
    let x = randn(&mut rng, 2, 35);
    assert_eq!(m.predict(&x).unwrap(), back.predict(&x).unwrap());
    buf[0] ^= 0xff;
    assert!(read_checkpoint(buf.as_slice()).is_err());
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = ModelGraph::new(Shape::image(1, 5, 7), every_layer_kind(), Head::Logistic(3), 6).unwrap();
    let x = randn(&mut rng, 8, 35);
    let y = Array2::from_shape_fn((8, 3), |(r, c)| ((r * c) % 2) as f64);
    let mode = Mode::Train { seed: 1 };
    let a = base.clone().with_exec(Exec::Sequential).loss_and_grads(&x, &y, mode).unwrap();
    let b = base.with_exec(Exec::Parallel).loss_and_grads(&x, &y, mode).unwrap();
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1, b.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The cosine loss is scale free in the output, so for a purely linear
    // model its gradient is orthogonal to the parameter vector.
    #[test]
    fn cosine_loss_is_scale_free(seed in any::<u64>(), k in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ModelGraph::new(Shape::flat(4), vec![], Head::Cosine(3), seed).unwrap();
        let x = randn(&mut rng, 5, 4);
        let t = randn(&mut rng, 5, 3);
        let (loss, grads) = m.loss_and_grads(&x, &t, Mode::Eval).unwrap();
        let params = m.snapshot();
        let dot: f64 = params.iter().flatten().zip(grads.blocks.iter().flatten()).map(|(p, g)| p * g).sum();
        prop_assert!(dot.abs() < 1e-10, "{}", dot);

        let mut scaled = m.clone();
        let blocks: Vec<Vec<f64>> = params.iter().map(|b| b.iter().map(|v| v * k).collect()).collect();
        scaled.set_params(&blocks).unwrap();
        let (loss_k, _) = scaled.loss_and_grads(&x, &t, Mode::Eval).unwrap();
        prop_assert!((loss - loss_k).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&loss));
    }

    #[test]
    fn cosine_loss_matches_direct_formula(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = randn(&mut rng, 4, 3);
        let t = randn(&mut rng, 4, 3);
        let mut want = 0.0;
        for i in 0..4 {
            let (a, b) = (o.row(i), t.row(i));
            want -= a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt());
        }
        prop_assert!((loss_cosine(&o, &t).unwrap() - want / 4.0).abs() < 1e-12);
    }
}
