use genrefuse::audio::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_timbre(rng: &mut ChaCha8Rng, frames: usize) -> TimbreMatrix {
    TimbreMatrix::new(Array2::from_shape_simple_fn((TIMBRE_COEFFS, frames), || rng.random_range(-50.0f32..50.0))).unwrap()
}

#[test]
fn timbre_stats_match_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = random_timbre(&mut rng, 37);
    let got = timbre_stats(&t);
    assert_eq!(got.len(), 48);
    for c in 0..TIMBRE_COEFFS {
        let xs: Vec<f64> = t.values.row(c).iter().map(|&v| v as f64).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let mut max = xs[0];
        let mut sq = 0.0;
        let mut ss = 0.0;
        for &x in &xs {
            if x > max {
                max = x;
            }
            sq += x * x;
            ss += (x - mean) * (x - mean);
        }
        let want = [mean, max, ss / n, sq.sqrt()];
        for (k, w) in want.iter().enumerate() {
            assert!((got[4 * c + k] - w).abs() <= 1e-9 * (1.0 + w.abs()));
        }
    }
}

#[test]
fn bin_stats_match_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let patches: Vec<Array2<f64>> = (0..5)
        .map(|_| Array2::from_shape_simple_fn((6, 11), || rng.random_range(-3.0..10.0)))
        .collect();
    let stats = BinStats::fit(&patches).unwrap();
    for b in 0..6 {
        let xs: Vec<f64> = patches.iter().flat_map(|p| p.row(b).to_vec()).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((stats.mean[b] - mean).abs() < 1e-10);
        assert!((stats.std[b] - var.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn short_tracks_repeat_their_last_frame() {
    let s = Spectrogram::new(Array2::from_shape_fn((3, 4), |(b, t)| (b * 10 + t) as f32)).unwrap();
    let p = sample_patch(&s, 7, 1).unwrap();
    assert_eq!(p.offset, 0);
    assert_eq!(p.values.row(1).to_vec(), vec![10.0, 11.0, 12.0, 13.0, 13.0, 13.0, 13.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn timbre_stats_ignore_frame_order(seed in any::<u64>(), frames in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_timbre(&mut rng, frames);
        let mut order: Vec<usize> = (0..frames).collect();
        order.shuffle(&mut rng);
        let shuffled = TimbreMatrix::new(t.values.select(ndarray::Axis(1), &order)).unwrap();
        let a = timbre_stats(&t);
        let b = timbre_stats(&shuffled);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn standardize_inverts(seed in any::<u64>(), bins in 1usize..8, width in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patches: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_simple_fn((bins, width), || rng.random_range(-100.0..100.0)))
            .collect();
        let stats = BinStats::fit(&patches).unwrap();
        for p in &patches {
            let back = stats.inverse(&stats.standardize(p).unwrap()).unwrap();
            for (x, y) in p.iter().zip(back.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn patches_always_have_requested_width(frames in 1usize..60, width in 1usize..60, seed in any::<u64>()) {
        let s = Spectrogram::new(Array2::from_shape_fn((4, frames), |(b, t)| (b + t) as f32)).unwrap();
        let p = sample_patch(&s, width, seed).unwrap();
        prop_assert_eq!(p.values.dim(), (4, width));
        prop_assert!(p.offset + width.min(frames) <= frames);
        prop_assert_eq!(sample_patch(&s, width, seed).unwrap(), p);
    }
}
