use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use genrefuse::label_space::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ItemLabelMatrix {
    let rows: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut r: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
            if r.is_empty() {
                r.push(rng.random_range(0..n));
            }
            r
        })
        .collect();
    // every label needs support
    let mut rows = rows;
    for l in 0..n {
        if !rows.iter().any(|r| r.contains(&l)) {
            let i = rng.random_range(0..m);
            rows[i].push(l);
        }
    }
    ItemLabelMatrix::new(n, rows).unwrap()
}

fn ppmi_oracle(m: &ItemLabelMatrix) -> Array2<f64> {
    let (items, n) = (m.n_items(), m.n_labels());
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut joint = 0usize;
            let mut si = 0usize;
            let mut sj = 0usize;
            for k in 0..items {
                let a = m.contains(k, i);
                let b = m.contains(k, j);
                si += a as usize;
                sj += b as usize;
                joint += (a && b) as usize;
            }
            if joint > 0 {
                let pmi = (joint as f64 * items as f64 / (si as f64 * sj as f64)).ln();
                out[[i, j]] = pmi.max(0.0);
            }
        }
    }
    out
}

#[test]
fn ppmi_matches_triple_loop_on_random_8x5() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 8, 5);
        let got = compute_ppmi(&m).unwrap();
        let want = ppmi_oracle(&m);
        for (a, b) in got.values.iter().zip(want.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

/// Cyclic two-sided Jacobi eigenvalue iteration for symmetric matrices.
fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, nonneg: bool) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = if nonneg { rng.random_range(0.0..2.0) } else { rng.random_range(-1.0..1.0) };
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

fn assert_orthonormal_columns(u: &Array2<f64>, tol: f64) {
    let g = u.t().dot(u);
    for ((i, j), v) in g.indexed_iter() {
        let want = if i == j { 1.0 } else { 0.0 };
        assert!((v - want).abs() < tol, "U^T U [{i},{j}] = {v}");
    }
}

#[test]
fn svd_matches_jacobi_eigen_oracle_on_symmetric_6x6() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let a = random_symmetric(&mut rng, 6, true);
        let svd = svd_jacobi(&a);
        let mut want: Vec<f64> = jacobi_eigenvalues(&a).iter().map(|v| v.abs()).collect();
        want.sort_by(|x, y| y.total_cmp(x));
        for (s, w) in svd.s.iter().zip(&want) {
            assert_abs_diff_eq!(s, w, epsilon = 1e-8);
        }
        let err = (&svd.reconstruct() - &a).mapv(|v| v * v).sum().sqrt();
        assert!(err < 1e-8, "{err}");
        assert_orthonormal_columns(&svd.u, 1e-8);
    }
}

#[test]
fn item_factors_match_sum_and_normalize_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_matrix(&mut rng, 9, 6);
    let c = Array2::from_shape_simple_fn((6, 4), || rng.random_range(-1.0..1.0));
    let got = item_factors(&c, &m).unwrap();
    for i in 0..m.n_items() {
        let mut sum = [0.0; 4];
        for &l in m.row(i) {
            for k in 0..4 {
                sum[k] += c[[l, k]];
            }
        }
        let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..4 {
            assert_abs_diff_eq!(got[[i, k]], sum[k] / norm, epsilon = 1e-12);
        }
    }
}

#[test]
fn identical_label_sets_give_identical_item_factors() {
    let m = ItemLabelMatrix::new(4, vec![vec![0, 2], vec![1], vec![2, 0], vec![3, 1]]).unwrap();
    let model = factorize(&compute_ppmi(&m).unwrap(), 3).unwrap();
    let f = item_factors(&model.label_factors, &m).unwrap();
    assert_eq!(f.row(0), f.row(2));
}

#[test]
fn label_scores_match_dot_norm_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = Array2::from_shape_simple_fn((10, 5), || rng.random_range(-1.0..1.0));
    let f = Array1::from_shape_simple_fn(5, || rng.random_range(-1.0..1.0));
    let got = label_scores_from_factor(f.view(), &c).unwrap();
    for l in 0..10 {
        let dot: f64 = (0..5).map(|k| c[[l, k]] * f[k]).sum();
        let nc: f64 = (0..5).map(|k| c[[l, k]].powi(2)).sum::<f64>().sqrt();
        let nf: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(got[l], dot / (nc * nf), epsilon = 1e-12);
    }
}

fn taxonomy_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(0u8..3, 1..=4), 1..12).prop_map(|paths| {
        paths
            .into_iter()
            .map(|segs| segs.iter().map(|s| format!("g{s}")).collect::<Vec<_>>().join("/"))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ppmi_symmetric_and_non_negative(seed in any::<u64>(), m in 2usize..12, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, m, n);
        let p = compute_ppmi(&x).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(p.values[[i, j]] >= 0.0);
                prop_assert_eq!(p.values[[i, j]], p.values[[j, i]]);
            }
        }
    }

    #[test]
    fn svd_scales_linearly(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_symmetric(&mut rng, 5, false);
        let a = svd_jacobi(&x).s;
        let b = svd_jacobi(&(&x * c)).s;
        for (sa, sb) in a.iter().zip(b.iter()) {
            prop_assert!((c * sa - sb).abs() <= 1e-10 * (1.0 + c * sa.abs()), "{} vs {}", c * sa, sb);
        }
    }

    #[test]
    fn label_scores_scale_free(seed in any::<u64>(), k in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_simple_fn((6, 3), || rng.random_range(-1.0..1.0));
        let f = Array1::from_shape_simple_fn(3, || rng.random_range(-1.0..1.0));
        let a = label_scores_from_factor(f.view(), &c).unwrap();
        let b = label_scores_from_factor((&f * k).view(), &c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn closure_is_idempotent(paths in taxonomy_strategy(), pick in prop::collection::vec(any::<prop::sample::Index>(), 1..5)) {
        let tax = parse_taxonomy(&paths).unwrap();
        let chosen: Vec<String> = pick.iter().map(|i| tax.node(i.index(tax.len())).path.clone()).collect();
        let once = close_labels(&chosen, &tax).unwrap();
        let again: Vec<String> = once.iter().map(|&l| tax.node(l).path.clone()).collect();
        prop_assert_eq!(close_labels(&again, &tax).unwrap(), once.clone());
        for &l in &once {
            prop_assert!(tax.ancestors(l).all(|a| once.contains(&a)));
        }
    }
}

#[test]
fn pruning_keeps_supported_labels_only() {
    let sets: Vec<BTreeSet<usize>> = vec![[0, 1].into(), [0].into(), [0, 2].into(), [0, 1].into(), [1].into()];
    let m = ItemLabelMatrix::from_sets(3, &sets).unwrap();
    let p = prune_rare_labels(&m, 2).unwrap();
    assert_eq!(p.label_map, vec![0, 1]);
    assert_eq!(p.matrix.supports(), vec![4, 3]);
}
