use std::collections::{BTreeMap, BTreeSet};

use genrefuse::text::*;
use proptest::prelude::*;

fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(0u8..12, 1..15), 2..10).prop_map(|docs| {
        docs.into_iter()
            .map(|d| d.into_iter().map(|w| format!("w{w}")).collect())
            .collect()
    })
}

fn tfidf_oracle(corpus: &[Vec<String>], vocab: &Vocabulary) -> Vec<BTreeMap<String, f64>> {
    let m = corpus.len() as f64;
    corpus
        .iter()
        .map(|doc| {
            let mut row = BTreeMap::new();
            for t in vocab.terms() {
                let count = doc.iter().filter(|w| *w == t).count() as f64;
                if count == 0.0 {
                    continue;
                }
                let df = corpus.iter().filter(|d| d.contains(t)).count() as f64;
                let idf = ((1.0 + m) / (1.0 + df)).ln() + 1.0;
                row.insert(t.clone(), count * idf);
            }
            let norm = row.values().map(|v| v * v).sum::<f64>().sqrt();
            row.values_mut().for_each(|v| *v /= norm);
            row
        })
        .collect()
}

/// Mutual information of two binary variables from a 2x2 contingency table.
fn mutual_information(present: &[bool], labels: &[bool]) -> f64 {
    let n = present.len() as f64;
    let mut mi = 0.0;
    for x in [false, true] {
        for y in [false, true] {
            let joint = present.iter().zip(labels).filter(|(&p, &l)| p == x && l == y).count() as f64 / n;
            let px = present.iter().filter(|&&p| p == x).count() as f64 / n;
            let py = labels.iter().filter(|&&l| l == y).count() as f64 / n;
            if joint > 0.0 {
                mi += joint * (joint / (px * py)).log2();
            }
        }
    }
    mi
}

#[test]
fn tokenize_lowercases_and_drops_short_tokens() {
    assert_eq!(tokenize("A Heavy, heavy-RIFF x 80s"), vec!["heavy", "heavy", "riff", "80s"]);
}

#[test]
fn truncation_counts_characters() {
    assert_eq!(aggregate_and_truncate(&["héllo", "wörld"], 7), "héllo w");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tfidf_matches_direct_formula(corpus in corpus_strategy()) {
        let vocab = build_vocabulary(&corpus, 100).unwrap();
        let got = tfidf(&corpus, &vocab);
        let want = tfidf_oracle(&corpus, &vocab);
        for (row, exp) in got.rows.iter().zip(&want) {
            prop_assert_eq!(row.len(), exp.len());
            for &(col, v) in row {
                let term = &vocab.terms()[col as usize];
                prop_assert!((v - exp[term]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicating_a_document_keeps_its_row(corpus in corpus_strategy(), which in any::<prop::sample::Index>()) {
        let vocab = build_vocabulary(&corpus, 100).unwrap();
        let i = which.index(corpus.len());
        let mut doubled = corpus[i].clone();
        doubled.extend(corpus[i].clone());
        let a = tfidf(&corpus[i..=i], &vocab);
        let b = tfidf(&[doubled], &vocab);
        prop_assert_eq!(a.rows[0].len(), b.rows[0].len());
        for (x, y) in a.rows[0].iter().zip(&b.rows[0]) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn vocabulary_is_deterministic_and_ranked(corpus in corpus_strategy(), size in 1usize..20) {
        let a = build_vocabulary(&corpus, size).unwrap();
        let b = build_vocabulary(&corpus, size).unwrap();
        prop_assert_eq!(a.terms(), b.terms());
        prop_assert!(a.len() <= size);
        for w in 0..a.len().saturating_sub(1) {
            let (d0, d1) = (a.df(w), a.df(w + 1));
            prop_assert!(d0 > d1 || (d0 == d1 && a.terms()[w] < a.terms()[w + 1]));
        }
    }

    #[test]
    fn enrichment_never_removes_entries(corpus in corpus_strategy(), extra in prop::collection::vec(0u8..12, 0..4)) {
        let extra: Vec<String> = extra.iter().map(|e| format!("w{e}")).collect();
        let enriched: Vec<Vec<String>> = corpus.iter().map(|d| append_enrichment(d.clone(), &extra)).collect();
        let mut all = corpus.clone();
        all.extend(enriched.clone());
        let vocab = build_vocabulary(&all, 100).unwrap();
        let plain = tfidf(&corpus, &vocab);
        let rich = tfidf(&enriched, &vocab);
        for (p, r) in plain.rows.iter().zip(&rich.rows) {
            prop_assert!(r.len() >= p.len());
        }
    }

    #[test]
    fn infogain_matches_contingency_oracle(
        docs in prop::collection::vec(prop::collection::btree_set(0usize..6, 0..6), 4..30),
        labels_seed in any::<u64>(),
    ) {
        let n = docs.len();
        let mut labels: Vec<bool> = (0..n).map(|i| (labels_seed >> (i % 64)) & 1 == 1).collect();
        labels[0] = true;
        labels[1] = false;
        let presence: Vec<Vec<usize>> = docs.iter().map(|d| d.iter().copied().collect()).collect();
        let ig = term_information_gain(&presence, &labels, 6).unwrap();
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let ig_flip = term_information_gain(&presence, &flipped, 6).unwrap();
        for t in 0..6 {
            let has: Vec<bool> = docs.iter().map(|d: &BTreeSet<usize>| d.contains(&t)).collect();
            prop_assert!((ig[t] - mutual_information(&has, &labels)).abs() < 1e-10);
            prop_assert!((ig[t] - ig_flip[t]).abs() < 1e-12);
            prop_assert!(ig[t] >= 0.0);
        }
    }
}

#[test]
fn degenerate_label_is_rejected() {
    let presence = vec![vec![0], vec![1]];
    assert!(matches!(term_information_gain(&presence, &[true, true], 2), Err(TextError::DegenerateLabel)));
}

#[test]
fn tfidf_round_trips_through_bytes() {
    let corpus: Vec<Vec<String>> = vec![tokenize("rock guitar riff"), tokenize("jazz sax riff riff")];
    let vocab = build_vocabulary(&corpus, 10).unwrap();
    let m = tfidf(&corpus, &vocab);
    let mut buf = Vec::new();
    write_tfidf(&mut buf, &m).unwrap();
    assert_eq!(read_tfidf(buf.as_slice()).unwrap(), m);
}
