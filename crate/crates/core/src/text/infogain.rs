use super::TextError;

pub const DEFAULT_TOP_TERMS: usize = 20;

fn entropy(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    let p = pos / total;
    h(p) + h(1.0 - p)
}

/// Information gain (bits) of term presence about a binary label, for every
/// term id in `0..n_terms`. `presence[d]` lists the term ids in document `d`.
pub fn term_information_gain(
    presence: &[Vec<usize>],
    labels: &[bool],
    n_terms: usize,
) -> Result<Vec<f64>, TextError> {
    if presence.len() != labels.len() {
        return Err(TextError::LengthMismatch {
            docs: presence.len(),
            labels: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    if n_pos == 0.0 || n_pos == n {
        return Err(TextError::DegenerateLabel);
    }
    let mut with = vec![0usize; n_terms];
    let mut with_pos = vec![0usize; n_terms];
    for (doc, &y) in presence.iter().zip(labels) {
        let mut ids = doc.clone();
        ids.sort_unstable();
        ids.dedup();
        for t in ids {
            with[t] += 1;
            if y {
                with_pos[t] += 1;
            }
        }
    }
    let h_y = entropy(n_pos, n);
    Ok((0..n_terms)
        .map(|t| {
            let a = with[t] as f64;
            let ap = with_pos[t] as f64;
            let b = n - a;
            let bp = n_pos - ap;
            let cond = (a / n) * entropy(ap, a) + (b / n) * entropy(bp, b);
            (h_y - cond).max(0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninformative_and_perfect_terms() {
        let presence = vec![vec![0, 1], vec![0, 1], vec![0], vec![0]];
        let labels = [true, true, false, false];
        let ig = term_information_gain(&presence, &labels, 2).unwrap();
        assert_eq!(ig[0], 0.0);
        assert!((ig[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_label() {
        let r = term_information_gain(&[vec![0], vec![]], &[true, true], 1);
        assert!(matches!(r, Err(TextError::DegenerateLabel)));
    }
}
