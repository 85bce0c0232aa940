//! Probability-vector arithmetic shared by prediction and cumulative voting.
//!
//! Every soft vote in the crate goes through [`mean`] with the operands in
//! tree order, so the same set of distributions always produces bit-identical
//! results.

pub(crate) fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Component-wise arithmetic mean, summing in iteration order.
pub(crate) fn mean<'a>(dists: impl Iterator<Item = &'a [f64]>, n_classes: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_classes];
    let mut k = 0usize;
    for d in dists {
        for (a, &p) in acc.iter_mut().zip(d) {
            *a += p;
        }
        k += 1;
    }
    if k > 0 {
        for a in &mut acc {
            *a /= k as f64;
        }
    }
    acc
}

/// Index of the largest component; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
