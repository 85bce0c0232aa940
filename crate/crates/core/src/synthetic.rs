//! Seeded synthetic datasets for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{split_mask, Dataset};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn assemble(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize, seed: u64) -> Dataset {
    let m = rows[0].len();
    let mask = split_mask(rows.len(), 0.7, seed);
    Dataset::new(names("x", m), names("c", n_classes), rows, labels, mask).expect("generated data is well formed")
}

/// Gaussian blobs: `classes` centres drawn in [-5, 5]^features, unit variance.
pub fn blobs(n: usize, features: usize, classes: usize, seed: u64) -> Dataset {
    assert!(n >= classes && classes >= 2 && features >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..features).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        rows.push(centres[c].iter().map(|&mu| mu + noise.sample(&mut rng)).collect());
        labels.push(c);
    }
    assemble(rows, labels, classes, seed)
}

/// XOR checkerboard on the first two of `features` uniform [0, 1) inputs,
/// with `flip` label noise.
pub fn xor(n: usize, features: usize, flip: f64, seed: u64) -> Dataset {
    assert!(n >= 2 && features >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..features).map(|_| rng.gen::<f64>()).collect();
        let mut c = usize::from((row[0] > 0.5) ^ (row[1] > 0.5));
        if rng.gen::<f64>() < flip {
            c = 1 - c;
        }
        // Guarantees both classes appear.
        if i < 2 {
            c = i;
        }
        rows.push(row);
        labels.push(c);
    }
    assemble(rows, labels, 2, seed)
}

/// Concentric rings in the plane, one class per ring, radius noise 0.15.
pub fn rings(n: usize, classes: usize, seed: u64) -> Dataset {
    assert!(n >= classes && classes >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.15).expect("positive sd");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let r = 1.0 + c as f64 + noise.sample(&mut rng);
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        rows.push(vec![r * t.cos(), r * t.sin()]);
        labels.push(c);
    }
    assemble(rows, labels, classes, seed)
}
