#![allow(dead_code)]

use agsp_core::spectra::MASS_TOL;
use rand::Rng;

/// Exhaustive `(S_max^δ, S_min^δ)` over all subsets `L` with mass `≥ 1 − δ`.
pub fn brute_entropies(lambda: &[f64], delta: f64) -> (f64, f64) {
    let n = lambda.len();
    let mut best_count = usize::MAX;
    let mut best_max = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let (mut mass, mut count, mut top) = (0.0, 0usize, 0.0f64);
        for (i, &l) in lambda.iter().enumerate() {
            if mask >> i & 1 == 1 {
                mass += l;
                count += 1;
                top = top.max(l);
            }
        }
        if mass >= 1.0 - delta - MASS_TOL {
            best_count = best_count.min(count);
            best_max = best_max.min(top);
        }
    }
    ((best_count as f64).log2(), -best_max.log2())
}

/// Random normalised spectrum of length `1..=max_len`, sometimes with ties.
pub fn random_spectrum<R: Rng>(rng: &mut R, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_len);
    let mut v: Vec<f64> = if rng.random_bool(0.3) {
        let levels = [1.0, 2.0, 4.0];
        (0..n).map(|_| levels[rng.random_range(0..3)]).collect()
    } else {
        (0..n).map(|_| rng.random_range(0.01..1.0)).collect()
    };
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn delta_grid() -> Vec<f64> {
    (0..=10).map(|i| 0.05 * i as f64).collect()
}
