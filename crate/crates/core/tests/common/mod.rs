//! Brute-force reference computations shared by the integration suites.
//! Sets are bitmasks over `[n]`, bit `i - 1` standing for coordinate `i`.

#![allow(dead_code)]

use std::collections::HashSet;

use subset_sketch::hashing::PairwiseHash;
use subset_sketch::setsystem::SetSystem;

pub fn masks(sys: &SetSystem) -> Vec<u32> {
    (0..sys.len())
        .map(|id| sys.members(id).iter().fold(0u32, |m, &i| m | 1 << (i - 1)))
        .collect()
}

/// Largest number of coordinates of one support `T` that some set isolates,
/// i.e. `s ∩ T = {i}`, maximised over every `T ⊆ [n]`.
pub fn hh_dim(n: usize, sets: &[u32]) -> usize {
    assert!(n <= 16);
    let mut best = 0;
    for t in 0u32..1 << n {
        let mut iso = 0u32;
        for &s in sets {
            let x = s & t;
            if x.count_ones() == 1 {
                iso |= x;
            }
        }
        best = best.max(iso.count_ones() as usize);
    }
    best
}

/// Size of the largest shattered subset.
pub fn vc_dim(n: usize, sets: &[u32]) -> usize {
    assert!(n <= 16);
    let mut best = 0;
    for t in 0u32..1 << n {
        let d = t.count_ones() as usize;
        if d <= best || (1usize << d) > sets.len() {
            continue;
        }
        let traces: HashSet<u32> = sets.iter().map(|&s| s & t).collect();
        if traces.len() == 1 << d {
            best = d;
        }
    }
    best
}

/// All intervals `[a, b] ⊆ [n]` of length at least `k`.
pub fn intervals(n: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::new();
    for a in 1..=n {
        for b in a + k.max(1) - 1..=n {
            out.push(((1u32 << b) - 1) & !((1u32 << (a - 1)) - 1));
        }
    }
    out
}

/// `[a, a + n/2]` for `a = 1..=n/2`.
pub fn half_intervals(n: usize) -> Vec<u32> {
    (1..=n / 2).map(|a| ((1u32 << (a + n / 2)) - 1) & !((1u32 << (a - 1)) - 1)).collect()
}

/// Sampling indicator `ξ_i` of a sampler with the given hash seed and rate.
pub fn xi(seed: u64, rate: f64, i: u64) -> bool {
    let prime = subset_sketch::hashing::PRIME;
    rate >= 1.0 || PairwiseHash::new(seed).hash(i) < (rate * prime as f64) as u64
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v)
}

pub fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}
