//! Additive subset-ℓp for turnstile streams: scale each coordinate by `k`
//! α-inverse draws, count-sketch the `k × n` result, and read the `⌊k/2⌋`-th
//! largest estimate inside the queried subset.

use serde::{Deserialize, Serialize};

use crate::count_sketch::{self, CountSketch};
use crate::error::{invalid, Error, Result};
use crate::hashing::{derive_seed, AlphaInverseSource};

/// `2 * ceil(50 / ε²)`, always even.
pub fn default_k(epsilon: f64) -> usize {
    2 * (50.0 / (epsilon * epsilon)).ceil() as usize
}

/// Count-sketch error parameter for the given norm.
pub fn eps_prime(epsilon: f64, p: f64, n: u64) -> f64 {
    let e2 = epsilon * epsilon;
    if p < 2.0 {
        e2
    } else if p == 2.0 {
        e2 / (n.max(2) as f64).log2()
    } else {
        e2 * (n as f64).powf(1.0 / p - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSetSketch {
    n: u64,
    p_norm: f64,
    epsilon: f64,
    k: usize,
    seed: u64,
    x: AlphaInverseSource,
    cs: CountSketch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSnapshot {
    pub n: u64,
    pub p_norm: f64,
    pub epsilon: f64,
    pub k: usize,
    pub seed: u64,
    pub cs: CountSketch,
}

fn check_p(p: f64) -> Result<()> {
    if p == 0.0 {
        Err(Error::Unsupported("additive estimates need p > 0".into()))
    } else if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("norm exponent {p} must be positive and finite")))
    }
}

impl LpSetSketch {
    pub fn new(n: u64, p_norm: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("epsilon {epsilon} must lie in (0, 1)")));
        }
        Self::with_k(n, p_norm, epsilon, default_k(epsilon), seed)
    }

    pub fn with_k(n: u64, p_norm: f64, epsilon: f64, k: usize, seed: u64) -> Result<Self> {
        check_p(p_norm)?;
        if n == 0 {
            return Err(invalid("universe size must be positive"));
        }
        if k == 0 || k % 2 == 1 {
            return Err(invalid("k must be a positive even integer"));
        }
        if p_norm > 2.0 {
            log::warn!("p = {p_norm} > 2: space grows as n^(1 - 2/p)");
        }
        let (width, depth) = count_sketch::sizing(k, eps_prime(epsilon, p_norm, n), n);
        let universe = (k as u64)
            .checked_mul(n)
            .ok_or_else(|| invalid("k * n overflows"))?;
        let cs = CountSketch::new(depth, width, universe, derive_seed(seed, "count-sketch", 0))?;
        let x = Self::source(seed, p_norm, n);
        Ok(LpSetSketch { n, p_norm, epsilon, k, seed, x, cs })
    }

    fn source(seed: u64, p: f64, n: u64) -> AlphaInverseSource {
        AlphaInverseSource::new(derive_seed(seed, "scale", 0), p, n + 1)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p_norm(&self) -> f64 {
        self.p_norm
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The scaling draws `X_{r,i}`, shared with offline checks.
    pub fn scale_source(&self) -> &AlphaInverseSource {
        &self.x
    }

    pub fn count_sketch(&self) -> &CountSketch {
        &self.cs
    }

    pub fn update(&mut self, i: u64, delta: f64) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(Error::CoordinateOutOfRange { index: i, n: self.n });
        }
        if delta == 0.0 {
            return Ok(());
        }
        let items: Vec<(u64, f64)> = (0..self.k as u64)
            .map(|r| (r * self.n + i - 1, self.x.value(r, i) as f64 * delta))
            .collect();
        self.cs.update_many(&items);
        Ok(())
    }

    /// `2^(-1/p)` times the `⌊k/2⌋`-th largest `|V̂_{r,j}|` over `j` in `s`.
    pub fn query(&self, s: &[u64]) -> Result<f64> {
        let mut js: Vec<u64> = s.to_vec();
        js.sort_unstable();
        js.dedup();
        if let Some(&j) = js.iter().find(|&&j| j == 0 || j > self.n) {
            return Err(Error::CoordinateOutOfRange { index: j, n: self.n });
        }
        if js.is_empty() {
            return Ok(0.0);
        }
        let mut coords = Vec::with_capacity(js.len() * self.k);
        for r in 0..self.k as u64 {
            for &j in &js {
                coords.push(r * self.n + j - 1);
            }
        }
        let z = self.cs.kth_largest_abs(&coords, self.k / 2);
        Ok(z * 2f64.powf(-1.0 / self.p_norm))
    }

    pub fn snapshot(&self) -> LpSnapshot {
        LpSnapshot {
            n: self.n,
            p_norm: self.p_norm,
            epsilon: self.epsilon,
            k: self.k,
            seed: self.seed,
            cs: self.cs.clone(),
        }
    }

    pub fn from_snapshot(snap: LpSnapshot) -> Result<Self> {
        let fresh = Self::with_k(snap.n, snap.p_norm, snap.epsilon, snap.k, snap.seed)?;
        let cs = snap.cs.restore()?;
        if (cs.depth(), cs.width(), cs.universe()) != (fresh.cs.depth(), fresh.cs.width(), fresh.cs.universe()) {
            return Err(Error::State("count-sketch shape does not match the parameters".into()));
        }
        Ok(LpSetSketch { cs, ..fresh })
    }
}

/// `m`-th largest value (1-based); zero when there are fewer than `m` values.
pub fn kth_largest(xs: &mut [f64], m: usize) -> f64 {
    if m == 0 || xs.len() < m {
        return 0.0;
    }
    *xs.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a)).1
}

/// Order-statistic estimate computed from the exact scaled vector `V = X∘v`
/// restricted to `s`; `v` lists the nonzero entries.
pub fn exact_order_statistic(v: &[(u64, f64)], s: impl Fn(u64) -> bool, p: f64, k: usize, x: &AlphaInverseSource) -> f64 {
    let mut vals = Vec::new();
    for &(i, vi) in v {
        if vi != 0.0 && s(i) {
            for r in 0..k as u64 {
                vals.push(x.value(r, i) as f64 * vi.abs());
            }
        }
    }
    kth_largest(&mut vals, k / 2) * 2f64.powf(-1.0 / p)
}

/// `F2` of `V = X∘v` after removing its `k` largest entries.
pub fn exact_tail_f2(v: &[(u64, f64)], k: usize, x: &AlphaInverseSource) -> f64 {
    let mut sq = Vec::new();
    for &(i, vi) in v {
        if vi != 0.0 {
            for r in 0..k as u64 {
                let t = x.value(r, i) as f64 * vi;
                sq.push(t * t);
            }
        }
    }
    if sq.len() <= k {
        return 0.0;
    }
    sq.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    sq[k..].iter().sum()
}
