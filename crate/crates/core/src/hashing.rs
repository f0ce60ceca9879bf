//! Seeded pairwise-independent hashing over the Mersenne prime 2^61 - 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const PRIME: u64 = (1 << 61) - 1;

/// Largest value an α-inverse draw may take.
pub const X_CAP: u64 = 1 << 40;

const MASK61: u64 = (1 << 61) - 1;

#[inline]
fn mul_mod(a: u64, b: u64) -> u64 {
    let x = (a as u128) * (b as u128);
    let lo = (x as u64) & PRIME;
    let hi = (x >> 61) as u64;
    let s = lo + hi;
    let s = (s & PRIME) + (s >> 61);
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

#[inline]
fn mix61(mut x: u64) -> u64 {
    x ^= x >> 29;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9) & MASK61;
    x ^= x >> 32;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb) & MASK61;
    x ^= x >> 29;
    x
}

/// Fixed bijection of `[0, PRIME)` applied to keys before the affine map.
///
/// Keys are usually consecutive integers; feeding them straight into
/// `a*i + b` yields an arithmetic progression mod the prime, which is
/// pairwise independent but far more regular than a random sample.
#[inline]
pub fn scramble(key: u64) -> u64 {
    debug_assert!(key < PRIME);
    let mut x = mix61(key);
    while x >= PRIME {
        x = mix61(x);
    }
    x
}

/// `h(i) = (a * scramble(i) + b) mod (2^61 - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseHash {
    pub seed: u64,
    a: u64,
    b: u64,
}

impl PairwiseHash {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.random_range(1..PRIME);
        let b = rng.random_range(0..PRIME);
        PairwiseHash { seed, a, b }
    }

    #[inline]
    pub fn hash(&self, key: u64) -> u64 {
        let h = mul_mod(self.a, scramble(key)) + self.b;
        if h >= PRIME {
            h - PRIME
        } else {
            h
        }
    }

    /// Bernoulli(p) indicator for `key`.
    #[inline]
    pub fn bernoulli(&self, key: u64, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        self.hash(key) < bernoulli_threshold(p)
    }

    /// Uniform value in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, key: u64) -> f64 {
        (self.hash(key) as f64 + 0.5) / PRIME as f64
    }

    /// Uniform value in (0, 1) on a 2^-53 grid, never zero.
    #[inline]
    pub fn uniform53(&self, key: u64) -> f64 {
        let m = self.hash(key) >> 8;
        if m == 0 {
            f64::EPSILON / 2.0
        } else {
            m as f64 * (f64::EPSILON / 2.0)
        }
    }
}

/// Strongly universal `u64 -> u64` hash `((a x + b) mod 2^128) >> 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplyShift {
    a: u128,
    b: u128,
}

impl MultiplyShift {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MultiplyShift { a: rng.random(), b: rng.random() }
    }

    #[inline]
    pub fn hash(&self, key: u64) -> u64 {
        (self.a.wrapping_mul(key as u128).wrapping_add(self.b) >> 64) as u64
    }
}

#[inline]
pub fn bernoulli_threshold(p: f64) -> u64 {
    if p >= 1.0 {
        PRIME
    } else if p <= 0.0 {
        0
    } else {
        (p * PRIME as f64).floor() as u64
    }
}

/// Integer draws with `Pr[X <= x] = 1 - x^(-alpha)`, indexed by `(row, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInverseSource {
    pub alpha: f64,
    pub stride: u64,
    hash: PairwiseHash,
}

impl AlphaInverseSource {
    /// `stride` must exceed every coordinate `i` that will be queried.
    pub fn new(seed: u64, alpha: f64, stride: u64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        AlphaInverseSource {
            alpha,
            stride,
            hash: PairwiseHash::new(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.hash.seed
    }

    #[inline]
    pub fn value(&self, row: u64, i: u64) -> u64 {
        let u = self.hash.uniform(row * self.stride + i);
        let x = if self.alpha == 1.0 {
            1.0 / u
        } else if self.alpha == 2.0 {
            1.0 / u.sqrt()
        } else if self.alpha == 0.5 {
            1.0 / (u * u)
        } else {
            u.powf(-1.0 / self.alpha)
        }
        .ceil();
        if x >= X_CAP as f64 {
            X_CAP
        } else {
            (x as u64).max(2)
        }
    }
}

/// Domain-separated 64-bit seed derived from a master seed.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

/// 64-bit content fingerprint rendered as 16 hex digits.
pub fn fingerprint(text: &str) -> String {
    let d = Sha256::digest(text.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    format!("{:016x}", u64::from_be_bytes(b))
}
