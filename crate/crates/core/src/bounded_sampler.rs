//! Bounded sampler: a pairwise-sampled set of coordinates that drops a
//! coordinate once every set containing it holds more than `budget` samples.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{Family, ResolvedSet, Tracker};
use crate::hashing::PairwiseHash;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSampler {
    rate: f64,
    budget: u64,
    stride: u64,
    hash: PairwiseHash,
    held: BTreeSet<u64>,
    tracker: Tracker,
}

/// Everything needed to rebuild a sampler; the tracker is recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSnapshot {
    pub seed: u64,
    pub rate: f64,
    pub budget: u64,
    pub stride: u64,
    pub held: Vec<u64>,
}

impl BoundedSampler {
    pub fn new(family: &Family, rate: f64, budget: u64, seed: u64) -> Self {
        Self::with_stride(family, rate, budget, seed, 1)
    }

    /// Sampler over the virtual universe `[n * stride]` where coordinate `c`
    /// stands for base coordinate `(c - 1) / stride + 1`.
    pub fn with_stride(family: &Family, rate: f64, budget: u64, seed: u64, stride: u64) -> Self {
        assert!(rate > 0.0 && rate <= 1.0, "rate must lie in (0, 1]");
        assert!(stride >= 1);
        BoundedSampler {
            rate,
            budget,
            stride,
            hash: PairwiseHash::new(seed),
            held: BTreeSet::new(),
            tracker: family.new_tracker(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.hash.seed
    }

    #[inline]
    pub fn base_of(&self, c: u64) -> u64 {
        (c - 1) / self.stride + 1
    }

    /// Whether the sampling hash selects coordinate `c`.
    pub fn selects(&self, c: u64) -> bool {
        self.hash.bernoulli(c, self.rate)
    }

    pub fn update(&mut self, family: &Family, a: u64) {
        if !self.hash.bernoulli(a, self.rate) || self.held.contains(&a) {
            return;
        }
        let base = self.base_of(a);
        if !family.covers(base) {
            return;
        }
        self.held.insert(a);
        if !family.track_insert(&mut self.tracker, base, self.budget) {
            return;
        }
        let mut from = 1;
        while let Some(b) = family.first_unneeded(&self.tracker, base, from, self.budget) {
            let lo = (b - 1) * self.stride + 1;
            let c = *self.held.range(lo..lo + self.stride).next().expect("tracked base without a held copy");
            self.held.remove(&c);
            family.track_remove(&mut self.tracker, b);
            from = b;
        }
    }

    /// The retained coordinates.
    pub fn held(&self) -> &BTreeSet<u64> {
        &self.held
    }

    pub fn stored(&self) -> usize {
        self.held.len()
    }

    /// `|H ∩ s|` for a resolved set, counting virtual copies.
    pub fn count(&self, family: &Family, set: ResolvedSet) -> u64 {
        family.tracked_count(&self.tracker, set)
    }

    pub fn snapshot(&self) -> SamplerSnapshot {
        SamplerSnapshot {
            seed: self.hash.seed,
            rate: self.rate,
            budget: self.budget,
            stride: self.stride,
            held: self.held.iter().copied().collect(),
        }
    }

    pub fn from_snapshot(family: &Family, snap: &SamplerSnapshot) -> Result<Self> {
        if !(snap.rate > 0.0 && snap.rate <= 1.0) || snap.stride == 0 {
            return Err(invalid("sampler snapshot has an invalid rate or stride"));
        }
        let mut s = Self::with_stride(family, snap.rate, snap.budget, snap.seed, snap.stride);
        let limit = family.n().saturating_mul(snap.stride);
        for &c in &snap.held {
            if c == 0 || c > limit || !family.covers(s.base_of(c)) {
                return Err(Error::State(format!("held coordinate {c} is outside the family")));
            }
            if !s.held.insert(c) {
                return Err(Error::State(format!("held coordinate {c} repeated")));
            }
            let base = s.base_of(c);
            family.track_insert(&mut s.tracker, base, s.budget);
        }
        Ok(s)
    }
}
