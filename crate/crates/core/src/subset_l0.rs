//! Multiplicative subset-ℓ0 estimation: constant detectors, the coarse
//! 8-approximation, the sampling ladder, and median amplification.

use serde::{Deserialize, Serialize};

use crate::bounded_sampler::{BoundedSampler, SamplerSnapshot};
use crate::error::{invalid, Error, Result};
use crate::family::{Family, ResolvedSet, SetQuery};
use crate::hashing::derive_seed;

pub const DETECTOR_BUDGET: u64 = 100;

/// Replicas per detector: `max(3, ceil(2 log2 log2 max(n, 16)))`, made odd.
pub fn detector_repetitions(n: u64) -> usize {
    let n = n.max(16) as f64;
    let t = ((2.0 * n.log2().log2()).ceil() as usize).max(3);
    if t % 2 == 0 {
        t + 1
    } else {
        t
    }
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Decides whether `‖s∘v‖₀` is at least about `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    r: f64,
    rate: f64,
    instances: Vec<BoundedSampler>,
}

impl Detector {
    pub fn new(family: &Family, n: u64, r: f64, seed: u64, stride: u64) -> Self {
        let rate = (DETECTOR_BUDGET as f64 / r).min(1.0);
        // at rate 1 the sampler is deterministic, so copies would be identical
        let t = if rate >= 1.0 { 1 } else { detector_repetitions(n) };
        let instances = (0..t)
            .map(|i| {
                BoundedSampler::with_stride(family, rate, DETECTOR_BUDGET, derive_seed(seed, "instance", i as u64), stride)
            })
            .collect();
        Detector { r, rate, instances }
    }

    pub fn threshold(&self) -> f64 {
        self.r
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn repetitions(&self) -> usize {
        self.instances.len()
    }

    pub fn update(&mut self, family: &Family, a: u64) {
        for s in &mut self.instances {
            s.update(family, a);
        }
    }

    /// Median count scaled by the inverse rate.
    pub fn estimate(&self, family: &Family, set: ResolvedSet) -> f64 {
        let mut c: Vec<f64> = self.instances.iter().map(|s| s.count(family, set) as f64).collect();
        median(&mut c) / self.rate
    }

    pub fn query(&self, family: &Family, set: ResolvedSet) -> bool {
        self.estimate(family, set) >= self.r
    }

    fn stored(&self) -> usize {
        self.instances.iter().map(BoundedSampler::stored).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Level {
    Exact,
    Sampled(Detector),
}

/// Detectors at thresholds `2^(j-2)`, `j = 0..=ℓ`; every threshold up to the
/// detector budget reads one shared rate-1 sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Coarse {
    thresholds: Vec<f64>,
    exact: BoundedSampler,
    levels: Vec<Level>,
}

impl Coarse {
    pub fn new(family: &Family, n: u64, seed: u64, stride: u64) -> Self {
        let ell = ceil_log2(n) + 2;
        let thresholds: Vec<f64> = (0..=ell).map(|j| 2f64.powi(j as i32 - 2)).collect();
        let exact = BoundedSampler::with_stride(family, 1.0, DETECTOR_BUDGET, derive_seed(seed, "exact", 0), stride);
        let levels = thresholds
            .iter()
            .enumerate()
            .map(|(j, &r)| {
                if r <= DETECTOR_BUDGET as f64 {
                    Level::Exact
                } else {
                    Level::Sampled(Detector::new(family, n, r, derive_seed(seed, "level", j as u64), stride))
                }
            })
            .collect();
        Coarse { thresholds, exact, levels }
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn update(&mut self, family: &Family, a: u64) {
        self.exact.update(family, a);
        for l in &mut self.levels {
            if let Level::Sampled(d) = l {
                d.update(family, a);
            }
        }
    }

    /// Output bit of detector `j`.
    pub fn detect(&self, family: &Family, set: ResolvedSet, j: usize) -> bool {
        match &self.levels[j] {
            Level::Exact => self.exact.count(family, set) as f64 >= self.thresholds[j],
            Level::Sampled(d) => d.query(family, set),
        }
    }

    /// Zero when the first detector is silent, otherwise `2^(j*-1)` for the
    /// first silent detector `j* >= 1`; brackets `‖s∘v‖₀` within `(1, 8)`.
    pub fn estimate(&self, family: &Family, set: ResolvedSet) -> f64 {
        if !self.detect(family, set, 0) {
            return 0.0;
        }
        for j in 1..self.levels.len() {
            if !self.detect(family, set, j) {
                return 2f64.powi(j as i32 - 1);
            }
        }
        let ell = self.levels.len() - 1;
        log::warn!("every coarse detector fired; returning 2^{ell}");
        2f64.powi(ell as i32)
    }

    fn stored(&self) -> usize {
        self.exact.stored()
            + self
                .levels
                .iter()
                .map(|l| match l {
                    Level::Exact => 0,
                    Level::Sampled(d) => d.stored(),
                })
                .sum::<usize>()
    }

    fn samplers(&self) -> Vec<&BoundedSampler> {
        let mut v = vec![&self.exact];
        for l in &self.levels {
            if let Level::Sampled(d) = l {
                v.extend(d.instances.iter());
            }
        }
        v
    }

    fn samplers_mut(&mut self) -> Vec<&mut BoundedSampler> {
        let mut v = vec![&mut self.exact];
        for l in &mut self.levels {
            if let Level::Sampled(d) = l {
                v.extend(d.instances.iter_mut());
            }
        }
        v
    }
}

/// The ε-accurate ℓ0 sketch: a coarse estimator plus samplers at rates `2^(1-i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct L0Sketch {
    family: Family,
    universe: u64,
    stride: u64,
    epsilon: f64,
    seed: u64,
    budget: u64,
    ladder: Vec<BoundedSampler>,
    coarse: Coarse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Snapshot {
    pub seed: u64,
    pub epsilon: f64,
    pub stride: u64,
    pub ladder: Vec<SamplerSnapshot>,
    pub coarse: Vec<SamplerSnapshot>,
}

pub fn ladder_budget(epsilon: f64) -> u64 {
    (400.0 / (epsilon * epsilon)).ceil() as u64
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("epsilon {epsilon} must lie in (0, 1)")))
    }
}

impl L0Sketch {
    pub fn new(family: Family, epsilon: f64, seed: u64) -> Result<Self> {
        Self::with_stride(family, epsilon, seed, 1)
    }

    /// Sketch over `[n * stride]`, each block of `stride` coordinates sharing
    /// the set memberships of one base coordinate.
    pub fn with_stride(family: Family, epsilon: f64, seed: u64, stride: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        let universe = family
            .n()
            .checked_mul(stride)
            .filter(|&u| u < crate::hashing::PRIME)
            .ok_or_else(|| invalid("virtual universe exceeds 2^61 - 1"))?;
        let budget = ladder_budget(epsilon);
        let t = ceil_log2(universe) + 1;
        let ladder = (1..=t)
            .map(|i| {
                BoundedSampler::with_stride(
                    &family,
                    2f64.powi(1 - i as i32),
                    budget,
                    derive_seed(seed, "ladder", i as u64),
                    stride,
                )
            })
            .collect();
        let coarse = Coarse::new(&family, universe, derive_seed(seed, "coarse", 0), stride);
        Ok(L0Sketch { family, universe, stride, epsilon, seed, budget, ladder, coarse })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn ladder_len(&self) -> usize {
        self.ladder.len()
    }

    pub fn coarse(&self) -> &Coarse {
        &self.coarse
    }

    pub fn update(&mut self, a: u64) -> Result<()> {
        if a == 0 || a > self.universe {
            return Err(Error::CoordinateOutOfRange { index: a, n: self.universe });
        }
        for s in &mut self.ladder {
            s.update(&self.family, a);
        }
        self.coarse.update(&self.family, a);
        Ok(())
    }

    pub fn query(&self, q: &SetQuery) -> Result<f64> {
        Ok(self.estimate(self.family.resolve(q)?))
    }

    /// Exact count when the rate-1 level certifies it, otherwise the ladder.
    ///
    /// A rate-1 count below the budget means the whole support of `s` is
    /// retained, so it equals `‖s∘v‖₀`.
    pub fn estimate(&self, set: ResolvedSet) -> f64 {
        let c = self.ladder[0].count(&self.family, set);
        if c < self.budget {
            c as f64
        } else {
            self.ladder_estimate(set)
        }
    }

    /// Level `l = max(1, ceil(log2(z ε² / 100)))` picked from the coarse value `z`.
    pub fn ladder_estimate(&self, set: ResolvedSet) -> f64 {
        let z = self.coarse.estimate(&self.family, set);
        if z == 0.0 {
            return 0.0;
        }
        let l = (z * self.epsilon * self.epsilon / 100.0).log2().ceil().max(1.0);
        let l = (l as usize).clamp(1, self.ladder.len());
        let s = &self.ladder[l - 1];
        s.count(&self.family, set) as f64 / s.rate()
    }

    pub fn coarse_estimate(&self, set: ResolvedSet) -> f64 {
        self.coarse.estimate(&self.family, set)
    }

    /// Ladder coordinates held in total.
    pub fn ladder_stored(&self) -> usize {
        self.ladder.iter().map(BoundedSampler::stored).sum()
    }

    pub fn stored(&self) -> usize {
        self.ladder_stored() + self.coarse.stored()
    }

    pub fn snapshot(&self) -> L0Snapshot {
        L0Snapshot {
            seed: self.seed,
            epsilon: self.epsilon,
            stride: self.stride,
            ladder: self.ladder.iter().map(BoundedSampler::snapshot).collect(),
            coarse: self.coarse.samplers().into_iter().map(BoundedSampler::snapshot).collect(),
        }
    }

    pub fn from_snapshot(family: Family, snap: &L0Snapshot) -> Result<Self> {
        let mut sk = Self::with_stride(family, snap.epsilon, snap.seed, snap.stride)?;
        if snap.ladder.len() != sk.ladder.len() {
            return Err(Error::State("ladder length does not match the parameters".into()));
        }
        for (slot, s) in sk.ladder.iter_mut().zip(&snap.ladder) {
            if s.seed != slot.seed() || s.rate != slot.rate() || s.budget != slot.budget() {
                return Err(Error::State("ladder sampler parameters do not match".into()));
            }
            *slot = BoundedSampler::from_snapshot(&sk.family, s)?;
        }
        let family = sk.family.clone();
        let mut slots = sk.coarse.samplers_mut();
        if slots.len() != snap.coarse.len() {
            return Err(Error::State("coarse detector layout does not match the parameters".into()));
        }
        for (slot, s) in slots.iter_mut().zip(&snap.coarse) {
            if s.seed != slot.seed() || s.rate != slot.rate() || s.budget != slot.budget() {
                return Err(Error::State("detector parameters do not match".into()));
            }
            **slot = BoundedSampler::from_snapshot(&family, s)?;
        }
        Ok(sk)
    }
}

/// Replica count `ceil(c * log2(max(|S|, 2)))` for the median amplification.
pub fn forall_replicas(set_count: u64, c: f64) -> usize {
    (c * (set_count.max(2) as f64).log2()).ceil().max(1.0) as usize
}

/// Median over independently seeded sketches.
#[derive(Debug, Clone, PartialEq)]
pub struct L0ForAll {
    reps: Vec<L0Sketch>,
}

impl L0ForAll {
    pub fn new(family: Family, epsilon: f64, seed: u64, replicas: usize) -> Result<Self> {
        if replicas == 0 {
            return Err(invalid("at least one replica is required"));
        }
        let reps = (0..replicas)
            .map(|r| L0Sketch::new(family.clone(), epsilon, derive_seed(seed, "replica", r as u64)))
            .collect::<Result<_>>()?;
        Ok(L0ForAll { reps })
    }

    pub fn from_replicas(reps: Vec<L0Sketch>) -> Result<Self> {
        if reps.is_empty() {
            return Err(invalid("at least one replica is required"));
        }
        Ok(L0ForAll { reps })
    }

    pub fn replicas(&self) -> &[L0Sketch] {
        &self.reps
    }

    pub fn update(&mut self, a: u64) -> Result<()> {
        for r in &mut self.reps {
            r.update(a)?;
        }
        Ok(())
    }

    pub fn query(&self, q: &SetQuery) -> Result<f64> {
        let set = self.reps[0].family().resolve(q)?;
        let mut v: Vec<f64> = self.reps.iter().map(|r| r.estimate(set)).collect();
        Ok(median(&mut v))
    }
}
