//! Subset-ℓ1 for insertion-only streams: the j-th update to `a` becomes a
//! fresh coordinate `(a, j)` of a virtual universe `[n] × [m̄]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{Family, SetQuery};
use crate::hashing::PRIME;
use crate::setsystem::SetSystem;
use crate::subset_l0::{L0Sketch, L0Snapshot};

#[derive(Debug, Clone, PartialEq)]
pub struct L1Sketch {
    inner: L0Sketch,
    m_bar: u64,
    clock: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Snapshot {
    pub m_bar: u64,
    pub clock: u64,
    pub inner: L0Snapshot,
}

/// `n³`, reduced if needed so that `n * m̄` stays below the hash prime.
pub fn default_m_bar(n: u64) -> u64 {
    let cube = n.saturating_mul(n).saturating_mul(n);
    let cap = (PRIME - 1) / n.max(1);
    if cube > cap {
        log::info!("stream length bound n^3 = {cube} reduced to {cap}");
        cap
    } else {
        cube
    }
}

pub fn encode(i: u64, j: u64, m_bar: u64) -> u64 {
    (i - 1) * m_bar + j
}

impl L1Sketch {
    pub fn new(family: Family, epsilon: f64, seed: u64, m_bar: Option<u64>) -> Result<Self> {
        let m_bar = m_bar.unwrap_or_else(|| default_m_bar(family.n()));
        if m_bar == 0 {
            return Err(invalid("stream length bound must be positive"));
        }
        let inner = L0Sketch::with_stride(family, epsilon, seed, m_bar)?;
        Ok(L1Sketch { inner, m_bar, clock: 0 })
    }

    pub fn m_bar(&self) -> u64 {
        self.m_bar
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn inner(&self) -> &L0Sketch {
        &self.inner
    }

    pub fn update(&mut self, a: u64) -> Result<()> {
        let n = self.inner.family().n();
        if a == 0 || a > n {
            return Err(Error::CoordinateOutOfRange { index: a, n });
        }
        if self.clock >= self.m_bar {
            return Err(Error::StreamLengthExceeded(self.m_bar));
        }
        self.clock += 1;
        self.inner.update(encode(a, self.clock, self.m_bar))
    }

    /// `count` unit insertions to `a`.
    pub fn add(&mut self, a: u64, count: i64) -> Result<()> {
        if count < 0 {
            return Err(Error::NegativeUpdate(a));
        }
        for _ in 0..count {
            self.update(a)?;
        }
        Ok(())
    }

    pub fn query(&self, q: &SetQuery) -> Result<f64> {
        self.inner.query(q)
    }

    pub fn stored(&self) -> usize {
        self.inner.stored()
    }

    pub fn snapshot(&self) -> L1Snapshot {
        L1Snapshot { m_bar: self.m_bar, clock: self.clock, inner: self.inner.snapshot() }
    }

    pub fn from_snapshot(family: Family, snap: &L1Snapshot) -> Result<Self> {
        if snap.inner.stride != snap.m_bar {
            return Err(Error::State("inner stride differs from the stream length bound".into()));
        }
        if snap.clock > snap.m_bar {
            return Err(Error::State("clock exceeds the stream length bound".into()));
        }
        let inner = L0Sketch::from_snapshot(family, &snap.inner)?;
        Ok(L1Sketch { inner, m_bar: snap.m_bar, clock: snap.clock })
    }
}

/// Materialized expansion `{(i, j) : i in s, j in [m̄]}` of every set.
pub fn expand_system(system: &SetSystem, m_bar: usize) -> Result<SetSystem> {
    let sets = (0..system.len())
        .map(|id| {
            system
                .members(id)
                .into_iter()
                .flat_map(|i| (1..=m_bar).map(move |j| encode(i as u64, j as u64, m_bar as u64) as usize))
                .collect()
        })
        .collect();
    SetSystem::new(system.n() * m_bar, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setsystem;

    #[test]
    fn single_update_counts_one() {
        let mut sk = L1Sketch::new(Family::intervals(20, 5).unwrap(), 0.1, 1, None).unwrap();
        assert_eq!(sk.m_bar(), 8000);
        sk.update(7).unwrap();
        assert_eq!(sk.query(&SetQuery::Interval(1, 10)).unwrap(), 1.0);
    }

    #[test]
    fn repeated_copies_are_exact() {
        let mut sk = L1Sketch::new(Family::intervals(20, 5).unwrap(), 0.5, 2, None).unwrap();
        sk.add(3, 1000).unwrap();
        sk.add(19, 5).unwrap();
        assert_eq!(sk.query(&SetQuery::Interval(1, 10)).unwrap(), 1000.0);
        assert_eq!(sk.query(&SetQuery::Interval(1, 20)).unwrap(), 1005.0);
        assert_eq!(sk.add(3, -1), Err(Error::NegativeUpdate(3)));
    }

    #[test]
    fn stream_bound_enforced() {
        let mut sk = L1Sketch::new(Family::intervals(4, 2).unwrap(), 0.5, 0, Some(3)).unwrap();
        for _ in 0..3 {
            sk.update(1).unwrap();
        }
        assert_eq!(sk.update(1), Err(Error::StreamLengthExceeded(3)));
        assert_eq!(sk.clock(), 3);
    }

    #[test]
    fn expansion_keeps_heavy_hitter_dimension() {
        for seed in 0..12 {
            let s = setsystem::family_random(4 + (seed as usize % 3), 5, 0.5, seed).unwrap();
            for m in 1..=4 {
                if s.n() * m > 24 {
                    continue;
                }
                let e = expand_system(&s, m).unwrap();
                assert_eq!(setsystem::hh_dim_exact(&e).unwrap(), setsystem::hh_dim_exact(&s).unwrap());
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let f = Family::intervals(10, 3).unwrap();
        let mut sk = L1Sketch::new(f.clone(), 0.3, 5, Some(100)).unwrap();
        for a in [1, 2, 2, 9, 10, 10, 10] {
            sk.update(a).unwrap();
        }
        let back = L1Sketch::from_snapshot(f, &sk.snapshot()).unwrap();
        assert_eq!(back, sk);
    }
}
