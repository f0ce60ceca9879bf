//! Entry-wise subset-ℓp: priority sampling per set with shared uniforms and
//! one deduplicated store of sampled weights.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::SetQuery;
use crate::hashing::PairwiseHash;
use crate::setsystem::SetSystem;

/// `ceil(10 / ε²) + 1`.
pub fn default_k(epsilon: f64) -> usize {
    (10.0 / (epsilon * epsilon)).ceil() as usize + 1
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    q: f64,
    i: u64,
}

// best first: higher priority, then lower index
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other.q.total_cmp(&self.q).then(self.i.cmp(&other.i))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stored {
    w: f64,
    refs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrioritySketch {
    system: Arc<SetSystem>,
    p_norm: f64,
    k: usize,
    hash: PairwiseHash,
    per_set: Vec<BTreeSet<Ranked>>,
    store: BTreeMap<u64, Stored>,
    seen: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrioritySnapshot {
    pub seed: u64,
    pub p_norm: f64,
    pub k: usize,
    /// `(coordinate, weight)` for every stored coordinate.
    pub store: Vec<(u64, f64)>,
    /// Coordinates of each set's top list, best first.
    pub lists: Vec<Vec<u64>>,
    pub seen: Vec<u64>,
}

impl PrioritySketch {
    pub fn new(system: Arc<SetSystem>, p_norm: f64, k: usize, seed: u64) -> Result<Self> {
        if !(p_norm >= 0.0 && p_norm.is_finite()) {
            return Err(invalid(format!("norm exponent {p_norm} must be a finite non-negative number")));
        }
        if k < 2 {
            return Err(invalid("sample budget k must be at least 2"));
        }
        let per_set = vec![BTreeSet::new(); system.len()];
        Ok(PrioritySketch {
            system,
            p_norm,
            k,
            hash: PairwiseHash::new(seed),
            per_set,
            store: BTreeMap::new(),
            seen: BTreeSet::new(),
        })
    }

    pub fn with_epsilon(system: Arc<SetSystem>, p_norm: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("epsilon {epsilon} must lie in (0, 1)")));
        }
        Self::new(system, p_norm, default_k(epsilon), seed)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p_norm(&self) -> f64 {
        self.p_norm
    }

    pub fn seed(&self) -> u64 {
        self.hash.seed
    }

    pub fn system(&self) -> &Arc<SetSystem> {
        &self.system
    }

    /// Number of coordinates in the shared store.
    pub fn stored(&self) -> usize {
        self.store.len()
    }

    fn weight(&self, value: f64) -> f64 {
        if self.p_norm == 0.0 {
            1.0
        } else {
            value.abs().powf(self.p_norm)
        }
    }

    fn priority(&self, i: u64, w: f64) -> f64 {
        w / self.hash.uniform53(i)
    }

    pub fn update(&mut self, i: u64, value: f64) -> Result<()> {
        let n = self.system.n() as u64;
        if i == 0 || i > n {
            return Err(Error::CoordinateOutOfRange { index: i, n });
        }
        if self.seen.contains(&i) {
            return Err(Error::DuplicateEntry(i));
        }
        if value == 0.0 {
            return Err(Error::ZeroValueIgnored(i));
        }
        if !value.is_finite() {
            return Err(invalid(format!("value for coordinate {i} is not finite")));
        }
        self.seen.insert(i);
        let w = self.weight(value);
        let item = Ranked { q: self.priority(i, w), i };
        let system = Arc::clone(&self.system);
        for &j in system.sets_containing(i as usize) {
            let list = &mut self.per_set[j as usize];
            if list.len() > self.k && item > *list.last().unwrap() {
                continue;
            }
            list.insert(item);
            self.store.entry(i).or_insert(Stored { w, refs: 0 }).refs += 1;
            if list.len() > self.k + 1 {
                let out = list.pop_last().unwrap();
                let e = self.store.get_mut(&out.i).unwrap();
                e.refs -= 1;
                if e.refs == 0 {
                    self.store.remove(&out.i);
                }
            }
        }
        Ok(())
    }

    /// `E = Σ_{top k} max(w, τ)` with `τ` the `(k+1)`-th priority, in weight units.
    pub fn weight_estimate(&self, set: usize) -> f64 {
        let list = &self.per_set[set];
        let tau = if list.len() > self.k { list.iter().nth(self.k).unwrap().q } else { 0.0 };
        list.iter().take(self.k).map(|r| self.store[&r.i].w.max(tau)).sum()
    }

    pub fn estimate(&self, set: usize) -> f64 {
        let e = self.weight_estimate(set);
        if self.p_norm == 0.0 {
            e
        } else {
            e.powf(1.0 / self.p_norm)
        }
    }

    pub fn query(&self, q: &SetQuery) -> Result<f64> {
        let id = match q {
            SetQuery::Id(j) if *j < self.system.len() => *j,
            SetQuery::Id(j) => return Err(Error::UnknownSetId(*j)),
            SetQuery::Members(m) => self.system.find_members(m).ok_or(Error::QueryNotInSystem)?,
            SetQuery::Interval(a, b) => {
                let m: Vec<u64> = (*a..=*b).collect();
                self.system.find_members(&m).ok_or(Error::QueryNotInSystem)?
            }
        };
        Ok(self.estimate(id))
    }

    pub fn snapshot(&self) -> PrioritySnapshot {
        PrioritySnapshot {
            seed: self.hash.seed,
            p_norm: self.p_norm,
            k: self.k,
            store: self.store.iter().map(|(&i, s)| (i, s.w)).collect(),
            lists: self.per_set.iter().map(|l| l.iter().map(|r| r.i).collect()).collect(),
            seen: self.seen.iter().copied().collect(),
        }
    }

    pub fn from_snapshot(system: Arc<SetSystem>, snap: &PrioritySnapshot) -> Result<Self> {
        let mut sk = Self::new(system, snap.p_norm, snap.k, snap.seed)?;
        if snap.lists.len() != sk.per_set.len() {
            return Err(Error::State("priority lists do not match the set system".into()));
        }
        let weights: BTreeMap<u64, f64> = snap.store.iter().copied().collect();
        for (j, ids) in snap.lists.iter().enumerate() {
            if ids.len() > sk.k + 1 {
                return Err(Error::State("priority list longer than k + 1".into()));
            }
            for &i in ids {
                let w = *weights
                    .get(&i)
                    .ok_or_else(|| Error::State(format!("listed coordinate {i} missing from the store")))?;
                if !sk.system.contains(j, i as usize) {
                    return Err(Error::State(format!("coordinate {i} listed outside its set")));
                }
                let q = sk.priority(i, w);
                sk.per_set[j].insert(Ranked { q, i });
                sk.store.entry(i).or_insert(Stored { w, refs: 0 }).refs += 1;
            }
        }
        if sk.store.len() != weights.len() {
            return Err(Error::State("store holds unreferenced coordinates".into()));
        }
        sk.seen = snap.seen.iter().copied().collect();
        Ok(sk)
    }
}
