//! Query families as seen by the samplers: an explicit [`SetSystem`] or the
//! implicit family of long intervals, plus the per-sampler neededness tracker.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hashing;
use crate::setsystem::{self, SetSystem};

/// Intervals of `[n]` of length at least `min_len`, or exactly `min_len` when `exact`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub n: u64,
    pub min_len: u64,
    pub exact: bool,
}

impl IntervalFamily {
    pub fn new(n: u64, min_len: u64, exact: bool) -> Result<Self> {
        if min_len == 0 || min_len > n {
            return Err(invalid(format!("interval length {min_len} must lie in [1, {n}]")));
        }
        Ok(IntervalFamily { n, min_len, exact })
    }

    pub fn contains_interval(&self, a: u64, b: u64) -> bool {
        if a == 0 || b < a || b > self.n {
            return false;
        }
        let len = b - a + 1;
        if self.exact {
            len == self.min_len
        } else {
            len >= self.min_len
        }
    }

    pub fn hh_dim(&self) -> u64 {
        if self.exact {
            windows_hh_dim(self.n, self.min_len)
        } else {
            setsystem::intervals_hh_dim(self.n, self.min_len)
        }
    }

    pub fn materialize(&self) -> Result<SetSystem> {
        let (n, k) = (self.n as usize, self.min_len as usize);
        if self.exact {
            setsystem::family_windows(n, k)
        } else {
            setsystem::family_intervals(n, k)
        }
    }
}

/// Every interval of length `>= len` isolating `c` contains a window of
/// length `len` through `c`, so windows isolate exactly the same points.
fn windows_hh_dim(n: u64, len: u64) -> u64 {
    setsystem::intervals_hh_dim(n, len)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    Explicit(Arc<SetSystem>),
    Intervals(IntervalFamily),
}

/// A set named by id, by members, or by interval endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetQuery {
    Id(usize),
    Members(Vec<u64>),
    Interval(u64, u64),
}

/// A query resolved against a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedSet {
    Explicit(usize),
    Interval(u64, u64),
}

/// Serializable description of a family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Explicit { text: String },
    Intervals { n: u64, min_len: u64, exact: bool },
}

impl Family {
    pub fn explicit(system: SetSystem) -> Self {
        Family::Explicit(Arc::new(system))
    }

    pub fn intervals(n: u64, min_len: u64) -> Result<Self> {
        Ok(Family::Intervals(IntervalFamily::new(n, min_len, false)?))
    }

    pub fn windows(n: u64, len: u64) -> Result<Self> {
        Ok(Family::Intervals(IntervalFamily::new(n, len, true)?))
    }

    pub fn n(&self) -> u64 {
        match self {
            Family::Explicit(s) => s.n() as u64,
            Family::Intervals(f) => f.n,
        }
    }

    pub fn system(&self) -> Option<&SetSystem> {
        match self {
            Family::Explicit(s) => Some(s),
            Family::Intervals(_) => None,
        }
    }

    /// Number of sets, saturating.
    pub fn set_count(&self) -> u64 {
        match self {
            Family::Explicit(s) => s.len() as u64,
            Family::Intervals(f) => {
                if f.exact {
                    f.n - f.min_len + 1
                } else {
                    let m = f.n - f.min_len + 1;
                    m.saturating_mul(m + 1) / 2
                }
            }
        }
    }

    pub fn spec(&self) -> FamilySpec {
        match self {
            Family::Explicit(s) => FamilySpec::Explicit { text: s.to_text() },
            Family::Intervals(f) => FamilySpec::Intervals { n: f.n, min_len: f.min_len, exact: f.exact },
        }
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        match spec {
            FamilySpec::Explicit { text } => Ok(Family::explicit(SetSystem::parse(text)?)),
            FamilySpec::Intervals { n, min_len, exact } => {
                Ok(Family::Intervals(IntervalFamily::new(*n, *min_len, *exact)?))
            }
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            Family::Explicit(s) => s.fingerprint(),
            Family::Intervals(f) => hashing::fingerprint(&format!(
                "intervals n={} min_len={} exact={}\n",
                f.n, f.min_len, f.exact
            )),
        }
    }

    /// Whether some set contains coordinate `i`.
    pub fn covers(&self, i: u64) -> bool {
        match self {
            Family::Explicit(s) => i >= 1 && i <= s.n() as u64 && !s.sets_containing(i as usize).is_empty(),
            Family::Intervals(f) => i >= 1 && i <= f.n,
        }
    }

    pub fn resolve(&self, q: &SetQuery) -> Result<ResolvedSet> {
        match self {
            Family::Explicit(s) => match q {
                SetQuery::Id(j) => {
                    if *j < s.len() {
                        Ok(ResolvedSet::Explicit(*j))
                    } else {
                        Err(Error::UnknownSetId(*j))
                    }
                }
                SetQuery::Members(m) => s.find_members(m).map(ResolvedSet::Explicit).ok_or(Error::QueryNotInSystem),
                SetQuery::Interval(a, b) => {
                    if a > b {
                        return Err(Error::QueryNotInSystem);
                    }
                    let m: Vec<u64> = (*a..=*b).collect();
                    s.find_members(&m).map(ResolvedSet::Explicit).ok_or(Error::QueryNotInSystem)
                }
            },
            Family::Intervals(f) => {
                let (a, b) = match q {
                    SetQuery::Id(j) => return Err(Error::UnknownSetId(*j)),
                    SetQuery::Interval(a, b) => (*a, *b),
                    SetQuery::Members(m) => {
                        let mut m = m.clone();
                        m.sort_unstable();
                        m.dedup();
                        match (m.first(), m.last()) {
                            (Some(&a), Some(&b)) if b - a + 1 == m.len() as u64 => (a, b),
                            _ => return Err(Error::QueryNotInSystem),
                        }
                    }
                };
                if f.contains_interval(a, b) {
                    Ok(ResolvedSet::Interval(a, b))
                } else {
                    Err(Error::QueryNotInSystem)
                }
            }
        }
    }

    /// Membership test for a resolved set.
    pub fn contains(&self, set: ResolvedSet, i: u64) -> bool {
        match (self, set) {
            (Family::Explicit(s), ResolvedSet::Explicit(j)) => s.contains(j, i as usize),
            (_, ResolvedSet::Interval(a, b)) => i >= a && i <= b,
            (Family::Intervals(_), ResolvedSet::Explicit(_)) => false,
        }
    }

    pub fn new_tracker(&self) -> Tracker {
        match self {
            Family::Explicit(s) => Tracker::Explicit { counts: vec![0; s.len()], weights: BTreeMap::new() },
            Family::Intervals(f) => Tracker::Intervals(IntervalTracker::new(f.n)),
        }
    }

    /// Adds one copy of `base`; returns whether some coordinate may have
    /// lost neededness under `budget`.
    pub fn track_insert(&self, tr: &mut Tracker, base: u64, budget: u64) -> bool {
        match (self, tr) {
            (Family::Explicit(s), Tracker::Explicit { counts, weights }) => {
                *weights.entry(base).or_insert(0) += 1;
                let mut crossed = false;
                for &j in s.sets_containing(base as usize) {
                    let c = &mut counts[j as usize];
                    *c += 1;
                    crossed |= *c > budget;
                }
                crossed
            }
            (Family::Intervals(f), Tracker::Intervals(t)) => {
                t.insert(base);
                let lo = base.saturating_sub(f.min_len - 1).max(1);
                let hi = (base + f.min_len - 1).min(f.n);
                t.total > budget && t.block_sum(lo, hi) > budget
            }
            _ => unreachable!("tracker does not match family"),
        }
    }

    pub fn track_remove(&self, tr: &mut Tracker, base: u64) {
        match (self, tr) {
            (Family::Explicit(s), Tracker::Explicit { counts, weights }) => {
                let w = weights.get_mut(&base).expect("removing an untracked coordinate");
                *w -= 1;
                if *w == 0 {
                    weights.remove(&base);
                }
                for &j in s.sets_containing(base as usize) {
                    counts[j as usize] -= 1;
                }
            }
            (Family::Intervals(_), Tracker::Intervals(t)) => t.remove(base),
            _ => unreachable!("tracker does not match family"),
        }
    }

    /// Smallest tracked base `>= from` that is not needed, looking only at
    /// coordinates that can have been affected by an insertion at `hint`.
    pub fn first_unneeded(&self, tr: &Tracker, hint: u64, from: u64, budget: u64) -> Option<u64> {
        match (self, tr) {
            (Family::Explicit(s), Tracker::Explicit { counts, weights }) => {
                let needed = |b: u64| {
                    s.sets_containing(b as usize).iter().any(|&j| counts[j as usize] <= budget)
                };
                let hot: Vec<u32> = s
                    .sets_containing(hint as usize)
                    .iter()
                    .copied()
                    .filter(|&j| counts[j as usize] > budget)
                    .collect();
                weights
                    .range(from..)
                    .map(|(&b, _)| b)
                    .filter(|&b| hot.iter().any(|&j| s.set(j as usize).contains(b as usize - 1)))
                    .find(|&b| !needed(b))
            }
            (Family::Intervals(f), Tracker::Intervals(t)) => t.first_unneeded(f, hint, from, budget),
            _ => unreachable!("tracker does not match family"),
        }
    }

    /// Number of tracked copies inside a resolved set.
    pub fn tracked_count(&self, tr: &Tracker, set: ResolvedSet) -> u64 {
        match (tr, set) {
            (Tracker::Explicit { counts, .. }, ResolvedSet::Explicit(j)) => counts[j],
            (Tracker::Explicit { weights, .. }, ResolvedSet::Interval(a, b)) => {
                weights.range(a..=b).map(|(_, &w)| w).sum()
            }
            (Tracker::Intervals(t), ResolvedSet::Interval(a, b)) => t.range_sum(a, b),
            (Tracker::Intervals(_), ResolvedSet::Explicit(_)) => 0,
        }
    }
}

/// Per-sampler bookkeeping of how many held copies fall in each set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tracker {
    Explicit { counts: Vec<u64>, weights: BTreeMap<u64, u64> },
    Intervals(IntervalTracker),
}

const BLOCKS: u64 = 4096;

/// Sorted held coordinates with multiplicities and coarse block totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalTracker {
    entries: Vec<(u64, u64)>,
    block: u64,
    fenwick: Vec<u64>,
    total: u64,
}

impl IntervalTracker {
    fn new(n: u64) -> Self {
        let block = n.div_ceil(BLOCKS).max(1);
        let nb = n.div_ceil(block) as usize;
        IntervalTracker { entries: Vec::new(), block, fenwick: vec![0; nb + 1], total: 0 }
    }

    fn fen_add(&mut self, c: u64, delta: i64) {
        let mut i = ((c - 1) / self.block) as usize + 1;
        while i < self.fenwick.len() {
            self.fenwick[i] = (self.fenwick[i] as i64 + delta) as u64;
            i += i & i.wrapping_neg();
        }
    }

    fn fen_prefix(&self, blocks: usize) -> u64 {
        let mut i = blocks.min(self.fenwick.len() - 1);
        let mut s = 0;
        while i > 0 {
            s += self.fenwick[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Total weight of the blocks meeting `[lo, hi]`; an upper bound on the exact sum.
    fn block_sum(&self, lo: u64, hi: u64) -> u64 {
        let bl = ((lo - 1) / self.block) as usize;
        let bh = ((hi - 1) / self.block) as usize + 1;
        self.fen_prefix(bh) - self.fen_prefix(bl)
    }

    fn insert(&mut self, c: u64) {
        match self.entries.binary_search_by_key(&c, |e| e.0) {
            Ok(i) => self.entries[i].1 += 1,
            Err(i) => self.entries.insert(i, (c, 1)),
        }
        self.total += 1;
        self.fen_add(c, 1);
    }

    fn remove(&mut self, c: u64) {
        let i = self.entries.binary_search_by_key(&c, |e| e.0).expect("removing an untracked coordinate");
        self.entries[i].1 -= 1;
        if self.entries[i].1 == 0 {
            self.entries.remove(i);
        }
        self.total -= 1;
        self.fen_add(c, -1);
    }

    fn range_sum(&self, a: u64, b: u64) -> u64 {
        let lo = self.entries.partition_point(|e| e.0 < a);
        let hi = self.entries.partition_point(|e| e.0 <= b);
        self.entries[lo..hi].iter().map(|e| e.1).sum()
    }

    /// Maximal runs `[s, e]` of window starts in `[a_lo, a_hi]` whose window
    /// weight is at most `budget`.
    fn good_runs(&self, k: u64, a_lo: u64, a_hi: u64, budget: u64) -> Vec<(u64, u64)> {
        let es = &self.entries;
        let mut runs: Vec<(u64, u64)> = Vec::new();
        if a_lo > a_hi {
            return runs;
        }
        // weight of window a_lo
        let mut enter = es.partition_point(|e| e.0 < a_lo);
        let mut leave = enter;
        let mut w = 0u64;
        while enter < es.len() && es[enter].0 <= a_lo + k - 1 {
            w += es[enter].1;
            enter += 1;
        }
        // entry e enters at window e-k+1 and leaves at window e+1
        let mut pos = a_lo;
        loop {
            let next_enter = es.get(enter).map(|e| e.0 + 1 - k);
            let next_leave = es.get(leave).map(|e| e.0 + 1);
            let next = match (next_enter, next_leave) {
                (Some(x), Some(y)) => x.min(y),
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => u64::MAX,
            };
            let end = next.saturating_sub(1).min(a_hi);
            if w <= budget && end >= pos {
                match runs.last_mut() {
                    Some(r) if r.1 + 1 == pos => r.1 = end,
                    _ => runs.push((pos, end)),
                }
            }
            if next > a_hi {
                break;
            }
            pos = next;
            while enter < es.len() && es[enter].0 + 1 - k == pos {
                w += es[enter].1;
                enter += 1;
            }
            while leave < es.len() && es[leave].0 + 1 == pos {
                w -= es[leave].1;
                leave += 1;
            }
        }
        runs
    }

    fn first_unneeded(&self, f: &IntervalFamily, hint: u64, from: u64, budget: u64) -> Option<u64> {
        let k = f.min_len;
        let last_start = f.n - k + 1;
        let lo = hint.saturating_sub(k - 1).max(1).max(from);
        let hi = (hint + k - 1).min(f.n);
        if lo > hi {
            return None;
        }
        let a_lo = lo.saturating_sub(k - 1).max(1);
        let a_hi = hi.min(last_start);
        let runs = self.good_runs(k, a_lo, a_hi, budget);
        let start = self.entries.partition_point(|e| e.0 < lo);
        for &(c, _) in &self.entries[start..] {
            if c > hi {
                break;
            }
            let s = c.saturating_sub(k - 1).max(1);
            let e = c.min(last_start);
            // some good run meets [s, e]
            let r = runs.partition_point(|r| r.1 < s);
            let needed = r < runs.len() && runs[r].0 <= e;
            if !needed {
                return Some(c);
            }
        }
        None
    }
}
