//! Explicit set systems over `[n]`, their heavy-hitter and VC dimensions,
//! and the named families.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hashing;

/// Exhaustive solvers refuse universes larger than this.
pub const EXACT_MAX_N: usize = 24;

/// Constructors refuse to materialize more sets than this.
pub const MAX_SETS: u64 = 4_000_000;

/// A deduplicated family of subsets of `{1..n}` with a reverse index.
#[derive(Debug, Clone)]
pub struct SetSystem {
    n: usize,
    sets: Vec<FixedBitSet>,
    reverse: Vec<Vec<u32>>,
    lookup: HashMap<FixedBitSet, usize>,
}

impl PartialEq for SetSystem {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.sets == other.sets
    }
}

impl Eq for SetSystem {}

/// Row-major 0/1 incidence matrix, rows are sets and columns coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub rows: usize,
    pub cols: usize,
    pub bits: FixedBitSet,
}

impl IncidenceMatrix {
    /// Entry for set `row` (0-based) and coordinate `col` (1-based).
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits.contains(row * self.cols + col - 1)
    }
}

impl SetSystem {
    pub fn new(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut bits = Vec::with_capacity(sets.len());
        for s in sets {
            let mut b = FixedBitSet::with_capacity(n);
            for i in s {
                if i == 0 || i > n {
                    return Err(Error::CoordinateOutOfRange { index: i as u64, n: n as u64 });
                }
                b.insert(i - 1);
            }
            bits.push(b);
        }
        Self::from_bitsets(n, bits)
    }

    pub fn from_bitsets(n: usize, sets: Vec<FixedBitSet>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("universe size must be positive"));
        }
        let mut kept = Vec::with_capacity(sets.len());
        let mut lookup = HashMap::with_capacity(sets.len());
        for mut s in sets {
            if s.len() > n {
                if let Some(i) = s.ones().find(|&i| i >= n) {
                    return Err(Error::CoordinateOutOfRange { index: i as u64 + 1, n: n as u64 });
                }
            }
            s.grow(n);
            if s.len() > n {
                let mut t = FixedBitSet::with_capacity(n);
                t.extend(s.ones());
                s = t;
            }
            if !lookup.contains_key(&s) {
                lookup.insert(s.clone(), kept.len());
                kept.push(s);
            }
        }
        let mut reverse = vec![Vec::new(); n];
        for (j, s) in kept.iter().enumerate() {
            for i in s.ones() {
                reverse[i].push(j as u32);
            }
        }
        Ok(SetSystem { n, sets: kept, reverse, lookup })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, id: usize) -> &FixedBitSet {
        &self.sets[id]
    }

    pub fn sets(&self) -> &[FixedBitSet] {
        &self.sets
    }

    /// 1-based members of set `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.sets[id].ones().map(|i| i + 1).collect()
    }

    pub fn contains(&self, id: usize, i: usize) -> bool {
        i >= 1 && i <= self.n && self.sets[id].contains(i - 1)
    }

    /// Ids of the sets containing coordinate `i` (1-based).
    pub fn sets_containing(&self, i: usize) -> &[u32] {
        &self.reverse[i - 1]
    }

    pub fn max_degree(&self) -> usize {
        self.reverse.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Id of the set equal to `bits`, if any.
    pub fn find(&self, bits: &FixedBitSet) -> Option<usize> {
        if bits.len() == self.n {
            return self.lookup.get(bits).copied();
        }
        let mut b = FixedBitSet::with_capacity(self.n);
        for i in bits.ones() {
            if i >= self.n {
                return None;
            }
            b.insert(i);
        }
        self.lookup.get(&b).copied()
    }

    /// Id of the set with exactly these 1-based members, if any.
    pub fn find_members(&self, members: &[u64]) -> Option<usize> {
        let mut b = FixedBitSet::with_capacity(self.n);
        for &i in members {
            if i == 0 || i as usize > self.n {
                return None;
            }
            b.insert(i as usize - 1);
        }
        self.lookup.get(&b).copied()
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let mut bits = FixedBitSet::with_capacity(self.sets.len() * self.n);
        for (j, s) in self.sets.iter().enumerate() {
            for i in s.ones() {
                bits.insert(j * self.n + i);
            }
        }
        IncidenceMatrix { rows: self.sets.len(), cols: self.n, bits }
    }

    /// Canonical text form: `n=<n>` then one ascending set per line, `-` for the empty set.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for s in &self.sets {
            let mut first = true;
            for i in s.ones() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{}", i + 1);
            }
            if first {
                out.push('-');
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut sets = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            match n {
                None => {
                    let v = line
                        .strip_prefix("n=")
                        .ok_or_else(|| err("expected `n=<int>` header".into()))?;
                    let v: usize = v.trim().parse().map_err(|_| err(format!("bad universe size {v:?}")))?;
                    if v == 0 {
                        return Err(err("universe size must be positive".into()));
                    }
                    n = Some(v);
                }
                Some(n) => {
                    if line == "-" {
                        sets.push(Vec::new());
                        continue;
                    }
                    let mut s = Vec::new();
                    for tok in line.split_whitespace() {
                        let i: usize = tok.parse().map_err(|_| err(format!("bad index {tok:?}")))?;
                        if i == 0 || i > n {
                            return Err(err(format!("index {i} outside [1, {n}]")));
                        }
                        s.push(i);
                    }
                    sets.push(s);
                }
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing `n=<int>` header".into() })?;
        Self::new(n, sets)
    }

    pub fn fingerprint(&self) -> String {
        hashing::fingerprint(&self.to_text())
    }

    fn masks(&self) -> Vec<u32> {
        self.sets
            .iter()
            .map(|s| s.ones().fold(0u32, |m, i| m | (1 << i)))
            .filter(|&m| m != 0)
            .collect()
    }

    fn check_exact_budget(&self) -> Result<()> {
        if self.n > EXACT_MAX_N {
            Err(Error::UniverseTooLarge { n: self.n as u64, max: EXACT_MAX_N as u64 })
        } else {
            Ok(())
        }
    }
}

/// Coordinates isolated by some set: `{i : exists s, supp(s∘v) = {i}}`.
pub fn hh_set(system: &SetSystem, v: &[f64]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for s in system.sets() {
        let mut only = None;
        let mut count = 0;
        for i in s.ones() {
            if v.get(i).is_some_and(|x| *x != 0.0) {
                count += 1;
                if count > 1 {
                    break;
                }
                only = Some(i + 1);
            }
        }
        if count == 1 {
            out.insert(only.unwrap());
        }
    }
    out
}

fn hh_of_mask(masks: &[u32], v: u32) -> u32 {
    let mut h = 0u32;
    for &m in masks {
        let x = m & v;
        if x != 0 && x & (x - 1) == 0 {
            h |= x;
        }
    }
    h
}

/// Heavy-hitter dimension by enumerating every binary vector.
pub fn hh_dim_exact(system: &SetSystem) -> Result<usize> {
    system.check_exact_budget()?;
    let masks = system.masks();
    if masks.is_empty() {
        return Ok(0);
    }
    let covered = masks.iter().fold(0u32, |a, m| a | m);
    let limit = masks.len().min(covered.count_ones() as usize) as u32;
    let mut best = 0u32;
    // iterate the subsets of `covered` only
    let mut v = covered;
    loop {
        if v.count_ones() > best {
            let h = hh_of_mask(&masks, v).count_ones();
            if h > best {
                best = h;
                if best == limit {
                    break;
                }
            }
        }
        if v == 0 {
            break;
        }
        v = (v - 1) & covered;
    }
    Ok(best as usize)
}

/// Largest shattered set, grown level by level from shattered subsets.
pub fn vc_dim_exact(system: &SetSystem) -> Result<usize> {
    system.check_exact_budget()?;
    if system.is_empty() {
        return Ok(0);
    }
    let all: Vec<u32> = system
        .sets()
        .iter()
        .map(|s| s.ones().fold(0u32, |m, i| m | (1 << i)))
        .collect();
    let n = system.n();
    let mut level: Vec<u32> = vec![0];
    let mut dim = 0;
    loop {
        let mut next = HashSet::new();
        for &a in &level {
            let top = if a == 0 { 0 } else { 32 - a.leading_zeros() as usize };
            for i in top..n {
                let b = a | (1 << i);
                if next.contains(&b) {
                    continue;
                }
                let need = 1usize << b.count_ones();
                if need > all.len() {
                    continue;
                }
                let traces: HashSet<u32> = all.iter().map(|m| m & b).collect();
                if traces.len() == need {
                    next.insert(b);
                }
            }
        }
        if next.is_empty() {
            return Ok(dim);
        }
        dim += 1;
        level = next.into_iter().collect();
    }
}

/// Lower bound on the heavy-hitter dimension from randomized greedy passes.
///
/// Each pass scans the coordinates in a random order and keeps a coordinate
/// whenever adding it to the support grows the isolated set.
pub fn hh_dim_greedy(system: &SetSystem, passes: usize, seed: u64) -> usize {
    let n = system.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    let mut best = 0;
    for pass in 0..passes.max(1) {
        if pass > 0 {
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
        }
        let mut count = vec![0u32; system.len()];
        let mut lone = vec![0usize; system.len()];
        let mut mult = vec![0u32; n + 1];
        let mut size = 0usize;
        for &i in &order {
            let mut gain = 0i64;
            let mut fresh = false;
            let mut lost: Vec<usize> = Vec::new();
            for &j in system.sets_containing(i) {
                let j = j as usize;
                match count[j] {
                    0 => fresh = true,
                    1 => lost.push(lone[j]),
                    _ => {}
                }
            }
            if fresh {
                gain += 1;
            }
            lost.sort_unstable();
            let mut k = 0;
            while k < lost.len() {
                let e = lost[k];
                let mut c = 0;
                while k < lost.len() && lost[k] == e {
                    c += 1;
                    k += 1;
                }
                if mult[e] == c {
                    gain -= 1;
                }
            }
            if gain > 0 {
                for &j in system.sets_containing(i) {
                    let j = j as usize;
                    match count[j] {
                        0 => {
                            lone[j] = i;
                            mult[i] += 1;
                        }
                        1 => mult[lone[j]] -= 1,
                        _ => {}
                    }
                    count[j] += 1;
                }
                size = (size as i64 + gain) as usize;
            }
        }
        best = best.max(size);
    }
    best
}

/// Heavy-hitter dimension of all intervals of length at least `k` in `[n]`.
///
/// Isolated points `c_1 < ... < c_m` split `[0, n+1]` into `m+1` gaps, and
/// `c_j` is isolated iff its two neighbouring gaps sum to at least `k+1`.
pub fn intervals_hh_dim(n: u64, k: u64) -> u64 {
    assert!(k >= 1 && k <= n);
    let min_total = |g: u64| -> u64 {
        if g % 2 == 0 {
            (g / 2) * (k + 1)
        } else {
            (g / 2) * (k + 1) + 1
        }
    };
    let mut lo = 0u64;
    let mut hi = n;
    while lo < hi {
        let m = (lo + hi + 1) / 2;
        if min_total(m + 1) <= n + 1 {
            lo = m;
        } else {
            hi = m - 1;
        }
    }
    lo
}

fn interval_count(n: u64, k: u64) -> u64 {
    let m = n - k + 1;
    m * (m + 1) / 2
}

/// All intervals `[a..b]` with `b - a + 1 >= k`.
pub fn family_intervals(n: usize, k: usize) -> Result<SetSystem> {
    if k == 0 || k > n {
        return Err(invalid(format!("interval length {k} must lie in [1, {n}]")));
    }
    let count = interval_count(n as u64, k as u64);
    if count > MAX_SETS {
        return Err(Error::SystemTooLarge(count));
    }
    let mut sets = Vec::with_capacity(count as usize);
    for a in 1..=n {
        for b in (a + k - 1)..=n {
            sets.push((a..=b).collect());
        }
    }
    SetSystem::new(n, sets)
}

/// All windows `[a..a+len-1]` of one fixed length.
pub fn family_windows(n: usize, len: usize) -> Result<SetSystem> {
    if len == 0 || len > n {
        return Err(invalid(format!("window length {len} must lie in [1, {n}]")));
    }
    SetSystem::new(n, (1..=n - len + 1).map(|a| (a..a + len).collect()).collect())
}

pub fn family_singletons(n: usize) -> Result<SetSystem> {
    SetSystem::new(n, (1..=n).map(|i| vec![i]).collect())
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// All sets missing at most `k` coordinates.
pub fn family_missing_few(n: usize, k: usize) -> Result<SetSystem> {
    if n == 0 {
        return Err(invalid("universe size must be positive"));
    }
    let k = k.min(n);
    let count: u64 = (0..=k as u64).map(|j| binomial(n as u64, j)).fold(0, u64::saturating_add);
    if count > MAX_SETS {
        return Err(Error::SystemTooLarge(count));
    }
    let mut sets = Vec::with_capacity(count as usize);
    let mut missing: Vec<usize> = Vec::new();
    fn rec(n: usize, k: usize, start: usize, missing: &mut Vec<usize>, out: &mut Vec<FixedBitSet>) {
        let mut b = FixedBitSet::with_capacity(n);
        b.insert_range(..);
        for &m in missing.iter() {
            b.set(m, false);
        }
        out.push(b);
        if missing.len() == k {
            return;
        }
        for i in start..n {
            missing.push(i);
            rec(n, k, i + 1, missing, out);
            missing.pop();
        }
    }
    rec(n, k, 0, &mut missing, &mut sets);
    SetSystem::from_bitsets(n, sets)
}

/// `k` random sets, each coordinate included independently with probability `q`.
pub fn family_random(n: usize, k: usize, q: f64, seed: u64) -> Result<SetSystem> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(invalid(format!("inclusion probability {q} must lie in (0, 1/2]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(k);
    for _ in 0..k {
        let mut b = FixedBitSet::with_capacity(n);
        for i in 0..n {
            if rng.random_bool(q) {
                b.insert(i);
            }
        }
        sets.push(b);
    }
    SetSystem::from_bitsets(n, sets)
}

/// Every subset of `[n]`, including the empty set.
pub fn family_power_set(n: usize) -> Result<SetSystem> {
    if n > 20 {
        return Err(Error::SystemTooLarge(1u64 << n.min(63)));
    }
    let sets = (0u32..(1 << n))
        .map(|m| {
            let mut b = FixedBitSet::with_capacity(n);
            for i in 0..n {
                if m >> i & 1 == 1 {
                    b.insert(i);
                }
            }
            b
        })
        .collect();
    SetSystem::from_bitsets(n, sets)
}

pub fn union(a: &SetSystem, b: &SetSystem) -> Result<SetSystem> {
    if a.n() != b.n() {
        return Err(Error::UniverseMismatch(a.n() as u64, b.n() as u64));
    }
    SetSystem::from_bitsets(a.n(), a.sets().iter().chain(b.sets()).cloned().collect())
}

/// `{s1 ∪ s2 : s1 in a, s2 in b}`.
pub fn union_product(a: &SetSystem, b: &SetSystem) -> Result<SetSystem> {
    if a.n() != b.n() {
        return Err(Error::UniverseMismatch(a.n() as u64, b.n() as u64));
    }
    let count = a.len() as u64 * b.len() as u64;
    if count > MAX_SETS {
        return Err(Error::SystemTooLarge(count));
    }
    let mut sets = Vec::with_capacity(count as usize);
    for s in a.sets() {
        for t in b.sets() {
            let mut u = s.clone();
            u.union_with(t);
            sets.push(u);
        }
    }
    SetSystem::from_bitsets(a.n(), sets)
}
