//! Count-sketch point estimator. Each row hashes a coordinate once with a
//! strongly universal hash; the top bits pick the bucket and the lowest bit
//! the sign.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hashing::{derive_seed, MultiplyShift};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSketch {
    depth: usize,
    width: usize,
    universe: u64,
    seed: u64,
    #[serde(skip)]
    rows: Vec<MultiplyShift>,
    counters: Vec<f64>,
}

/// `(width, depth)` for top-`k` error `eps_prime` with failure `0.01 / (k n)` per coordinate.
pub fn sizing(k: usize, eps_prime: f64, n: u64) -> (usize, usize) {
    let width = (6 * k).max((6.0 / (eps_prime * eps_prime)).ceil() as usize);
    let delta = 0.01 / (k as f64 * n as f64);
    let mut depth = ((1.0 / delta).log2().ceil() as usize).max(5);
    if depth % 2 == 0 {
        depth += 1;
    }
    (width, depth)
}

impl CountSketch {
    pub fn new(depth: usize, width: usize, universe: u64, seed: u64) -> Result<Self> {
        if depth == 0 || depth % 2 == 0 {
            return Err(invalid("depth must be odd"));
        }
        if width == 0 {
            return Err(invalid("width must be positive"));
        }
        let mut cs = CountSketch { depth, width, universe, seed, rows: Vec::new(), counters: vec![0.0; depth * width] };
        cs.init_rows();
        Ok(cs)
    }

    fn init_rows(&mut self) {
        self.rows = (0..self.depth).map(|r| MultiplyShift::new(derive_seed(self.seed, "row", r as u64))).collect();
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    #[inline]
    fn slot(&self, r: usize, c: u64) -> (usize, f64) {
        let h = self.rows[r].hash(c);
        let bucket = ((h as u128 * self.width as u128) >> 64) as usize;
        let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
        (r * self.width + bucket, sign)
    }

    /// Coordinates are `0..universe`.
    pub fn update(&mut self, c: u64, delta: f64) {
        debug_assert!(c < self.universe);
        if delta == 0.0 {
            return;
        }
        for r in 0..self.depth {
            let (i, s) = self.slot(r, c);
            self.counters[i] += s * delta;
        }
    }

    /// `update` for each `(coordinate, delta)` pair, row by row for locality.
    pub fn update_many(&mut self, items: &[(u64, f64)]) {
        for r in 0..self.depth {
            for &(c, delta) in items {
                debug_assert!(c < self.universe);
                let (i, s) = self.slot(r, c);
                self.counters[i] += s * delta;
            }
        }
    }

    pub fn estimate(&self, c: u64) -> f64 {
        let mut v: Vec<f64> = (0..self.depth)
            .map(|r| {
                let (i, s) = self.slot(r, c);
                s * self.counters[i]
            })
            .collect();
        let m = v.len() / 2;
        *v.select_nth_unstable_by(m, f64::total_cmp).1
    }

    /// Estimates for many coordinates, row by row for locality.
    pub fn estimate_many(&self, coords: &[u64]) -> Vec<f64> {
        const BLOCK: usize = 256;
        let d = self.depth;
        let mut out = Vec::with_capacity(coords.len());
        let mut buf = vec![0.0; BLOCK * d];
        let mut col = vec![0.0; d];
        for chunk in coords.chunks(BLOCK) {
            for r in 0..d {
                let row = &mut buf[r * BLOCK..r * BLOCK + chunk.len()];
                for (slot, &c) in row.iter_mut().zip(chunk) {
                    let (i, s) = self.slot(r, c);
                    *slot = s * self.counters[i];
                }
            }
            for j in 0..chunk.len() {
                for (r, x) in col.iter_mut().enumerate() {
                    *x = buf[r * BLOCK + j];
                }
                out.push(*col.select_nth_unstable_by(d / 2, f64::total_cmp).1);
            }
        }
        out
    }

    /// `m`-th largest `|estimate|` over `coords` (1-based), zero when there
    /// are fewer than `m` coordinates.
    ///
    /// Once `m` candidates are known, a coordinate is skipped without taking
    /// its median when fewer than `d/2 + 1` rows exceed the running
    /// threshold in absolute value on one side.
    pub fn kth_largest_abs(&self, coords: &[u64], m: usize) -> f64 {
        const BLOCK: usize = 256;
        if m == 0 || coords.len() < m {
            return 0.0;
        }
        let d = self.depth;
        let half = d / 2 + 1;
        let mut kept: Vec<f64> = Vec::with_capacity(2 * m);
        let mut t = f64::NEG_INFINITY;
        let mut buf = vec![0.0; BLOCK * d];
        let mut col = vec![0.0; d];
        for chunk in coords.chunks(BLOCK) {
            for r in 0..d {
                let row = &mut buf[r * BLOCK..r * BLOCK + chunk.len()];
                for (slot, &c) in row.iter_mut().zip(chunk) {
                    let (i, s) = self.slot(r, c);
                    *slot = s * self.counters[i];
                }
            }
            for j in 0..chunk.len() {
                let (mut hi, mut lo) = (0, 0);
                for (r, x) in col.iter_mut().enumerate() {
                    *x = buf[r * BLOCK + j];
                    hi += (*x > t) as usize;
                    lo += (*x < -t) as usize;
                }
                if hi < half && lo < half {
                    continue;
                }
                let med = col.select_nth_unstable_by(d / 2, f64::total_cmp).1.abs();
                if med > t {
                    kept.push(med);
                }
                if kept.len() == 2 * m {
                    t = *kept.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a)).1;
                    kept.truncate(m);
                }
            }
        }
        *kept.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a)).1
    }

    /// Adds another sketch built with the same seed and shape.
    pub fn merge(&mut self, other: &CountSketch) -> Result<()> {
        if (self.depth, self.width, self.universe, self.seed) != (other.depth, other.width, other.universe, other.seed) {
            return Err(invalid("count-sketches differ in shape or seed"));
        }
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a += b;
        }
        Ok(())
    }

    /// Re-derives the row hashes after deserialization.
    pub fn restore(mut self) -> Result<Self> {
        if self.depth == 0 || self.depth % 2 == 0 || self.width == 0 || self.counters.len() != self.depth * self.width {
            return Err(Error::State("count-sketch shape does not match its counters".into()));
        }
        self.init_rows();
        Ok(self)
    }
}
