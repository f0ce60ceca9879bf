//! Exact reference vectors, the text stream format, and stream generators.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_STREAM_LEN: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Insertion,
    Turnstile,
    Entrywise,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Insertion => "insertion",
            Model::Turnstile => "turnstile",
            Model::Entrywise => "entrywise",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insertion" => Ok(Model::Insertion),
            "turnstile" => Ok(Model::Turnstile),
            "entrywise" => Ok(Model::Entrywise),
            _ => Err(invalid(format!("unknown stream model {s:?}"))),
        }
    }
}

/// One stream line: `delta` is 1 for insertions, the signed change for
/// turnstile updates and the delivered value for entry-wise streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Update {
    pub index: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub model: Model,
    pub n: u64,
    pub updates: Vec<Update>,
}

impl Stream {
    pub fn to_text(&self) -> String {
        let mut out = format!("# model={} n={}\n", self.model, self.n);
        for u in &self.updates {
            match self.model {
                Model::Insertion => out.push_str(&format!("{}\n", u.index)),
                _ => out.push_str(&format!("{} {}\n", u.index, u.delta)),
            }
        }
        out
    }
}

/// Header fields found on a `# model=<m> n=<int>` line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StreamHeader {
    pub model: Option<Model>,
    pub n: Option<u64>,
}

fn parse_header(line: &str) -> Option<StreamHeader> {
    let body = line.strip_prefix('#')?.trim();
    let mut h = StreamHeader::default();
    let mut any = false;
    for tok in body.split_whitespace() {
        if let Some(m) = tok.strip_prefix("model=") {
            h.model = m.parse().ok();
            any = true;
        } else if let Some(n) = tok.strip_prefix("n=") {
            h.n = n.parse().ok();
            any = true;
        }
    }
    any.then_some(h)
}

/// Single-pass reader over the text stream format.
pub struct StreamReader<R> {
    lines: std::io::Lines<R>,
    lineno: usize,
    model: Model,
    header: StreamHeader,
    pending: Option<Update>,
    read: u64,
}

impl<R: BufRead> StreamReader<R> {
    /// Reads up to the first update so the header is known; `model` is used
    /// when the stream has no header.
    pub fn new(reader: R, model: Model) -> Result<Self> {
        let mut r = StreamReader {
            lines: reader.lines(),
            lineno: 0,
            model,
            header: StreamHeader::default(),
            pending: None,
            read: 0,
        };
        r.pending = r.next_update(true)?;
        if let Some(m) = r.header.model {
            r.model = m;
        }
        Ok(r)
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }

    pub fn model(&self) -> Model {
        self.model
    }

    fn next_update(&mut self, allow_header: bool) -> Result<Option<Update>> {
        loop {
            let Some(line) = self.lines.next() else { return Ok(None) };
            self.lineno += 1;
            let lineno = self.lineno;
            let line = line.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if t.starts_with('#') {
                if allow_header && self.header == StreamHeader::default() {
                    if let Some(h) = parse_header(t) {
                        self.header = h;
                    }
                }
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno, msg };
            let mut it = t.split_whitespace();
            let idx = it.next().unwrap();
            let index: u64 = idx.parse().map_err(|_| err(format!("bad index {idx:?}")))?;
            if index == 0 {
                return Err(err("indices are 1-based".into()));
            }
            let delta = match it.next() {
                None => 1.0,
                Some(d) => {
                    let v: f64 = d.parse().map_err(|_| err(format!("bad value {d:?}")))?;
                    if !v.is_finite() {
                        return Err(err(format!("value {d:?} is not finite")));
                    }
                    v
                }
            };
            if it.next().is_some() {
                return Err(err("expected `i` or `i value`".into()));
            }
            self.read += 1;
            if self.read > MAX_STREAM_LEN {
                return Err(err(format!("stream longer than {MAX_STREAM_LEN} updates")));
            }
            return Ok(Some(Update { index, delta }));
        }
    }

    pub fn next_checked(&mut self) -> Result<Option<Update>> {
        if let Some(u) = self.pending.take() {
            return Ok(Some(u));
        }
        self.next_update(false)
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<Update>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_checked().transpose()
    }
}

/// Parses a whole stream; `n` defaults to the header value or the largest index.
pub fn parse_stream(text: &str, model: Model) -> Result<Stream> {
    let mut r = StreamReader::new(text.as_bytes(), model)?;
    let mut updates = Vec::new();
    for u in r.by_ref() {
        updates.push(u?);
    }
    let n = r.header().n.unwrap_or_else(|| updates.iter().map(|u| u.index).max().unwrap_or(1));
    Ok(Stream { model: r.model(), n, updates })
}

/// The accumulated frequency vector, stored sparsely.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExactVector {
    pub model: Option<Model>,
    values: BTreeMap<u64, f64>,
}

impl ExactVector {
    pub fn new(model: Model) -> Self {
        ExactVector { model: Some(model), values: BTreeMap::new() }
    }

    pub fn from_entries(model: Model, entries: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut v = Self::new(model);
        for (i, x) in entries {
            v.add(i, x);
        }
        v
    }

    pub fn add(&mut self, i: u64, delta: f64) {
        let e = self.values.entry(i).or_insert(0.0);
        *e += delta;
        if *e == 0.0 {
            self.values.remove(&i);
        }
    }

    pub fn get(&self, i: u64) -> f64 {
        self.values.get(&i).copied().unwrap_or(0.0)
    }

    /// Nonzero entries in index order.
    pub fn nonzeros(&self) -> Vec<(u64, f64)> {
        self.values.iter().map(|(&i, &x)| (i, x)).collect()
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// `‖v∘s‖_p`, with `p = 0` counting the support.
    pub fn subset_norm(&self, s: impl Fn(u64) -> bool, p: f64) -> f64 {
        let vals = self.values.iter().filter(|(&i, _)| s(i)).map(|(_, &x)| x);
        if p == 0.0 {
            vals.filter(|x| *x != 0.0).count() as f64
        } else if p == 1.0 {
            vals.map(f64::abs).sum()
        } else {
            vals.map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.subset_norm(|_| true, p)
    }
}

/// `‖v∘s‖_p` for a set given by its members.
pub fn exact_subset_norm(v: &ExactVector, s: &[u64], p: f64) -> f64 {
    let set: std::collections::BTreeSet<u64> = s.iter().copied().collect();
    v.subset_norm(|i| set.contains(&i), p)
}

/// Accumulates a stream; entry-wise values overwrite, others add.
pub fn replay(stream: &Stream) -> ExactVector {
    let mut v = ExactVector::new(stream.model);
    for u in &stream.updates {
        match stream.model {
            Model::Entrywise => {
                let old = v.get(u.index);
                v.add(u.index, u.delta - old);
            }
            _ => v.add(u.index, u.delta),
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Uniform,
    Zipf,
    PlantedSubset,
    AdversarialTurnstile,
    AdversarialSliding,
}

impl FromStr for GenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GenKind::Uniform),
            "zipf" => Ok(GenKind::Zipf),
            "planted-subset" => Ok(GenKind::PlantedSubset),
            "adversarial-turnstile" => Ok(GenKind::AdversarialTurnstile),
            "adversarial-sliding" => Ok(GenKind::AdversarialSliding),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub n: u64,
    pub length: u64,
    /// Zipf exponent.
    pub skew: f64,
    /// Window size for the sliding-window instance.
    pub window: u64,
}

impl GenParams {
    pub fn new(n: u64, length: u64) -> Self {
        GenParams { n, length, skew: 1.1, window: n }
    }
}

/// A generated stream plus the query it was built around, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub stream: Stream,
    pub planted: Option<(u64, u64)>,
}

pub fn gen_stream(kind: GenKind, params: GenParams, seed: u64) -> Result<Generated> {
    let n = params.n;
    if n == 0 {
        return Err(invalid("universe size must be positive"));
    }
    if params.length > MAX_STREAM_LEN {
        return Err(invalid(format!("stream length is capped at {MAX_STREAM_LEN}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ins = |i: u64| Update { index: i, delta: 1.0 };
    let out = match kind {
        GenKind::Uniform => Generated {
            stream: Stream {
                model: Model::Insertion,
                n,
                updates: (0..params.length).map(|_| ins(rng.random_range(1..=n))).collect(),
            },
            planted: None,
        },
        GenKind::Zipf => {
            let z = Zipf::new(n as f64, params.skew).map_err(|e| invalid(e.to_string()))?;
            // Zipf ranks are mapped through a random permutation of [n]
            let mut perm: Vec<u64> = (1..=n).collect();
            perm.shuffle(&mut rng);
            let updates = (0..params.length)
                .map(|_| ins(perm[z.sample(&mut rng) as usize - 1]))
                .collect();
            Generated { stream: Stream { model: Model::Insertion, n, updates }, planted: None }
        }
        GenKind::PlantedSubset => {
            // dense interval of length n/4 on a sparse background
            let len = (n / 4).max(1);
            let a = rng.random_range(1..=n - len + 1);
            let b = a + len - 1;
            let mut updates = Vec::new();
            for i in 1..=n {
                let q = if (a..=b).contains(&i) { 0.5 } else { 1.0 / 16.0 };
                if rng.random_bool(q) {
                    for _ in 0..rng.random_range(1..=3) {
                        updates.push(ins(i));
                    }
                }
            }
            updates.shuffle(&mut rng);
            Generated { stream: Stream { model: Model::Insertion, n, updates }, planted: Some((a, b)) }
        }
        GenKind::AdversarialTurnstile => {
            if n < 4 {
                return Err(invalid("adversarial instances need n >= 4"));
            }
            let half = n / 2;
            let j = rng.random_range(1..=(n / 4).max(1));
            let x: Vec<bool> = (1..=half).map(|i| i == j || rng.random_bool(0.5)).collect();
            let mut updates: Vec<Update> = (1..=half).filter(|&i| x[i as usize - 1]).map(ins).collect();
            for i in j + 1..=half {
                if x[i as usize - 1] {
                    updates.push(Update { index: i, delta: -1.0 });
                }
            }
            Generated { stream: Stream { model: Model::Turnstile, n, updates }, planted: Some((j, j + half)) }
        }
        GenKind::AdversarialSliding => {
            if n < 4 {
                return Err(invalid("adversarial instances need n >= 4"));
            }
            let half = n / 2;
            let w = params.window.max(half);
            let j = rng.random_range(2..=(n / 4).max(2));
            let x: Vec<bool> = (1..=half).map(|i| i == j || rng.random_bool(0.5)).collect();
            // x in reverse order, then filler on j-1 until the window starts at x_j
            let mut updates: Vec<Update> = (1..=half).rev().filter(|&i| x[i as usize - 1]).map(ins).collect();
            let earlier = (1..j).filter(|&i| x[i as usize - 1]).count() as u64;
            for _ in 0..w - 1 - earlier {
                updates.push(ins(j - 1));
            }
            Generated { stream: Stream { model: Model::Insertion, n, updates }, planted: Some((j, j + half)) }
        }
    };
    Ok(out)
}
