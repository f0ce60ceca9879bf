//! One sketch of any kind, its construction from flags, stream routing, and
//! the JSON state file.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{Family, FamilySpec, SetQuery};
use crate::hashing::{derive_seed, X_CAP};
use crate::l1_adapter::{L1Sketch, L1Snapshot};
use crate::lp_additive::{self, LpSetSketch, LpSnapshot};
use crate::oracle::{Model, Update};
use crate::priority_sampling::{self, PrioritySketch, PrioritySnapshot};
use crate::subset_l0::{forall_replicas, median, L0Sketch, L0Snapshot};

pub const FORMAT_VERSION: u32 = 1;

/// Replica constant `c` in `ceil(c log2 |S|)`.
pub const FORALL_C: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    L0,
    L1,
    Priority,
    LpAdditive,
}

impl SketchKind {
    /// Stream models the kind can consume.
    pub fn accepts(self, model: Model) -> bool {
        match self {
            SketchKind::L0 | SketchKind::L1 => model == Model::Insertion,
            SketchKind::Priority => model == Model::Entrywise,
            SketchKind::LpAdditive => true,
        }
    }

    pub fn check_model(self, model: Model) -> Result<()> {
        if self.accepts(model) {
            return Ok(());
        }
        let reason = match (self, model) {
            (SketchKind::Priority, _) => "priority sampling needs each coordinate delivered once with its final value".to_string(),
            (_, Model::Turnstile) => "no small-space sketch gives a multiplicative subset-norm estimate once deletions are allowed; use lp-additive".to_string(),
            _ => "the sketch counts insertions only".to_string(),
        };
        Err(Error::ModelMismatch { sketch: self.to_string(), model: model.to_string(), reason })
    }

    pub fn needs_family(self) -> bool {
        self != SketchKind::LpAdditive
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchKind::L0 => "l0",
            SketchKind::L1 => "l1",
            SketchKind::Priority => "priority",
            SketchKind::LpAdditive => "lp-additive",
        })
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l0" => Ok(SketchKind::L0),
            "l1" => Ok(SketchKind::L1),
            "priority" => Ok(SketchKind::Priority),
            "lp-additive" | "lp_additive" => Ok(SketchKind::LpAdditive),
            _ => Err(invalid(format!("unknown sketch kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchConfig {
    pub kind: SketchKind,
    pub model: Model,
    pub n: u64,
    pub family: Option<Family>,
    pub epsilon: f64,
    pub p_norm: f64,
    pub seed: u64,
    /// Defaults to `ceil(2 log2 |S|)` for set-system sketches and 1 otherwise.
    pub replicas: Option<usize>,
    pub m_bar: Option<u64>,
    /// Overrides the sample size of priority and lp-additive sketches.
    pub k: Option<usize>,
}

impl SketchConfig {
    pub fn new(kind: SketchKind, model: Model, n: u64, family: Option<Family>, epsilon: f64, seed: u64) -> Self {
        let p_norm = match kind {
            SketchKind::L0 => 0.0,
            _ => 1.0,
        };
        SketchConfig { kind, model, n, family, epsilon, p_norm, seed, replicas: None, m_bar: None, k: None }
    }

    fn replica_count(&self) -> usize {
        match (self.replicas, &self.family) {
            (Some(r), _) => r,
            (None, Some(f)) if self.kind.needs_family() => forall_replicas(f.set_count(), FORALL_C),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub sketch_kind: SketchKind,
    pub model: Model,
    pub n: u64,
    pub epsilon: f64,
    pub p_norm: f64,
    pub m_bar: Option<u64>,
    /// Master seed followed by one derived seed per replica.
    pub seeds: Vec<u64>,
    pub set_system_fingerprint: Option<String>,
    pub x_cap: u64,
    pub family: Option<FamilySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    L0 { replicas: Vec<L0Snapshot> },
    L1 { replicas: Vec<L1Snapshot> },
    Priority { replicas: Vec<PrioritySnapshot> },
    LpAdditive { replicas: Vec<LpSnapshot> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub header: Header,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq)]
enum Replicas {
    L0(Vec<L0Sketch>),
    L1(Vec<L1Sketch>),
    Priority(Vec<PrioritySketch>),
    Lp(Vec<LpSetSketch>),
}

/// A sketch of any kind, with the median over its replicas as the answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AnySketch {
    header: Header,
    family: Option<Family>,
    reps: Replicas,
}

fn replica_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, "replica", r as u64)
}

impl AnySketch {
    pub fn build(cfg: &SketchConfig) -> Result<Self> {
        cfg.kind.check_model(cfg.model)?;
        let count = cfg.replica_count();
        if count == 0 {
            return Err(invalid("at least one replica is required"));
        }
        let family = cfg.family.clone();
        if cfg.kind.needs_family() && family.is_none() {
            return Err(invalid(format!("{} sketches need a set system", cfg.kind)));
        }
        if let Some(f) = &family {
            if f.n() != cfg.n {
                return Err(Error::UniverseMismatch(f.n(), cfg.n));
            }
        }
        let seeds: Vec<u64> = (0..count).map(|r| replica_seed(cfg.seed, r)).collect();
        let explicit = || match &family {
            Some(Family::Explicit(s)) => Ok(Arc::clone(s)),
            _ => Err(invalid("priority sketches need an explicit set system")),
        };
        let mut m_bar = None;
        let reps = match cfg.kind {
            SketchKind::L0 => Replicas::L0(
                seeds.iter().map(|&s| L0Sketch::new(family.clone().unwrap(), cfg.epsilon, s)).collect::<Result<_>>()?,
            ),
            SketchKind::L1 => {
                let reps: Vec<L1Sketch> = seeds
                    .iter()
                    .map(|&s| L1Sketch::new(family.clone().unwrap(), cfg.epsilon, s, cfg.m_bar))
                    .collect::<Result<_>>()?;
                m_bar = Some(reps[0].m_bar());
                Replicas::L1(reps)
            }
            SketchKind::Priority => {
                let system = explicit()?;
                if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
                    return Err(invalid(format!("epsilon {} must lie in (0, 1)", cfg.epsilon)));
                }
                let k = cfg.k.unwrap_or_else(|| priority_sampling::default_k(cfg.epsilon));
                Replicas::Priority(
                    seeds
                        .iter()
                        .map(|&s| PrioritySketch::new(Arc::clone(&system), cfg.p_norm, k, s))
                        .collect::<Result<_>>()?,
                )
            }
            SketchKind::LpAdditive => {
                if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
                    return Err(invalid(format!("epsilon {} must lie in (0, 1)", cfg.epsilon)));
                }
                let k = cfg.k.unwrap_or_else(|| lp_additive::default_k(cfg.epsilon));
                Replicas::Lp(
                    seeds
                        .iter()
                        .map(|&s| LpSetSketch::with_k(cfg.n, cfg.p_norm, cfg.epsilon, k, s))
                        .collect::<Result<_>>()?,
                )
            }
        };
        let mut all_seeds = vec![cfg.seed];
        all_seeds.extend(seeds);
        let header = Header {
            format_version: FORMAT_VERSION,
            sketch_kind: cfg.kind,
            model: cfg.model,
            n: cfg.n,
            epsilon: cfg.epsilon,
            p_norm: if cfg.kind == SketchKind::L0 { 0.0 } else { cfg.p_norm },
            m_bar,
            seeds: all_seeds,
            set_system_fingerprint: family.as_ref().map(Family::fingerprint),
            x_cap: X_CAP,
            family: family.as_ref().map(Family::spec),
        };
        Ok(AnySketch { header, family, reps })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn kind(&self) -> SketchKind {
        self.header.sketch_kind
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn replica_count(&self) -> usize {
        match &self.reps {
            Replicas::L0(r) => r.len(),
            Replicas::L1(r) => r.len(),
            Replicas::Priority(r) => r.len(),
            Replicas::Lp(r) => r.len(),
        }
    }

    /// Coordinates or counters held across all replicas.
    pub fn stored(&self) -> usize {
        match &self.reps {
            Replicas::L0(r) => r.iter().map(L0Sketch::stored).sum(),
            Replicas::L1(r) => r.iter().map(L1Sketch::stored).sum(),
            Replicas::Priority(r) => r.iter().map(PrioritySketch::stored).sum(),
            Replicas::Lp(r) => r.iter().map(|s| s.count_sketch().counters().len()).sum(),
        }
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i == 0 || i > self.header.n {
            return Err(Error::CoordinateOutOfRange { index: i, n: self.header.n });
        }
        Ok(())
    }

    /// Applies one stream update to every replica.
    pub fn update(&mut self, u: Update) -> Result<()> {
        self.update_batch(std::slice::from_ref(&u))
    }

    /// Applies a run of updates in stream order, replicas possibly in parallel.
    pub fn update_batch(&mut self, batch: &[Update]) -> Result<()> {
        for u in batch {
            self.check_index(u.index)?;
            if self.kind() == SketchKind::L0 || self.kind() == SketchKind::L1 {
                if u.delta < 0.0 {
                    return Err(Error::NegativeUpdate(u.index));
                }
                if u.delta.fract() != 0.0 {
                    return Err(invalid(format!("insertion count {} for coordinate {} is not an integer", u.delta, u.index)));
                }
            }
        }
        match &mut self.reps {
            Replicas::L0(r) => for_each(r, |s| {
                for u in batch {
                    if u.delta > 0.0 {
                        s.update(u.index)?;
                    }
                }
                Ok(())
            }),
            Replicas::L1(r) => for_each(r, |s| {
                for u in batch {
                    s.add(u.index, u.delta as i64)?;
                }
                Ok(())
            }),
            Replicas::Priority(r) => for_each(r, |s| {
                for u in batch {
                    match s.update(u.index, u.delta) {
                        Err(Error::ZeroValueIgnored(_)) => {}
                        other => other?,
                    }
                }
                Ok(())
            }),
            Replicas::Lp(r) => for_each(r, |s| {
                for u in batch {
                    s.update(u.index, u.delta)?;
                }
                Ok(())
            }),
        }
    }

    /// Coordinates of a query for the additive sketch, which accepts any subset.
    fn members(&self, q: &SetQuery) -> Result<Vec<u64>> {
        match q {
            SetQuery::Members(m) => Ok(m.clone()),
            SetQuery::Interval(a, b) => {
                if a > b || *a == 0 || *b > self.header.n {
                    return Err(invalid(format!("interval {a}..{b} is outside [1, {}]", self.header.n)));
                }
                Ok((*a..=*b).collect())
            }
            SetQuery::Id(j) => match &self.family {
                Some(Family::Explicit(s)) if *j < s.len() => Ok(s.members(*j).into_iter().map(|i| i as u64).collect()),
                _ => Err(Error::UnknownSetId(*j)),
            },
        }
    }

    pub fn query(&self, q: &SetQuery) -> Result<f64> {
        let mut v: Vec<f64> = match &self.reps {
            Replicas::L0(r) => {
                let set = self.family.as_ref().unwrap().resolve(q)?;
                r.iter().map(|s| s.estimate(set)).collect()
            }
            Replicas::L1(r) => r.iter().map(|s| s.query(q)).collect::<Result<_>>()?,
            Replicas::Priority(r) => r.iter().map(|s| s.query(q)).collect::<Result<_>>()?,
            Replicas::Lp(r) => {
                let m = self.members(q)?;
                r.iter().map(|s| s.query(&m)).collect::<Result<_>>()?
            }
        };
        Ok(median(&mut v))
    }

    pub fn to_state(&self) -> StateFile {
        let body = match &self.reps {
            Replicas::L0(r) => Body::L0 { replicas: r.iter().map(L0Sketch::snapshot).collect() },
            Replicas::L1(r) => Body::L1 { replicas: r.iter().map(L1Sketch::snapshot).collect() },
            Replicas::Priority(r) => Body::Priority { replicas: r.iter().map(PrioritySketch::snapshot).collect() },
            Replicas::Lp(r) => Body::LpAdditive { replicas: r.iter().map(LpSetSketch::snapshot).collect() },
        };
        StateFile { header: self.header.clone(), body }
    }

    pub fn from_state(state: StateFile) -> Result<Self> {
        let h = state.header;
        let bad = |msg: &str| Error::State(msg.to_string());
        if h.format_version != FORMAT_VERSION {
            return Err(Error::State(format!("unsupported format version {}", h.format_version)));
        }
        if h.x_cap != X_CAP {
            return Err(bad("scaling cap differs from this build"));
        }
        h.sketch_kind.check_model(h.model)?;
        let family = h.family.as_ref().map(Family::from_spec).transpose()?;
        if family.as_ref().map(Family::fingerprint) != h.set_system_fingerprint {
            return Err(bad("set-system fingerprint does not match the embedded family"));
        }
        if let Some(f) = &family {
            if f.n() != h.n {
                return Err(Error::UniverseMismatch(f.n(), h.n));
            }
        }
        if h.sketch_kind.needs_family() && family.is_none() {
            return Err(bad("set-system sketch without a set system"));
        }
        let seeds = h.seeds.get(1..).unwrap_or_default();
        let expect = |got: &[u64]| -> Result<()> {
            if got != seeds {
                return Err(bad("replica seeds do not match the header"));
            }
            Ok(())
        };
        let reps = match (h.sketch_kind, state.body) {
            (SketchKind::L0, Body::L0 { replicas }) => {
                let f = family.clone().unwrap();
                let r: Vec<L0Sketch> = replicas.iter().map(|s| L0Sketch::from_snapshot(f.clone(), s)).collect::<Result<_>>()?;
                expect(&r.iter().map(L0Sketch::seed).collect::<Vec<_>>())?;
                Replicas::L0(r)
            }
            (SketchKind::L1, Body::L1 { replicas }) => {
                let f = family.clone().unwrap();
                let r: Vec<L1Sketch> = replicas.iter().map(|s| L1Sketch::from_snapshot(f.clone(), s)).collect::<Result<_>>()?;
                expect(&r.iter().map(|s| s.inner().seed()).collect::<Vec<_>>())?;
                if r.iter().any(|s| Some(s.m_bar()) != h.m_bar) {
                    return Err(bad("stream length bound differs from the header"));
                }
                Replicas::L1(r)
            }
            (SketchKind::Priority, Body::Priority { replicas }) => {
                let system = match &family {
                    Some(Family::Explicit(s)) => Arc::clone(s),
                    _ => return Err(bad("priority sketch without an explicit set system")),
                };
                let r: Vec<PrioritySketch> = replicas
                    .iter()
                    .map(|s| PrioritySketch::from_snapshot(Arc::clone(&system), s))
                    .collect::<Result<_>>()?;
                expect(&r.iter().map(PrioritySketch::seed).collect::<Vec<_>>())?;
                Replicas::Priority(r)
            }
            (SketchKind::LpAdditive, Body::LpAdditive { replicas }) => {
                let r: Vec<LpSetSketch> = replicas.into_iter().map(LpSetSketch::from_snapshot).collect::<Result<_>>()?;
                expect(&r.iter().map(LpSetSketch::seed).collect::<Vec<_>>())?;
                if r.iter().any(|s| s.n() != h.n || s.p_norm() != h.p_norm) {
                    return Err(bad("lp sketch parameters differ from the header"));
                }
                Replicas::Lp(r)
            }
            _ => return Err(bad("body kind does not match the header")),
        };
        if seeds.is_empty() {
            return Err(bad("state holds no replicas"));
        }
        Ok(AnySketch { header: h, family, reps })
    }

    pub fn save(&self) -> String {
        serde_json::to_string(&self.to_state()).expect("state serializes")
    }

    pub fn load(text: &str) -> Result<Self> {
        let state: StateFile = serde_json::from_str(text).map_err(|e| Error::State(e.to_string()))?;
        Self::from_state(state)
    }
}

#[cfg(feature = "parallel")]
fn for_each<T: Send>(reps: &mut [T], f: impl Fn(&mut T) -> Result<()> + Sync + Send) -> Result<()> {
    use rayon::prelude::*;
    if reps.len() == 1 {
        return f(&mut reps[0]);
    }
    reps.par_iter_mut().try_for_each(f)
}

#[cfg(not(feature = "parallel"))]
fn for_each<T>(reps: &mut [T], f: impl Fn(&mut T) -> Result<()>) -> Result<()> {
    reps.iter_mut().try_for_each(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setsystem;

    fn ins(i: u64) -> Update {
        Update { index: i, delta: 1.0 }
    }

    #[test]
    fn model_mismatch_rejected() {
        let f = Family::intervals(16, 4).unwrap();
        let cfg = SketchConfig::new(SketchKind::L0, Model::Turnstile, 16, Some(f), 0.5, 1);
        assert!(matches!(AnySketch::build(&cfg), Err(Error::ModelMismatch { .. })));
        let cfg = SketchConfig::new(SketchKind::LpAdditive, Model::Turnstile, 16, None, 0.5, 1);
        assert!(AnySketch::build(&cfg).is_ok());
    }

    #[test]
    fn default_replicas_follow_set_count() {
        let f = Family::explicit(setsystem::family_singletons(8).unwrap());
        let cfg = SketchConfig::new(SketchKind::L0, Model::Insertion, 8, Some(f), 0.5, 1);
        let sk = AnySketch::build(&cfg).unwrap();
        assert_eq!(sk.replica_count(), 6);
        assert_eq!(sk.header().seeds.len(), 7);
    }

    #[test]
    fn round_trip_every_kind() {
        let sys = setsystem::family_intervals(12, 3).unwrap();
        let fam = Family::explicit(sys);
        let kinds = [
            (SketchKind::L0, Model::Insertion, Some(fam.clone())),
            (SketchKind::L1, Model::Insertion, Some(Family::intervals(12, 3).unwrap())),
            (SketchKind::Priority, Model::Entrywise, Some(fam.clone())),
            (SketchKind::LpAdditive, Model::Turnstile, None),
        ];
        for (kind, model, family) in kinds {
            let mut cfg = SketchConfig::new(kind, model, 12, family, 0.5, 7);
            cfg.replicas = Some(3);
            cfg.m_bar = Some(50);
            cfg.k = Some(8);
            let mut sk = AnySketch::build(&cfg).unwrap();
            for i in 1..=12u64 {
                let delta = if model == Model::Turnstile { i as f64 - 6.0 } else { 1.0 + (i % 3) as f64 };
                sk.update(Update { index: i, delta }).unwrap();
            }
            let back = AnySketch::load(&sk.save()).unwrap();
            assert_eq!(back, sk, "{kind}");
            for q in [SetQuery::Interval(2, 7), SetQuery::Interval(1, 12)] {
                assert_eq!(back.query(&q).unwrap().to_bits(), sk.query(&q).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn l0_counts_distinct() {
        let f = Family::intervals(100, 10).unwrap();
        let mut cfg = SketchConfig::new(SketchKind::L0, Model::Insertion, 100, Some(f), 0.5, 3);
        cfg.replicas = Some(1);
        let mut sk = AnySketch::build(&cfg).unwrap();
        for i in [5, 5, 6, 50, 90] {
            sk.update(ins(i)).unwrap();
        }
        assert_eq!(sk.query(&SetQuery::Interval(1, 60)).unwrap(), 3.0);
        assert!(matches!(sk.update(Update { index: 3, delta: -1.0 }), Err(Error::NegativeUpdate(3))));
        assert!(matches!(sk.query(&SetQuery::Interval(1, 5)), Err(Error::QueryNotInSystem)));
    }

    #[test]
    fn tampered_state_rejected() {
        let f = Family::intervals(20, 5).unwrap();
        let cfg = SketchConfig::new(SketchKind::L0, Model::Insertion, 20, Some(f), 0.5, 3);
        let sk = AnySketch::build(&cfg).unwrap();
        let mut st = sk.to_state();
        st.header.set_system_fingerprint = Some("0000000000000000".into());
        assert!(AnySketch::from_state(st).is_err());
        let mut st = sk.to_state();
        st.header.seeds[1] ^= 1;
        assert!(AnySketch::from_state(st).is_err());
        assert!(AnySketch::load("{").is_err());
    }
}
