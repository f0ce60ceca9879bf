use std::collections::BTreeSet;

use rayon::prelude::*;
use subset_sketch::bounded_sampler::BoundedSampler;
use subset_sketch::family::Family;
use subset_sketch::hashing::derive_seed;
use subset_sketch::oracle::{Model, Update};
use subset_sketch::setsystem::{self, SetSystem};
use subset_sketch::{AnySketch, SetQuery, SketchConfig, SketchKind};

type Check = fn(u64) -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("hhdim-table", hhdim_table),
    ("vc-le-hhdim", vc_le_hhdim),
    ("sampler-space-and-coverage", sampler_invariants),
    ("l0-exact-regime", l0_exact_regime),
    ("lp-cancellation", lp_cancellation),
    ("state-round-trip", round_trip),
];

pub fn run(seed: u64) -> bool {
    let results: Vec<(&str, Result<String, String>)> =
        CHECKS.par_iter().map(|&(name, f)| (name, f(derive_seed(seed, name, 0)))).collect();
    let mut ok = true;
    for (name, r) in results {
        match r {
            Ok(detail) => println!("PASS\t{name}\t{detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL\t{name}\t{detail}");
            }
        }
    }
    ok
}

fn hhdim_table(_seed: u64) -> Result<String, String> {
    let mut cases = 0;
    for n in 3..=10usize {
        let got = setsystem::hh_dim_exact(&setsystem::family_singletons(n).unwrap()).unwrap();
        if got != n {
            return Err(format!("singletons n={n}: {got}"));
        }
        for k in 0..=2usize.min(n - 1) {
            let got = setsystem::hh_dim_exact(&setsystem::family_missing_few(n, k).unwrap()).unwrap();
            if got != (k + 1).min(n) {
                return Err(format!("missing-few n={n} k={k}: {got}"));
            }
        }
        for k in 1..=n {
            let got = setsystem::hh_dim_exact(&setsystem::family_intervals(n, k).unwrap()).unwrap() as u64;
            if got != setsystem::intervals_hh_dim(n as u64, k as u64) {
                return Err(format!("intervals n={n} k={k}: {got}"));
            }
        }
        cases += 2 + n;
    }
    Ok(format!("{cases} systems"))
}

fn vc_le_hhdim(seed: u64) -> Result<String, String> {
    for t in 0..50u64 {
        let n = 3 + (t % 6) as usize;
        let s = setsystem::family_random(n, 2 + (t % 7) as usize, 0.5, seed ^ t).unwrap();
        let vc = setsystem::vc_dim_exact(&s).unwrap();
        let hh = setsystem::hh_dim_exact(&s).unwrap();
        if vc > hh {
            return Err(format!("system {t}: VC {vc} > HH {hh}"));
        }
    }
    Ok("50 random systems".into())
}

fn sampler_invariants(seed: u64) -> Result<String, String> {
    let mut rng = seed;
    let mut next = move |m: u64| {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 33) % m
    };
    for t in 0..100u64 {
        let n = 4 + next(6) as usize;
        let sys = setsystem::family_random(n, 2 + next(6) as usize, 0.5, derive_seed(seed, "sys", t)).unwrap();
        let family = Family::explicit(sys.clone());
        let budget = 1 + next(3);
        let rate = [1.0, 0.5, 0.25][next(3) as usize];
        let mut s = BoundedSampler::new(&family, rate, budget, derive_seed(seed, "xi", t));
        let mut support = BTreeSet::new();
        for _ in 0..next(20) {
            let a = 1 + next(n as u64);
            support.insert(a);
            s.update(&family, a);
        }
        check_lemma(&sys, &s, &support, budget).map_err(|e| format!("case {t}: {e}"))?;
    }
    Ok("100 random instances".into())
}

fn check_lemma(sys: &SetSystem, s: &BoundedSampler, support: &BTreeSet<u64>, budget: u64) -> Result<(), String> {
    let held = s.held();
    let hh = setsystem::hh_dim_exact(sys).unwrap() as u64;
    if held.len() as u64 > budget * hh {
        return Err(format!("|H| = {} > {budget} * {hh}", held.len()));
    }
    for id in 0..sys.len() {
        let inside = |i: &u64| sys.contains(id, *i as usize);
        let sampled: Vec<u64> = support.iter().filter(|i| inside(i) && s.selects(**i)).copied().collect();
        if sampled.len() as u64 <= budget {
            if let Some(i) = sampled.iter().find(|i| !held.contains(i)) {
                return Err(format!("set {id}: sampled coordinate {i} evicted"));
            }
        } else if (held.iter().filter(|i| inside(i)).count() as u64) < budget {
            return Err(format!("set {id}: fewer than {budget} held"));
        }
    }
    Ok(())
}

fn l0_exact_regime(seed: u64) -> Result<String, String> {
    let family = Family::intervals(500, 50).unwrap();
    let mut cfg = SketchConfig::new(SketchKind::L0, Model::Insertion, 500, Some(family), 0.5, seed);
    cfg.replicas = Some(3);
    let mut sk = AnySketch::build(&cfg).map_err(|e| e.to_string())?;
    for i in (1..=500u64).step_by(3) {
        sk.update(Update { index: i, delta: 1.0 }).map_err(|e| e.to_string())?;
    }
    for (a, b) in [(1u64, 500u64), (100, 199), (7, 300)] {
        let want = (a..=b).filter(|i| (i - 1) % 3 == 0).count() as f64;
        let got = sk.query(&SetQuery::Interval(a, b)).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("{a}..{b}: {got} != {want}"));
        }
    }
    Ok("3 intervals exact".into())
}

fn lp_cancellation(seed: u64) -> Result<String, String> {
    let mut cfg = SketchConfig::new(SketchKind::LpAdditive, Model::Turnstile, 200, None, 0.5, seed);
    cfg.k = Some(40);
    let mut sk = AnySketch::build(&cfg).map_err(|e| e.to_string())?;
    for i in 1..=200u64 {
        sk.update(Update { index: i, delta: 2.0 }).map_err(|e| e.to_string())?;
    }
    for i in 1..=200u64 {
        sk.update(Update { index: i, delta: -2.0 }).map_err(|e| e.to_string())?;
    }
    let got = sk.query(&SetQuery::Interval(1, 200)).map_err(|e| e.to_string())?;
    if got != 0.0 {
        return Err(format!("estimate {got} after full cancellation"));
    }
    Ok("zero after deletions".into())
}

fn round_trip(seed: u64) -> Result<String, String> {
    let sys = setsystem::family_intervals(16, 4).unwrap();
    let cases = [
        (SketchKind::L0, Model::Insertion),
        (SketchKind::L1, Model::Insertion),
        (SketchKind::Priority, Model::Entrywise),
        (SketchKind::LpAdditive, Model::Turnstile),
    ];
    for (kind, model) in cases {
        let family = kind.needs_family().then(|| Family::explicit(sys.clone()));
        let mut cfg = SketchConfig::new(kind, model, 16, family, 0.5, seed);
        cfg.replicas = Some(3);
        cfg.m_bar = Some(100);
        cfg.k = Some(10);
        let mut sk = AnySketch::build(&cfg).map_err(|e| e.to_string())?;
        for i in 1..=16u64 {
            let delta = match model {
                Model::Turnstile => i as f64 - 8.5,
                _ => 1.0 + (i % 4) as f64,
            };
            sk.update(Update { index: i, delta }).map_err(|e| e.to_string())?;
        }
        let back = AnySketch::load(&sk.save()).map_err(|e| e.to_string())?;
        for (a, b) in [(1, 16), (3, 9), (10, 16)] {
            let q = SetQuery::Interval(a, b);
            let (x, y) = (sk.query(&q).map_err(|e| e.to_string())?, back.query(&q).map_err(|e| e.to_string())?);
            if x.to_bits() != y.to_bits() {
                return Err(format!("{kind} {a}..{b}: {x} vs {y}"));
            }
        }
    }
    Ok("4 kinds bit-exact".into())
}
