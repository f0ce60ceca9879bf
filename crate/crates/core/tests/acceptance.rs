//! One pass/fail line per acceptance criterion. Run a subset by passing
//! criterion numbers: `cargo test --test acceptance -- 3 5`.

mod common;

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use subset_sketch::bounded_sampler::BoundedSampler;
use subset_sketch::family::{Family, ResolvedSet, SetQuery};
use subset_sketch::hashing::derive_seed;
use subset_sketch::l1_adapter::L1Sketch;
use subset_sketch::lp_additive::{exact_order_statistic, exact_tail_f2, LpSetSketch};
use subset_sketch::oracle::{gen_stream, GenKind, GenParams, Model, Update};
use subset_sketch::priority_sampling::PrioritySketch;
use subset_sketch::setsystem::{self, SetSystem};
use subset_sketch::subset_l0::L0Sketch;
use subset_sketch::{AnySketch, SketchConfig, SketchKind};

use common::{fraction, hh_dim, masks, mean_var, vc_dim};

const MASTER: u64 = 0x5eed_2024;

// 2: sampler space and coverage
const C2_TRIPLES: u64 = 500;

// 3: single-rate unbiasedness
const C3_SUPPORT: u64 = 10_000;
const C3_RATE: f64 = 0.01;
const C3_SEEDS: u64 = 10_000;
const C3_MEAN_TOL: f64 = 0.01;
const C3_VAR_TOL: f64 = 0.15;

// 4, 5: ℓ0 end to end and the coarse bracket
const C4_N: u64 = 10_000;
const C4_EPS: f64 = 0.1;
const C4_SEEDS: u64 = 200;
const C4_QUERIES: usize = 10;
const C4_MIN_RATE: f64 = 0.75;
const C5_MIN_RATE: f64 = 0.95;

// 6: ℓ1
const C6_N: u64 = 100;
const C6_LEN: u64 = 10_000;
const C6_EPS: f64 = 0.1;
const C6_SEEDS: u64 = 200;
const C6_QUERIES: usize = 10;
const C6_MIN_RATE: f64 = 0.75;

// 7: priority sampling
const C7_N: usize = 1000;
const C7_K: usize = 101;
const C7_SEEDS: u64 = 10_000;
const C7_MEAN_TOL: f64 = 0.01;
const C7_VAR_FACTOR: f64 = 1.1;

// 8: additive ℓp
const C8_N: u64 = 1000;
const C8_EPS: f64 = 0.2;
const C8_SEEDS: u64 = 200;
const C8_MIN_RATE: f64 = 0.85;
/// Tail constants fitted once on seeds disjoint from the test seeds.
const C8_TAIL_CONST: [(f64, f64); 4] = [(0.5, 0.37), (1.0, 1.04), (1.5, 3.08), (2.0, 0.92)];

// 9: structural bounds
const C9_SYSTEMS: u64 = 200;

// 10: turnstile boundary
const C10_N: u64 = 1 << 10;
const C10_EPS: f64 = 0.2;
const C10_SEEDS: u64 = 200;
const C10_MIN_DEFEAT: f64 = 0.90;
const C10_MIN_LP: f64 = 0.85;

// 11: state files
const C11_CASES: u64 = 50;

type Outcome = (bool, String);

fn rng(label: &str, t: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(MASTER, label, t))
}

fn c1_hhdim_table() -> Outcome {
    let mut bad = Vec::new();
    let mut systems = 0;
    let mut check = |name: String, sys: &SetSystem, want: Option<usize>, bad: &mut Vec<String>| -> usize {
        systems += 1;
        let oracle = hh_dim(sys.n(), &masks(sys));
        let lib = setsystem::hh_dim_exact(sys).unwrap();
        if lib != oracle || want.is_some_and(|w| w != oracle) {
            bad.push(format!("{name}: oracle {oracle} library {lib} expected {want:?}"));
        }
        oracle
    };
    for n in 1..=12usize {
        check(format!("singletons n={n}"), &setsystem::family_singletons(n).unwrap(), Some(n), &mut bad);
        let mut r = rng("c1-blocks", n as u64);
        for k in 1..=n {
            let mut cols: Vec<usize> = (1..=n).collect();
            cols.shuffle(&mut r);
            let mut blocks: Vec<Vec<usize>> = (0..k).map(|b| vec![cols[b]]).collect();
            for &c in &cols[k..] {
                blocks[r.random_range(0..k)].push(c);
            }
            let sys = SetSystem::new(n, blocks).unwrap();
            check(format!("{k} disjoint sets n={n}"), &sys, Some(k), &mut bad);
        }
        for k in 0..n.min(4) {
            let sys = setsystem::family_missing_few(n, k).unwrap();
            check(format!("missing-few n={n} k={k}"), &sys, Some((k + 1).min(n)), &mut bad);
        }
        let mut prev = usize::MAX;
        for k in 1..=n {
            let sys = setsystem::family_intervals(n, k).unwrap();
            let closed = setsystem::intervals_hh_dim(n as u64, k as u64) as usize;
            let implicit = Family::intervals(n as u64, k as u64).unwrap();
            let implicit = match implicit {
                Family::Intervals(f) => f.hh_dim() as usize,
                Family::Explicit(_) => unreachable!(),
            };
            let got = check(format!("intervals n={n} k={k}"), &sys, Some(closed), &mut bad);
            if implicit != got {
                bad.push(format!("implicit intervals n={n} k={k}: {implicit} vs {got}"));
            }
            if got > prev {
                bad.push(format!("intervals n={n}: not monotone at k={k}"));
            }
            prev = got;
        }
        if n % 2 == 0 && n >= 2 {
            let sets: Vec<Vec<usize>> = (1..=n / 2).map(|a| (a..=a + n / 2).collect()).collect();
            let sys = SetSystem::new(n, sets).unwrap();
            debug_assert_eq!(masks(&sys), common::half_intervals(n));
            let got = check(format!("half-intervals n={n}"), &sys, None, &mut bad);
            if got > 3 {
                bad.push(format!("half-intervals n={n}: {got} > 3"));
            }
        }
    }
    (bad.is_empty(), summary(systems, &bad))
}

fn summary(cases: usize, bad: &[String]) -> String {
    match bad.first() {
        None => format!("{cases} cases, 0 violations"),
        Some(b) => format!("{cases} cases, {} violations; first: {b}", bad.len()),
    }
}

/// Lemma-level check of one sampler against the offline sampling vector.
fn sampler_violations(
    family: &Family,
    sets: &[(ResolvedSet, u32)],
    hh: usize,
    s: &BoundedSampler,
    support: u32,
    budget: u64,
) -> Option<String> {
    let held = s.held().iter().fold(0u32, |m, &i| m | 1 << (i - 1));
    if held.count_ones() as u64 > budget * hh as u64 {
        return Some(format!("|H| = {} > {budget}·{hh}", held.count_ones()));
    }
    let xi = (1..=32u64)
        .filter(|&i| i as usize <= family.n() as usize && common::xi(s.seed(), s.rate(), i))
        .fold(0u32, |m, i| m | 1 << (i - 1));
    for &(set, mask) in sets {
        let sampled = xi & mask & support;
        if sampled.count_ones() as u64 <= budget {
            if sampled & !held != 0 {
                return Some(format!("{set:?}: sampled support not retained"));
            }
        } else if ((held & mask).count_ones() as u64) < budget {
            return Some(format!("{set:?}: fewer than {budget} retained"));
        }
        if s.count(family, set) != (held & mask).count_ones() as u64 {
            return Some(format!("{set:?}: tracked count differs from |H ∩ s|"));
        }
    }
    None
}

fn c2_sampler_invariants() -> Outcome {
    let bad: Vec<String> = (0..C2_TRIPLES)
        .into_par_iter()
        .filter_map(|t| {
            let mut r = rng("c2", t);
            let n = r.random_range(3..=12usize);
            let (family, sets): (Family, Vec<(ResolvedSet, u32)>) = match t % 4 {
                0 | 1 => {
                    let q = [0.2, 0.35, 0.5][r.random_range(0..3)];
                    let sys = setsystem::family_random(n, r.random_range(1..=8), q, r.random()).unwrap();
                    let m = masks(&sys);
                    let sets = (0..sys.len()).map(|id| (ResolvedSet::Explicit(id), m[id])).collect();
                    (Family::explicit(sys), sets)
                }
                2 => {
                    let k = r.random_range(1..=n);
                    let mut sets = Vec::new();
                    for a in 1..=n as u64 {
                        for b in a + k as u64 - 1..=n as u64 {
                            sets.push((ResolvedSet::Interval(a, b), ((1u32 << b) - 1) & !((1u32 << (a - 1)) - 1)));
                        }
                    }
                    (Family::intervals(n as u64, k as u64).unwrap(), sets)
                }
                _ => {
                    let sys = setsystem::family_missing_few(n, r.random_range(0..=2)).unwrap();
                    let m = masks(&sys);
                    let sets = (0..sys.len()).map(|id| (ResolvedSet::Explicit(id), m[id])).collect();
                    (Family::explicit(sys), sets)
                }
            };
            let masks_only: Vec<u32> = sets.iter().map(|s| s.1).collect();
            let hh = hh_dim(n, &masks_only);
            let budget = r.random_range(1..=4u64);
            let rate = [1.0, 0.5, 0.25][r.random_range(0..3)];
            let mut s = BoundedSampler::new(&family, rate, budget, r.random());
            let mut support = 0u32;
            for _ in 0..r.random_range(0..=3 * n) {
                let a = r.random_range(1..=n as u64);
                support |= 1 << (a - 1);
                s.update(&family, a);
                if let Some(e) = sampler_violations(&family, &sets, hh, &s, support, budget) {
                    return Some(format!("triple {t}: {e}"));
                }
            }
            None
        })
        .collect();
    (bad.is_empty(), summary(C2_TRIPLES as usize, &bad))
}

fn c3_single_rate() -> Outcome {
    let family = Family::intervals(C3_SUPPORT, C3_SUPPORT).unwrap();
    let whole = ResolvedSet::Interval(1, C3_SUPPORT);
    let est: Vec<f64> = (0..C3_SEEDS)
        .into_par_iter()
        .map(|t| {
            let mut s = BoundedSampler::new(&family, C3_RATE, C3_SUPPORT + 1, derive_seed(MASTER, "c3", t));
            for i in 1..=C3_SUPPORT {
                s.update(&family, i);
            }
            s.count(&family, whole) as f64 / C3_RATE
        })
        .collect();
    let (m, v) = mean_var(&est);
    let truth = C3_SUPPORT as f64;
    let var_want = (1.0 - C3_RATE) / C3_RATE * truth;
    let ok = (m - truth).abs() <= C3_MEAN_TOL * truth && (v - var_want).abs() <= C3_VAR_TOL * var_want;
    (ok, format!("mean {m:.1} (want {truth} ± 1%), variance {v:.0} (want {var_want:.0} ± 15%)"))
}

/// Planted-subset streams with the planted interval plus nine fixed long intervals.
struct L0Run {
    truth: Vec<f64>,
    estimate: Vec<f64>,
    ladder: Vec<f64>,
    coarse: Vec<f64>,
}

fn c4_runs() -> Vec<L0Run> {
    let n = C4_N;
    let mut qr = rng("c4-queries", 0);
    let fixed: Vec<(u64, u64)> = (1..C4_QUERIES)
        .map(|_| {
            let len = qr.random_range(n / 4..=n);
            let a = qr.random_range(1..=n - len + 1);
            (a, a + len - 1)
        })
        .collect();
    (0..C4_SEEDS)
        .into_par_iter()
        .map(|t| {
            let g = gen_stream(GenKind::PlantedSubset, GenParams::new(n, 0), derive_seed(MASTER, "c4-stream", t)).unwrap();
            let mut queries = vec![g.planted.unwrap()];
            queries.extend(&fixed);
            let family = Family::intervals(n, n / 4).unwrap();
            let mut sk = L0Sketch::new(family, C4_EPS, derive_seed(MASTER, "c4-sketch", t)).unwrap();
            let mut present = vec![false; n as usize + 1];
            for u in &g.stream.updates {
                sk.update(u.index).unwrap();
                present[u.index as usize] = true;
            }
            let mut run = L0Run { truth: vec![], estimate: vec![], ladder: vec![], coarse: vec![] };
            for &(a, b) in &queries {
                let set = sk.family().resolve(&SetQuery::Interval(a, b)).unwrap();
                run.truth.push((a..=b).filter(|&i| present[i as usize]).count() as f64);
                run.estimate.push(sk.estimate(set));
                run.ladder.push(sk.ladder_estimate(set));
                run.coarse.push(sk.coarse_estimate(set));
            }
            run
        })
        .collect()
}

fn per_query_rate(runs: usize, queries: usize, hit: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    (0..queries).map(|q| fraction((0..runs).filter(|&r| hit(r, q)).count(), runs)).collect()
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn relative_ok(est: f64, truth: f64, eps: f64) -> bool {
    (est - truth).abs() <= eps * truth
}

fn c4_l0_end_to_end(runs: &[L0Run]) -> Outcome {
    let rate = per_query_rate(runs.len(), C4_QUERIES, |r, q| relative_ok(runs[r].estimate[q], runs[r].truth[q], C4_EPS));
    let ladder = per_query_rate(runs.len(), C4_QUERIES, |r, q| relative_ok(runs[r].ladder[q], runs[r].truth[q], C4_EPS));
    let ok = min(&rate) >= C4_MIN_RATE && min(&ladder) >= C4_MIN_RATE;
    (
        ok,
        format!(
            "min per-query success {:.3} (sampling ladder alone {:.3}), need {C4_MIN_RATE}",
            min(&rate),
            min(&ladder)
        ),
    )
}

fn c5_coarse_bracket(runs: &[L0Run]) -> Outcome {
    let rate = per_query_rate(runs.len(), C4_QUERIES, |r, q| {
        let (z, x) = (runs[r].coarse[q], runs[r].truth[q]);
        x < z && z < 8.0 * x
    });
    (min(&rate) >= C5_MIN_RATE, format!("min per-query bracket rate {:.3}, need {C5_MIN_RATE}", min(&rate)))
}

fn c6_l1() -> Outcome {
    let n = C6_N;
    let mut qr = rng("c6-queries", 0);
    let queries: Vec<(u64, u64)> = (0..C6_QUERIES)
        .map(|_| {
            let a = qr.random_range(1..=n);
            (a, qr.random_range(a..=n))
        })
        .collect();
    let exact_limit = 100.0 / (C6_EPS * C6_EPS);
    let runs: Vec<(Vec<bool>, Vec<bool>, usize, usize)> = (0..C6_SEEDS)
        .into_par_iter()
        .map(|t| {
            let g = gen_stream(GenKind::Zipf, GenParams::new(n, C6_LEN), derive_seed(MASTER, "c6-stream", t)).unwrap();
            let family = Family::intervals(n, 1).unwrap();
            let mut sk = L1Sketch::new(family, C6_EPS, derive_seed(MASTER, "c6-sketch", t), Some(C6_LEN)).unwrap();
            let mut counts = vec![0f64; n as usize + 1];
            for u in &g.stream.updates {
                sk.update(u.index).unwrap();
                counts[u.index as usize] += 1.0;
            }
            let (mut ok, mut ladder_ok, mut exact_cases, mut exact_hits) = (vec![], vec![], 0, 0);
            for &(a, b) in &queries {
                let truth: f64 = (a..=b).map(|i| counts[i as usize]).sum();
                let q = SetQuery::Interval(a, b);
                let est = sk.query(&q).unwrap();
                let set = sk.inner().family().resolve(&q).unwrap();
                ok.push(relative_ok(est, truth, C6_EPS));
                ladder_ok.push(relative_ok(sk.inner().ladder_estimate(set), truth, C6_EPS));
                if truth <= exact_limit {
                    exact_cases += 1;
                    exact_hits += (est == truth) as usize;
                }
            }
            (ok, ladder_ok, exact_cases, exact_hits)
        })
        .collect();
    let rate = per_query_rate(runs.len(), C6_QUERIES, |r, q| runs[r].0[q]);
    let ladder = per_query_rate(runs.len(), C6_QUERIES, |r, q| runs[r].1[q]);
    let cases: usize = runs.iter().map(|r| r.2).sum();
    let exact: usize = runs.iter().map(|r| r.3).sum();
    let ok = min(&rate) >= C6_MIN_RATE && min(&ladder) >= C6_MIN_RATE && exact == cases;
    (
        ok,
        format!(
            "min per-query success {:.3} (sampling ladder alone {:.3}), need {C6_MIN_RATE}; exact regime {exact}/{cases}",
            min(&rate),
            min(&ladder)
        ),
    )
}

fn c7_priority() -> Outcome {
    let n = C7_N;
    let mut r = rng("c7-data", 0);
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let mag = (1.0 - r.random::<f64>()).powf(-1.0 / 1.5);
            if r.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let mut half: Vec<usize> = (1..=n).collect();
    half.shuffle(&mut r);
    half.truncate(n / 2);
    let sets = vec![(1..=n).collect(), half, (n / 10..=n / 3).collect::<Vec<usize>>()];
    let truths: Vec<f64> = sets.iter().map(|s| s.iter().map(|&i| values[i - 1].abs()).sum()).collect();
    let system = Arc::new(SetSystem::new(n, sets).unwrap());
    let est: Vec<Vec<f64>> = (0..C7_SEEDS)
        .into_par_iter()
        .map(|t| {
            let mut sk = PrioritySketch::new(Arc::clone(&system), 1.0, C7_K, derive_seed(MASTER, "c7", t)).unwrap();
            for (i, &x) in values.iter().enumerate() {
                sk.update(i as u64 + 1, x).unwrap();
            }
            (0..system.len()).map(|j| sk.estimate(j)).collect()
        })
        .collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for (j, &w) in truths.iter().enumerate() {
        let col: Vec<f64> = est.iter().map(|e| e[j]).collect();
        let (m, v) = mean_var(&col);
        let bound = C7_VAR_FACTOR * w * w / (C7_K - 1) as f64;
        ok &= (m - w).abs() <= C7_MEAN_TOL * w && v <= bound;
        detail.push(format!("set {j}: mean/truth {:.4}, var/bound {:.3}", m / w, v / bound));
    }
    (ok, detail.join("; "))
}

/// A turnstile vector over `[n]`: every coordinate gets a signed integer of
/// magnitude at most 1000, then a tenth of them are deleted again.
fn c8_stream(n: u64, seed: u64) -> Vec<Update> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut ups: Vec<Update> = (1..=n)
        .map(|i| {
            let mag = r.random_range(1..=1000) as f64;
            Update { index: i, delta: if r.random_bool(0.5) { mag } else { -mag } }
        })
        .collect();
    let dels: Vec<Update> = ups
        .iter()
        .filter(|_| r.random_bool(0.1))
        .map(|u| Update { index: u.index, delta: -u.delta })
        .collect();
    ups.extend(dels);
    ups.shuffle(&mut r);
    ups
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn tail_scale(v: &[f64], p: f64, k: usize) -> f64 {
    let n = v.len() - 1;
    if p < 2.0 {
        k as f64 * lp_norm(v, p).powi(2)
    } else {
        k as f64 * (n as f64).log2() * lp_norm(v, 2.0).powi(2)
    }
}

/// `(additive ok, order statistic ok, tail ratio)` for one seed.
fn c8_run(p: f64, t: u64, label: &str) -> (bool, bool, f64) {
    let n = C8_N;
    let seed = derive_seed(MASTER, label, t);
    let ups = c8_stream(n, derive_seed(seed, "stream", 0));
    let mut v = vec![0f64; n as usize + 1];
    let mut sk = LpSetSketch::new(n, p, C8_EPS, derive_seed(seed, "sketch", 0)).unwrap();
    for u in &ups {
        sk.update(u.index, u.delta).unwrap();
        v[u.index as usize] += u.delta;
    }
    let mut r = ChaCha8Rng::seed_from_u64(derive_seed(seed, "subset", 0));
    let inside: Vec<bool> = (0..=n).map(|i| i > 0 && r.random_bool(0.5)).collect();
    let s: Vec<u64> = (1..=n).filter(|&i| inside[i as usize]).collect();
    let sv: Vec<f64> = (0..=n as usize).map(|i| if inside[i] { v[i] } else { 0.0 }).collect();
    let truth = lp_norm(&sv, p);
    let additive = (sk.query(&s).unwrap() - truth).abs() <= C8_EPS * lp_norm(&v, p);
    let nz: Vec<(u64, f64)> = (1..=n).filter(|&i| v[i as usize] != 0.0).map(|i| (i, v[i as usize])).collect();
    let os = exact_order_statistic(&nz, |i| inside[i as usize], p, sk.k(), sk.scale_source());
    let order = relative_ok(os, truth, C8_EPS);
    let tail = exact_tail_f2(&nz, sk.k(), sk.scale_source()) / tail_scale(&v, p, sk.k());
    (additive, order, tail)
}

fn c8_additive() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for &(p, c) in &C8_TAIL_CONST {
        let runs: Vec<(bool, bool, f64)> = (0..C8_SEEDS).into_par_iter().map(|t| c8_run(p, t, "c8")).collect();
        let a = fraction(runs.iter().filter(|r| r.0).count(), runs.len());
        let o = fraction(runs.iter().filter(|r| r.1).count(), runs.len());
        let tl = fraction(runs.iter().filter(|r| r.2 <= c).count(), runs.len());
        ok &= a >= C8_MIN_RATE && o >= C8_MIN_RATE && tl >= C8_MIN_RATE;
        detail.push(format!("p={p}: additive {a:.3}, order statistic {o:.3}, tail (C={c}) {tl:.3}"));
    }
    (ok, detail.join("; "))
}

fn c9_structure() -> Outcome {
    let bad: Vec<String> = (0..C9_SYSTEMS)
        .into_par_iter()
        .filter_map(|t| {
            let mut r = rng("c9", t);
            let n = r.random_range(2..=10usize);
            let pick = |r: &mut ChaCha8Rng| {
                let q = [0.2, 0.35, 0.5][r.random_range(0..3)];
                setsystem::family_random(n, r.random_range(1..=6), q, r.random()).unwrap()
            };
            let (a, b) = (pick(&mut r), pick(&mut r));
            let (ma, mb) = (masks(&a), masks(&b));
            let (ha, hb) = (hh_dim(n, &ma), hh_dim(n, &mb));
            let va = vc_dim(n, &ma);
            let u = hh_dim(n, &masks(&setsystem::union(&a, &b).unwrap()));
            let up = hh_dim(n, &masks(&setsystem::union_product(&a, &b).unwrap()));
            let selfu = hh_dim(n, &masks(&setsystem::union_product(&a, &a).unwrap()));
            let lib = (setsystem::hh_dim_exact(&a).unwrap(), setsystem::vc_dim_exact(&a).unwrap());
            let mut e = Vec::new();
            if va > ha {
                e.push(format!("VC {va} > HH {ha}"));
            }
            if u > ha + hb {
                e.push(format!("union {u} > {ha} + {hb}"));
            }
            if up > ha + hb {
                e.push(format!("union-product {up} > {ha} + {hb}"));
            }
            if selfu != ha {
                e.push(format!("self-union {selfu} != {ha}"));
            }
            if lib != (ha, va) {
                e.push(format!("library (HH, VC) {lib:?} vs oracle ({ha}, {va})"));
            }
            (!e.is_empty()).then(|| format!("system {t}: {}", e.join(", ")))
        })
        .collect();
    (bad.is_empty(), summary(C9_SYSTEMS as usize, &bad))
}

fn c10_turnstile_boundary() -> Outcome {
    let n = C10_N;
    let runs: Vec<(bool, bool)> = (0..C10_SEEDS)
        .into_par_iter()
        .map(|t| {
            let g = gen_stream(GenKind::AdversarialTurnstile, GenParams::new(n, 0), derive_seed(MASTER, "c10-stream", t))
                .unwrap();
            let (a, b) = g.planted.unwrap();
            let mut v = vec![0f64; n as usize + 1];
            let family = Family::intervals(n, n / 2).unwrap();
            let mut l0 = L0Sketch::new(family, C10_EPS, derive_seed(MASTER, "c10-l0", t)).unwrap();
            let mut lp = LpSetSketch::new(n, 1.0, C10_EPS, derive_seed(MASTER, "c10-lp", t)).unwrap();
            for u in &g.stream.updates {
                v[u.index as usize] += u.delta;
                l0.update(u.index).unwrap();
                lp.update(u.index, u.delta).unwrap();
            }
            let l0_truth = (a..=b).filter(|&i| v[i as usize] != 0.0).count() as f64;
            let l0_est = l0.query(&SetQuery::Interval(a, b)).unwrap();
            let defeated = (l0_est - l0_truth).abs() > l0_truth;
            let l1_truth: f64 = (a..=b).map(|i| v[i as usize].abs()).sum();
            let members: Vec<u64> = (a..=b).collect();
            let lp_ok = (lp.query(&members).unwrap() - l1_truth).abs() <= C10_EPS * lp_norm(&v, 1.0);
            (defeated, lp_ok)
        })
        .collect();
    let d = fraction(runs.iter().filter(|r| r.0).count(), runs.len());
    let l = fraction(runs.iter().filter(|r| r.1).count(), runs.len());
    (
        d >= C10_MIN_DEFEAT && l >= C10_MIN_LP,
        format!("insertion-only sketch defeated in {d:.3} (need {C10_MIN_DEFEAT}); additive sketch within bound in {l:.3} (need {C10_MIN_LP})"),
    )
}

fn c11_case(t: u64) -> Result<(), String> {
    let mut r = rng("c11", t);
    let kind = [SketchKind::L0, SketchKind::L1, SketchKind::Priority, SketchKind::LpAdditive][t as usize % 4];
    let n = r.random_range(8..=48u64);
    let model = match kind {
        SketchKind::L0 | SketchKind::L1 => Model::Insertion,
        SketchKind::Priority => Model::Entrywise,
        SketchKind::LpAdditive => [Model::Insertion, Model::Turnstile, Model::Entrywise][r.random_range(0..3)],
    };
    let sys = setsystem::family_random(n as usize, r.random_range(2..=10), 0.5, r.random()).unwrap();
    let family = match kind {
        SketchKind::L0 | SketchKind::L1 if r.random_bool(0.5) => Some(Family::intervals(n, r.random_range(1..=n)).unwrap()),
        SketchKind::LpAdditive => None,
        _ => Some(Family::explicit(sys.clone())),
    };
    let mut cfg = SketchConfig::new(kind, model, n, family.clone(), r.random_range(0.2..0.7), r.random());
    cfg.replicas = Some(r.random_range(1..=3));
    cfg.k = Some(2 * r.random_range(3..=20));
    cfg.m_bar = Some(400);
    if kind != SketchKind::L0 {
        cfg.p_norm = [0.5, 1.0, 1.5, 2.0][r.random_range(0..4)];
    }
    let mut sk = AnySketch::build(&cfg).map_err(|e| e.to_string())?;
    let mut order: Vec<u64> = (1..=n).collect();
    order.shuffle(&mut r);
    for &i in order.iter().take(r.random_range(0..=n as usize)) {
        let delta = match model {
            Model::Insertion => r.random_range(1..=3) as f64,
            Model::Turnstile => r.random_range(-4..=4) as f64,
            Model::Entrywise => r.random_range(1..=40) as f64 / 8.0,
        };
        if delta != 0.0 {
            sk.update(Update { index: i, delta }).map_err(|e| e.to_string())?;
        }
    }
    let text = sk.save();
    let back = AnySketch::load(&text).map_err(|e| e.to_string())?;
    if back.save() != text {
        return Err(format!("case {t} ({kind}): re-saved state differs"));
    }
    let mut queries = Vec::new();
    match &family {
        Some(Family::Explicit(s)) => queries.extend((0..s.len()).map(SetQuery::Id)),
        Some(Family::Intervals(f)) => {
            for _ in 0..8 {
                let a = r.random_range(1..=n - f.min_len + 1);
                queries.push(SetQuery::Interval(a, r.random_range(a + f.min_len - 1..=n)));
            }
        }
        None => {
            for _ in 0..8 {
                queries.push(SetQuery::Members((1..=n).filter(|_| r.random_bool(0.5)).collect()));
            }
        }
    }
    for q in &queries {
        let (x, y) = (sk.query(q).map_err(|e| e.to_string())?, back.query(q).map_err(|e| e.to_string())?);
        if x.to_bits() != y.to_bits() {
            return Err(format!("case {t} ({kind}) {q:?}: {x} vs {y}"));
        }
    }
    Ok(())
}

fn c11_round_trip() -> Outcome {
    let bad: Vec<String> = (0..C11_CASES).into_par_iter().filter_map(|t| c11_case(t).err()).collect();
    (bad.is_empty(), summary(C11_CASES as usize, &bad))
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: usize| only.is_empty() || only.contains(&c);
    let mut l0_runs: Option<Vec<L0Run>> = None;
    let mut failed = 0;
    for c in 1..=11usize {
        if !wanted(c) {
            continue;
        }
        let start = Instant::now();
        let (name, (ok, detail)) = match c {
            1 => ("hhdim-table", c1_hhdim_table()),
            2 => ("sampler-space-and-coverage", c2_sampler_invariants()),
            3 => ("single-rate-unbiased", c3_single_rate()),
            4 => ("l0-relative-error", c4_l0_end_to_end(l0_runs.get_or_insert_with(c4_runs))),
            5 => ("coarse-bracket", c5_coarse_bracket(l0_runs.get_or_insert_with(c4_runs))),
            6 => ("l1-relative-error", c6_l1()),
            7 => ("priority-mean-variance", c7_priority()),
            8 => ("lp-additive-error", c8_additive()),
            9 => ("vc-subadditivity-union-product", c9_structure()),
            10 => ("turnstile-boundary", c10_turnstile_boundary()),
            _ => ("state-round-trip", c11_round_trip()),
        };
        failed += !ok as usize;
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {c:>2} {name}: {detail} [{secs:.1}s]", if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
