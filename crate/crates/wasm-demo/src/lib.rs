//! Browser bindings. Every export returns a JSON string so the page can stay
//! plain JavaScript.

use serde_json::{json, Value};
use subset_sketch::family::Family;
use subset_sketch::lp_additive::LpSetSketch;
use subset_sketch::oracle::{gen_stream, replay, GenKind, GenParams, Model, Update};
use subset_sketch::setsystem::{self, SetSystem};
use subset_sketch::subset_l0::L0Sketch;
use subset_sketch::SetQuery;
use wasm_bindgen::prelude::*;

const MAX_EXPLORE_N: usize = 16;

fn err(e: impl std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

fn family_system(kind: &str, n: usize, k: usize, seed: u64) -> subset_sketch::Result<SetSystem> {
    match kind {
        "intervals" => setsystem::family_intervals(n, k),
        "windows" => setsystem::family_windows(n, k),
        "singletons" => setsystem::family_singletons(n),
        "missing-few" => setsystem::family_missing_few(n, k),
        "random" => setsystem::family_random(n, k, 0.5, seed),
        _ => Err(subset_sketch::Error::UnknownKind(kind.to_string())),
    }
}

/// Incidence matrix, heavy-hitter and VC dimension of a small family.
#[wasm_bindgen]
pub fn explore_family(kind: &str, n: u32, k: u32, seed: u32) -> String {
    let n = n as usize;
    if n == 0 || n > MAX_EXPLORE_N {
        return err(format!("n must lie in [1, {MAX_EXPLORE_N}]"));
    }
    let sys = match family_system(kind, n, k as usize, seed as u64) {
        Ok(s) => s,
        Err(e) => return err(e),
    };
    let (hh, vc) = match (setsystem::hh_dim_exact(&sys), setsystem::vc_dim_exact(&sys)) {
        (Ok(h), Ok(v)) => (h, v),
        (Err(e), _) | (_, Err(e)) => return err(e),
    };
    let rows: Vec<Value> = (0..sys.len()).map(|id| json!(sys.members(id))).collect();
    json!({ "n": n, "sets": rows, "hh_dim": hh, "vc_dim": vc }).to_string()
}

/// Random insertions, then an ℓ0 estimate for `[a, b]` against the truth.
#[wasm_bindgen]
pub fn l0_interval(n: u32, length: u32, eps: f64, seed: u32, a: u32, b: u32) -> String {
    let run = || -> subset_sketch::Result<Value> {
        let n = n as u64;
        let family = Family::intervals(n, 1)?;
        let mut sk = L0Sketch::new(family, eps, seed as u64)?;
        let g = gen_stream(GenKind::Uniform, GenParams::new(n, length as u64), seed as u64)?;
        for u in &g.stream.updates {
            sk.update(u.index)?;
        }
        let v = replay(&g.stream);
        let q = SetQuery::Interval(a as u64, b as u64);
        let set = sk.family().resolve(&q)?;
        let truth = v.subset_norm(|i| (a as u64..=b as u64).contains(&i), 0.0);
        Ok(json!({
            "estimate": sk.estimate(set),
            "coarse": sk.coarse_estimate(set),
            "truth": truth,
            "stored": sk.stored(),
            "budget": sk.budget(),
            "levels": sk.ladder_len(),
        }))
    };
    run().map(|v| v.to_string()).unwrap_or_else(err)
}

/// Turnstile stream with a deleted prefix, then an additive ℓp estimate for `[a, b]`.
#[wasm_bindgen]
pub fn lp_interval(n: u32, p: f64, eps: f64, seed: u32, a: u32, b: u32, delete_fraction: f64) -> String {
    let run = || -> subset_sketch::Result<Value> {
        let n = n as u64;
        let mut sk = LpSetSketch::new(n, p, eps, seed as u64)?;
        let g = gen_stream(GenKind::Zipf, GenParams::new(n, 20 * n), seed as u64)?;
        let mut updates = g.stream.updates.clone();
        let cut = (updates.len() as f64 * delete_fraction.clamp(0.0, 1.0)) as usize;
        updates.extend(updates[..cut].iter().map(|u| Update { index: u.index, delta: -u.delta }).collect::<Vec<_>>());
        for u in &updates {
            sk.update(u.index, u.delta)?;
        }
        let stream = subset_sketch::oracle::Stream { model: Model::Turnstile, n, updates };
        let v = replay(&stream);
        let members: Vec<u64> = (a as u64..=b as u64).collect();
        Ok(json!({
            "estimate": sk.query(&members)?,
            "truth": v.subset_norm(|i| (a as u64..=b as u64).contains(&i), p),
            "allowed_error": eps * v.norm(p),
            "k": sk.k(),
            "counters": sk.count_sketch().counters().len(),
        }))
    };
    run().map(|v| v.to_string()).unwrap_or_else(err)
}
