use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subset_sketch::family::Family;
use subset_sketch::oracle::{gen_stream, GenKind, GenParams, Model, StreamReader};
use subset_sketch::setsystem::{self, SetSystem};
use subset_sketch::{AnySketch, Error, SetQuery, SketchConfig, SketchKind};

mod format;
mod selfcheck;

#[derive(Parser)]
#[command(name = "subsetsketch", version, about = "Subset-norm streaming sketches over a declared set system")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a stream once and write a sketch state file.
    Build(BuildArgs),
    /// Answer queries from a state file as `query_id<TAB>estimate`.
    Query(QueryArgs),
    /// Heavy-hitter dimension of a set system.
    Hhdim(HhdimArgs),
    /// Run the invariant suites at reduced scale.
    Selfcheck(SelfcheckArgs),
    /// Generate a synthetic stream.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct FamilyArgs {
    /// Set-system file: `n=<int>` then one set per line.
    #[arg(long, conflicts_with = "family")]
    sets: Option<PathBuf>,
    /// Built-in family: intervals:N:K, windows:N:L, singletons:N,
    /// missing-few:N:K, random:N:K:Q:SEED, power-set:N.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sketch: String,
    #[command(flatten)]
    fam: FamilyArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Norm exponent for priority and lp-additive sketches.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream file, or `-` for stdin.
    #[arg(long, default_value = "-")]
    stream: String,
    /// Universe size when neither the sets nor the stream header give it.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    m_bar: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    state: PathBuf,
    /// Queries: a set id, `a..b`, or a comma-separated index list.
    queries: Vec<String>,
    /// File with one query per line.
    #[arg(long)]
    queries_file: Option<PathBuf>,
}

#[derive(Args)]
struct HhdimArgs {
    #[command(flatten)]
    fam: FamilyArgs,
    /// Greedy passes when the universe is too large for exhaustive search.
    #[arg(long, default_value_t = 64)]
    passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// uniform, zipf, planted-subset, adversarial-turnstile or adversarial-sliding.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    length: u64,
    #[arg(long, default_value_t = 1.1)]
    skew: f64,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}: {1}")]
    Io(PathBuf, io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("selfcheck failed")]
    Selfcheck,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::ModelMismatch { .. }) => 3,
            CliError::Core(Error::QueryNotInSystem) => 4,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io(..) | CliError::Selfcheck => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn nums(parts: &[&str], want: usize, spec: &str) -> Result<Vec<u64>> {
    if parts.len() != want {
        return Err(CliError::Usage(format!("family {spec:?} expects {} fields", want - 1)));
    }
    parts[1..]
        .iter()
        .map(|p| p.parse().map_err(|_| CliError::Usage(format!("bad number {p:?} in family {spec:?}"))))
        .collect()
}

fn parse_family(spec: &str) -> Result<Family> {
    let parts: Vec<&str> = spec.split(':').collect();
    let f = match parts[0] {
        "intervals" => {
            let v = nums(&parts, 3, spec)?;
            Family::intervals(v[0], v[1])?
        }
        "windows" => {
            let v = nums(&parts, 3, spec)?;
            Family::windows(v[0], v[1])?
        }
        "singletons" => {
            let v = nums(&parts, 2, spec)?;
            Family::explicit(setsystem::family_singletons(v[0] as usize)?)
        }
        "missing-few" => {
            let v = nums(&parts, 3, spec)?;
            Family::explicit(setsystem::family_missing_few(v[0] as usize, v[1] as usize)?)
        }
        "power-set" => {
            let v = nums(&parts, 2, spec)?;
            Family::explicit(setsystem::family_power_set(v[0] as usize)?)
        }
        "random" => {
            if parts.len() != 5 {
                return Err(CliError::Usage(format!("family {spec:?} expects N:K:Q:SEED")));
            }
            let bad = |p: &str| CliError::Usage(format!("bad field {p:?} in family {spec:?}"));
            let n: usize = parts[1].parse().map_err(|_| bad(parts[1]))?;
            let k: usize = parts[2].parse().map_err(|_| bad(parts[2]))?;
            let q: f64 = parts[3].parse().map_err(|_| bad(parts[3]))?;
            let seed: u64 = parts[4].parse().map_err(|_| bad(parts[4]))?;
            Family::explicit(setsystem::family_random(n, k, q, seed)?)
        }
        other => return Err(CliError::Usage(format!("unknown family {other:?}"))),
    };
    Ok(f)
}

fn load_family(args: &FamilyArgs) -> Result<Option<Family>> {
    match (&args.sets, &args.family) {
        (Some(path), _) => Ok(Some(Family::explicit(SetSystem::parse(&read_file(path)?)?))),
        (None, Some(spec)) => parse_family(spec).map(Some),
        (None, None) => Ok(None),
    }
}

fn parse_query(text: &str) -> Result<SetQuery> {
    let t = text.trim();
    let bad = || CliError::Core(Error::Parse { line: 0, msg: format!("bad query {t:?}") });
    if let Some((a, b)) = t.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok(SetQuery::Interval(a, b));
    }
    if t.contains(',') || t.starts_with('[') {
        let inner = t.trim_start_matches('[').trim_end_matches(']');
        let m = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(SetQuery::Members(m));
    }
    t.parse().map(SetQuery::Id).map_err(|_| bad())
}

fn open_stream(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let f = File::open(path).map_err(|e| CliError::Io(path.into(), e))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let kind: SketchKind = args.sketch.parse()?;
    let family = load_family(&args.fam)?;
    if kind.needs_family() && family.is_none() {
        return Err(CliError::Usage(format!("--sketch {kind} needs --sets or --family")));
    }
    let flag_model: Option<Model> = args.model.as_deref().map(str::parse).transpose()?;
    let reader = StreamReader::new(open_stream(&args.stream)?, flag_model.unwrap_or(Model::Insertion))?;
    let header = reader.header();
    let model = match (flag_model, header.model) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Usage(format!("--model {a} disagrees with the stream header model={b}")));
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(CliError::Usage("no --model flag and no stream header".into())),
    };
    kind.check_model(model)?;
    let n = family
        .as_ref()
        .map(Family::n)
        .or(args.n)
        .or(header.n)
        .ok_or_else(|| CliError::Usage("universe size unknown: pass --n or a stream header".into()))?;
    let mut cfg = SketchConfig::new(kind, model, n, family, args.eps, args.seed);
    if matches!(kind, SketchKind::Priority | SketchKind::LpAdditive) {
        cfg.p_norm = args.p;
    }
    cfg.replicas = args.replicas;
    cfg.m_bar = args.m_bar;
    cfg.k = args.k;
    let mut sk = AnySketch::build(&cfg)?;
    log::info!("{kind} sketch with {} replicas over n = {n}", sk.replica_count());
    let mut batch = Vec::with_capacity(4096);
    let mut total = 0u64;
    for u in reader {
        batch.push(u?);
        if batch.len() == batch.capacity() {
            sk.update_batch(&batch)?;
            total += batch.len() as u64;
            batch.clear();
        }
    }
    sk.update_batch(&batch)?;
    total += batch.len() as u64;
    log::info!("{total} updates, {} stored words", sk.stored());
    std::fs::write(&args.out, sk.save()).map_err(|e| CliError::Io(args.out.clone(), e))?;
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    let sk = AnySketch::load(&read_file(&args.state)?)?;
    let mut texts = args.queries.clone();
    if let Some(path) = &args.queries_file {
        for line in read_file(path)?.lines() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                texts.push(t.to_string());
            }
        }
    }
    let parsed = texts.iter().map(|t| parse_query(t)).collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    for (t, q) in texts.iter().zip(&parsed) {
        let est = sk.query(q)?;
        out.push_str(&format!("{t}\t{}\n", format::sig6(est)));
    }
    io::stdout().write_all(out.as_bytes()).map_err(|e| CliError::Io("stdout".into(), e))?;
    Ok(())
}

fn hhdim(args: HhdimArgs) -> Result<()> {
    let family = load_family(&args.fam)?.ok_or_else(|| CliError::Usage("pass --sets or --family".into()))?;
    let (value, mode) = match &family {
        Family::Intervals(f) => (f.hh_dim(), "exact"),
        Family::Explicit(s) if s.n() <= setsystem::EXACT_MAX_N => (setsystem::hh_dim_exact(s)? as u64, "exact"),
        Family::Explicit(s) => (setsystem::hh_dim_greedy(s, args.passes, args.seed) as u64, "greedy-lower-bound"),
    };
    println!("{value}\t{mode}");
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let kind: GenKind = args.kind.parse()?;
    let mut params = GenParams::new(args.n, args.length);
    params.skew = args.skew;
    if let Some(w) = args.window {
        params.window = w;
    }
    let g = gen_stream(kind, params, args.seed)?;
    let mut text = g.stream.to_text();
    if let Some((a, b)) = g.planted {
        text.push_str(&format!("# planted={a}..{b}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(path.clone(), e))?,
        None => {
            let mut w = BufWriter::new(io::stdout());
            w.write_all(text.as_bytes()).map_err(|e| CliError::Io("stdout".into(), e))?;
        }
    }
    Ok(())
}

fn init_threads() {
    let Ok(v) = std::env::var("SUBSETSKETCH_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(t) if t > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                log::warn!("thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring SUBSETSKETCH_THREADS={v:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Hhdim(a) => hhdim(a),
        Command::Selfcheck(a) => {
            if selfcheck::run(a.seed) {
                Ok(())
            } else {
                Err(CliError::Selfcheck)
            }
        }
        Command::Gen(a) => gen(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subsetsketch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
