//! `bicond`: command-line front end.
//!
//! Exit codes: 0 on success, 1 when arguments or configuration are invalid,
//! 2 when a computation fails or `verify` finds a failing check.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bicond::bridge::{bridge_stats, write_ndjson, BridgeSampler, SampleRecord, SamplerKind};
use bicond::exactdist::llt_discrepancy;
use bicond::genfun::{ClassifyOptions, Descriptor, Family, RegimeKind, WeightSequence};
use bicond::harness::verify::verify_all;
use bicond::harness::{
    fit_exponent, replica_rng, run, weights_from, ExperimentConfig, ExperimentResult, Rule, Statistic, Target,
};
use bicond::lukas::TreeSampler;
use bicond::mapbij::{scaling_s, scaling_s_general, MapSampler};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bicond", version, about = "Biconditioned bridges, trees and maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sup distance between exact point probabilities and the local limit density.
    Llt(Shared),
    /// Monte Carlo statistics of conditioned bridges.
    Bridge(Sweep),
    /// Monte Carlo statistics of trees with `n` vertices and `K_n` leaves.
    Tree(Sweep),
    /// Monte Carlo statistics of maps built from labelled trees.
    Map(Sweep),
    /// Distance scaling of maps, or the function S(x) with `--x`.
    Scaling(ScalingArgs),
    /// Exhaustive small-instance oracle checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    /// Family name: geometric, tabulated, bernoulli-step, uniform-map-step, map-induced, stable-example.
    #[arg(long)]
    family: Option<String>,
    /// Extra family parameters as a JSON object, e.g. '{"ratio": 0.5}'.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated weights for `tabulated`.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Comma-separated `q_1, q_2, ...` for `map-induced`.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Accept periodic weights such as binary offspring.
    #[arg(long)]
    lattice: bool,
}

#[derive(Args, Clone)]
struct Output {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Clone)]
struct Shared {
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Endpoint rule, e.g. 0.5n or ceil(n^1.5).
    #[arg(long)]
    xn: Option<String>,
    /// Leaf-count rule, e.g. floor(n/3).
    #[arg(long)]
    kn: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    replicas: usize,
    /// Force the regime used for scales.
    #[arg(long)]
    regime: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    shared: Shared,
    /// Bridge sampler: auto, exact, rejection, split.
    #[arg(long, default_value = "auto")]
    sampler: String,
    /// Comma-separated statistics (kebab-case names).
    #[arg(long, value_delimiter = ',')]
    stats: Vec<String>,
    /// Run a TOML or JSON experiment file instead of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the sampled objects as JSON lines instead of statistics.
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    shared: Shared,
    /// Evaluate S at these points instead of sampling.
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 7)]
    max_n: usize,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Checks,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Checks) => ExitCode::from(2),
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Llt(s) => llt(s),
        Command::Bridge(s) => sweep(s, Target::Bridge),
        Command::Tree(s) => sweep(s, Target::Tree),
        Command::Map(s) => sweep(s, Target::Map),
        Command::Scaling(s) => scaling(s),
        Command::Verify(v) => verify(v),
    }
}

fn descriptor(f: &FamilyArgs) -> Result<Descriptor, Failure> {
    let name = f.family.as_deref().ok_or_else(|| usage("--family is required"))?;
    let mut obj = serde_json::Map::new();
    obj.insert("family".into(), json!(name));
    if let Some(p) = &f.params {
        match serde_json::from_str::<Value>(p).map_err(|e| usage(format!("--params: {e}")))? {
            Value::Object(m) => obj.extend(m),
            _ => return Err(usage("--params must be a JSON object")),
        }
    }
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(k.into(), v);
        }
    };
    put("ratio", f.ratio.map(|v| json!(v)));
    put("scale", f.scale.map(|v| json!(v)));
    put("alpha", f.alpha.map(|v| json!(v)));
    put("tabulated", f.weights.as_ref().map(|v| json!(v)));
    put("q", f.q.as_ref().map(|v| json!(v)));
    serde_json::from_value(Value::Object(obj)).map_err(|e| usage(format!("family: {e}")))
}

fn weights(f: &FamilyArgs) -> Result<WeightSequence, Failure> {
    weights_from(descriptor(f)?, f.lattice).map_err(usage)
}

fn rule(src: Option<&String>, flag: &str) -> Result<Rule, Failure> {
    let src = src.ok_or_else(|| usage(format!("{flag} is required")))?;
    Rule::parse(src).map_err(usage)
}

fn need_n(s: &Shared) -> Result<(), Failure> {
    if s.n.is_empty() {
        return Err(usage("--n is required"));
    }
    Ok(())
}

fn classify_options(s: &Shared) -> Result<ClassifyOptions, Failure> {
    let force = match &s.regime {
        Some(r) => Some(RegimeKind::parse(r).ok_or_else(|| usage(format!("unknown regime {r:?}")))?),
        None => None,
    };
    Ok(ClassifyOptions {
        force,
        ..ClassifyOptions::default()
    })
}

fn sink(o: &Output) -> Result<Box<dyn Write>, Failure> {
    Ok(match &o.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).map_err(runtime)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Writes serialisable rows as CSV or a JSON array.
fn emit<T: serde::Serialize>(o: &Output, rows: &[T]) -> Result<(), Failure> {
    let mut out = sink(o)?;
    match o.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(runtime)?;
            writeln!(out).map_err(runtime)?;
        }
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            for r in rows {
                w.serialize(r).map_err(runtime)?;
            }
            w.flush().map_err(runtime)?;
        }
    }
    out.flush().map_err(runtime)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn llt(s: Shared) -> Result<(), Failure> {
    need_n(&s)?;
    let w = weights(&s.family)?;
    let xr = rule(s.xn.as_ref(), "--xn")?;
    let opts = classify_options(&s)?;
    let mut rows = Vec::new();
    for &n in &s.n {
        let x = xr.value(n).map_err(usage)?;
        rows.push(llt_discrepancy(&w, n, x, &opts).map_err(runtime)?);
    }
    emit(&s.output, &rows)
}

fn default_stats(t: Target) -> Vec<Statistic> {
    match t {
        Target::Bridge => vec![Statistic::SumSq, Statistic::SumSqScaled, Statistic::MaxSqRatio, Statistic::ArgmaxFrac],
        Target::Tree => vec![Statistic::SumSq, Statistic::SumSqScaled, Statistic::MaxInc, Statistic::LeavesMid],
        Target::Map => vec![Statistic::MeanDistance, Statistic::MaxDistance, Statistic::Sigma2, Statistic::MaxFaceDegree],
    }
}

fn config_from_flags(s: &Sweep, t: Target, name: &str) -> Result<ExperimentConfig, Failure> {
    let sh = &s.shared;
    need_n(sh)?;
    let (flag, src) = match t {
        Target::Bridge => ("--xn", sh.xn.as_ref()),
        _ => ("--kn", sh.kn.as_ref()),
    };
    let statistics = if s.stats.is_empty() {
        default_stats(t)
    } else {
        s.stats
            .iter()
            .map(|st| serde_json::from_value(json!(st)).map_err(|_| usage(format!("unknown statistic {st:?}"))))
            .collect::<Result<_, _>>()?
    };
    let cfg = ExperimentConfig {
        name: name.to_string(),
        family: descriptor(&sh.family)?,
        lattice: sh.family.lattice,
        target: t,
        rule: rule(src, flag)?,
        n_grid: sh.n.clone(),
        replicas: sh.replicas,
        seed: sh.seed,
        statistics,
        sampler: s.sampler.parse::<SamplerKind>().map_err(usage)?,
        regime: sh.regime.clone(),
        output: None,
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn write_result(o: &Output, r: &ExperimentResult) -> Result<(), Failure> {
    let mut out = sink(o)?;
    match o.format {
        Format::Json => writeln!(out, "{}", r.to_json()).map_err(runtime)?,
        Format::Csv => r.write_csv(&mut out).map_err(runtime)?,
    }
    out.flush().map_err(runtime)?;
    if r.failures.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = r.failures.iter().map(|(n, m)| format!("n = {n}: {m}")).collect();
        Err(runtime(msgs.join("; ")))
    }
}

fn sweep(s: Sweep, t: Target) -> Result<(), Failure> {
    let name = match t {
        Target::Bridge => "bridge",
        Target::Tree => "tree",
        Target::Map => "map",
    };
    let cfg = match &s.config {
        Some(p) => {
            let c = ExperimentConfig::load(p).map_err(usage)?;
            if c.target != t {
                return Err(usage(format!("config target is {:?}, not {name}", c.target)));
            }
            c
        }
        None => config_from_flags(&s, t, name)?,
    };
    if s.dump {
        return dump(&cfg, &s.shared.output);
    }
    let r = run(&cfg).map_err(runtime)?;
    write_result(&s.shared.output, &r)
}

/// One JSON line per sampled object.
fn dump(cfg: &ExperimentConfig, o: &Output) -> Result<(), Failure> {
    let w = cfg.weights().map_err(usage)?;
    let mut out = sink(o)?;
    for &n in &cfg.n_grid {
        let p = cfg.rule.value(n).map_err(usage)?;
        match cfg.target {
            Target::Bridge => {
                let b = BridgeSampler::new(&w, n, p, cfg.sampler).map_err(runtime)?;
                let mut recs = Vec::new();
                for r in 0..cfg.replicas {
                    let path = b.sample(&mut replica_rng(cfg.seed, n, r)).map_err(runtime)?;
                    let stats = bridge_stats(&path, &[0.25, 0.5, 0.75]);
                    recs.push(SampleRecord {
                        seed: cfg.seed,
                        replica: r as u64,
                        n,
                        x_n: p,
                        increments: Some(path.increments),
                        stats,
                    });
                }
                write_ndjson(&mut out, &recs).map_err(runtime)?;
            }
            Target::Tree => {
                let ts = TreeSampler::with_kind(&w, n, p, cfg.sampler).map_err(runtime)?;
                for r in 0..cfg.replicas {
                    let t = ts.sample(&mut replica_rng(cfg.seed, n, r)).map_err(runtime)?;
                    let line = serde_json::to_string(&t).map_err(runtime)?;
                    writeln!(out, "{line}").map_err(runtime)?;
                }
            }
            Target::Map => {
                let ms = MapSampler::new(&w, n, p).map_err(runtime)?;
                for r in 0..cfg.replicas {
                    let m = ms.sample(&mut replica_rng(cfg.seed, n, r)).map_err(runtime)?;
                    writeln!(out, "{}", m.map.to_json()).map_err(runtime)?;
                }
            }
        }
    }
    out.flush().map_err(runtime)
}

#[derive(serde::Serialize)]
struct ScalingRow {
    n: usize,
    k_n: usize,
    s_x: f64,
    mean_distance: f64,
    stderr: f64,
    rescaled_distance: f64,
    rescaled_stderr: f64,
    slope: f64,
    r2: f64,
}

#[derive(serde::Serialize)]
struct SRow {
    x: f64,
    s: f64,
}

fn scaling(a: ScalingArgs) -> Result<(), Failure> {
    let sh = &a.shared;
    if !a.x.is_empty() {
        let general = match sh.family.family.as_deref() {
            None => None,
            Some(_) => {
                let w = weights(&sh.family)?;
                (!matches!(w.family(), Family::MapInduced { q: None })).then_some(w)
            }
        };
        let rows = a
            .x
            .iter()
            .map(|&x| {
                let s = match &general {
                    Some(w) => scaling_s_general(w, x),
                    None => scaling_s(x),
                };
                s.map(|s| SRow { x, s }).map_err(usage)
            })
            .collect::<Result<Vec<_>, _>>()?;
        return emit(&sh.output, &rows);
    }
    let mut fam = sh.family.clone();
    if fam.family.is_none() {
        fam.family = Some("map-induced".into());
    }
    let s = Sweep {
        shared: Shared { family: fam, ..sh.clone() },
        sampler: "auto".into(),
        stats: vec!["mean-distance".into(), "rescaled-distance".into()],
        config: None,
        dump: false,
    };
    let cfg = config_from_flags(&s, Target::Map, "scaling")?;
    let r = run(&cfg).map_err(runtime)?;
    if !r.failures.is_empty() {
        return write_result(&sh.output, &r);
    }
    let pts: Vec<(f64, f64)> = cfg
        .n_grid
        .iter()
        .map(|&n| (n as f64, r.get(n, Statistic::MeanDistance).map_or(f64::NAN, |x| x.estimate)))
        .collect();
    let (slope, r2) = fit_exponent(&pts).unwrap_or((f64::NAN, f64::NAN));
    let rows = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let k = cfg.rule.value(n).map_err(usage)?;
            let md = r.get(n, Statistic::MeanDistance).ok_or_else(|| runtime("missing row"))?;
            let rd = r.get(n, Statistic::RescaledDistance).ok_or_else(|| runtime("missing row"))?;
            Ok(ScalingRow {
                n,
                k_n: k,
                s_x: scaling_s(k as f64 / n as f64).unwrap_or(f64::NAN),
                mean_distance: md.estimate,
                stderr: md.stderr,
                rescaled_distance: rd.estimate,
                rescaled_stderr: rd.stderr,
                slope,
                r2,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    emit(&sh.output, &rows)
}

fn verify(v: VerifyArgs) -> Result<(), Failure> {
    let w = weights(&v.family)?;
    if v.max_n == 0 {
        return Err(usage("--max-n must be positive"));
    }
    let checks = verify_all(&w, v.max_n);
    for c in &checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    emit(&v.output, &checks)?;
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
