//! Command-line interface: build, query, verify, tradeoff and bench.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};
use crate::oracle::{exhaustive_equiv, sampled_equiv, EquivReport, KeySet, EXHAUSTIVE_MAX_BITS};
use crate::persist;
use crate::pred::Pred;
use crate::strategy::{build, BuildConfig};
use crate::tradeoff::{csv_row, TradeoffParams, CSV_HEADER};
use crate::wordops::mask;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "predsearch", version, about = "Static predecessor search structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a structure from a key file and write it to disk.
    Build(BuildArgs),
    /// Answer one predecessor query.
    Query(QueryArgs),
    /// Check a structure against the keys it was built from.
    Verify(VerifyArgs),
    /// Evaluate the trade-off formula as CSV.
    Tradeoff(TradeoffArgs),
    /// Compare probe counts and wall time across branches.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct KeyInput {
    /// Key file: one integer per line (decimal or 0x hex), strictly ascending.
    #[arg(long)]
    pub keys: PathBuf,
    /// `text` or `raw:BYTES` for little-endian fixed-width records.
    #[arg(long, default_value = "text")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: KeyInput,
    #[arg(long)]
    pub key_bits: u32,
    #[arg(long)]
    pub word_bits: u32,
    /// Space budget in words.
    #[arg(long)]
    pub space: u64,
    /// Force branch 1 (B-tree), 2 (vEB), 3 or 4 (reductions).
    #[arg(long)]
    pub branch: Option<u8>,
    #[arg(long, env = "PRED_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Build directly over all keys instead of sampling every w-th key.
    #[arg(long)]
    pub no_amplify: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub structure: PathBuf,
    #[arg(long)]
    pub x: String,
    /// Append probe and depth counts.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub structure: PathBuf,
    #[command(flatten)]
    pub input: KeyInput,
    /// Query every key in the universe.
    #[arg(long, conflicts_with = "samples")]
    pub exhaustive: bool,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, env = "PRED_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TradeoffArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub key_bits: u64,
    #[arg(long)]
    pub word_bits: u64,
    #[arg(long)]
    pub space: u64,
    /// `PARAM=lo:hi:step`; a step written `*k` multiplies.
    #[arg(long)]
    pub sweep: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: KeyInput,
    #[arg(long)]
    pub key_bits: u32,
    #[arg(long, default_value_t = 64)]
    pub word_bits: u32,
    /// Space budget in words; defaults to 16 words per key.
    #[arg(long)]
    pub space: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub queries: u64,
    #[arg(long, env = "PRED_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub branches: Vec<u8>,
    #[arg(long)]
    pub csv: bool,
}

/// Parses a decimal or `0x`-prefixed hexadecimal integer.
pub fn parse_int(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

fn ingest<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Ingest { line, msg: msg.into() })
}

/// Parses a text key file.
pub fn parse_text_keys(content: &str, key_bits: u32) -> Result<KeySet> {
    let mut keys = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            return ingest(i + 1, "empty line");
        }
        match parse_int(t) {
            Some(k) => keys.push(k),
            None => return ingest(i + 1, format!("not an integer: {t:?}")),
        }
    }
    KeySet::new(keys, key_bits)
}

/// Parses little-endian records of `width` bytes.
pub fn parse_raw_keys(bytes: &[u8], width: usize, key_bits: u32) -> Result<KeySet> {
    if !(1..=8).contains(&width) {
        return param(format!("raw record width {width} must be in 1..=8"));
    }
    if !bytes.len().is_multiple_of(width) {
        return ingest(bytes.len() / width + 1, format!("truncated {width}-byte record"));
    }
    let keys = bytes
        .chunks(width)
        .map(|c| {
            let mut b = [0u8; 8];
            b[..width].copy_from_slice(c);
            u64::from_le_bytes(b)
        })
        .collect();
    KeySet::new(keys, key_bits)
}

pub fn read_keys(path: &Path, format: &str, key_bits: u32) -> Result<KeySet> {
    if format == "text" {
        let content = std::fs::read_to_string(path)?;
        parse_text_keys(&content, key_bits)
    } else if let Some(w) = format.strip_prefix("raw:") {
        let width = w.parse().map_err(|_| Error::Param(format!("bad raw width {w:?}")))?;
        parse_raw_keys(&std::fs::read(path)?, width, key_bits)
    } else {
        param(format!("unknown key format {format:?}; use text or raw:BYTES"))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Param(_) | Error::Ingest { .. } | Error::Budget { .. } | Error::Io(_) => EXIT_VALIDATION,
        Error::Integrity(_) => EXIT_INTEGRITY,
        Error::Build(_) | Error::Invariant(_) => EXIT_FAILURE,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Build(a) => cmd_build(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Tradeoff(a) => cmd_tradeoff(a, out, err),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_build(a: BuildArgs, out: &mut dyn Write) -> Result<i32> {
    let set = read_keys(&a.input.keys, &a.input.format, a.key_bits)?;
    let mut cfg = BuildConfig::new(a.key_bits, a.word_bits, a.space)
        .with_seed(a.seed)
        .with_amplify(!a.no_amplify);
    cfg.branch = a.branch;
    let start = Instant::now();
    let s = build(&set, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    persist::save(&s, &a.out)?;
    let p = &s.plan;
    writeln!(
        out,
        "n={} a_raw={} a={} branch={} optimal_branch={} kind={} amplified={} bits_used={} budget={} build_seconds={:.3}",
        set.len(),
        p.a_raw,
        p.a,
        p.branch,
        p.optimal_branch,
        s.kind().name(),
        p.amplified,
        s.bits_used(),
        s.budget_bits(),
        secs
    )?;
    Ok(EXIT_OK)
}

fn cmd_query(a: QueryArgs, out: &mut dyn Write) -> Result<i32> {
    let s = persist::load(&a.structure)?;
    let x = match parse_int(&a.x) {
        Some(x) => x,
        None => return param(format!("query {:?} is not an integer", a.x)),
    };
    if x > mask(s.config.key_bits) {
        return param(format!("query {x} exceeds {} bits", s.config.key_bits));
    }
    let hex = a.x.trim().to_ascii_lowercase().starts_with("0x");
    let (ans, stats) = s.query(x);
    let text = match ans {
        Pred::NegInf => "-inf".to_string(),
        Pred::Key(k) if hex => format!("{k:#x}"),
        Pred::Key(k) => k.to_string(),
    };
    if a.stats {
        writeln!(out, "{text} probes={} depth={}", stats.probes, stats.depth)?;
    } else {
        writeln!(out, "{text}")?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let s = persist::load(&a.structure)?;
    let set = read_keys(&a.input.keys, &a.input.format, s.config.key_bits)?;
    let report: EquivReport = if a.exhaustive {
        if set.key_bits() > EXHAUSTIVE_MAX_BITS {
            return param(format!(
                "exhaustive verification needs key length <= {EXHAUSTIVE_MAX_BITS}; use --samples"
            ));
        }
        exhaustive_equiv(&s, &set)?
    } else {
        sampled_equiv(&s, &set, a.samples, a.seed)
    };
    let bound = s.plan.depth_bound;
    writeln!(
        out,
        "kind={} queries={} max_probes={} max_depth={} depth_bound={}",
        s.kind().name(),
        report.queries,
        report.max_probes,
        report.max_depth,
        bound
    )?;
    writeln!(out, "{} mismatches", report.mismatch_count)?;
    for m in report.mismatches.iter().take(16) {
        writeln!(out, "mismatch x={} expected={} got={}", m.x, m.expected, m.got)?;
    }
    let depth_ok = report.max_depth <= bound;
    writeln!(out, "depth {}", if depth_ok { "OK" } else { "EXCEEDED" })?;
    Ok(if report.mismatch_count > 0 || !depth_ok {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SweepParam {
    N,
    KeyBits,
    WordBits,
    Space,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Add(u64),
    Mul(u64),
}

fn parse_sweep(spec: &str) -> Result<(SweepParam, u64, u64, Step)> {
    let bad = || Error::Param(format!("sweep {spec:?} must look like PARAM=lo:hi:step"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let param_kind = match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "n" => SweepParam::N,
        "key-bits" | "l" => SweepParam::KeyBits,
        "word-bits" | "w" => SweepParam::WordBits,
        "space" | "s" => SweepParam::Space,
        other => return param(format!("unknown sweep parameter {other:?}")),
    };
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parse_int(parts[0]).ok_or_else(bad)?;
    let hi = parse_int(parts[1]).ok_or_else(bad)?;
    let step = match parts[2].trim().strip_prefix('*') {
        Some(m) => Step::Mul(parse_int(m).ok_or_else(bad)?),
        None => Step::Add(parse_int(parts[2]).ok_or_else(bad)?),
    };
    match step {
        Step::Add(0) | Step::Mul(0) | Step::Mul(1) => return param("sweep step must make progress"),
        _ => {}
    }
    if lo > hi {
        return param(format!("sweep range {lo}..{hi} is empty"));
    }
    Ok((param_kind, lo, hi, step))
}

fn cmd_tradeoff(a: TradeoffArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    writeln!(out, "{CSV_HEADER}")?;
    let Some(sweep) = a.sweep.as_deref() else {
        let p = TradeoffParams::new(a.n, a.key_bits, a.word_bits, a.space)?;
        writeln!(out, "{}", csv_row(&p))?;
        return Ok(EXIT_OK);
    };
    let (which, lo, hi, step) = parse_sweep(sweep)?;
    let mut v = lo;
    loop {
        let (mut n, mut l, mut w, mut s) = (a.n, a.key_bits, a.word_bits, a.space);
        match which {
            SweepParam::N => n = v,
            SweepParam::KeyBits => l = v,
            SweepParam::WordBits => w = v,
            SweepParam::Space => s = v,
        }
        match TradeoffParams::new(n, l, w, s) {
            Ok(p) => writeln!(out, "{}", csv_row(&p))?,
            Err(e) => writeln!(err, "skipping {v}: {e}")?,
        }
        let next = match step {
            Step::Add(d) => v.checked_add(d),
            Step::Mul(m) => v.checked_mul(m),
        };
        match next {
            Some(nv) if nv <= hi && nv > v => v = nv,
            _ => break,
        }
    }
    Ok(EXIT_OK)
}

/// Per-branch benchmark figures.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub branch: u8,
    pub kind: &'static str,
    pub median_probes: u32,
    pub p99_probes: u32,
    pub max_depth: u32,
    pub bits_used: u64,
    pub ns_per_query: f64,
}

pub fn bench(set: &KeySet, base: &BuildConfig, branch: u8, queries: u64, seed: u64) -> Result<BenchRow> {
    let s = build(set, &base.with_branch(branch))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<u64> = (0..queries).map(|_| rng.gen::<u64>() & mask(set.key_bits())).collect();
    let mut probes = Vec::with_capacity(xs.len());
    let mut max_depth = 0;
    let start = Instant::now();
    for &x in &xs {
        let (_, st) = s.query(x);
        probes.push(st.probes);
        max_depth = max_depth.max(st.depth);
    }
    let elapsed = start.elapsed().as_nanos() as f64;
    probes.sort_unstable();
    let pct = |p: f64| -> u32 {
        if probes.is_empty() {
            0
        } else {
            probes[((probes.len() - 1) as f64 * p).round() as usize]
        }
    };
    Ok(BenchRow {
        branch,
        kind: s.kind().name(),
        median_probes: pct(0.5),
        p99_probes: pct(0.99),
        max_depth,
        bits_used: s.bits_used(),
        ns_per_query: if xs.is_empty() { 0.0 } else { elapsed / xs.len() as f64 },
    })
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let set = read_keys(&a.input.keys, &a.input.format, a.key_bits)?;
    let space = a.space.unwrap_or(16 * set.len().max(1) as u64);
    let base = BuildConfig::new(a.key_bits, a.word_bits, space).with_seed(a.seed);
    let mut rows = Vec::new();
    for &b in &a.branches {
        rows.push(bench(&set, &base, b, a.queries, a.seed)?);
    }
    if a.csv {
        writeln!(
            out,
            "branch,kind,median_probes,p99_probes,max_depth,bits_used,ns_per_query"
        )?;
        for r in &rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.1}",
                r.branch, r.kind, r.median_probes, r.p99_probes, r.max_depth, r.bits_used, r.ns_per_query
            )?;
        }
    } else {
        writeln!(
            out,
            "{:<6} {:<16} {:>13} {:>10} {:>9} {:>14} {:>12}",
            "branch", "kind", "median_probes", "p99_probes", "max_depth", "bits_used", "ns/query"
        )?;
        for r in &rows {
            writeln!(
                out,
                "{:<6} {:<16} {:>13} {:>10} {:>9} {:>14} {:>12.1}",
                r.branch, r.kind, r.median_probes, r.p99_probes, r.max_depth, r.bits_used, r.ns_per_query
            )?;
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers() {
        assert_eq!(parse_int("42"), Some(42));
        assert_eq!(parse_int("0x2A"), Some(42));
        assert_eq!(parse_int(" 7 "), Some(7));
        assert_eq!(parse_int("x"), None);
        assert_eq!(parse_int("-1"), None);
    }

    #[test]
    fn text_keys_report_line_numbers() {
        assert_eq!(parse_text_keys("1\n2\n0x10\n", 8).unwrap().keys(), &[1, 2, 16]);
        match parse_text_keys("1\n5\n5\n", 8) {
            Err(Error::Ingest { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_text_keys("1\nfoo\n", 8) {
            Err(Error::Ingest { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_text_keys("9\n3\n", 8) {
            Err(Error::Ingest { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_text_keys("300\n", 8).is_err());
    }

    #[test]
    fn raw_keys() {
        let bytes = [1u8, 0, 2, 0, 0, 1];
        assert_eq!(parse_raw_keys(&bytes, 2, 16).unwrap().keys(), &[1, 2, 256]);
        assert!(parse_raw_keys(&bytes[..5], 2, 16).is_err());
        assert!(parse_raw_keys(&bytes, 9, 16).is_err());
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(
            parse_sweep("space=16:1024:*2").unwrap(),
            (SweepParam::Space, 16, 1024, Step::Mul(2))
        );
        assert_eq!(
            parse_sweep("key_bits=8:64:8").unwrap(),
            (SweepParam::KeyBits, 8, 64, Step::Add(8))
        );
        assert!(parse_sweep("space=1:2").is_err());
        assert!(parse_sweep("foo=1:2:1").is_err());
        assert!(parse_sweep("n=1:2:*1").is_err());
    }

    #[test]
    fn tradeoff_single_and_sweep() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            [
                "predsearch",
                "tradeoff",
                "--n",
                "1048576",
                "--key-bits",
                "64",
                "--word-bits",
                "64",
                "--space",
                "67108864",
            ],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 0);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, [CSV_HEADER, "1048576,64,64,67108864,14,3,3,1.5,1.5,1.5,3"]);

        let mut out = Vec::new();
        let code = run(
            [
                "predsearch",
                "tradeoff",
                "--n",
                "1024",
                "--key-bits",
                "32",
                "--word-bits",
                "64",
                "--space",
                "1024",
                "--sweep",
                "space=1024:1048576:*4",
            ],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 0);
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 6);
    }

    #[test]
    fn bench_is_deterministic_in_probes() {
        let set = KeySet::new((0..500u64).map(|i| i * 97).collect(), 16).unwrap();
        let cfg = BuildConfig::new(16, 64, 8000).with_seed(3);
        for b in 1..=4 {
            let r1 = bench(&set, &cfg, b, 2000, 11).unwrap();
            let r2 = bench(&set, &cfg, b, 2000, 11).unwrap();
            assert_eq!(
                (r1.median_probes, r1.p99_probes, r1.max_depth),
                (r2.median_probes, r2.p99_probes, r2.max_depth)
            );
        }
    }
}
