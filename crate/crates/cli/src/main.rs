use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use arcreg::bench::{
    emit_csv, parse_size, run_bench_as, run_matrix, run_repeated, BenchConfig, BenchResult,
    MatrixSpec, Mode, DEFAULT_MIN_OPS, DEFAULT_REPEAT,
};
use arcreg::mutant::EarlyPublishArc;
use arcreg::RegisterKind;
use clap::Parser;

/// Throughput and atomicity benchmarks for (1,N) registers.
#[derive(Debug, Parser)]
#[command(name = "arcreg", version)]
struct Args {
    /// Register implementation: ARC, RF, PETERSON or RWLOCK.
    #[arg(long, default_value = "ARC")]
    algo: RegisterKind,

    /// Number of reader threads.
    #[arg(long, default_value_t = 4)]
    readers: usize,

    /// Register size in bytes; accepts suffixes such as 4KB or 1M.
    #[arg(long, default_value = "4KB", value_parser = size_arg)]
    size: usize,

    /// Minimum run time per sample, in seconds.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,

    /// hold: back-to-back operations; work: every operation encodes or
    /// scans the full value.
    #[arg(long, default_value = "hold")]
    mode: Mode,

    /// Record the history and check it for atomicity and torn reads.
    #[arg(long)]
    verify: bool,

    /// Seed for the register's initial contents.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write results as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Pin threads to cores.
    #[arg(long)]
    pin: bool,

    /// Samples averaged per configuration.
    #[arg(long, default_value_t = DEFAULT_REPEAT)]
    repeat: u32,

    /// Minimum reads plus writes per sample; runs extend past `--duration`
    /// until reached.
    #[arg(long, default_value_t = DEFAULT_MIN_OPS)]
    min_ops: u64,

    /// Exact operation count per thread; replaces --duration and --min-ops
    /// and makes read/write counts reproducible.
    #[arg(long)]
    ops: Option<u64>,

    /// Run the sweep described in this TOML file instead of a single
    /// configuration.
    #[arg(long, conflicts_with_all = ["algo", "readers", "size", "ops"])]
    matrix: Option<PathBuf>,

    /// Keep the writer idle (RMW-economy experiments).
    #[arg(long, hide = true)]
    pause_writer: bool,

    /// Run a deliberately broken ARC variant that publishes before copying.
    /// For checking that verification catches faults.
    #[arg(long, hide = true)]
    mutant: bool,
}

fn size_arg(s: &str) -> Result<usize, String> {
    parse_size(s).map_err(|e| e.to_string())
}

fn single(args: &Args) -> anyhow::Result<Vec<BenchResult>> {
    if !(args.duration.is_finite() && args.duration >= 0.0) {
        bail!("--duration must be a non-negative number of seconds");
    }
    let cfg = BenchConfig {
        duration: Duration::from_secs_f64(args.duration),
        mode: args.mode,
        verify: args.verify,
        seed: args.seed,
        min_ops: args.min_ops,
        quota: args.ops,
        pin: args.pin,
        pause_writer: args.pause_writer,
        csv_path: args.csv.clone(),
        ..BenchConfig::new(args.algo, args.readers, args.size)
    };
    cfg.validate()?;
    if args.mutant {
        return Ok(vec![run_bench_as::<EarlyPublishArc>(&cfg)?]);
    }
    Ok(vec![run_repeated(&cfg, args.repeat)?])
}

fn sweep(path: &PathBuf, args: &Args) -> anyhow::Result<Vec<BenchResult>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = MatrixSpec::from_toml(&text)?;
    // Flags given explicitly override the file.
    spec.verify |= args.verify;
    spec.pin |= args.pin;
    let out = run_matrix(&spec)?;
    for s in &out.skipped {
        eprintln!(
            "skipped {} readers={} size={}: {}",
            s.algo, s.readers, s.size, s.reason
        );
    }
    Ok(out.results)
}

fn print(r: &BenchResult) {
    let verdict = match (r.violations, r.torn_reads) {
        (Some(v), Some(t)) => format!(" violations={v} torn={t}"),
        _ => String::new(),
    };
    let floor = if r.floor_missed {
        " (op floor missed)"
    } else {
        ""
    };
    println!(
        "{:<8} {} readers={:<4} size={:<7} {:>12.0} ops/s  reads={} writes={} read_rmw={} write_rmw={}{verdict}{floor}",
        r.algo, r.mode, r.readers, r.size_bytes, r.throughput_ops_s, r.reads, r.writes, r.read_rmw, r.write_rmw
    );
}

fn run(args: &Args) -> anyhow::Result<bool> {
    let results = match &args.matrix {
        Some(path) => sweep(path, args)?,
        None => single(args)?,
    };
    for r in &results {
        print(r);
    }
    if let Some(path) = &args.csv {
        emit_csv(&results, path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(results.iter().all(|r| !r.failed_verification()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("verification found violations");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
