//! Throughput experiments: one writer thread and N reader threads looping
//! operations back to back on one register.
//!
//! Two workloads:
//!
//! * [`Mode::Hold`]: the writer copies a fixed buffer; a read only fetches
//!   the location and size of the current value.
//! * [`Mode::Work`]: the writer encodes a fresh versioned payload on every
//!   write; a read scans the whole value it retrieved.
//!
//! With `verify` on, every operation is timestamped into a per-thread
//! recorder and the merged history is checked after the run. Hold-mode
//! verification stamps versions only into the ends of the fixed buffer, so
//! reads stay constant-cost.

mod csv_out;
mod matrix;

use std::hint::black_box;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};
use std::{fmt, io, thread};

use crossbeam_utils::CachePadded;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_out::{emit_csv, write_csv, CSV_HEADER};
pub use matrix::{parse_size, run_matrix, MatrixOutcome, MatrixSpec, SkippedRun};

use crate::baselines::{PetersonRegister, RfRegister, RwlockRegister};
use crate::error::RegisterError;
use crate::payload::{decode_versioned, encode_into, peek_versioned, stamp_versioned_ends};
use crate::register::{ReadHandle, Register, RegisterKind, RmwCounters, WriteHandle};
use crate::verify::{check_atomicity, CheckReport, Clock, History, HistoryError, Recorder};
use crate::ArcRegister;

/// Operations per reported sample, below which a run keeps going past its
/// nominal duration.
pub const DEFAULT_MIN_OPS: u64 = 2_000_000;
pub const DEFAULT_REPEAT: u32 = 10;
/// Hard stop for a run that cannot reach its operation floor.
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(120);

const PROGRESS_EVERY: u64 = 64;
const THREAD_STACK: usize = 256 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hold,
    Work,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hold => "hold",
            Mode::Work => "work",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.to_ascii_lowercase().as_str() {
            "hold" => Ok(Mode::Hold),
            "work" => Ok(Mode::Work),
            other => Err(BenchError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("failed to spawn benchmark thread: {0}")]
    Spawn(io::Error),
    #[error("recorded history is corrupt: {0}")]
    History(#[from] HistoryError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("matrix file: {0}")]
    Matrix(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub algo: RegisterKind,
    pub readers: usize,
    /// Register value size in bytes.
    pub size: usize,
    pub duration: Duration,
    pub mode: Mode,
    pub verify: bool,
    pub seed: u64,
    /// Minimum reads plus writes per run.
    pub min_ops: u64,
    /// Fixed per-thread operation count; replaces `duration` and `min_ops`.
    pub quota: Option<u64>,
    pub time_limit: Duration,
    pub pin: bool,
    /// Keep the writer thread idle.
    pub pause_writer: bool,
    pub csv_path: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(algo: RegisterKind, readers: usize, size: usize) -> Self {
        BenchConfig {
            algo,
            readers,
            size,
            duration: Duration::from_secs(1),
            mode: Mode::Hold,
            verify: false,
            seed: 0,
            min_ops: DEFAULT_MIN_OPS,
            quota: None,
            time_limit: DEFAULT_TIME_LIMIT,
            pin: false,
            pause_writer: false,
            csv_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.readers == 0 {
            return Err(BenchError::Config("at least one reader is required".into()));
        }
        if self.size < crate::payload::MIN_VERSIONED_SIZE {
            return Err(BenchError::Config(format!(
                "register size must be at least {} bytes, got {}",
                crate::payload::MIN_VERSIONED_SIZE,
                self.size
            )));
        }
        let max = self.algo.max_readers();
        if self.readers > max {
            return Err(RegisterError::Capacity {
                kind: self.algo.as_str(),
                requested: self.readers,
                max,
            }
            .into());
        }
        Ok(())
    }

    pub fn stress_options(&self) -> StressOptions {
        StressOptions {
            mode: self.mode,
            duration: self.duration,
            min_ops: self.min_ops,
            quota: self.quota,
            time_limit: self.time_limit,
            record: self.verify,
            pin: self.pin,
            pause_writer: self.pause_writer,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub algo: RegisterKind,
    pub mode: Mode,
    pub readers: usize,
    pub size_bytes: usize,
    /// Measured run time, seconds.
    pub duration_s: f64,
    pub reads: u64,
    pub writes: u64,
    pub read_rmw: u64,
    pub write_rmw: u64,
    /// (reads + writes) / duration.
    pub throughput_ops_s: f64,
    pub read_throughput_ops_s: f64,
    pub write_throughput_ops_s: f64,
    /// No-past plus new-old-inversion violations; `None` when not verified.
    pub violations: Option<u64>,
    pub torn_reads: Option<u64>,
    pub repetitions: u32,
    /// The run stopped at the time limit before reaching `min_ops` or the
    /// quota.
    pub floor_missed: bool,
}

impl BenchResult {
    pub fn total_ops(&self) -> u64 {
        self.reads + self.writes
    }

    /// Verification found a violation or a torn read.
    pub fn failed_verification(&self) -> bool {
        self.violations.unwrap_or(0) > 0 || self.torn_reads.unwrap_or(0) > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StressOptions {
    pub mode: Mode,
    pub duration: Duration,
    pub min_ops: u64,
    /// When set, every thread performs exactly this many operations (the
    /// writer none if paused) and the run ends when all are done. Unlike a
    /// timed run, the read and write counts are then reproducible.
    pub quota: Option<u64>,
    pub time_limit: Duration,
    pub record: bool,
    pub pin: bool,
    pub pause_writer: bool,
    pub seed: u64,
}

impl Default for StressOptions {
    fn default() -> Self {
        StressOptions {
            mode: Mode::Work,
            duration: Duration::from_millis(200),
            min_ops: 0,
            quota: None,
            time_limit: DEFAULT_TIME_LIMIT,
            record: true,
            pin: false,
            pause_writer: false,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct StressOutcome {
    pub reads: u64,
    pub writes: u64,
    pub elapsed: Duration,
    pub rmw: RmwCounters,
    pub history: Option<History>,
    pub floor_missed: bool,
}

impl StressOutcome {
    pub fn total_ops(&self) -> u64 {
        self.reads + self.writes
    }

    /// Runs every history check; `None` if nothing was recorded.
    pub fn check(&self) -> Option<Result<CheckReport, HistoryError>> {
        self.history.as_ref().map(check_atomicity)
    }
}

/// The value a register is built with for a given workload: version 0.
pub fn initial_value(opts: &StressOptions, size: usize) -> Vec<u8> {
    let mut buf = filler(opts.seed, size);
    match (opts.mode, opts.record) {
        (Mode::Work, _) => encode_into(0, &mut buf),
        (Mode::Hold, true) => stamp_versioned_ends(0, &mut buf),
        (Mode::Hold, false) => {}
    }
    buf
}

fn filler(seed: u64, size: usize) -> Vec<u8> {
    let mut buf = vec![0u8; size];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut buf);
    buf
}

/// Builds a register of type `R` for `readers` readers holding
/// [`initial_value`].
pub fn build_register<R: Register>(
    opts: &StressOptions,
    readers: usize,
    size: usize,
) -> Result<Arc<R>, BenchError> {
    Ok(Arc::new(R::build(
        &initial_value(opts, size),
        readers,
        size,
    )?))
}

/// Holds spawned threads until every thread exists, so none gets a head
/// start while others are still being created.
#[derive(Default)]
struct StartGate {
    state: AtomicU64,
}

impl StartGate {
    const OPEN: u64 = 1;
    const ABORTED: u64 = 2;

    fn open(&self) {
        self.state.store(Self::OPEN, Ordering::Release);
    }

    fn abort(&self) {
        self.state.store(Self::ABORTED, Ordering::Release);
    }

    /// Returns false if the run was abandoned before it started.
    fn wait(&self) -> bool {
        loop {
            match self.state.load(Ordering::Acquire) {
                Self::OPEN => return true,
                Self::ABORTED => return false,
                _ => thread::yield_now(),
            }
        }
    }
}

struct ThreadReport {
    ops: u64,
    recorder: Option<Recorder>,
}

/// Runs one writer and `reg.reader_capacity()` readers against `reg` until
/// the duration has passed and the operation floor is met, or the time
/// limit expires.
pub fn stress<R: Register>(
    reg: &Arc<R>,
    opts: &StressOptions,
) -> Result<StressOutcome, BenchError> {
    let n = reg.reader_capacity();
    let size = reg.max_size();
    let stop = Arc::new(AtomicBool::new(false));
    let progress: Arc<Vec<CachePadded<AtomicU64>>> = Arc::new(
        (0..=n)
            .map(|_| CachePadded::new(AtomicU64::new(0)))
            .collect(),
    );
    let start = Arc::new(StartGate::default());
    let clock = Clock::start();
    let cores = if opts.pin {
        core_affinity::get_core_ids()
    } else {
        None
    };
    let capacity = if opts.record {
        match opts.quota {
            Some(q) => usize::try_from(q).unwrap_or(usize::MAX).min(1 << 24),
            None => (opts.min_ops as usize / (n + 1))
                .saturating_mul(2)
                .clamp(1024, 1 << 22),
        }
    } else {
        0
    };

    let mut handles = Vec::with_capacity(n + 1);
    let spawn = |name: String, slot: usize| {
        let core = cores
            .as_ref()
            .and_then(|c| (!c.is_empty()).then(|| c[slot % c.len()]));
        (
            thread::Builder::new().name(name).stack_size(THREAD_STACK),
            core,
        )
    };

    let mut writer = reg.writer()?;
    let readers = (0..n)
        .map(|_| reg.reader())
        .collect::<Result<Vec<_>, _>>()?;

    // Writer.
    {
        let (builder, core) = spawn("writer".into(), 0);
        let (stop, progress, start) =
            (Arc::clone(&stop), Arc::clone(&progress), Arc::clone(&start));
        let opts = opts.clone();
        let h = builder
            .spawn(move || {
                if let Some(core) = core {
                    core_affinity::set_for_current(core);
                }
                let mut rec = opts.record.then(|| Recorder::with_capacity(0, capacity));
                let mut buf = initial_value(&opts, size);
                if !start.wait() {
                    return ThreadReport {
                        ops: 0,
                        recorder: rec,
                    };
                }
                let mut seq = 0u64;
                let quota = opts.quota.unwrap_or(u64::MAX);
                if !opts.pause_writer {
                    while !stop.load(Ordering::Relaxed) && seq < quota {
                        seq += 1;
                        match (opts.mode, rec.as_mut()) {
                            (Mode::Hold, None) => writer.write(&buf).expect("sized at build"),
                            (mode, Some(rec)) => {
                                if mode == Mode::Work {
                                    encode_into(seq, &mut buf);
                                } else {
                                    stamp_versioned_ends(seq, &mut buf);
                                }
                                let t0 = clock.now();
                                writer.write(&buf).expect("sized at build");
                                rec.write(t0, clock.now(), seq);
                            }
                            (Mode::Work, None) => {
                                encode_into(seq, &mut buf);
                                writer.write(&buf).expect("sized at build");
                            }
                        }
                        if seq % PROGRESS_EVERY == 0 {
                            progress[0].store(seq, Ordering::Relaxed);
                        }
                    }
                } else {
                    while !stop.load(Ordering::Relaxed) {
                        thread::sleep(Duration::from_millis(1));
                    }
                }
                progress[0].store(seq, Ordering::Relaxed);
                ThreadReport {
                    ops: seq,
                    recorder: rec,
                }
            })
            .map_err(BenchError::Spawn)?;
        handles.push(h);
    }

    for (id, mut reader) in readers.into_iter().enumerate() {
        let (builder, core) = spawn(format!("reader-{id}"), id + 1);
        let (stop, progress, gate) = (Arc::clone(&stop), Arc::clone(&progress), Arc::clone(&start));
        let opts = opts.clone();
        let thread_id = id as u32 + 1;
        let h = builder.spawn(move || {
            if let Some(core) = core {
                core_affinity::set_for_current(core);
            }
            let mut rec = opts
                .record
                .then(|| Recorder::with_capacity(thread_id, capacity));
            if !gate.wait() {
                return ThreadReport {
                    ops: 0,
                    recorder: rec,
                };
            }
            let mut ops = 0u64;
            let quota = opts.quota.unwrap_or(u64::MAX);
            while !stop.load(Ordering::Relaxed) && ops < quota {
                match (opts.mode, rec.as_mut()) {
                    (Mode::Hold, None) => {
                        black_box(reader.read_with(|b| (b.as_ptr(), b.len())));
                    }
                    (Mode::Work, None) => {
                        black_box(reader.read_with(decode_versioned));
                    }
                    (mode, Some(rec)) => {
                        let t0 = clock.now();
                        let d = if mode == Mode::Work {
                            reader.read_with(decode_versioned)
                        } else {
                            reader.read_with(peek_versioned)
                        };
                        rec.read(t0, clock.now(), d);
                    }
                }
                ops += 1;
                if ops % PROGRESS_EVERY == 0 {
                    progress[id + 1].store(ops, Ordering::Relaxed);
                }
            }
            progress[id + 1].store(ops, Ordering::Relaxed);
            drop(reader);
            ThreadReport { ops, recorder: rec }
        });
        match h {
            Ok(h) => handles.push(h),
            Err(e) => {
                start.abort();
                for h in handles {
                    let _ = h.join();
                }
                return Err(BenchError::Spawn(e));
            }
        }
    }

    start.open();
    let began = Instant::now();
    let mut floor_missed = false;
    let writer_target = if opts.pause_writer {
        0
    } else {
        opts.quota.unwrap_or(0)
    };
    loop {
        let elapsed = began.elapsed();
        if let Some(q) = opts.quota {
            let finished = progress[0].load(Ordering::Relaxed) >= writer_target
                && progress[1..].iter().all(|p| p.load(Ordering::Relaxed) >= q);
            if finished {
                break;
            }
            if elapsed >= opts.time_limit {
                floor_missed = true;
                break;
            }
            thread::sleep(Duration::from_millis(1));
            continue;
        }
        if elapsed >= opts.duration {
            let done: u64 = progress.iter().map(|p| p.load(Ordering::Relaxed)).sum();
            if done >= opts.min_ops {
                break;
            }
            if elapsed >= opts.time_limit {
                floor_missed = true;
                break;
            }
        }
        let left = opts.duration.saturating_sub(elapsed);
        thread::sleep(left.clamp(Duration::from_micros(200), Duration::from_millis(5)));
    }
    stop.store(true, Ordering::Relaxed);

    let mut reports = Vec::with_capacity(handles.len());
    for h in handles {
        reports.push(h.join().expect("benchmark thread panicked"));
    }
    let elapsed = began.elapsed();

    let writes = reports[0].ops;
    let reads = reports[1..].iter().map(|r| r.ops).sum();
    let history = opts.record.then(|| {
        History::merge(reports.into_iter().filter_map(|r| r.recorder)).with_meta(reg.name(), n)
    });
    Ok(StressOutcome {
        reads,
        writes,
        elapsed,
        rmw: reg.rmw_counters(),
        history,
        floor_missed,
    })
}

fn run_typed<R: Register>(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let opts = cfg.stress_options();
    let reg = build_register::<R>(&opts, cfg.readers, cfg.size)?;
    let out = stress(&reg, &opts)?;
    let (violations, torn) = match out.check() {
        Some(report) => {
            let report = report?;
            (
                Some(report.violations() as u64),
                Some(report.torn_reads as u64),
            )
        }
        None => (None, None),
    };
    let secs = out.elapsed.as_secs_f64();
    Ok(BenchResult {
        algo: cfg.algo,
        mode: cfg.mode,
        readers: cfg.readers,
        size_bytes: cfg.size,
        duration_s: secs,
        reads: out.reads,
        writes: out.writes,
        read_rmw: out.rmw.read_rmw,
        write_rmw: out.rmw.write_rmw,
        throughput_ops_s: out.total_ops() as f64 / secs,
        read_throughput_ops_s: out.reads as f64 / secs,
        write_throughput_ops_s: out.writes as f64 / secs,
        violations,
        torn_reads: torn,
        repetitions: 1,
        floor_missed: out.floor_missed,
    })
}

/// Runs a single sample on register type `R`, ignoring `cfg.algo` except
/// for labelling and the reader limit.
pub fn run_bench_as<R: Register>(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    run_typed::<R>(cfg)
}

/// Runs a single benchmark sample.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    match cfg.algo {
        RegisterKind::Arc => run_typed::<ArcRegister>(cfg),
        RegisterKind::Rf => run_typed::<RfRegister>(cfg),
        RegisterKind::Peterson => run_typed::<PetersonRegister>(cfg),
        RegisterKind::Rwlock => run_typed::<RwlockRegister>(cfg),
    }
}

/// Runs `repeat` samples and averages counts and throughput. Violations and
/// torn reads are summed.
pub fn run_repeated(cfg: &BenchConfig, repeat: u32) -> Result<BenchResult, BenchError> {
    let repeat = repeat.max(1);
    let samples = (0..repeat)
        .map(|_| run_bench(cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(average(&samples))
}

fn average(samples: &[BenchResult]) -> BenchResult {
    let k = samples.len() as f64;
    let mean_u =
        |f: fn(&BenchResult) -> u64| (samples.iter().map(f).sum::<u64>() as f64 / k).round() as u64;
    let mean_f = |f: fn(&BenchResult) -> f64| samples.iter().map(f).sum::<f64>() / k;
    let sum_opt = |f: fn(&BenchResult) -> Option<u64>| {
        samples
            .iter()
            .map(f)
            .try_fold(0u64, |acc, v| v.map(|v| acc + v))
    };
    let first = &samples[0];
    BenchResult {
        algo: first.algo,
        mode: first.mode,
        readers: first.readers,
        size_bytes: first.size_bytes,
        duration_s: mean_f(|r| r.duration_s),
        reads: mean_u(|r| r.reads),
        writes: mean_u(|r| r.writes),
        read_rmw: mean_u(|r| r.read_rmw),
        write_rmw: mean_u(|r| r.write_rmw),
        throughput_ops_s: mean_f(|r| r.throughput_ops_s),
        read_throughput_ops_s: mean_f(|r| r.read_throughput_ops_s),
        write_throughput_ops_s: mean_f(|r| r.write_throughput_ops_s),
        violations: sum_opt(|r| r.violations),
        torn_reads: sum_opt(|r| r.torn_reads),
        repetitions: samples.len() as u32,
        floor_missed: samples.iter().any(|r| r.floor_missed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(algo: RegisterKind, readers: usize) -> BenchConfig {
        BenchConfig {
            duration: Duration::from_millis(100),
            min_ops: 0,
            verify: true,
            ..BenchConfig::new(algo, readers, 4096)
        }
    }

    #[test]
    fn smoke_every_algorithm() {
        for algo in RegisterKind::ALL {
            let r = run_bench(&quick(algo, 2)).unwrap();
            assert!(r.reads >= 1 && r.writes >= 1, "{algo}: {r:?}");
            assert_eq!(r.violations, Some(0), "{algo}");
            assert_eq!(r.torn_reads, Some(0), "{algo}");
            let expected = r.total_ops() as f64 / r.duration_s;
            assert!((r.throughput_ops_s - expected).abs() <= expected * 1e-9);
        }
    }

    #[test]
    fn rf_over_capacity_is_rejected() {
        let err = run_bench(&quick(RegisterKind::Rf, 59)).unwrap_err();
        assert!(matches!(
            err,
            BenchError::Register(RegisterError::Capacity {
                requested: 59,
                max: 58,
                ..
            })
        ));
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(
            run_bench(&quick(RegisterKind::Arc, 0)),
            Err(BenchError::Config(_))
        ));
        let mut cfg = quick(RegisterKind::Arc, 1);
        cfg.size = 7;
        assert!(matches!(run_bench(&cfg), Err(BenchError::Config(_))));
    }

    #[test]
    fn paused_writer_keeps_arc_reads_rmw_free() {
        let cfg = BenchConfig {
            pause_writer: true,
            verify: false,
            min_ops: 100_000,
            ..quick(RegisterKind::Arc, 2)
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.writes, 0);
        assert!(r.reads >= 100_000);
        assert_eq!(r.read_rmw, 0);
    }

    #[test]
    fn averaging_sums_violations() {
        let mut a = run_bench(&quick(RegisterKind::Arc, 1)).unwrap();
        let mut b = a.clone();
        a.violations = Some(1);
        b.violations = Some(2);
        b.reads = a.reads + 10;
        let m = average(&[a.clone(), b]);
        assert_eq!(m.violations, Some(3));
        assert_eq!(m.reads, a.reads + 5);
        assert_eq!(m.repetitions, 2);
        a.violations = None;
        assert_eq!(average(&[a]).violations, None);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("HOLD".parse::<Mode>().unwrap(), Mode::Hold);
        assert_eq!("work".parse::<Mode>().unwrap(), Mode::Work);
        assert!("idle".parse::<Mode>().is_err());
    }
}
