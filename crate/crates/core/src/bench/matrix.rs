//! Cartesian sweeps over algorithms, reader counts and register sizes.
//!
//! A sweep is described in TOML:
//!
//! ```toml
//! algos = ["ARC", "RF", "PETERSON", "RWLOCK"]
//! readers = [1, 2, 4, 8, 16, 31]
//! sizes = ["4KB", "32KB", "128KB"]
//! mode = "hold"        # optional, default hold
//! duration = 1.0       # seconds per sample, optional
//! repeat = 10          # samples averaged per row, optional
//! verify = false       # optional
//! seed = 0             # optional
//! min_ops = 2000000    # optional
//! ```
//!
//! Configurations an algorithm cannot host (RF above 58 readers) are
//! skipped and reported separately rather than failing the sweep.

use std::time::Duration;

use serde::Deserialize;

use super::{
    run_repeated, BenchConfig, BenchError, BenchResult, Mode, DEFAULT_MIN_OPS, DEFAULT_REPEAT,
};
use crate::RegisterKind;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum SizeEntry {
    Bytes(usize),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    algos: Vec<RegisterKind>,
    readers: Vec<usize>,
    sizes: Vec<SizeEntry>,
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    duration: Option<f64>,
    #[serde(default)]
    repeat: Option<u32>,
    #[serde(default)]
    verify: Option<bool>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    min_ops: Option<u64>,
    #[serde(default)]
    pin: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    pub algos: Vec<RegisterKind>,
    pub readers: Vec<usize>,
    pub sizes: Vec<usize>,
    pub mode: Mode,
    pub duration: Duration,
    pub repeat: u32,
    pub verify: bool,
    pub seed: u64,
    pub min_ops: u64,
    pub pin: bool,
}

impl MatrixSpec {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let raw: RawSpec = toml::from_str(text)?;
        let sizes = raw
            .sizes
            .iter()
            .map(|s| match s {
                SizeEntry::Bytes(b) => Ok(*b),
                SizeEntry::Text(t) => parse_size(t),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let duration = raw.duration.unwrap_or(1.0);
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(BenchError::Config(format!("bad duration {duration}")));
        }
        if raw.algos.is_empty() || raw.readers.is_empty() || sizes.is_empty() {
            return Err(BenchError::Config(
                "algos, readers and sizes must be non-empty".into(),
            ));
        }
        Ok(MatrixSpec {
            algos: raw.algos,
            readers: raw.readers,
            sizes,
            mode: raw.mode.unwrap_or(Mode::Hold),
            duration: Duration::from_secs_f64(duration),
            repeat: raw.repeat.unwrap_or(DEFAULT_REPEAT),
            verify: raw.verify.unwrap_or(false),
            seed: raw.seed.unwrap_or(0),
            min_ops: raw.min_ops.unwrap_or(DEFAULT_MIN_OPS),
            pin: raw.pin.unwrap_or(false),
        })
    }

    /// Every configuration in sweep order: algorithm, then size, then readers.
    pub fn configs(&self) -> impl Iterator<Item = BenchConfig> + '_ {
        self.algos.iter().flat_map(move |&algo| {
            self.sizes.iter().flat_map(move |&size| {
                self.readers.iter().map(move |&readers| BenchConfig {
                    duration: self.duration,
                    mode: self.mode,
                    verify: self.verify,
                    seed: self.seed,
                    min_ops: self.min_ops,
                    pin: self.pin,
                    ..BenchConfig::new(algo, readers, size)
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRun {
    pub algo: RegisterKind,
    pub readers: usize,
    pub size: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MatrixOutcome {
    pub results: Vec<BenchResult>,
    pub skipped: Vec<SkippedRun>,
}

pub fn run_matrix(spec: &MatrixSpec) -> Result<MatrixOutcome, BenchError> {
    run_matrix_with(spec, |cfg| run_repeated(cfg, spec.repeat))
}

fn run_matrix_with(
    spec: &MatrixSpec,
    mut run: impl FnMut(&BenchConfig) -> Result<BenchResult, BenchError>,
) -> Result<MatrixOutcome, BenchError> {
    let mut out = MatrixOutcome::default();
    for cfg in spec.configs() {
        let max = cfg.algo.max_readers();
        if cfg.readers > max {
            let reason = format!("{} supports at most {max} readers", cfg.algo);
            log::warn!(
                "skipping {} with {} readers: {reason}",
                cfg.algo,
                cfg.readers
            );
            out.skipped.push(SkippedRun {
                algo: cfg.algo,
                readers: cfg.readers,
                size: cfg.size,
                reason,
            });
            continue;
        }
        log::info!(
            "{} {} readers={} size={}",
            cfg.algo,
            cfg.mode,
            cfg.readers,
            cfg.size
        );
        out.results.push(run(&cfg)?);
    }
    Ok(out)
}

/// Parses a byte count: plain digits, or digits with a `K`/`KB`/`KiB`,
/// `M`/`MB`/`MiB` suffix (binary multiples).
pub fn parse_size(s: &str) -> Result<usize, BenchError> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, suffix) = t.split_at(split);
    let n: usize = digits
        .parse()
        .map_err(|_| BenchError::Config(format!("bad size {s:?}")))?;
    let mult = match suffix.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => 1 << 10,
        "M" | "MB" | "MIB" => 1 << 20,
        _ => return Err(BenchError::Config(format!("bad size suffix in {s:?}"))),
    };
    n.checked_mul(mult)
        .ok_or_else(|| BenchError::Config(format!("size {s:?} overflows")))
}
