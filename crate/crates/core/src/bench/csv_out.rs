use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{BenchError, BenchResult};

pub const CSV_HEADER: [&str; 11] = [
    "algo",
    "mode",
    "readers",
    "size_bytes",
    "duration_s",
    "reads",
    "writes",
    "read_rmw",
    "write_rmw",
    "throughput_ops_s",
    "violations",
];

/// Writes the header and one row per result. `violations` is left empty for
/// unverified runs.
pub fn write_csv(results: &[BenchResult], out: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.algo.as_str().to_string(),
            r.mode.as_str().to_string(),
            r.readers.to_string(),
            r.size_bytes.to_string(),
            format!("{:.6}", r.duration_s),
            r.reads.to_string(),
            r.writes.to_string(),
            r.read_rmw.to_string(),
            r.write_rmw.to_string(),
            format!("{:.1}", r.throughput_ops_s),
            r.violations
                .map(|v| (v + r.torn_reads.unwrap_or(0)).to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(results: &[BenchResult], path: &Path) -> Result<(), BenchError> {
    if results.is_empty() {
        return Err(BenchError::Config("no results to write".into()));
    }
    write_csv(results, File::create(path)?)
}
