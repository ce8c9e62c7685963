//! The single-writer/multi-reader register contract shared by every
//! implementation in this crate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{RegisterError, Result};

/// Register implementations known to the benchmark driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RegisterKind {
    Arc,
    Rf,
    Peterson,
    Rwlock,
}

impl RegisterKind {
    pub const ALL: [RegisterKind; 4] = [
        RegisterKind::Arc,
        RegisterKind::Rf,
        RegisterKind::Peterson,
        RegisterKind::Rwlock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegisterKind::Arc => "ARC",
            RegisterKind::Rf => "RF",
            RegisterKind::Peterson => "PETERSON",
            RegisterKind::Rwlock => "RWLOCK",
        }
    }

    /// Largest reader count the implementation accepts.
    pub fn max_readers(self) -> usize {
        match self {
            RegisterKind::Arc => crate::arc::MAX_READERS,
            RegisterKind::Rf => crate::baselines::rf::MAX_READERS,
            RegisterKind::Peterson | RegisterKind::Rwlock => u32::MAX as usize,
        }
    }
}

impl fmt::Display for RegisterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegisterKind {
    type Err = RegisterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ARC" => Ok(RegisterKind::Arc),
            "RF" => Ok(RegisterKind::Rf),
            "PETERSON" => Ok(RegisterKind::Peterson),
            "RWLOCK" => Ok(RegisterKind::Rwlock),
            other => Err(RegisterError::Config(format!(
                "unknown register kind {other:?}"
            ))),
        }
    }
}

/// Cumulative read-modify-write instruction counts since construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RmwCounters {
    pub read_rmw: u64,
    pub write_rmw: u64,
}

/// A (1,N) register: one writer handle, up to N reader handles.
///
/// Handles keep the register alive and may move between threads between
/// operations, but each is used by one thread at a time.
pub trait Register: Send + Sync + Sized + 'static {
    type Reader: ReadHandle;
    type Writer: WriteHandle;

    /// Builds a register holding `initial`, sized for `readers` readers and
    /// values of at most `max_size` bytes.
    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self>;

    fn name(&self) -> &'static str;

    /// Hands out the next reader handle; fails once all N are in use.
    fn reader(self: &Arc<Self>) -> Result<Self::Reader>;

    /// Hands out the writer handle; fails if it was already taken.
    fn writer(self: &Arc<Self>) -> Result<Self::Writer>;

    fn rmw_counters(&self) -> RmwCounters;

    /// Number of max-size content buffers owned by the register.
    fn content_buffers(&self) -> usize;

    fn max_size(&self) -> usize;

    fn reader_capacity(&self) -> usize;
}

pub trait ReadHandle: Send {
    /// Reads the register and passes the observed value to `f`. The slice is
    /// only valid for the duration of the call.
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T;
}

pub trait WriteHandle: Send {
    fn write(&mut self, value: &[u8]) -> Result<()>;
}

pub(crate) fn check_payload(size: usize, max_size: usize) -> Result<()> {
    if size == 0 || size > max_size {
        return Err(RegisterError::PayloadSize {
            size,
            min: 1,
            max: max_size,
        });
    }
    Ok(())
}

pub(crate) fn check_max_size(max_size: usize) -> Result<()> {
    if max_size == 0 {
        return Err(RegisterError::Config(
            "max_size must be at least 1 byte".into(),
        ));
    }
    Ok(())
}
