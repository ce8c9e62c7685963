//! Operation histories and the register correctness checks.
//!
//! Each thread records its operations into its own [`Recorder`]; recorders
//! are merged into a [`History`] after the run and checked offline:
//!
//! * [`check_no_past`]: regularity. No read returns a value overwritten by a
//!   write that completed before the read started, nor a value whose write
//!   started after the read ended.
//! * [`check_no_new_old_inversion`]: no read returns an older value than a
//!   read that completed before it started. Together with regularity this
//!   is atomicity for a single-writer register.
//! * [`check_integrity`]: no read observed a torn snapshot.
//!
//! Real-time precedence `a -> b` holds only when `a.response_ts <
//! b.invocation_ts`. Timestamps are taken just outside the register call, so
//! recorded intervals contain the real ones and the checks can miss a
//! violation but never invent one.

mod check;
mod text;

use std::time::Instant;

use thiserror::Error;

pub use check::{
    check_atomicity, check_integrity, check_no_new_old_inversion, check_no_past, CheckReport,
    Violation,
};
pub use text::{read_history, write_history};

use crate::payload::Decoded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRecord {
    pub thread: u32,
    pub kind: OpKind,
    pub invocation_ts: u64,
    pub response_ts: u64,
    /// Version written, or decoded by a read.
    pub seq: u64,
    /// Reads only; always true for writes.
    pub intact: bool,
}

impl OpRecord {
    pub fn write(thread: u32, invocation_ts: u64, response_ts: u64, seq: u64) -> Self {
        OpRecord {
            thread,
            kind: OpKind::Write,
            invocation_ts,
            response_ts,
            seq,
            intact: true,
        }
    }

    pub fn read(thread: u32, invocation_ts: u64, response_ts: u64, seq: u64, intact: bool) -> Self {
        OpRecord {
            thread,
            kind: OpKind::Read,
            invocation_ts,
            response_ts,
            seq,
            intact,
        }
    }

    /// `self -> other` in real time.
    pub fn precedes(&self, other: &OpRecord) -> bool {
        self.response_ts < other.invocation_ts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub records: Vec<OpRecord>,
    pub readers: usize,
    /// Register name, when known.
    pub kind: Option<String>,
    /// Version held by the register before the first write.
    pub initial_seq: u64,
}

impl History {
    pub fn new(records: Vec<OpRecord>) -> Self {
        History {
            records,
            readers: 0,
            kind: None,
            initial_seq: 0,
        }
    }

    /// Merges per-thread recordings, ordered by invocation time.
    pub fn merge(recorders: impl IntoIterator<Item = Recorder>) -> Self {
        let mut records: Vec<OpRecord> = recorders.into_iter().flat_map(|r| r.records).collect();
        records.sort_by_key(|r| (r.invocation_ts, r.response_ts, r.thread));
        History::new(records)
    }

    pub fn with_meta(mut self, kind: impl Into<String>, readers: usize) -> Self {
        self.kind = Some(kind.into());
        self.readers = readers;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn reads(&self) -> impl Iterator<Item = &OpRecord> {
        self.records.iter().filter(|r| r.kind == OpKind::Read)
    }

    pub fn writes(&self) -> impl Iterator<Item = &OpRecord> {
        self.records.iter().filter(|r| r.kind == OpKind::Write)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("record {record}: read returned version {seq}, which no write produced")]
    UnknownVersion { record: usize, seq: u64 },

    #[error("record {record}: write version {seq} does not exceed the previous write's {prev}")]
    NonMonotonicWrites { record: usize, seq: u64, prev: u64 },

    #[error("record {record}: response precedes invocation")]
    InvertedInterval { record: usize },

    #[error("records {first} and {second} of thread {thread} overlap in time")]
    OverlappingOps {
        thread: u32,
        first: usize,
        second: usize,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HistoryError {
    fn from(e: std::io::Error) -> Self {
        HistoryError::Io(e.to_string())
    }
}

/// Monotonic nanosecond clock shared by every recorder of a run.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    base: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Clock {
            base: Instant::now(),
        }
    }

    #[inline]
    pub fn now(&self) -> u64 {
        self.base.elapsed().as_nanos() as u64
    }
}

/// Contention-free per-thread record buffer.
#[derive(Debug)]
pub struct Recorder {
    thread: u32,
    records: Vec<OpRecord>,
}

impl Recorder {
    pub fn with_capacity(thread: u32, capacity: usize) -> Self {
        Recorder {
            thread,
            records: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub fn write(&mut self, invocation_ts: u64, response_ts: u64, seq: u64) {
        self.records.push(OpRecord::write(
            self.thread,
            invocation_ts,
            response_ts,
            seq,
        ));
    }

    #[inline]
    pub fn read(&mut self, invocation_ts: u64, response_ts: u64, observed: Decoded) {
        self.records.push(OpRecord::read(
            self.thread,
            invocation_ts,
            response_ts,
            observed.seq,
            observed.intact,
        ));
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
