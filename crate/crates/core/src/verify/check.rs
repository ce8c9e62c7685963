use std::collections::HashMap;

use super::{History, HistoryError, OpKind, OpRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `read` returned `returned` although the write of `newer` completed
    /// before the read started.
    Past {
        read: usize,
        returned: u64,
        newer: u64,
    },
    /// `read` returned a version whose write started after the read ended.
    Future { read: usize, returned: u64 },
    /// `earlier -> later`, yet `later` returned an older version.
    Inversion {
        earlier: usize,
        later: usize,
        earlier_seq: u64,
        later_seq: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub no_past: Vec<Violation>,
    pub inversions: Vec<Violation>,
    pub torn_reads: usize,
}

impl CheckReport {
    pub fn violations(&self) -> usize {
        self.no_past.len() + self.inversions.len()
    }

    pub fn is_atomic(&self) -> bool {
        self.no_past.is_empty() && self.inversions.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.is_atomic() && self.torn_reads == 0
    }
}

/// Writes in order plus a version lookup. Validates the single-writer shape
/// of the history on construction.
struct WriteIndex<'h> {
    writes: Vec<(usize, &'h OpRecord)>,
    by_seq: HashMap<u64, usize>,
    initial_seq: u64,
}

impl<'h> WriteIndex<'h> {
    fn new(h: &'h History) -> Result<Self, HistoryError> {
        let mut last_by_thread: HashMap<u32, usize> = HashMap::new();
        for (i, r) in h.records.iter().enumerate() {
            if r.response_ts < r.invocation_ts {
                return Err(HistoryError::InvertedInterval { record: i });
            }
            if let Some(&prev) = last_by_thread.get(&r.thread) {
                let p = &h.records[prev];
                if !(p.precedes(r) || r.precedes(p)) {
                    return Err(HistoryError::OverlappingOps {
                        thread: r.thread,
                        first: prev,
                        second: i,
                    });
                }
            }
            last_by_thread.insert(r.thread, i);
        }

        let mut writes: Vec<(usize, &OpRecord)> = h
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == OpKind::Write)
            .collect();
        writes.sort_by_key(|(_, r)| r.invocation_ts);
        let mut by_seq = HashMap::with_capacity(writes.len());
        let mut prev = h.initial_seq;
        for (pos, &(i, w)) in writes.iter().enumerate() {
            if w.seq <= prev {
                return Err(HistoryError::NonMonotonicWrites {
                    record: i,
                    seq: w.seq,
                    prev,
                });
            }
            if pos > 0 && !writes[pos - 1].1.precedes(w) {
                return Err(HistoryError::OverlappingOps {
                    thread: w.thread,
                    first: writes[pos - 1].0,
                    second: i,
                });
            }
            prev = w.seq;
            by_seq.insert(w.seq, pos);
        }
        Ok(WriteIndex {
            writes,
            by_seq,
            initial_seq: h.initial_seq,
        })
    }

    /// Position of the write that produced `seq`; `None` for the initial value.
    fn writer_of(&self, record: usize, seq: u64) -> Result<Option<usize>, HistoryError> {
        if seq == self.initial_seq {
            return Ok(None);
        }
        self.by_seq
            .get(&seq)
            .copied()
            .map(Some)
            .ok_or(HistoryError::UnknownVersion { record, seq })
    }

    /// Number of writes that completed strictly before `ts`.
    fn completed_before(&self, ts: u64) -> usize {
        self.writes.partition_point(|(_, w)| w.response_ts < ts)
    }
}

fn checked_reads(h: &History) -> impl Iterator<Item = (usize, &OpRecord)> {
    // Torn reads carry no meaningful version; check_integrity reports them.
    h.records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind == OpKind::Read && r.intact)
}

/// Regularity: reports every read that returned an overwritten value or a
/// value from the future.
pub fn check_no_past(h: &History) -> Result<Vec<Violation>, HistoryError> {
    let idx = WriteIndex::new(h)?;
    let mut out = Vec::new();
    for (i, r) in checked_reads(h) {
        let source = idx.writer_of(i, r.seq)?;
        if let Some(pos) = source {
            if r.precedes(idx.writes[pos].1) {
                out.push(Violation::Future {
                    read: i,
                    returned: r.seq,
                });
                continue;
            }
        }
        let done = idx.completed_before(r.invocation_ts);
        if done > 0 {
            let latest = idx.writes[done - 1].1.seq;
            if latest > r.seq {
                out.push(Violation::Past {
                    read: i,
                    returned: r.seq,
                    newer: latest,
                });
            }
        }
    }
    Ok(out)
}

/// New-old inversions. Reports each offending later read once, paired with
/// the newest-valued read that precedes it.
pub fn check_no_new_old_inversion(h: &History) -> Result<Vec<Violation>, HistoryError> {
    let idx = WriteIndex::new(h)?;
    let mut reads: Vec<(usize, &OpRecord)> = checked_reads(h).collect();
    for &(i, r) in &reads {
        idx.writer_of(i, r.seq)?;
    }
    // Prefix maximum of versions over reads ordered by response time.
    reads.sort_by_key(|(_, r)| r.response_ts);
    let mut best: Vec<(u64, usize)> = Vec::with_capacity(reads.len());
    for &(i, r) in &reads {
        let prev = best.last().copied();
        best.push(match prev {
            Some((s, j)) if s >= r.seq => (s, j),
            _ => (r.seq, i),
        });
    }
    let mut out = Vec::new();
    for &(i, r) in &reads {
        let before = reads.partition_point(|(_, e)| e.response_ts < r.invocation_ts);
        if before == 0 {
            continue;
        }
        let (max_seq, j) = best[before - 1];
        if max_seq > r.seq {
            out.push(Violation::Inversion {
                earlier: j,
                later: i,
                earlier_seq: max_seq,
                later_seq: r.seq,
            });
        }
    }
    out.sort_by_key(|v| match v {
        Violation::Inversion { later, .. } => *later,
        _ => unreachable!(),
    });
    Ok(out)
}

/// Number of reads that observed a torn snapshot.
pub fn check_integrity(h: &History) -> usize {
    h.reads().filter(|r| !r.intact).count()
}

pub fn check_atomicity(h: &History) -> Result<CheckReport, HistoryError> {
    Ok(CheckReport {
        no_past: check_no_past(h)?,
        inversions: check_no_new_old_inversion(h)?,
        torn_reads: check_integrity(h),
    })
}
