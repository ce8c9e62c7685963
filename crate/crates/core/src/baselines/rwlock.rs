//! Register guarded by a ticket reader-writer spinlock.
//!
//! The lock keeps two packed counters, `requests` and `completions`, each
//! holding a write count in the upper 32 bits and a read count in the lower
//! 32. A writer takes a ticket and waits until every earlier request has
//! completed. A reader takes a ticket and waits only for earlier writers.
//! Tickets are served in arrival order, so readers arriving after the writer
//! queue behind it and a steady stream of reads cannot starve it.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_utils::{Backoff, CachePadded};

use crate::error::{RegisterError, Result};
use crate::register::{
    check_max_size, check_payload, ReadHandle, Register, RmwCounters, WriteHandle,
};

const READ_INC: u64 = 1;
const WRITE_INC: u64 = 1 << 32;
const WRITE_MASK: u64 = !(WRITE_INC - 1);

#[derive(Default)]
pub struct TicketRwLock {
    requests: CachePadded<AtomicU64>,
    completions: CachePadded<AtomicU64>,
}

impl TicketRwLock {
    pub fn read_lock(&self) {
        let ticket = self.requests.fetch_add(READ_INC, Ordering::Relaxed);
        let backoff = Backoff::new();
        while self.completions.load(Ordering::Acquire) & WRITE_MASK != ticket & WRITE_MASK {
            backoff.snooze();
        }
    }

    pub fn read_unlock(&self) {
        self.completions.fetch_add(READ_INC, Ordering::Release);
    }

    pub fn write_lock(&self) {
        let ticket = self.requests.fetch_add(WRITE_INC, Ordering::Relaxed);
        let backoff = Backoff::new();
        while self.completions.load(Ordering::Acquire) != ticket {
            backoff.snooze();
        }
    }

    pub fn write_unlock(&self) {
        self.completions.fetch_add(WRITE_INC, Ordering::Release);
    }
}

struct Value {
    size: usize,
    content: Box<[u8]>,
}

pub struct RwlockRegister {
    lock: TicketRwLock,
    value: UnsafeCell<Value>,
    n_readers: usize,
    max_size: usize,
    next_reader: AtomicUsize,
    writer_taken: AtomicBool,
    reads: CachePadded<AtomicU64>,
    writes: CachePadded<AtomicU64>,
}

// SAFETY: `value` is accessed only while holding the lock in the matching mode.
unsafe impl Sync for RwlockRegister {}
unsafe impl Send for RwlockRegister {}

/// RMW instructions per lock/unlock pair.
const RMW_PER_OP: u64 = 2;

impl RwlockRegister {
    pub fn new(initial: &[u8], n_readers: usize, max_size: usize) -> Result<Self> {
        if n_readers == 0 || n_readers > u32::MAX as usize {
            return Err(RegisterError::Capacity {
                kind: "RWLOCK",
                requested: n_readers,
                max: u32::MAX as usize,
            });
        }
        check_max_size(max_size)?;
        check_payload(initial.len(), max_size)?;
        let mut content = vec![0u8; max_size].into_boxed_slice();
        content[..initial.len()].copy_from_slice(initial);
        Ok(RwlockRegister {
            lock: TicketRwLock::default(),
            value: UnsafeCell::new(Value {
                size: initial.len(),
                content,
            }),
            n_readers,
            max_size,
            next_reader: AtomicUsize::new(0),
            writer_taken: AtomicBool::new(false),
            reads: CachePadded::new(AtomicU64::new(0)),
            writes: CachePadded::new(AtomicU64::new(0)),
        })
    }

    pub fn new_reader(self: &Arc<Self>) -> Result<RwlockReader> {
        let id = self.next_reader.fetch_add(1, Ordering::Relaxed);
        if id >= self.n_readers {
            self.next_reader.fetch_sub(1, Ordering::Relaxed);
            return Err(RegisterError::ReadersExhausted(self.n_readers));
        }
        Ok(RwlockReader {
            reg: Arc::clone(self),
            reads: 0,
        })
    }

    pub fn new_writer(self: &Arc<Self>) -> Result<RwlockWriter> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(RegisterError::WriterTaken);
        }
        Ok(RwlockWriter {
            reg: Arc::clone(self),
        })
    }
}

pub struct RwlockReader {
    reg: Arc<RwlockRegister>,
    reads: u64,
}

impl Drop for RwlockReader {
    fn drop(&mut self) {
        self.reg.reads.fetch_add(self.reads, Ordering::Relaxed);
    }
}

impl ReadHandle for RwlockReader {
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T {
        let reg = &*self.reg;
        reg.lock.read_lock();
        // SAFETY: shared lock held.
        let v = unsafe { &*reg.value.get() };
        let out = f(&v.content[..v.size]);
        reg.lock.read_unlock();
        self.reads += 1;
        out
    }
}

pub struct RwlockWriter {
    reg: Arc<RwlockRegister>,
}

impl WriteHandle for RwlockWriter {
    fn write(&mut self, value: &[u8]) -> Result<()> {
        let reg = &*self.reg;
        check_payload(value.len(), reg.max_size)?;
        reg.lock.write_lock();
        // SAFETY: exclusive lock held.
        let v = unsafe { &mut *reg.value.get() };
        v.content[..value.len()].copy_from_slice(value);
        v.size = value.len();
        reg.lock.write_unlock();
        reg.writes
            .store(reg.writes.load(Ordering::Relaxed) + 1, Ordering::Relaxed);
        Ok(())
    }
}

impl Register for RwlockRegister {
    type Reader = RwlockReader;
    type Writer = RwlockWriter;

    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self> {
        RwlockRegister::new(initial, readers, max_size)
    }

    fn name(&self) -> &'static str {
        "RWLOCK"
    }

    fn reader(self: &Arc<Self>) -> Result<RwlockReader> {
        self.new_reader()
    }

    fn writer(self: &Arc<Self>) -> Result<RwlockWriter> {
        self.new_writer()
    }

    /// Read counts are folded in when reader handles are dropped.
    fn rmw_counters(&self) -> RmwCounters {
        RmwCounters {
            read_rmw: self.reads.load(Ordering::Relaxed) * RMW_PER_OP,
            write_rmw: self.writes.load(Ordering::Relaxed) * RMW_PER_OP,
        }
    }

    fn content_buffers(&self) -> usize {
        1
    }

    fn max_size(&self) -> usize {
        self.max_size
    }

    fn reader_capacity(&self) -> usize {
        self.n_readers
    }
}
