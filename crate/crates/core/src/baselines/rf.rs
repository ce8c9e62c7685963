//! Readers-Field (RF) register.
//!
//! One 64-bit status word: the low 6 bits hold the index of the buffer with
//! the latest value, the upper 58 bits are one presence bit per reader.
//!
//! * Read: `fetch_or` the reader's bit into status. The returned word names
//!   the buffer to read. Exactly one RMW per read, cached or not.
//! * Write: copy into a buffer that is neither current nor recorded in any
//!   reader's trace, then `swap` status to the new index with every presence
//!   bit cleared. Each bit set in the old word means that reader may still be
//!   reading the old buffer, so the writer records the old index in that
//!   reader's trace. Finding a free buffer walks all N traces.
//!
//! A reader reads either the current buffer or the buffer named by its trace
//! entry. With N traces, the current buffer and the writer's target, N+2
//! buffers always leave one free.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_utils::CachePadded;

use crate::error::{RegisterError, Result};
use crate::register::{
    check_max_size, check_payload, ReadHandle, Register, RmwCounters, WriteHandle,
};

pub const MAX_READERS: usize = 58;

const INDEX_BITS: u32 = 6;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;
const NO_TRACE: u8 = u8::MAX;

#[inline]
fn reader_bit(id: usize) -> u64 {
    1 << (INDEX_BITS as usize + id)
}

struct Buffer {
    size: usize,
    content: Box<[u8]>,
}

#[derive(Default)]
struct ReaderCell {
    read_rmw: AtomicU64,
}

pub struct RfRegister {
    status: CachePadded<AtomicU64>,
    buffers: Box<[CachePadded<UnsafeCell<Buffer>>]>,
    n_readers: usize,
    max_size: usize,
    next_reader: AtomicUsize,
    writer_taken: AtomicBool,
    readers: Box<[CachePadded<ReaderCell>]>,
    write_rmw: CachePadded<AtomicU64>,
}

// SAFETY: a buffer is written only by the writer, and only when it is
// neither current nor traced by any reader whose presence bit was observed
// by the swap that retired it. The swap and fetch_or both act on `status`, so
// they are totally ordered and carry acquire/release.
unsafe impl Sync for RfRegister {}
unsafe impl Send for RfRegister {}

impl RfRegister {
    pub fn new(initial: &[u8], n_readers: usize, max_size: usize) -> Result<Self> {
        if n_readers == 0 || n_readers > MAX_READERS {
            return Err(RegisterError::Capacity {
                kind: "RF",
                requested: n_readers,
                max: MAX_READERS,
            });
        }
        check_max_size(max_size)?;
        check_payload(initial.len(), max_size)?;
        let mut buffers: Box<[CachePadded<UnsafeCell<Buffer>>]> = (0..n_readers + 2)
            .map(|_| {
                CachePadded::new(UnsafeCell::new(Buffer {
                    size: 0,
                    content: vec![0u8; max_size].into_boxed_slice(),
                }))
            })
            .collect();
        let b0 = buffers[0].get_mut();
        b0.content[..initial.len()].copy_from_slice(initial);
        b0.size = initial.len();
        Ok(RfRegister {
            status: CachePadded::new(AtomicU64::new(0)),
            buffers,
            n_readers,
            max_size,
            next_reader: AtomicUsize::new(0),
            writer_taken: AtomicBool::new(false),
            readers: (0..n_readers)
                .map(|_| CachePadded::new(ReaderCell::default()))
                .collect(),
            write_rmw: CachePadded::new(AtomicU64::new(0)),
        })
    }

    pub fn current_index(&self) -> usize {
        (self.status.load(Ordering::Acquire) & INDEX_MASK) as usize
    }

    pub fn new_reader(self: &Arc<Self>) -> Result<RfReader> {
        let id = self.next_reader.fetch_add(1, Ordering::Relaxed);
        if id >= self.n_readers {
            self.next_reader.fetch_sub(1, Ordering::Relaxed);
            return Err(RegisterError::ReadersExhausted(self.n_readers));
        }
        Ok(RfReader {
            reg: Arc::clone(self),
            id,
            bit: reader_bit(id),
        })
    }

    pub fn new_writer(self: &Arc<Self>) -> Result<RfWriter> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(RegisterError::WriterTaken);
        }
        Ok(RfWriter {
            reg: Arc::clone(self),
            // Every reader may be reading the initial buffer.
            traces: vec![NO_TRACE; self.n_readers],
            current: 0,
            in_use: vec![false; self.n_readers + 2],
        })
    }
}

pub struct RfReader {
    reg: Arc<RfRegister>,
    id: usize,
    bit: u64,
}

impl RfReader {
    pub fn reader_id(&self) -> usize {
        self.id
    }
}

impl ReadHandle for RfReader {
    #[inline]
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T {
        let reg = &*self.reg;
        let status = reg.status.fetch_or(self.bit, Ordering::AcqRel);
        let cell = &reg.readers[self.id].read_rmw;
        cell.store(cell.load(Ordering::Relaxed) + 1, Ordering::Relaxed);
        let index = (status & INDEX_MASK) as usize;
        // SAFETY: the buffer is current, or traced to this reader by the
        // swap that retires it, until this reader's next fetch_or is seen.
        let b = unsafe { &*reg.buffers[index].get() };
        f(&b.content[..b.size])
    }
}

pub struct RfWriter {
    reg: Arc<RfRegister>,
    /// Last buffer each reader was observed on by a retiring swap.
    traces: Vec<u8>,
    current: usize,
    in_use: Vec<bool>,
}

impl RfWriter {
    /// O(N): marks every traced buffer, then takes the first unmarked one.
    fn find_free_buffer(&mut self) -> usize {
        self.in_use.iter_mut().for_each(|u| *u = false);
        self.in_use[self.current] = true;
        for &t in &self.traces {
            if t != NO_TRACE {
                self.in_use[t as usize] = true;
            }
        }
        self.in_use
            .iter()
            .position(|used| !used)
            .expect("N traces plus the current buffer cannot cover N+2 buffers")
    }

    pub fn write(&mut self, value: &[u8]) -> Result<()> {
        let reg = Arc::clone(&self.reg);
        check_payload(value.len(), reg.max_size)?;
        let index = self.find_free_buffer();
        // SAFETY: no reader can reach `index`; see `find_free_buffer`.
        unsafe {
            let b = &mut *reg.buffers[index].get();
            b.content[..value.len()].copy_from_slice(value);
            b.size = value.len();
        }
        let old = reg.status.swap(index as u64, Ordering::AcqRel);
        reg.write_rmw
            .store(reg.write_rmw.load(Ordering::Relaxed) + 1, Ordering::Relaxed);
        let old_index = (old & INDEX_MASK) as u8;
        debug_assert_eq!(old_index as usize, self.current);
        let mut present = old >> INDEX_BITS;
        while present != 0 {
            let id = present.trailing_zeros() as usize;
            self.traces[id] = old_index;
            present &= present - 1;
        }
        self.current = index;
        Ok(())
    }
}

impl WriteHandle for RfWriter {
    fn write(&mut self, value: &[u8]) -> Result<()> {
        RfWriter::write(self, value)
    }
}

impl Register for RfRegister {
    type Reader = RfReader;
    type Writer = RfWriter;

    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self> {
        RfRegister::new(initial, readers, max_size)
    }

    fn name(&self) -> &'static str {
        "RF"
    }

    fn reader(self: &Arc<Self>) -> Result<RfReader> {
        self.new_reader()
    }

    fn writer(self: &Arc<Self>) -> Result<RfWriter> {
        self.new_writer()
    }

    fn rmw_counters(&self) -> RmwCounters {
        RmwCounters {
            read_rmw: self
                .readers
                .iter()
                .map(|c| c.read_rmw.load(Ordering::Relaxed))
                .sum(),
            write_rmw: self.write_rmw.load(Ordering::Relaxed),
        }
    }

    fn content_buffers(&self) -> usize {
        self.buffers.len()
    }

    fn max_size(&self) -> usize {
        self.max_size
    }

    fn reader_capacity(&self) -> usize {
        self.n_readers
    }
}
