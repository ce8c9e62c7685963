//! A deliberately broken ARC variant used to show that the stress harness
//! and history checker catch real bugs.
//!
//! Identical to [`ArcRegister`](crate::ArcRegister) except that the writer
//! publishes the new slot (the exchange on `current`) *before* copying the
//! value into it, so readers can bind to a half-written slot. Slot contents
//! are atomic words, which keeps the resulting races well defined.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_utils::CachePadded;

use crate::arc::{pack, PackedCurrent, MAX_READERS};
use crate::error::{RegisterError, Result};
use crate::register::{
    check_max_size, check_payload, ReadHandle, Register, RmwCounters, WriteHandle,
};
use crate::words::WordBuffer;

struct Slot {
    r_start: AtomicU32,
    r_end: AtomicU32,
    content: WordBuffer,
}

pub struct EarlyPublishArc {
    current: CachePadded<AtomicU64>,
    slots: Box<[CachePadded<Slot>]>,
    n_readers: usize,
    max_size: usize,
    next_reader: AtomicUsize,
    writer_taken: AtomicBool,
}

impl Register for EarlyPublishArc {
    type Reader = EarlyPublishReader;
    type Writer = EarlyPublishWriter;

    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self> {
        if readers == 0 || readers > MAX_READERS {
            return Err(RegisterError::Capacity {
                kind: "ARC-MUTANT",
                requested: readers,
                max: MAX_READERS,
            });
        }
        check_max_size(max_size)?;
        check_payload(initial.len(), max_size)?;
        let slots: Box<[CachePadded<Slot>]> = (0..readers + 2)
            .map(|_| {
                CachePadded::new(Slot {
                    r_start: AtomicU32::new(0),
                    r_end: AtomicU32::new(0),
                    content: WordBuffer::new(max_size),
                })
            })
            .collect();
        slots[0].content.store(initial);
        Ok(EarlyPublishArc {
            current: CachePadded::new(AtomicU64::new(pack(0, readers as u32))),
            slots,
            n_readers: readers,
            max_size,
            next_reader: AtomicUsize::new(0),
            writer_taken: AtomicBool::new(false),
        })
    }

    fn name(&self) -> &'static str {
        "ARC-MUTANT"
    }

    fn reader(self: &Arc<Self>) -> Result<EarlyPublishReader> {
        if self.next_reader.fetch_add(1, Ordering::Relaxed) >= self.n_readers {
            return Err(RegisterError::ReadersExhausted(self.n_readers));
        }
        Ok(EarlyPublishReader {
            reg: Arc::clone(self),
            last_index: 0,
            buf: Vec::with_capacity(self.max_size),
        })
    }

    fn writer(self: &Arc<Self>) -> Result<EarlyPublishWriter> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(RegisterError::WriterTaken);
        }
        Ok(EarlyPublishWriter {
            reg: Arc::clone(self),
            last_slot: 0,
        })
    }

    fn rmw_counters(&self) -> RmwCounters {
        RmwCounters::default()
    }

    fn content_buffers(&self) -> usize {
        self.slots.len()
    }

    fn max_size(&self) -> usize {
        self.max_size
    }

    fn reader_capacity(&self) -> usize {
        self.n_readers
    }
}

pub struct EarlyPublishReader {
    reg: Arc<EarlyPublishArc>,
    last_index: u32,
    buf: Vec<u8>,
}

impl ReadHandle for EarlyPublishReader {
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T {
        let reg = &*self.reg;
        let index = PackedCurrent(reg.current.load(Ordering::Acquire)).index();
        if index != self.last_index {
            reg.slots[self.last_index as usize]
                .r_end
                .fetch_add(1, Ordering::AcqRel);
            let tmp = reg.current.fetch_add(1, Ordering::AcqRel) + 1;
            self.last_index = PackedCurrent(tmp).index();
        }
        reg.slots[self.last_index as usize]
            .content
            .load_into(&mut self.buf);
        f(&self.buf)
    }
}

pub struct EarlyPublishWriter {
    reg: Arc<EarlyPublishArc>,
    last_slot: u32,
}

impl WriteHandle for EarlyPublishWriter {
    fn write(&mut self, value: &[u8]) -> Result<()> {
        let reg = &*self.reg;
        check_payload(value.len(), reg.max_size)?;
        let index = (0..reg.slots.len() as u32)
            .find(|&i| {
                let s = &reg.slots[i as usize];
                i != self.last_slot
                    && s.r_start.load(Ordering::Relaxed) == s.r_end.load(Ordering::Acquire)
            })
            .expect("free slot");
        let slot = &reg.slots[index as usize];
        slot.r_start.store(0, Ordering::Relaxed);
        slot.r_end.store(0, Ordering::Relaxed);
        // Bug: publish first, copy afterwards.
        let old = PackedCurrent(reg.current.swap(pack(index, 0), Ordering::AcqRel));
        slot.content.store(value);
        reg.slots[old.index() as usize]
            .r_start
            .store(old.counter(), Ordering::Release);
        self.last_slot = index;
        Ok(())
    }
}
