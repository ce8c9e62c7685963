//! Peterson's (1,N) concurrent-reading-while-writing register.
//!
//! Built from single-word loads and stores only. Shared state: two value
//! buffers `buff1`/`buff2`, one copy buffer per reader, the writer's `wflag`
//! and `switch` bits, and per-reader `reading`/`writing` handshake bits.
//!
//! Writer:
//! 1. raise `wflag`, write `buff1`, toggle `switch`, lower `wflag`;
//! 2. for each reader whose `reading` differs from `writing`, fill its copy
//!    buffer and then set `writing` equal to `reading`;
//! 3. write `buff2`.
//!
//! Reader:
//! 1. set `reading` to the negation of `writing`;
//! 2. sample `switch`/`wflag`, copy `buff1`, sample them again, copy `buff2`;
//! 3. if `writing` now equals `reading` the writer handed over a copy; else
//!    if a write overlapped the `buff1` copy take `buff2`; else take `buff1`.
//!
//! Every read copies the value twice. Buffer words are accessed with relaxed
//! atomics and every protocol step is separated by a sequentially consistent
//! fence, which the algorithm needs on anything weaker than sequential
//! consistency.

use std::sync::atomic::{fence, AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_utils::CachePadded;

use crate::error::{RegisterError, Result};
use crate::register::{
    check_max_size, check_payload, ReadHandle, Register, RmwCounters, WriteHandle,
};
use crate::words::WordBuffer;

const SC: Ordering = Ordering::SeqCst;

struct Handshake {
    reading: AtomicBool,
    writing: AtomicBool,
}

pub struct PetersonRegister {
    wflag: CachePadded<AtomicBool>,
    switch: CachePadded<AtomicBool>,
    buff1: CachePadded<WordBuffer>,
    buff2: CachePadded<WordBuffer>,
    copies: Box<[CachePadded<WordBuffer>]>,
    flags: Box<[CachePadded<Handshake>]>,
    n_readers: usize,
    max_size: usize,
    next_reader: AtomicUsize,
    writer_taken: AtomicBool,
}

impl PetersonRegister {
    pub fn new(initial: &[u8], n_readers: usize, max_size: usize) -> Result<Self> {
        if n_readers == 0 || n_readers > u32::MAX as usize {
            return Err(RegisterError::Capacity {
                kind: "PETERSON",
                requested: n_readers,
                max: u32::MAX as usize,
            });
        }
        check_max_size(max_size)?;
        check_payload(initial.len(), max_size)?;
        let reg = PetersonRegister {
            wflag: CachePadded::new(AtomicBool::new(false)),
            switch: CachePadded::new(AtomicBool::new(false)),
            buff1: CachePadded::new(WordBuffer::new(max_size)),
            buff2: CachePadded::new(WordBuffer::new(max_size)),
            copies: (0..n_readers)
                .map(|_| CachePadded::new(WordBuffer::new(max_size)))
                .collect(),
            flags: (0..n_readers)
                .map(|_| {
                    CachePadded::new(Handshake {
                        reading: AtomicBool::new(false),
                        writing: AtomicBool::new(false),
                    })
                })
                .collect(),
            n_readers,
            max_size,
            next_reader: AtomicUsize::new(0),
            writer_taken: AtomicBool::new(false),
        };
        reg.buff1.store(initial);
        reg.buff2.store(initial);
        Ok(reg)
    }

    pub fn new_reader(self: &Arc<Self>) -> Result<PetersonReader> {
        let id = self.next_reader.fetch_add(1, Ordering::Relaxed);
        if id >= self.n_readers {
            self.next_reader.fetch_sub(1, Ordering::Relaxed);
            return Err(RegisterError::ReadersExhausted(self.n_readers));
        }
        Ok(PetersonReader {
            reg: Arc::clone(self),
            id,
            first: Vec::with_capacity(self.max_size),
            second: Vec::with_capacity(self.max_size),
        })
    }

    pub fn new_writer(self: &Arc<Self>) -> Result<PetersonWriter> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(RegisterError::WriterTaken);
        }
        Ok(PetersonWriter {
            reg: Arc::clone(self),
        })
    }
}

pub struct PetersonReader {
    reg: Arc<PetersonRegister>,
    id: usize,
    first: Vec<u8>,
    second: Vec<u8>,
}

impl PetersonReader {
    /// Returns a copy of the register value held in this handle.
    pub fn read(&mut self) -> &[u8] {
        let reg = &*self.reg;
        let hs = &reg.flags[self.id];
        let reading = !hs.writing.load(SC);
        hs.reading.store(reading, SC);

        let s1 = reg.switch.load(SC);
        let f1 = reg.wflag.load(SC);
        fence(SC);
        reg.buff1.load_into(&mut self.first);
        fence(SC);
        let s2 = reg.switch.load(SC);
        let f2 = reg.wflag.load(SC);
        fence(SC);
        reg.buff2.load_into(&mut self.second);
        fence(SC);

        if hs.writing.load(SC) == reading {
            fence(SC);
            reg.copies[self.id].load_into(&mut self.first);
            &self.first
        } else if s1 != s2 || f1 || f2 {
            &self.second
        } else {
            &self.first
        }
    }
}

impl ReadHandle for PetersonReader {
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T {
        f(self.read())
    }
}

pub struct PetersonWriter {
    reg: Arc<PetersonRegister>,
}

impl PetersonWriter {
    pub fn write(&mut self, value: &[u8]) -> Result<()> {
        let reg = &*self.reg;
        check_payload(value.len(), reg.max_size)?;
        reg.wflag.store(true, SC);
        fence(SC);
        reg.buff1.store(value);
        fence(SC);
        let s = reg.switch.load(Ordering::Relaxed);
        reg.switch.store(!s, SC);
        reg.wflag.store(false, SC);

        for (copy, hs) in reg.copies.iter().zip(reg.flags.iter()) {
            let reading = hs.reading.load(SC);
            if reading != hs.writing.load(Ordering::Relaxed) {
                fence(SC);
                copy.store(value);
                fence(SC);
                hs.writing.store(reading, SC);
            }
        }

        fence(SC);
        reg.buff2.store(value);
        fence(SC);
        Ok(())
    }
}

impl WriteHandle for PetersonWriter {
    fn write(&mut self, value: &[u8]) -> Result<()> {
        PetersonWriter::write(self, value)
    }
}

impl Register for PetersonRegister {
    type Reader = PetersonReader;
    type Writer = PetersonWriter;

    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self> {
        PetersonRegister::new(initial, readers, max_size)
    }

    fn name(&self) -> &'static str {
        "PETERSON"
    }

    fn reader(self: &Arc<Self>) -> Result<PetersonReader> {
        self.new_reader()
    }

    fn writer(self: &Arc<Self>) -> Result<PetersonWriter> {
        self.new_writer()
    }

    /// Loads, stores and fences only.
    fn rmw_counters(&self) -> RmwCounters {
        RmwCounters::default()
    }

    /// Two shared buffers plus one copy buffer per reader.
    fn content_buffers(&self) -> usize {
        2 + self.copies.len()
    }

    fn max_size(&self) -> usize {
        self.max_size
    }

    fn reader_capacity(&self) -> usize {
        self.n_readers
    }
}
