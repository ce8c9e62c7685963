//! Anonymous Readers Counting (ARC) register.
//!
//! A wait-free (1,N) multi-word atomic register over N+2 slots. A single
//! 64-bit word, `current`, packs the index of the slot holding the latest
//! value with an anonymous count of the readers bound to that slot. Readers
//! bind with one add-and-fetch on `current` and only when the value changed
//! since their previous read; a repeat read of an unchanged value executes
//! no read-modify-write instruction at all. The writer publishes with one
//! atomic exchange, which also returns how many readers bound to the retired
//! slot. That count is frozen into the slot's `r_start`, and readers leaving
//! the slot count themselves out in `r_end`. A slot is reusable once the two
//! agree.
//!
//! Statement labels (`I1`, `R1`..`R5`, `W1`..`W3`) mark the steps of the
//! init, read and write procedures.
//!
//! # Memory ordering
//!
//! * `W2` is a release exchange: the slot's content, size and reset counters
//!   are visible to any reader whose `R4` (acquire) observes the new index,
//!   or any later value in the RMW chain on `current`.
//! * `R1` is an acquire load. A reader taking the `R2` shortcut already
//!   synchronized with the slot's publication on its earlier `R4`.
//! * `R3` is an acq-rel increment. Its release half orders the reader's last
//!   access to the slot content before the writer's acquire load of `r_end`
//!   in `W1`, which precedes any overwrite.
//! * The `W3` freeze and proposal posts are release stores.
//!
//! # Liveness caveat
//!
//! A reader handle that stops reading keeps its presence unit on the slot it
//! last read, so that slot is never reclaimed. This costs one slot per idle
//! reader and is exactly what the N+2 bound budgets for.

mod packed;

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crossbeam_utils::CachePadded;

pub use packed::{pack, unpack, PackedCurrent};

use crate::error::{RegisterError, Result};
use crate::register::{
    check_max_size, check_payload, ReadHandle, Register, RmwCounters, WriteHandle,
};

/// Largest supported reader count. The presence counter lives in 32 bits and
/// must never carry into the index half.
pub const MAX_READERS: usize = (u32::MAX - 1) as usize;

const NO_PROPOSAL: u64 = u64::MAX;

struct SlotData {
    size: usize,
    content: Box<[u8]>,
}

struct Slot {
    r_start: AtomicU32,
    r_end: AtomicU32,
    data: UnsafeCell<SlotData>,
}

impl Slot {
    fn new(max_size: usize) -> Self {
        Slot {
            r_start: AtomicU32::new(0),
            r_end: AtomicU32::new(0),
            data: UnsafeCell::new(SlotData {
                size: 0,
                content: vec![0u8; max_size].into_boxed_slice(),
            }),
        }
    }
}

/// Per-reader instrumentation. Only the owning handle stores into it, so
/// updates are plain load/store pairs, not RMW.
#[derive(Default)]
struct ReaderCell {
    read_rmw: AtomicU64,
    max_rmw_per_read: AtomicU32,
    proposals: AtomicU64,
}

#[derive(Default)]
struct WriterCell {
    write_rmw: AtomicU64,
    writes: AtomicU64,
    max_scan: AtomicU64,
    scans: AtomicU64,
    proposal_hits: AtomicU64,
    proposal_rejects: AtomicU64,
    max_frozen: AtomicU32,
    frozen_over_bound: AtomicU64,
    max_unreleased: AtomicU64,
    unreleased_over_bound: AtomicU64,
    audits: AtomicU64,
}

#[inline]
fn bump(cell: &AtomicU64, by: u64) {
    cell.store(cell.load(Ordering::Relaxed) + by, Ordering::Relaxed);
}

#[inline]
fn raise(cell: &AtomicU64, v: u64) {
    if v > cell.load(Ordering::Relaxed) {
        cell.store(v, Ordering::Relaxed);
    }
}

/// Snapshot of the register's instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArcStats {
    pub read_rmw: u64,
    pub write_rmw: u64,
    pub writes: u64,
    /// Most RMW instructions executed by any single read.
    pub max_rmw_per_read: u32,
    /// Longest free-slot scan, in slots examined.
    pub max_scan: u64,
    /// Writes that fell back to a scan.
    pub scans: u64,
    pub proposals_posted: u64,
    pub proposal_hits: u64,
    pub proposal_rejects: u64,
    /// Largest presence count frozen into a retired slot.
    pub max_frozen: u32,
    /// Freezes whose count exceeded N.
    pub frozen_over_bound: u64,
    /// Largest write-start sum of `r_start - r_end` over all slots.
    pub max_unreleased: u64,
    /// Write-start audits where that sum exceeded N, or some `r_end`
    /// overtook its frozen `r_start`.
    pub unreleased_over_bound: u64,
    /// Write-start audits performed (debug builds only).
    pub audits: u64,
}

pub struct ArcRegister {
    current: CachePadded<AtomicU64>,
    proposal: CachePadded<AtomicU64>,
    slots: Box<[CachePadded<Slot>]>,
    n_readers: u32,
    max_size: usize,
    next_reader: AtomicUsize,
    writer_taken: AtomicBool,
    readers: Box<[CachePadded<ReaderCell>]>,
    writer: CachePadded<WriterCell>,
}

// SAFETY: slot data is written only by the single writer handle, and only
// while the slot is free (no reader holds a presence unit on it). Readers
// access slot data only between binding to the slot and releasing it. The
// orderings listed in the module docs make those accesses happen-before one
// another.
unsafe impl Sync for ArcRegister {}
unsafe impl Send for ArcRegister {}

impl ArcRegister {
    /// I1: slot 0 receives `initial`, every counter starts at zero and
    /// `current` starts at N, as if every reader had already bound to slot 0.
    pub fn new(initial: &[u8], n_readers: usize, max_size: usize) -> Result<Self> {
        if n_readers == 0 || n_readers > MAX_READERS {
            return Err(RegisterError::Capacity {
                kind: "ARC",
                requested: n_readers,
                max: MAX_READERS,
            });
        }
        check_max_size(max_size)?;
        check_payload(initial.len(), max_size)?;

        let mut slots: Box<[CachePadded<Slot>]> = (0..n_readers + 2)
            .map(|_| CachePadded::new(Slot::new(max_size)))
            .collect();
        {
            let d = slots[0].data.get_mut();
            d.content[..initial.len()].copy_from_slice(initial);
            d.size = initial.len();
        }
        let n = n_readers as u32;
        Ok(ArcRegister {
            current: CachePadded::new(AtomicU64::new(pack(0, n))), // I1
            proposal: CachePadded::new(AtomicU64::new(NO_PROPOSAL)),
            slots,
            n_readers: n,
            max_size,
            next_reader: AtomicUsize::new(0),
            writer_taken: AtomicBool::new(false),
            readers: (0..n_readers)
                .map(|_| CachePadded::new(ReaderCell::default()))
                .collect(),
            writer: CachePadded::new(WriterCell::default()),
        })
    }

    pub fn n_readers(&self) -> usize {
        self.n_readers as usize
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn current(&self) -> PackedCurrent {
        PackedCurrent(self.current.load(Ordering::Acquire))
    }

    /// `(r_start, r_end)` of a slot.
    pub fn slot_counters(&self, index: u32) -> (u32, u32) {
        let s = &self.slots[index as usize];
        (
            s.r_start.load(Ordering::Acquire),
            s.r_end.load(Ordering::Acquire),
        )
    }

    pub fn proposal(&self) -> Option<u32> {
        match self.proposal.load(Ordering::Acquire) {
            NO_PROPOSAL => None,
            p => Some(p as u32),
        }
    }

    pub fn stats(&self) -> ArcStats {
        let mut s = ArcStats::default();
        for r in self.readers.iter() {
            s.read_rmw += r.read_rmw.load(Ordering::Relaxed);
            s.max_rmw_per_read = s
                .max_rmw_per_read
                .max(r.max_rmw_per_read.load(Ordering::Relaxed));
            s.proposals_posted += r.proposals.load(Ordering::Relaxed);
        }
        let w = &self.writer;
        s.write_rmw = w.write_rmw.load(Ordering::Relaxed);
        s.writes = w.writes.load(Ordering::Relaxed);
        s.max_scan = w.max_scan.load(Ordering::Relaxed);
        s.scans = w.scans.load(Ordering::Relaxed);
        s.proposal_hits = w.proposal_hits.load(Ordering::Relaxed);
        s.proposal_rejects = w.proposal_rejects.load(Ordering::Relaxed);
        s.max_frozen = w.max_frozen.load(Ordering::Relaxed);
        s.frozen_over_bound = w.frozen_over_bound.load(Ordering::Relaxed);
        s.max_unreleased = w.max_unreleased.load(Ordering::Relaxed);
        s.unreleased_over_bound = w.unreleased_over_bound.load(Ordering::Relaxed);
        s.audits = w.audits.load(Ordering::Relaxed);
        s
    }

    pub fn new_reader(self: &Arc<Self>) -> Result<ArcReader> {
        let id = self.next_reader.fetch_add(1, Ordering::Relaxed);
        if id >= self.n_readers() {
            self.next_reader.fetch_sub(1, Ordering::Relaxed);
            return Err(RegisterError::ReadersExhausted(self.n_readers()));
        }
        Ok(ArcReader {
            reg: Arc::clone(self),
            last_index: 0,
            id,
        })
    }

    pub fn new_writer(self: &Arc<Self>) -> Result<ArcWriter> {
        if self.writer_taken.swap(true, Ordering::AcqRel) {
            return Err(RegisterError::WriterTaken);
        }
        Ok(ArcWriter {
            reg: Arc::clone(self),
            last_slot: 0,
        })
    }

    #[inline]
    fn slot_is_free(&self, index: u32) -> bool {
        let s = &self.slots[index as usize];
        s.r_start.load(Ordering::Relaxed) == s.r_end.load(Ordering::Acquire)
    }

    #[cfg(test)]
    fn set_proposal(&self, index: Option<u32>) {
        self.proposal
            .store(index.map_or(NO_PROPOSAL, u64::from), Ordering::Release);
    }
}

/// Reader-side state. `last_index` names the slot this reader holds its
/// presence unit on.
pub struct ArcReader {
    reg: Arc<ArcRegister>,
    last_index: u32,
    id: usize,
}

impl ArcReader {
    pub fn reader_id(&self) -> usize {
        self.id
    }

    pub fn last_index(&self) -> u32 {
        self.last_index
    }

    pub fn register(&self) -> &Arc<ArcRegister> {
        &self.reg
    }

    /// Returns the register value. The view stays valid, and the slot stays
    /// reserved, until this handle's next read.
    #[inline]
    pub fn read(&mut self) -> &[u8] {
        // R1
        let index = PackedCurrent(self.reg.current.load(Ordering::Acquire)).index();
        if index != self.last_index {
            self.rebind();
        }
        let reg = &*self.reg;
        // R2 (or the tail after R5)
        let slot = &reg.slots[self.last_index as usize];
        // SAFETY: this reader holds a presence unit on `last_index`, so the
        // writer will not select the slot until the unit is released.
        unsafe {
            let d = &*slot.data.get();
            &d.content[..d.size]
        }
    }

    #[cold]
    fn rebind(&mut self) {
        let reg = &*self.reg;
        let released = self.last_index;
        let mut rmw = 0u32;
        // R3
        let ended = reg.slots[released as usize]
            .r_end
            .fetch_add(1, Ordering::AcqRel)
            .wrapping_add(1);
        rmw += 1;
        self.propose_free_slot(released, ended);
        // R4
        let tmp = reg.current.fetch_add(1, Ordering::AcqRel) + 1;
        rmw += 1;
        // R5
        let bound = PackedCurrent(tmp);
        debug_assert!(
            bound.counter() <= reg.n_readers,
            "presence counter overflow: {bound:?}"
        );
        self.last_index = bound.index();

        let cell = &reg.readers[self.id];
        bump(&cell.read_rmw, u64::from(rmw));
        if rmw > cell.max_rmw_per_read.load(Ordering::Relaxed) {
            cell.max_rmw_per_read.store(rmw, Ordering::Relaxed);
        }
    }

    /// Posts `released` as a free-slot hint when this reader's release made
    /// the slot's `r_end` reach its frozen `r_start`. `ended` is the value
    /// `r_end` took on that release.
    pub fn propose_free_slot(&self, released: u32, ended: u32) {
        let reg = &*self.reg;
        if ended == reg.slots[released as usize].r_start.load(Ordering::Acquire) {
            reg.proposal.store(u64::from(released), Ordering::Release);
            bump(&reg.readers[self.id].proposals, 1);
        }
    }
}

impl ReadHandle for ArcReader {
    #[inline]
    fn read_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> T {
        f(self.read())
    }
}

pub struct ArcWriter {
    reg: Arc<ArcRegister>,
    last_slot: u32,
}

impl ArcWriter {
    pub fn last_slot(&self) -> u32 {
        self.last_slot
    }

    pub fn register(&self) -> &Arc<ArcRegister> {
        &self.reg
    }

    pub fn write(&mut self, value: &[u8]) -> Result<()> {
        let reg = &*self.reg;
        check_payload(value.len(), reg.max_size)?;
        debug_assert_eq!(reg.current().index(), self.last_slot);
        #[cfg(debug_assertions)]
        self.audit_unreleased();

        // W1
        let index = self.find_free_slot();
        let slot = &reg.slots[index as usize];
        // SAFETY: `index` is free and differs from the published slot, so no
        // reader can reach it until the exchange below.
        unsafe {
            let d = &mut *slot.data.get();
            d.content[..value.len()].copy_from_slice(value);
            d.size = value.len();
        }
        slot.r_start.store(0, Ordering::Relaxed);
        slot.r_end.store(0, Ordering::Relaxed);
        // W2
        let old = PackedCurrent(reg.current.swap(pack(index, 0), Ordering::AcqRel));
        // W3
        let (old_slot, frozen) = (old.index(), old.counter());
        debug_assert_eq!(old_slot, self.last_slot);
        reg.slots[old_slot as usize]
            .r_start
            .store(frozen, Ordering::Release);
        self.last_slot = index;

        let w = &reg.writer;
        bump(&w.write_rmw, 1);
        bump(&w.writes, 1);
        if frozen > w.max_frozen.load(Ordering::Relaxed) {
            w.max_frozen.store(frozen, Ordering::Relaxed);
        }
        if frozen > reg.n_readers {
            bump(&w.frozen_over_bound, 1);
        }
        debug_assert!(frozen <= reg.n_readers, "frozen count {frozen} exceeds N");
        Ok(())
    }

    /// Returns a slot other than `last_slot` whose `r_start` equals its
    /// `r_end`. Tries the readers' proposal first, then scans from slot 0.
    pub fn find_free_slot(&self) -> u32 {
        let reg = &*self.reg;
        let w = &reg.writer;
        let proposed = reg.proposal.load(Ordering::Acquire);
        if proposed != NO_PROPOSAL {
            reg.proposal.store(NO_PROPOSAL, Ordering::Relaxed);
            let p = proposed as u32;
            // The writer may already have reused the slot since it was posted.
            if p != self.last_slot && reg.slot_is_free(p) {
                bump(&w.proposal_hits, 1);
                return p;
            }
            bump(&w.proposal_rejects, 1);
        }

        bump(&w.scans, 1);
        for (i, _) in reg.slots.iter().enumerate() {
            let i = i as u32;
            if i != self.last_slot && reg.slot_is_free(i) {
                raise(&w.max_scan, u64::from(i) + 1);
                return i;
            }
        }
        // At most N slots can be held by readers, plus last_slot; at least
        // one of the N+2 must be free.
        eprintln!(
            "arc: no free slot among {} (last_slot {}); reader accounting is broken",
            reg.slots.len(),
            self.last_slot
        );
        std::process::abort();
    }

    /// Checks that at most N presence units are outstanding across all slots
    /// and that no `r_end` overtook its frozen `r_start`.
    #[cfg(debug_assertions)]
    fn audit_unreleased(&self) {
        let reg = &*self.reg;
        let w = &reg.writer;
        let mut unreleased: i64 = 0;
        let mut overtaken = false;
        for s in reg.slots.iter() {
            let start = s.r_start.load(Ordering::Relaxed);
            let end = s.r_end.load(Ordering::Acquire);
            overtaken |= end > start;
            unreleased += i64::from(start) - i64::from(end);
        }
        bump(&w.audits, 1);
        raise(&w.max_unreleased, unreleased.max(0) as u64);
        if overtaken || unreleased > i64::from(reg.n_readers) {
            bump(&w.unreleased_over_bound, 1);
        }
        debug_assert!(!overtaken, "r_end overtook r_start");
        debug_assert!(
            unreleased <= i64::from(reg.n_readers),
            "{unreleased} presence units outstanding with N = {}",
            reg.n_readers
        );
    }
}

impl WriteHandle for ArcWriter {
    fn write(&mut self, value: &[u8]) -> Result<()> {
        ArcWriter::write(self, value)
    }
}

impl Register for ArcRegister {
    type Reader = ArcReader;
    type Writer = ArcWriter;

    fn build(initial: &[u8], readers: usize, max_size: usize) -> Result<Self> {
        ArcRegister::new(initial, readers, max_size)
    }

    fn name(&self) -> &'static str {
        "ARC"
    }

    fn reader(self: &Arc<Self>) -> Result<ArcReader> {
        self.new_reader()
    }

    fn writer(self: &Arc<Self>) -> Result<ArcWriter> {
        self.new_writer()
    }

    fn rmw_counters(&self) -> RmwCounters {
        let s = self.stats();
        RmwCounters {
            read_rmw: s.read_rmw,
            write_rmw: s.write_rmw,
        }
    }

    fn content_buffers(&self) -> usize {
        self.slots.len()
    }

    fn max_size(&self) -> usize {
        self.max_size
    }

    fn reader_capacity(&self) -> usize {
        self.n_readers()
    }
}

#[cfg(test)]
mod tests;
