use std::fmt;

const COUNTER_BITS: u32 = 32;
const COUNTER_MASK: u64 = (1 << COUNTER_BITS) - 1;

/// Packs a slot index (upper half) and a presence count (lower half).
#[inline]
pub const fn pack(index: u32, counter: u32) -> u64 {
    ((index as u64) << COUNTER_BITS) | counter as u64
}

#[inline]
pub const fn unpack(raw: u64) -> (u32, u32) {
    ((raw >> COUNTER_BITS) as u32, (raw & COUNTER_MASK) as u32)
}

/// Value of the register's synchronization word: the index of the slot
/// holding the latest value and the number of readers that bound
/// themselves to it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PackedCurrent(pub u64);

impl PackedCurrent {
    #[inline]
    pub const fn new(index: u32, counter: u32) -> Self {
        PackedCurrent(pack(index, counter))
    }

    #[inline]
    pub const fn raw(self) -> u64 {
        self.0
    }

    #[inline]
    pub const fn index(self) -> u32 {
        (self.0 >> COUNTER_BITS) as u32
    }

    #[inline]
    pub const fn counter(self) -> u32 {
        (self.0 & COUNTER_MASK) as u32
    }
}

impl fmt::Debug for PackedCurrent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PackedCurrent")
            .field("index", &self.index())
            .field("counter", &self.counter())
            .finish()
    }
}
