use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

/// A byte buffer stored as atomic words so concurrent copies are well
/// defined even when they race.
pub(crate) struct WordBuffer {
    size: AtomicUsize,
    words: Box<[AtomicU64]>,
}

impl WordBuffer {
    pub(crate) fn new(max_size: usize) -> Self {
        WordBuffer {
            size: AtomicUsize::new(0),
            words: (0..max_size.div_ceil(8))
                .map(|_| AtomicU64::new(0))
                .collect(),
        }
    }

    pub(crate) fn store(&self, value: &[u8]) {
        let mut chunks = value.chunks_exact(8);
        let mut i = 0;
        for c in &mut chunks {
            self.words[i].store(u64::from_le_bytes(c.try_into().unwrap()), Ordering::Relaxed);
            i += 1;
        }
        let rem = chunks.remainder();
        if !rem.is_empty() {
            let mut last = [0u8; 8];
            last[..rem.len()].copy_from_slice(rem);
            self.words[i].store(u64::from_le_bytes(last), Ordering::Relaxed);
        }
        self.size.store(value.len(), Ordering::Relaxed);
    }

    pub(crate) fn load_into(&self, out: &mut Vec<u8>) {
        let size = self.size.load(Ordering::Relaxed).min(self.words.len() * 8);
        out.clear();
        for w in &self.words[..size.div_ceil(8)] {
            out.extend_from_slice(&w.load(Ordering::Relaxed).to_le_bytes());
        }
        out.truncate(size);
    }
}
