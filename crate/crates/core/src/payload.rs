//! Versioned payloads.
//!
//! A versioned payload is a buffer filled with one 64-bit sequence number
//! repeated in little-endian order. If the length is not a multiple of 8 the
//! trailing partial word holds the low-order bytes of the sequence number.
//! A reader that observes bytes from two different writes sees at least two
//! words that disagree, so a single linear scan detects a torn snapshot.

use crate::error::{RegisterError, Result};

/// Smallest payload that can carry a sequence number.
pub const MIN_VERSIONED_SIZE: usize = 8;

const WORD: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionedPayload {
    seq: u64,
    body: Vec<u8>,
}

impl VersionedPayload {
    pub fn new(seq: u64, size: usize) -> Result<Self> {
        encode_versioned(seq, size)
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn size(&self) -> usize {
        self.body.len()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.body
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.body
    }
}

impl AsRef<[u8]> for VersionedPayload {
    fn as_ref(&self) -> &[u8] {
        &self.body
    }
}

/// Result of scanning a versioned buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    /// Value of the first word.
    pub seq: u64,
    /// Every word, including the trailing partial one, matches the first.
    pub intact: bool,
}

pub fn encode_versioned(seq: u64, size: usize) -> Result<VersionedPayload> {
    if size < MIN_VERSIONED_SIZE {
        return Err(RegisterError::PayloadSize {
            size,
            min: MIN_VERSIONED_SIZE,
            max: usize::MAX,
        });
    }
    let mut body = vec![0u8; size];
    encode_into(seq, &mut body);
    Ok(VersionedPayload { seq, body })
}

/// Fills `buf` with the encoding of `seq`. Used on hot paths that reuse one
/// buffer across writes.
pub fn encode_into(seq: u64, buf: &mut [u8]) {
    let word = seq.to_le_bytes();
    let mut chunks = buf.chunks_exact_mut(WORD);
    for chunk in &mut chunks {
        chunk.copy_from_slice(&word);
    }
    let tail = chunks.into_remainder();
    let n = tail.len();
    tail.copy_from_slice(&word[..n]);
}

/// Stamps `seq` into the words [`peek_versioned`] inspects: the first word,
/// the last full word and the trailing partial word. Cheaper than a full
/// encode when the rest of the buffer is filler.
pub fn stamp_versioned_ends(seq: u64, buf: &mut [u8]) {
    assert!(
        buf.len() >= MIN_VERSIONED_SIZE,
        "buffer shorter than one word"
    );
    let word = seq.to_le_bytes();
    let rem = buf.len() % WORD;
    let last_full = buf.len() - rem - WORD;
    buf[..WORD].copy_from_slice(&word);
    buf[last_full..last_full + WORD].copy_from_slice(&word);
    let n = buf.len();
    buf[n - rem..].copy_from_slice(&word[..rem]);
}

/// Scans a versioned buffer. Buffers shorter than one word decode as
/// `intact = false`.
pub fn decode_versioned(body: &[u8]) -> Decoded {
    if body.len() < MIN_VERSIONED_SIZE {
        return Decoded {
            seq: 0,
            intact: false,
        };
    }
    let first: [u8; WORD] = body[..WORD].try_into().expect("length checked");
    let seq = u64::from_le_bytes(first);
    let mut chunks = body.chunks_exact(WORD);
    // Fold instead of short-circuiting so the whole buffer is always read.
    let mut mismatch = 0u64;
    for chunk in &mut chunks {
        let w = u64::from_le_bytes(chunk.try_into().expect("exact chunk"));
        mismatch |= w ^ seq;
    }
    let tail = chunks.remainder();
    let intact = mismatch == 0 && tail == &first[..tail.len()];
    Decoded { seq, intact }
}

/// Reads the first and last word only. Catches a torn snapshot whose two
/// halves straddle the buffer, at constant cost.
pub fn peek_versioned(body: &[u8]) -> Decoded {
    if body.len() < MIN_VERSIONED_SIZE {
        return Decoded {
            seq: 0,
            intact: false,
        };
    }
    let first: [u8; WORD] = body[..WORD].try_into().expect("length checked");
    let seq = u64::from_le_bytes(first);
    let rem = body.len() % WORD;
    let last_full = body.len() - rem - WORD;
    let last = u64::from_le_bytes(body[last_full..last_full + WORD].try_into().unwrap());
    let tail = &body[body.len() - rem..];
    Decoded {
        seq,
        intact: last == seq && tail == &first[..rem],
    }
}
