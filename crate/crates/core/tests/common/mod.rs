//! Shared helpers: a brute-force linearizability oracle and a generator of
//! small random single-writer histories.

#![allow(dead_code)]

use std::collections::HashSet;

use arcreg::verify::{History, OpKind, OpRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Decides atomicity by searching for a legal linearization: a total order
/// that respects real-time precedence in which every read returns the value
/// of the latest write before it (or the initial value).
///
/// Exponential; intended for histories of a handful of operations.
pub fn linearizable(h: &History) -> bool {
    let ops: Vec<&OpRecord> = h
        .records
        .iter()
        .filter(|r| r.kind == OpKind::Write || r.intact)
        .collect();
    assert!(ops.len() <= 16, "oracle is exponential in history length");
    // preds[i]: ops that must be placed before op i.
    let preds: Vec<u32> = ops
        .iter()
        .map(|a| {
            ops.iter()
                .enumerate()
                .filter(|(_, b)| b.precedes(a))
                .fold(0u32, |m, (j, _)| m | 1 << j)
        })
        .collect();
    let mut dead = HashSet::new();
    search(&ops, &preds, 0, h.initial_seq, &mut dead)
}

fn search(
    ops: &[&OpRecord],
    preds: &[u32],
    placed: u32,
    value: u64,
    dead: &mut HashSet<(u32, u64)>,
) -> bool {
    let full = (1u32 << ops.len()) - 1;
    if placed == full {
        return true;
    }
    if dead.contains(&(placed, value)) {
        return false;
    }
    for (i, op) in ops.iter().enumerate() {
        let bit = 1 << i;
        if placed & bit != 0 || preds[i] & !placed != 0 {
            continue;
        }
        let next = match op.kind {
            OpKind::Write => op.seq,
            OpKind::Read if op.seq == value => value,
            OpKind::Read => continue,
        };
        if search(ops, preds, placed | bit, next, dead) {
            return true;
        }
    }
    dead.insert((placed, value));
    false
}

/// A random history with one writer (thread 0) and up to three readers,
/// `max_ops` operations in total. Timestamps come from a small range so
/// that operations overlap often and precedence ties occur. Each read
/// returns a version that is either plausible for its interval or uniform
/// over all written versions.
pub fn random_history(rng: &mut ChaCha8Rng, max_ops: usize) -> History {
    let total = rng.random_range(1..=max_ops);
    let readers = rng.random_range(1..=3u32);
    let mut threads: Vec<u32> = (0..total).map(|_| rng.random_range(0..=readers)).collect();
    threads.sort_unstable();

    let mut records = Vec::with_capacity(total);
    let mut clock = vec![0u64; readers as usize + 1];
    let mut seq = 0;
    for &t in &threads {
        let inv = clock[t as usize] + rng.random_range(0..4);
        let resp = inv + rng.random_range(0..5);
        clock[t as usize] = resp + 1;
        if t == 0 {
            seq += 1;
            records.push(OpRecord::write(0, inv, resp, seq));
        } else {
            records.push(OpRecord::read(t, inv, resp, 0, true));
        }
    }
    let writes: Vec<OpRecord> = records
        .iter()
        .filter(|r| r.kind == OpKind::Write)
        .copied()
        .collect();
    for r in records.iter_mut().filter(|r| r.kind == OpKind::Read) {
        r.seq = if rng.random_bool(0.6) {
            // Latest write completed before the read, or any overlapping one.
            let floor = writes
                .iter()
                .filter(|w| w.precedes(r))
                .map(|w| w.seq)
                .max()
                .unwrap_or(0);
            let mut choices = vec![floor];
            choices.extend(
                writes
                    .iter()
                    .filter(|w| !w.precedes(r) && !r.precedes(w))
                    .map(|w| w.seq),
            );
            choices[rng.random_range(0..choices.len())]
        } else {
            rng.random_range(0..=seq)
        };
    }
    records.sort_by_key(|r| (r.invocation_ts, r.response_ts, r.thread));
    History::new(records)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
