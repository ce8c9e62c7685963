use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::payload::{decode_versioned, encode_versioned};

fn reg(n: usize, max: usize) -> Arc<ArcRegister> {
    Arc::new(ArcRegister::new(b"initial!", n, max).unwrap())
}

#[test]
fn init_two_readers() {
    let r = reg(2, 4096);
    assert_eq!(r.slot_count(), 4);
    assert_eq!(r.current().raw(), 2);
    for i in 0..4 {
        assert_eq!(r.slot_counters(i), (0, 0));
    }
    assert_eq!(r.proposal(), None);
}

#[test]
fn init_smallest_n() {
    let r = reg(1, 64);
    assert_eq!(r.slot_count(), 3);
    assert_eq!(r.current().raw(), 1);
}

#[test]
fn init_rejects_bad_configuration() {
    assert!(matches!(
        ArcRegister::new(b"x", 0, 64),
        Err(RegisterError::Capacity { requested: 0, .. })
    ));
    assert!(matches!(
        ArcRegister::new(b"x", MAX_READERS + 1, 64),
        Err(RegisterError::Capacity { .. })
    ));
    assert!(matches!(
        ArcRegister::new(&[0u8; 65], 1, 64),
        Err(RegisterError::PayloadSize { size: 65, .. })
    ));
}

#[test]
fn handle_limits() {
    let r = reg(2, 64);
    let _a = r.new_reader().unwrap();
    let _b = r.new_reader().unwrap();
    assert_eq!(
        r.new_reader().err(),
        Some(RegisterError::ReadersExhausted(2))
    );
    let _w = r.new_writer().unwrap();
    assert_eq!(r.new_writer().err(), Some(RegisterError::WriterTaken));
}

#[test]
fn write_rejects_oversized_value() {
    let r = reg(1, 16);
    let mut w = r.new_writer().unwrap();
    assert!(w.write(&[0u8; 17]).is_err());
    assert!(w.write(&[]).is_err());
    assert_eq!(r.stats().writes, 0);
}

#[test]
fn fresh_reader_uses_no_rmw() {
    let r = reg(2, 4096);
    let mut rd = r.new_reader().unwrap();
    assert_eq!(rd.read(), b"initial!");
    assert_eq!(
        r.rmw_counters(),
        RmwCounters {
            read_rmw: 0,
            write_rmw: 0
        }
    );
    assert_eq!(r.current().raw(), 2);
}

#[test]
fn repeated_reads_are_cached() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut rd = r.new_reader().unwrap();
    w.write(b"one").unwrap();
    let first = rd.read().to_vec();
    let counter = r.current().counter();
    let second = rd.read().to_vec();
    assert_eq!(first, second);
    assert_eq!(r.current().counter(), counter);
    assert_eq!(r.stats().read_rmw, 2);
}

#[test]
fn first_write_freezes_initial_count() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    w.write(b"v1").unwrap();
    let s = w.last_slot();
    assert!((1..=3).contains(&s));
    assert_eq!(s, 1, "lowest-index tie-break");
    assert_eq!(r.current(), PackedCurrent::new(s, 0));
    assert_eq!(r.slot_counters(0), (2, 0));
    assert_eq!(r.rmw_counters().write_rmw, 1);
}

#[test]
fn slot_transition_read() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut rd = r.new_reader().unwrap();
    w.write(b"v1").unwrap();
    let s = w.last_slot();
    assert_eq!(rd.read(), b"v1");
    assert_eq!(r.slot_counters(0).1, 1);
    assert_eq!(r.current().counter(), 1);
    assert_eq!(rd.last_index(), s);
    assert_eq!(r.rmw_counters().read_rmw, 2);
    assert_eq!(r.stats().max_rmw_per_read, 2);
}

#[test]
fn write_between_r1_and_r4_binds_to_newest() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut rd = r.new_reader().unwrap();
    w.write(b"v1").unwrap();
    // R1 observes slot 1 while the reader still holds slot 0.
    assert_ne!(r.current().index(), rd.last_index());
    // The next write publishes before the reader's R4.
    w.write(b"v2").unwrap();
    let t = w.last_slot();
    rd.rebind();
    assert_eq!(rd.last_index(), t);
    assert_eq!(r.current(), PackedCurrent::new(t, 1));
    assert_eq!(r.slot_counters(0).1, 1);
    // Slot 1 retired with nobody bound to it.
    assert_eq!(r.slot_counters(1), (0, 0));
    assert_eq!(rd.read(), b"v2");
}

#[test]
fn write_after_r4_freezes_reader_unit() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut rd = r.new_reader().unwrap();
    w.write(b"v1").unwrap();
    let s = w.last_slot();
    assert_eq!(rd.read(), b"v1");
    w.write(b"v2").unwrap();
    assert_eq!(r.slot_counters(s), (1, 0));
    // Still bound to the retired slot: the view is stable.
    assert_eq!(rd.last_index(), s);
    assert_eq!(rd.read(), b"v2");
    assert_eq!(r.slot_counters(s), (1, 1));
}

#[test]
fn free_slot_scan_prefers_lowest_index() {
    let r = reg(3, 64);
    let w = r.new_writer().unwrap();
    assert_eq!(w.find_free_slot(), 1);
    let st = r.stats();
    assert_eq!(st.scans, 1);
    assert_eq!(st.max_scan, 2);
}

#[test]
fn valid_proposal_skips_scan() {
    let r = reg(3, 64);
    let w = r.new_writer().unwrap();
    r.set_proposal(Some(3));
    assert_eq!(w.find_free_slot(), 3);
    assert_eq!(r.stats().scans, 0);
    assert_eq!(r.stats().proposal_hits, 1);
    assert_eq!(r.proposal(), None);
}

#[test]
fn proposal_equal_to_last_slot_is_rejected() {
    let r = reg(3, 64);
    let w = r.new_writer().unwrap();
    r.set_proposal(Some(0));
    assert_eq!(w.find_free_slot(), 1);
    let st = r.stats();
    assert_eq!(st.proposal_rejects, 1);
    assert_eq!(st.scans, 1);
    assert_eq!(r.proposal(), None);
}

#[test]
fn busy_proposal_is_rejected() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    w.write(b"v1").unwrap();
    // Slot 0 froze with r_start = 2, r_end = 0.
    r.set_proposal(Some(0));
    assert_eq!(w.find_free_slot(), 2);
    assert_eq!(r.stats().proposal_rejects, 1);
}

#[test]
fn last_reader_out_posts_proposal() {
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut a = r.new_reader().unwrap();
    let mut b = r.new_reader().unwrap();
    w.write(b"v1").unwrap();
    a.read();
    // r_end(0) = 1, r_start(0) = 2
    assert_eq!(r.proposal(), None);
    b.read();
    assert_eq!(r.slot_counters(0), (2, 2));
    assert_eq!(r.proposal(), Some(0));
    w.write(b"v2").unwrap();
    assert_eq!(w.last_slot(), 0);
    assert_eq!(r.stats().proposal_hits, 1);
}

#[test]
fn competing_proposals_leave_a_valid_hint() {
    // Two readers release two different slots; whichever hint survives is
    // accepted only if it is still free.
    let r = reg(2, 64);
    let mut w = r.new_writer().unwrap();
    let mut a = r.new_reader().unwrap();
    let mut b = r.new_reader().unwrap();
    w.write(b"v1").unwrap(); // slot 1; slot 0 frozen at 2
    a.read(); // a -> 1
    b.read(); // b -> 1; slot 0 released, proposal 0
    w.write(b"v2").unwrap(); // takes 0; slot 1 frozen at 2
    a.read(); // releases 1 (1/2)
    b.read(); // releases 1 (2/2), proposal 1
    assert_eq!(r.proposal(), Some(1));
    w.write(b"v3").unwrap();
    assert_eq!(w.last_slot(), 1);
    assert_eq!(a.read(), b"v3");
    assert_eq!(b.read(), b"v3");
}

#[test]
fn never_selects_last_slot() {
    let r = reg(1, 64);
    let mut w = r.new_writer().unwrap();
    for i in 0..50u8 {
        let before = w.last_slot();
        let s = w.find_free_slot();
        assert_ne!(s, before);
        w.write(&[i]).unwrap();
    }
}

#[test]
fn reads_beyond_rf_capacity() {
    let r = Arc::new(
        ArcRegister::new(&encode_versioned(0, 64).unwrap().into_bytes(), 128, 64).unwrap(),
    );
    let mut readers: Vec<_> = (0..128).map(|_| r.new_reader().unwrap()).collect();
    let mut w = r.new_writer().unwrap();
    for seq in 1..=20u64 {
        w.write(encode_versioned(seq, 64).unwrap().as_bytes())
            .unwrap();
        for rd in readers.iter_mut().step_by(seq as usize % 5 + 1) {
            let d = decode_versioned(rd.read());
            assert!(d.intact);
            assert_eq!(d.seq, seq);
        }
    }
    let st = r.stats();
    assert_eq!(st.unreleased_over_bound, 0);
    assert!(st.max_scan <= 130);
}

#[test]
fn concurrent_smoke() {
    use std::sync::atomic::AtomicBool;
    let size = 256;
    let r = Arc::new(
        ArcRegister::new(&encode_versioned(0, size).unwrap().into_bytes(), 4, size).unwrap(),
    );
    let stop = Arc::new(AtomicBool::new(false));
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let mut rd = r.new_reader().unwrap();
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                let mut last = 0;
                let mut n = 0u64;
                while !stop.load(Ordering::Relaxed) || n < 1000 {
                    let d = decode_versioned(rd.read());
                    assert!(d.intact);
                    assert!(d.seq >= last);
                    last = d.seq;
                    n += 1;
                }
            })
        })
        .collect();
    let mut w = r.new_writer().unwrap();
    let mut buf = vec![0u8; size];
    for seq in 1..=20_000u64 {
        crate::payload::encode_into(seq, &mut buf);
        w.write(&buf).unwrap();
    }
    stop.store(true, Ordering::Relaxed);
    for t in readers {
        t.join().unwrap();
    }
    let st = r.stats();
    assert!(st.max_rmw_per_read <= 2);
    assert!(st.max_scan <= 6);
    assert_eq!(st.frozen_over_bound, 0);
    assert_eq!(st.unreleased_over_bound, 0);
}

#[derive(Debug, Clone)]
enum Step {
    Write,
    Read(usize),
}

fn steps(n: usize) -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec(
        prop_oneof![Just(Step::Write), (0..n).prop_map(Step::Read)],
        1..200,
    )
}

proptest! {
    // Sequential schedules: every read returns the latest write, and the
    // accounting bounds hold after every step.
    #[test]
    fn sequential_schedules_keep_invariants(n in 1usize..6, schedule in steps(6)) {
        let size = 24;
        let r = Arc::new(ArcRegister::new(&encode_versioned(0, size).unwrap().into_bytes(), n, size).unwrap());
        let mut w = r.new_writer().unwrap();
        let mut readers: Vec<_> = (0..n).map(|_| r.new_reader().unwrap()).collect();
        let mut seq = 0u64;
        for step in schedule {
            match step {
                Step::Write => {
                    seq += 1;
                    w.write(encode_versioned(seq, size).unwrap().as_bytes()).unwrap();
                }
                Step::Read(i) => {
                    let d = decode_versioned(readers[i % n].read());
                    prop_assert!(d.intact);
                    prop_assert_eq!(d.seq, seq);
                }
            }
            prop_assert!(r.current().counter() as usize <= n);
            let mut sum = 0i64;
            for i in 0..r.slot_count() as u32 {
                let (s, e) = r.slot_counters(i);
                sum += i64::from(s) - i64::from(e);
            }
            prop_assert!(sum <= n as i64);
        }
        let st = r.stats();
        prop_assert_eq!(st.unreleased_over_bound, 0);
        prop_assert!(st.max_scan as usize <= n + 2);
        prop_assert_eq!(st.write_rmw, seq);
    }
}
