//! Criterion micro-benchmarks for the register implementations; see
//! `benches/registers.rs`. Run with `cargo bench -p arcreg-bench`.
