//! Criterion benchmarks for the re-ranking pipeline. Run with
//! `cargo bench -p calibrank-bench`; the targets live under `benches/`.
