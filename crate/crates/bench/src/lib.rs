//! Criterion benchmarks for the `uds` library live in `benches/`.
