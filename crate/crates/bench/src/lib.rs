//! Criterion benchmarks for `cainf`; see `benches/core.rs`.
