//! Criterion benchmarks for the `bidisc` kernels live in `benches/`.
