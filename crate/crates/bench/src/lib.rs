//! Criterion benchmarks for the `qbayes` kernels live in `benches/`.
