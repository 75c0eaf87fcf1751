//! Benchmarks for the design toolchain live under `benches/`.
