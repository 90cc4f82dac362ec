//! Criterion benchmarks for the datapath live in `benches/`.
