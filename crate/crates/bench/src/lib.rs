//! Benchmark-only crate; see `benches/secrecy.rs`.
