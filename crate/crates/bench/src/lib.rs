//! Benchmark crate; see benches/exponents.rs.
