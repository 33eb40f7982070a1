//! Acceptance checks only; see `tests/acceptance.rs`.
//!
//! Kept in its own package so that `cargo test --workspace` runs it after the
//! unit and property tests of the other crates.
