//! Holds the full-scale acceptance test target (`tests/acceptance.rs`).
