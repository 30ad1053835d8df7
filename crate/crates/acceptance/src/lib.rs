//! Empty; the gate lives in `tests/acceptance.rs`.
