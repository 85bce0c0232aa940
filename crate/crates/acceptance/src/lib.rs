//! Intentionally empty; the gate lives in `tests/acceptance.rs`.
