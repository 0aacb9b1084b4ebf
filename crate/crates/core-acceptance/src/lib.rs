//! Holds no code: the criteria live in `tests/acceptance.rs`.
