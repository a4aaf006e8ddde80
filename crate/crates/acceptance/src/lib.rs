//! Acceptance criteria for `cca`; see `tests/acceptance.rs`.
