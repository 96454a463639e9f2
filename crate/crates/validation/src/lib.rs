//! End-to-end acceptance checks for `vimco`; everything lives in
//! `tests/acceptance.rs`.
