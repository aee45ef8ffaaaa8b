//! Data model, study-design validation, metrics and semantic analysis for
//! evaluating how recognisable urban areas are from generated video
//! sequences.
//!
//! The crate is `no_std` (with `alloc`); file formats, storage and the HTTP
//! service live in the `vu` crate.

#![no_std]

extern crate alloc;

pub mod design;
pub mod events;
pub mod metrics;
pub mod model;
pub mod semantic;
pub mod session;
