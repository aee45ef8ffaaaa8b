//! Storage, file formats, reports, fixture generation and the HTTP service
//! for urban identity evaluation studies.

pub mod fixture;
pub mod formats;
pub mod ingest;
pub mod platform;
pub mod report;
pub mod service;
pub mod store;
