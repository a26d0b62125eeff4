//! Model-file I/O and report emission for the `subcause` binary.

pub mod model;
pub mod report;
