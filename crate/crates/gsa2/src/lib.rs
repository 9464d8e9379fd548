//! Command-line layer over `gsa2-core`: configuration files, sample and
//! report formats, a thread-pool executor and the replication studies.

pub mod bench;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod report;
pub mod run;

pub use error::{AppError, Result};
