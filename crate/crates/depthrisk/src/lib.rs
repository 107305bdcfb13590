//! Std companion to `depthrisk-core`: a rayon executor, JSON configs with
//! full validation, CSV point files and the report tables written by the
//! `depthrisk` binary.

pub mod config;
mod error;
pub mod exec;
pub mod io;
pub mod report;

pub use depthrisk_core as core;
pub use error::{Error, Result};
pub use exec::RayonExecutor;
