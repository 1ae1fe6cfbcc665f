//! IO, file formats, CLI commands and the HTTP service around
//! [`seatrack_core`].

pub mod api;
pub mod commands;
pub mod demo;
pub mod format;
pub mod live;
pub mod report;
pub mod store;

pub use seatrack_core as core;
