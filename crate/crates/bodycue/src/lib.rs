//! File formats, corpus layout, model persistence and the command line for
//! `bodycue-core`.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod model;

pub use commands::run;
pub use config::{Command, RunConfig};
pub use error::{Error, Result};
pub use manifest::Manifest;
