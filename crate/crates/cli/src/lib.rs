//! Command-line front end: configuration, presets and experiment drivers.

pub mod config;
pub mod error;
pub mod mesh;
pub mod presets;
pub mod run;
pub mod verify;
