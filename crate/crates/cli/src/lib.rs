//! Command-line front end for the `tvscad` denoisers.

pub mod commands;
pub mod files;
pub mod scenario;
