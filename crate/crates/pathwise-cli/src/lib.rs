//! Command-line harness of the `pathwise` library.
//!
//! The `pathwise` binary wraps these modules. Each subcommand reads a JSON
//! [`config::Config`], applies command-line overrides, validates the result
//! and writes its outputs together with a `manifest.json` into the output
//! directory. Failures map to the exit codes in [`error`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod manifest;
pub mod runs;
pub mod suites;
pub mod sweep;
