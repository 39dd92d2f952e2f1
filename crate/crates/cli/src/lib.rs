//! Command-line front end and HTTP analysis service over `quantdesk-core`.

pub mod api;
pub mod cli;
