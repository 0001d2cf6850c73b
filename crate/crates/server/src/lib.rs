//! HTTP service and command-line front end of the archive search gateway.

pub mod api;
pub mod cli;
pub mod config;
pub mod state;

/// Collapse an error chain onto one line.
pub fn one_line(e: &anyhow::Error) -> String {
    format!("{e:#}")
        .split(['\n', '\r'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
