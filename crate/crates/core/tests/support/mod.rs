//! Shared helpers for the acceptance suite.

pub mod oracle;
