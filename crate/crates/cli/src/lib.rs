//! Command-line front end for threshold-linear-cap bailout rules: rule
//! cards, synthetic episodes, compliance audits, sweeps and allocation.

pub mod allocate;
pub mod audit;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod rulecard;
pub mod simulate;
pub mod svg;
pub mod sweep;

pub use cli::{run, Cli};
pub use error::{CliError, Result};
