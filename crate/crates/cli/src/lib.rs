//! File-based front end for controllability scoring: score, certificate,
//! centrality, convergence and batch commands.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{
    cmd_batch, cmd_centrality, cmd_certify, cmd_convergence, cmd_fixtures, cmd_laplacian, cmd_score, Format,
    RunConfig,
};
pub use error::{CliError, CliResult};
