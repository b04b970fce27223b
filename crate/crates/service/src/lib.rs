//! HTTP service and command-line front end for flowbench.
//!
//! [`routes`] documents the HTTP surface, [`cli`] the subcommands and exit
//! codes.

pub mod cli;
pub mod config;
pub mod error;
pub mod routes;
pub mod server;
pub mod sessions;
pub mod store;

pub use config::ServiceConfig;
pub use error::ApiError;
pub use server::BackgroundServer;
