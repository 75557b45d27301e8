pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod index;
pub mod service;

pub use commands::run_command;
pub use error::AppError;
