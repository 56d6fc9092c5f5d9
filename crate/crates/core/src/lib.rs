pub mod campaign;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod export;
pub mod fem;
pub mod filter;
pub mod optimizer;
pub mod sensitivity;
pub mod verify;

pub use error::{Error, Result};
