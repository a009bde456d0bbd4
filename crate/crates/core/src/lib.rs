//! Multi-operation latent reasoning over symbolic derivations.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod heads;
pub mod manifest;
pub mod model;
pub mod training;

pub use error::{Error, Result};
