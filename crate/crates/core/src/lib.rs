pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod factors;
pub mod forecast;
pub mod app;
pub mod backtest;
pub mod conditionals;
pub mod config;
pub mod latent_cov;
pub mod models;
pub mod prior;
pub mod sampler;
pub mod seed;
pub mod simulate;

pub use error::{Error, Result};
