pub mod acceptance;
pub mod config;
pub mod detection;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod noise;
pub mod oracle;
pub mod oscillator;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub use fock::C64;
